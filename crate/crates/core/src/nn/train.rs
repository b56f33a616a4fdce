use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{HeadMode, SplitNetwork};
use crate::error::{Error, Result};
use crate::seed::{self, derive_seed};

const INIT: u64 = 1;
const SHUFFLE: u64 = 2;

fn default_true() -> bool {
    true
}

fn default_head_mode() -> HeadMode {
    HeadMode::Shared
}

/// Optimisation and architecture settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub total_hidden: usize,
    /// Defaults to [`HeadMode::Shared`]: averaging per-branch probabilities
    /// lets uninformative branches drag the fused prediction toward the
    /// class prior.
    #[serde(default = "default_head_mode")]
    pub head_mode: HeadMode,
    /// Z-score features with training statistics (missing cells become 0).
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Regression only: fit on standardized targets, predict in original units.
    #[serde(default = "default_true")]
    pub standardize_target: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 100,
            epochs: 1000,
            seed: 0,
            total_hidden: 50,
            head_mode: HeadMode::Shared,
            normalize: true,
            standardize_target: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.total_hidden == 0 {
            return Err(Error::InvalidConfig("total_hidden must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.clone() }
    }

    /// Seed for weight initialisation.
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, &[INIT])
    }
}

/// Runs `config.epochs` epochs of minibatch SGD over `x`/`targets`.
///
/// Each epoch reshuffles the rows with a generator seeded from
/// `config.seed`; the final partial batch is kept. `after_epoch` receives
/// the epoch index, the network and the mean batch loss.
pub fn fit<F>(
    net: &mut SplitNetwork,
    x: &Array2<f64>,
    targets: &[f64],
    config: &TrainConfig,
    mut after_epoch: F,
) -> Result<()>
where
    F: FnMut(usize, &SplitNetwork, f64),
{
    config.validate()?;
    let n = x.nrows();
    if n == 0 || targets.len() != n {
        return Err(Error::shape(format!("{n} targets on a non-empty batch"), targets.len()));
    }
    let mut rng = seed::rng(derive_seed(config.seed, &[SHUFFLE]));
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_targets = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let xb = x.select(Axis(0), chunk);
            batch_targets.clear();
            batch_targets.extend(chunk.iter().map(|&i| targets[i]));
            match net.backward_and_step(xb.view(), &batch_targets, config.learning_rate)? {
                Ok(loss) => loss_sum += loss,
                Err(what) => {
                    return Err(Error::Divergence {
                        epoch,
                        batch: b,
                        what: what.describe(),
                    })
                }
            }
            batches += 1;
        }
        after_epoch(epoch, net, loss_sum / batches as f64);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::FeatureClustering;
    use crate::data::Task;
    use crate::nn::{build_split_network, Activation, NetworkOptions};
    use rand::{Rng, SeedableRng};

    fn data(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        let y = x.rows().into_iter().map(|r| 2.0 * r[0] - r[2] + 0.5 * r[3]).collect();
        (x, y)
    }

    #[test]
    fn determinism_is_bitwise() {
        let (x, y) = data(37, 1);
        let c = FeatureClustering::from_labels(&[0, 1, 0, 1], 0.5);
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 8,
            seed: 4,
            total_hidden: 6,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = build_split_network(&c, Task::Regression, 6, cfg.init_seed()).unwrap();
            let mut losses = Vec::new();
            fit(&mut net, &x, &y, &cfg, |_, _, l| losses.push(l)).unwrap();
            (
                net.params_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                losses,
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_epochs_leave_network_untouched() {
        let (x, y) = data(10, 2);
        let c = FeatureClustering::single(4);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let mut net = build_split_network(&c, Task::Regression, 5, 1).unwrap();
        let before = net.clone();
        fit(&mut net, &x, &y, &cfg, |_, _, _| unreachable!()).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn small_step_on_smooth_network_decreases_loss() {
        for seed in 0..20 {
            let (x, y) = data(16, 100 + seed);
            let c = FeatureClustering::from_labels(&[0, 0, 1, 1], 0.5);
            let mut net = SplitNetwork::build(
                &c,
                Task::Regression,
                6,
                seed,
                NetworkOptions {
                    hidden_activation: Activation::Identity,
                    ..NetworkOptions::default()
                },
            )
            .unwrap();
            let before = net.loss(x.view(), &y).unwrap();
            net.backward_and_step(x.view(), &y, 1e-4).unwrap().unwrap();
            let after = net.loss(x.view(), &y).unwrap();
            assert!(after < before, "seed {seed}: {after} >= {before}");
        }
    }

    #[test]
    fn learns_a_linear_target() {
        let (x, y) = data(200, 3);
        let c = FeatureClustering::single(4);
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 20,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let mut net = build_split_network(&c, Task::Regression, 10, cfg.init_seed()).unwrap();
        let first = net.loss(x.view(), &y).unwrap();
        fit(&mut net, &x, &y, &cfg, |_, _, _| {}).unwrap();
        let last = net.loss(x.view(), &y).unwrap();
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (x, y) = data(4, 1);
        let mut net = build_split_network(&FeatureClustering::single(4), Task::Regression, 2, 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            fit(&mut net, &x, &y, &cfg, |_, _, _| {}),
            Err(Error::InvalidConfig(_))
        ));
    }
}
