use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::{HeadMode, NetworkOptions, SplitNetwork};
use crate::cluster::FeatureClustering;
use crate::data::Task;
use crate::error::Result;
use crate::seed::{derive_seed, rng};

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference derivative of the joint loss w.r.t. every parameter.
pub fn numeric_gradient(net: &SplitNetwork, x: ArrayView2<'_, f64>, labels: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut grad = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        params[i] = base[i] + epsilon;
        probe.set_params_flat(&params)?;
        let plus = probe.loss(x, labels)?;
        params[i] = base[i] - epsilon;
        probe.set_params_flat(&params)?;
        let minus = probe.loss(x, labels)?;
        params[i] = base[i];
        grad.push((plus - minus) / (2.0 * epsilon));
    }
    Ok(grad)
}

/// Worst relative error between a supplied analytic gradient and central
/// differences.
pub fn compare_gradients(
    net: &SplitNetwork,
    x: ArrayView2<'_, f64>,
    labels: &[f64],
    epsilon: f64,
    analytic: &[f64],
) -> Result<f64> {
    let numeric = numeric_gradient(net, x, labels, epsilon)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

/// Worst per-parameter relative error of the backpropagated gradient.
pub fn gradient_check(net: &SplitNetwork, x: ArrayView2<'_, f64>, labels: &[f64], epsilon: f64) -> Result<f64> {
    let (_, grads) = net.loss_and_gradients(x, labels)?;
    compare_gradients(net, x, labels, epsilon, &grads.flatten())
}

/// Smallest |pre-activation| over every hidden unit and sample; central
/// differences are only meaningful when this exceeds epsilon comfortably.
pub fn min_abs_pre_activation(net: &SplitNetwork, x: ArrayView2<'_, f64>) -> f64 {
    net.branches()
        .iter()
        .map(|b| {
            let input = x.select(ndarray::Axis(1), &b.features);
            b.hidden
                .pre_activation(input.view())
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()))
        })
        .fold(f64::INFINITY, f64::min)
}

/// One randomly drawn network in [`random_gradient_checks`].
#[derive(Debug, Clone, Serialize)]
pub struct GradientTrial {
    pub k: usize,
    pub widths: Vec<usize>,
    pub batch: usize,
    pub classification: bool,
    pub head_mode: HeadMode,
    pub max_relative_error: f64,
}

/// Gradient checks on `count` random split networks: k in {1, 2, 4},
/// branch widths up to 16, batches up to 8, alternating cross-entropy and
/// squared-error losses. Inputs are redrawn until no hidden pre-activation
/// lies within `100 × epsilon` of the ReLU kink, where central differences
/// straddle the non-differentiable point. Weights are redrawn when 100 input
/// draws in a row fail.
pub fn random_gradient_checks(count: usize, seed: u64, epsilon: f64) -> Result<Vec<GradientTrial>> {
    (0..count)
        .map(|t| {
            let mut rng = rng(derive_seed(seed, &[t as u64]));
            let k = *[1usize, 2, 4].choose(&mut rng).unwrap();
            let d = rng.gen_range(k..=k + 6);
            // Every cluster gets at least one feature.
            let mut labels: Vec<usize> = (0..d).map(|j| if j < k { j } else { rng.gen_range(0..k) }).collect();
            labels.shuffle(&mut rng);
            let clustering = FeatureClustering::from_labels(&labels, 1.0);
            let total_hidden = loop {
                let total = rng.gen_range(k..=k * 16);
                if super::allocate_hidden(clustering.cluster_sizes(), total)?
                    .iter()
                    .all(|&w| w <= 16)
                {
                    break total;
                }
            };
            let classification = t % 2 == 0;
            let task = if classification {
                Task::Classification {
                    num_classes: rng.gen_range(2..=4),
                }
            } else {
                Task::Regression
            };
            let head_mode = if rng.gen_bool(0.5) {
                HeadMode::PerBranch
            } else {
                HeadMode::Shared
            };
            let batch = rng.gen_range(1..=8);
            // A unit with a near-zero weight on a single input feature can sit
            // next to the kink for every input, so the weights are redrawn too.
            let (net, x) = 'draw: loop {
                let net = SplitNetwork::build(
                    &clustering,
                    task,
                    total_hidden,
                    rng.gen(),
                    NetworkOptions {
                        head_mode,
                        ..NetworkOptions::default()
                    },
                )?;
                for _ in 0..100 {
                    let x = Array2::from_shape_fn((batch, d), |_| rng.gen_range(-2.0..2.0));
                    if min_abs_pre_activation(&net, x.view()) > 100.0 * epsilon {
                        break 'draw (net, x);
                    }
                }
            };
            let targets: Vec<f64> = (0..batch)
                .map(|_| match task {
                    Task::Classification { num_classes } => rng.gen_range(0..num_classes) as f64,
                    Task::Regression => rng.gen_range(-2.0..2.0),
                })
                .collect();
            Ok(GradientTrial {
                k,
                widths: net.widths(),
                batch,
                classification,
                head_mode,
                max_relative_error: gradient_check(&net, x.view(), &targets, epsilon)?,
            })
        })
        .collect()
}
