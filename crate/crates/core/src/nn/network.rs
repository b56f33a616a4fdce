use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer, LayerGrad};
use super::loss::{softmax, task_loss};
use super::{allocate_hidden, HeadMode, NetworkOptions};
use crate::cluster::FeatureClustering;
use crate::data::Task;
use crate::error::{Error, Result};
use crate::seed;

/// One split of the network: the columns of a feature cluster feeding a
/// hidden layer and, in per-branch mode, the branch's own output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub features: Vec<usize>,
    pub hidden: DenseLayer,
    pub head: Option<DenseLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNetwork {
    clustering: FeatureClustering,
    branches: Vec<Branch>,
    shared_head: Option<DenseLayer>,
    output_dim: usize,
    task: Task,
    head_mode: HeadMode,
}

/// Raw per-branch outputs (logits or regression values) and the fused
/// prediction (mean of branch probabilities, or mean of branch values).
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub branch_outputs: Vec<Array2<f64>>,
    pub fused: Array2<f64>,
}

/// Gradients of the joint loss in canonical layer order (see
/// [`SplitNetwork::layers`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.biases.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(LayerGrad::is_finite)
    }
}

/// Why an SGD step was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonFinite {
    Loss,
    Gradient,
    Parameters,
}

impl NonFinite {
    pub fn describe(self) -> &'static str {
        match self {
            NonFinite::Loss => "loss",
            NonFinite::Gradient => "gradient",
            NonFinite::Parameters => "parameters",
        }
    }
}

pub fn build_split_network(
    clustering: &FeatureClustering,
    task: Task,
    total_hidden: usize,
    seed: u64,
) -> Result<SplitNetwork> {
    SplitNetwork::build(clustering, task, total_hidden, seed, NetworkOptions::default())
}

struct BranchCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

impl SplitNetwork {
    /// Allocates proportional widths and draws Glorot-uniform weights from
    /// one seeded generator, layer by layer in canonical order.
    pub fn build(
        clustering: &FeatureClustering,
        task: Task,
        total_hidden: usize,
        seed: u64,
        options: NetworkOptions,
    ) -> Result<SplitNetwork> {
        let widths = allocate_hidden(clustering.cluster_sizes(), total_hidden)?;
        let output_dim = task.output_dim();
        let mut rng = seed::rng(seed);
        let mut branches = Vec::with_capacity(clustering.k());
        for (c, &width) in widths.iter().enumerate() {
            let features = clustering.members(c);
            let hidden = DenseLayer::glorot(features.len(), width, options.hidden_activation, &mut rng);
            let head = match options.head_mode {
                HeadMode::PerBranch => Some(DenseLayer::glorot(width, output_dim, Activation::Identity, &mut rng)),
                HeadMode::Shared => None,
            };
            branches.push(Branch { features, hidden, head });
        }
        let shared_head = match options.head_mode {
            HeadMode::PerBranch => None,
            HeadMode::Shared => Some(DenseLayer::glorot(
                total_hidden,
                output_dim,
                Activation::Identity,
                &mut rng,
            )),
        };
        Ok(SplitNetwork {
            clustering: clustering.clone(),
            branches,
            shared_head,
            output_dim,
            task,
            head_mode: options.head_mode,
        })
    }

    /// Assembles a network from explicit layers, checking that every shape
    /// agrees with the clustering and task.
    pub fn from_parts(
        clustering: FeatureClustering,
        branches: Vec<Branch>,
        shared_head: Option<DenseLayer>,
        task: Task,
    ) -> Result<SplitNetwork> {
        let output_dim = task.output_dim();
        if branches.len() != clustering.k() {
            return Err(Error::shape(format!("{} branches", clustering.k()), branches.len()));
        }
        let head_mode = if shared_head.is_some() {
            HeadMode::Shared
        } else {
            HeadMode::PerBranch
        };
        let mut total_hidden = 0;
        for (c, b) in branches.iter().enumerate() {
            if b.features != clustering.members(c) {
                return Err(Error::shape(
                    format!("branch {c} features {:?}", clustering.members(c)),
                    format!("{:?}", b.features),
                ));
            }
            if b.hidden.inputs() != b.features.len() || b.hidden.outputs() == 0 {
                return Err(Error::shape(
                    format!("branch {c} hidden layer with {} inputs", b.features.len()),
                    b.hidden.inputs(),
                ));
            }
            total_hidden += b.hidden.outputs();
            match (&b.head, head_mode) {
                (Some(h), HeadMode::PerBranch) if h.inputs() == b.hidden.outputs() && h.outputs() == output_dim => {}
                (None, HeadMode::Shared) => {}
                _ => return Err(Error::shape(format!("branch {c} head"), "mismatched head")),
            }
        }
        if let Some(h) = &shared_head {
            if h.inputs() != total_hidden || h.outputs() != output_dim {
                return Err(Error::shape(
                    format!("shared head {total_hidden} -> {output_dim}"),
                    format!("{} -> {}", h.inputs(), h.outputs()),
                ));
            }
        }
        Ok(SplitNetwork {
            clustering,
            branches,
            shared_head,
            output_dim,
            task,
            head_mode,
        })
    }

    pub fn clustering(&self) -> &FeatureClustering {
        &self.clustering
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn head_mode(&self) -> HeadMode {
        self.head_mode
    }

    pub fn n_inputs(&self) -> usize {
        self.clustering.n_features()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.hidden.outputs()).collect()
    }

    /// Layers in canonical order: per-branch mode interleaves each branch's
    /// hidden layer and head; shared mode lists every hidden layer and then
    /// the shared head.
    pub fn layers(&self) -> Vec<&DenseLayer> {
        let mut out = Vec::new();
        for b in &self.branches {
            out.push(&b.hidden);
            if let Some(h) = &b.head {
                out.push(h);
            }
        }
        if let Some(h) = &self.shared_head {
            out.push(h);
        }
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out = Vec::new();
        for b in &mut self.branches {
            out.push(&mut b.hidden);
            if let Some(h) = &mut b.head {
                out.push(h);
            }
        }
        if let Some(h) = &mut self.shared_head {
            out.push(h);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// All parameters in canonical order; within a layer, weights row-major
    /// followed by biases.
    pub fn params_flat(&self) -> Vec<f64> {
        self.layers()
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!("{} parameters", self.param_count()), params.len()));
        }
        let mut it = params.iter().copied();
        for layer in self.layers_mut() {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|l| l.is_finite())
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::shape(format!("{} columns", self.n_inputs()), x.ncols()));
        }
        Ok(())
    }

    fn run_branches(&self, x: ArrayView2<'_, f64>) -> Vec<BranchCache> {
        self.branches
            .iter()
            .map(|b| {
                let input = x.select(Axis(1), &b.features);
                let pre = b.hidden.pre_activation(input.view());
                let hidden = b.hidden.activation.apply(&pre);
                BranchCache { input, pre, hidden }
            })
            .collect()
    }

    fn heads(&self, caches: &[BranchCache]) -> (Vec<Array2<f64>>, Option<Array2<f64>>) {
        match &self.shared_head {
            None => (
                self.branches
                    .iter()
                    .zip(caches)
                    .map(|(b, c)| b.head.as_ref().expect("per-branch head").forward(c.hidden.view()))
                    .collect(),
                None,
            ),
            Some(head) => {
                let views: Vec<ArrayView2<'_, f64>> = caches.iter().map(|c| c.hidden.view()).collect();
                let joined = concatenate(Axis(1), &views).expect("equal row counts");
                (vec![head.forward(joined.view())], Some(joined))
            }
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardOutput> {
        self.check_input(x)?;
        let caches = self.run_branches(x);
        let (branch_outputs, _) = self.heads(&caches);
        let k = branch_outputs.len() as f64;
        let mut fused = Array2::zeros((x.nrows(), self.output_dim));
        for o in &branch_outputs {
            match self.task {
                Task::Classification { .. } => fused += &softmax(o.view()),
                Task::Regression => fused += o,
            }
        }
        fused /= k;
        Ok(ForwardOutput { branch_outputs, fused })
    }

    /// Fused prediction only.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.fused)
    }

    pub fn loss(&self, x: ArrayView2<'_, f64>, labels: &[f64]) -> Result<f64> {
        let out = self.forward(x)?;
        Ok(super::joint_loss(&out.branch_outputs, labels, self.task))
    }

    /// Joint loss and its exact gradient w.r.t. every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, f64>, labels: &[f64]) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        if labels.len() != x.nrows() {
            return Err(Error::shape(format!("{} labels", x.nrows()), labels.len()));
        }
        let caches = self.run_branches(x);
        let (outputs, joined) = self.heads(&caches);
        let k = outputs.len() as f64;
        let mut total = 0.0;
        let mut layers = Vec::with_capacity(2 * self.branches.len() + 1);

        match (&self.shared_head, joined) {
            (None, _) => {
                for ((b, cache), out) in self.branches.iter().zip(&caches).zip(&outputs) {
                    let (loss, mut d_out) = task_loss(self.task, out.view(), labels);
                    total += loss;
                    d_out /= k;
                    let head = b.head.as_ref().expect("per-branch head");
                    let head_grad = LayerGrad::from_backprop(cache.hidden.view(), &d_out);
                    let mut d_hidden = d_out.dot(&head.weights);
                    b.hidden.activation.backprop(&cache.pre, &mut d_hidden);
                    layers.push(LayerGrad::from_backprop(cache.input.view(), &d_hidden));
                    layers.push(head_grad);
                }
            }
            (Some(head), Some(joined)) => {
                let (loss, d_out) = task_loss(self.task, outputs[0].view(), labels);
                total = loss;
                let head_grad = LayerGrad::from_backprop(joined.view(), &d_out);
                let d_joined = d_out.dot(&head.weights);
                let mut offset = 0;
                for (b, cache) in self.branches.iter().zip(&caches) {
                    let w = b.hidden.outputs();
                    let mut d_hidden = d_joined.slice(s![.., offset..offset + w]).to_owned();
                    offset += w;
                    b.hidden.activation.backprop(&cache.pre, &mut d_hidden);
                    layers.push(LayerGrad::from_backprop(cache.input.view(), &d_hidden));
                }
                layers.push(head_grad);
            }
            (Some(_), None) => unreachable!("shared head always yields joined activations"),
        }
        Ok((total / k, Gradients { layers }))
    }

    /// `θ ← θ − lr · g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers_mut().into_iter().zip(&grads.layers) {
            layer.weights.scaled_add(-learning_rate, &g.weights);
            layer.biases.scaled_add(-learning_rate, &g.biases);
        }
    }

    /// One plain SGD step on a batch. Returns the loss before the update.
    /// Non-finite loss, gradients or updated parameters are refused; on a
    /// refusal the parameters may already be modified only in the
    /// `Parameters` case.
    pub fn backward_and_step(
        &mut self,
        x: ArrayView2<'_, f64>,
        labels: &[f64],
        learning_rate: f64,
    ) -> Result<std::result::Result<f64, NonFinite>> {
        let (loss, grads) = self.loss_and_gradients(x, labels)?;
        if !loss.is_finite() {
            return Ok(Err(NonFinite::Loss));
        }
        if !grads.is_finite() {
            return Ok(Err(NonFinite::Gradient));
        }
        self.apply_gradients(&grads, learning_rate);
        if !self.is_finite() {
            return Ok(Err(NonFinite::Parameters));
        }
        Ok(Ok(loss))
    }
}
