//! Dense split networks: proportional branch widths, a joint loss over
//! per-branch heads, exact backpropagation and plain SGD.

mod alloc;
mod gradcheck;
mod layer;
mod loss;
mod network;
mod train;

pub use alloc::allocate_hidden;
pub use gradcheck::{
    compare_gradients, gradient_check, min_abs_pre_activation, numeric_gradient, random_gradient_checks,
    relative_error, GradientTrial,
};
pub use layer::{Activation, DenseLayer, LayerGrad};
pub use loss::{cross_entropy, joint_loss, mean_squared_error, softmax};
pub use network::{build_split_network, Branch, ForwardOutput, Gradients, NonFinite, SplitNetwork};
pub use train::{fit, TrainConfig};

use serde::{Deserialize, Serialize};

/// How branch outputs are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadMode {
    /// Every branch has its own head, trained against the shared label; the
    /// joint loss averages the branch losses.
    #[default]
    PerBranch,
    /// The branch hidden layers are concatenated into a single head.
    Shared,
}

impl std::str::FromStr for HeadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-branch" => Ok(HeadMode::PerBranch),
            "shared" => Ok(HeadMode::Shared),
            other => Err(format!("unknown head mode {other:?} (per-branch|shared)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NetworkOptions {
    pub head_mode: HeadMode,
    pub hidden_activation: Activation,
}
