use ndarray::{Array2, ArrayView2, Axis};

use crate::data::Task;

/// Row-wise softmax using the max-shifted log-sum-exp.
pub fn softmax(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
    out
}

/// Mean softmax cross-entropy (natural log) and its gradient w.r.t. logits.
pub fn cross_entropy(logits: ArrayView2<'_, f64>, labels: &[f64]) -> (f64, Array2<f64>) {
    let b = logits.nrows() as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for (i, (row, mut g)) in logits.axis_iter(Axis(0)).zip(grad.axis_iter_mut(Axis(0))).enumerate() {
        let y = labels[i] as usize;
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
        for (c, (gc, z)) in g.iter_mut().zip(row.iter()).enumerate() {
            let p = (z - lse).exp();
            *gc = (p - if c == y { 1.0 } else { 0.0 }) / b;
        }
    }
    (total / b, grad)
}

/// Mean squared error of a single-output prediction and its gradient.
pub fn mean_squared_error(outputs: ArrayView2<'_, f64>, targets: &[f64]) -> (f64, Array2<f64>) {
    let b = outputs.nrows() as f64;
    let mut grad = Array2::zeros(outputs.raw_dim());
    let mut total = 0.0;
    for (i, (row, mut g)) in outputs.axis_iter(Axis(0)).zip(grad.axis_iter_mut(Axis(0))).enumerate() {
        let r = row[0] - targets[i];
        total += r * r;
        g[0] = 2.0 * r / b;
    }
    (total / b, grad)
}

pub fn task_loss(task: Task, outputs: ArrayView2<'_, f64>, labels: &[f64]) -> (f64, Array2<f64>) {
    match task {
        Task::Classification { .. } => cross_entropy(outputs, labels),
        Task::Regression => mean_squared_error(outputs, labels),
    }
}

/// Average of the per-branch losses, every branch supervised by the same labels.
pub fn joint_loss(branch_outputs: &[Array2<f64>], labels: &[f64], task: Task) -> f64 {
    let k = branch_outputs.len() as f64;
    branch_outputs
        .iter()
        .map(|o| task_loss(task, o.view(), labels).0)
        .sum::<f64>()
        / k
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const CLS3: Task = Task::Classification { num_classes: 3 };

    #[test]
    fn zero_logits_give_log_classes() {
        let loss = joint_loss(&[Array2::zeros((4, 3))], &[0.0, 1.0, 2.0, 0.0], CLS3);
        assert!((loss - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn perfect_regression_fit() {
        let y = [1.5, -2.0];
        let o = array![[1.5], [-2.0]];
        assert_eq!(joint_loss(&[o.clone(), o], &y, Task::Regression), 0.0);
    }

    #[test]
    fn joint_loss_averages_branches() {
        // Branch MSEs 0.4 and 0.8.
        let y = [0.0];
        let a = array![[0.4f64.sqrt()]];
        let b = array![[0.8f64.sqrt()]];
        let loss = joint_loss(&[a, b], &y, Task::Regression);
        assert!((loss - 0.6).abs() < 1e-15);
    }

    #[test]
    fn softmax_rows_sum_to_one_for_large_logits() {
        let p = softmax(array![[1000.0, 999.0, -1000.0], [0.0, 0.0, 0.0]].view());
        for row in p.axis_iter(Axis(0)) {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let (loss, _) = cross_entropy(array![[1000.0, -1000.0]].view(), &[0.0]);
        assert!(loss.is_finite() && loss < 1e-12);
    }
}
