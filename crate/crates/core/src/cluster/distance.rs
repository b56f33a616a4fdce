use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// `1 - r`, in `[0, 2]`.
    #[default]
    Signed,
    /// `1 - |r|`, in `[0, 1]`; anti-correlated features count as close.
    Absolute,
}

impl std::str::FromStr for DistanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signed" => Ok(DistanceMode::Signed),
            "absolute" => Ok(DistanceMode::Absolute),
            other => Err(format!("unknown distance mode {other:?} (signed|absolute)")),
        }
    }
}

impl std::fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceMode::Signed => "signed",
            DistanceMode::Absolute => "absolute",
        })
    }
}

/// Symmetric, zero-diagonal, non-negative feature distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Array2<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, a zero diagonal and finite non-negative entries.
    pub fn new(values: Array2<f64>) -> Result<Self, String> {
        let (r, c) = values.dim();
        if r != c {
            return Err(format!("distance matrix must be square, got {r}x{c}"));
        }
        for i in 0..r {
            if values[[i, i]] != 0.0 {
                return Err(format!("diagonal entry {i} is {}", values[[i, i]]));
            }
            for j in 0..r {
                let v = values[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(format!("entry ({i},{j}) = {v} is not a finite non-negative distance"));
                }
                if v != values[[j, i]] {
                    return Err(format!("entries ({i},{j}) and ({j},{i}) differ"));
                }
            }
        }
        Ok(DistanceMatrix { values })
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// The matrix with rows and columns reordered so that new index `i`
    /// refers to old index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> DistanceMatrix {
        let d = self.size();
        DistanceMatrix {
            values: Array2::from_shape_fn((d, d), |(i, j)| self.values[[perm[i], perm[j]]]),
        }
    }
}

/// Pearson correlation of two columns over rows where both are observed.
/// `None` when fewer than two complete pairs exist or either side is constant.
pub fn pairwise_complete_pearson(data: &Dataset, rows: &[usize], a: usize, b: usize) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|&r| Some((data.value(r, a)?, data.value(r, b)?)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let constant = |f: fn(&(f64, f64)) -> f64| pairs.iter().all(|p| f(p) == f(&pairs[0]));
    if constant(|p| p.0) || constant(|p| p.1) {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise-complete Pearson correlation distance between all features,
/// computed from `rows` only. Degenerate pairs get distance 1.
pub fn correlation_distance(data: &Dataset, rows: &[usize], mode: DistanceMode) -> DistanceMatrix {
    assert!(!rows.is_empty(), "correlation distance needs at least one row");
    let d = data.n_features();
    let mut values = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in (i + 1)..d {
            let dist = match pairwise_complete_pearson(data, rows, i, j) {
                None => 1.0,
                Some(r) => match mode {
                    DistanceMode::Signed => 1.0 - r,
                    DistanceMode::Absolute => 1.0 - r.abs(),
                },
            };
            let dist = dist.max(0.0);
            values[[i, j]] = dist;
            values[[j, i]] = dist;
        }
    }
    DistanceMatrix { values }
}
