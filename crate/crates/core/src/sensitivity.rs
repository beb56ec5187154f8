//! Total Sobol' indices of the composition function with respect to the
//! independent Gaussian component responses at one input point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::composition::CompositionExpr;
use crate::error::{Error, Result};

/// Independent Gaussian responses `Z_j ~ N(means_j, stds_j²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseGaussians {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ResponseGaussians {
    pub fn new(means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.len() != stds.len() || means.is_empty() {
            return Err(Error::argument("means and stds must be non-empty and of equal length"));
        }
        if stds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::argument("stds must be finite and >= 0, means finite"));
        }
        Ok(Self { means, stds })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Upper clamp of the estimates; values above 1 are Monte Carlo noise.
const UPPER_SLACK: f64 = 1.05;

/// Jansen estimator of the total indices using two independent `n`-sample
/// matrices. Components with zero spread get exactly 0.
pub fn total_sobol(expr: &CompositionExpr, z: &ResponseGaussians, n: usize, seed: u64) -> Result<Vec<f64>> {
    let m = z.len();
    if expr.n_components() > m {
        return Err(Error::argument(format!("composition needs {} responses, got {m}", expr.n_components())));
    }
    if n < 256 {
        return Err(Error::argument(format!("Sobol' estimation needs n >= 256, got {n}")));
    }
    if z.stds.iter().all(|&s| s == 0.0) {
        return Err(Error::DegenerateVariance(0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..m)
            .map(|j| {
                let xi: f64 = rng.sample(StandardNormal);
                if z.stds[j] == 0.0 {
                    z.means[j]
                } else {
                    z.means[j] + z.stds[j] * xi
                }
            })
            .collect()
    };
    let a: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng)).collect();
    let b: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng)).collect();
    let fa: Vec<f64> = a.iter().map(|r| expr.eval(r)).collect();
    let fb: Vec<f64> = b.iter().map(|r| expr.eval(r)).collect();

    let all = fa.iter().chain(&fb);
    let mean = all.clone().sum::<f64>() / (2 * n) as f64;
    let var = all.map(|v| (v - mean).powi(2)).sum::<f64>() / (2 * n - 1) as f64;
    let scale = z.means.iter().chain(&z.stds).map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if !(var > 1e-14 * scale * scale) {
        return Err(Error::DegenerateVariance(var));
    }

    let mut row = vec![0.0; m];
    let mut out = vec![0.0; m];
    for j in 0..m {
        if z.stds[j] == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for i in 0..n {
            row.copy_from_slice(&a[i]);
            row[j] = b[i][j];
            acc += (fa[i] - expr.eval(&row)).powi(2);
        }
        out[j] = (acc / (2 * n) as f64 / var).clamp(0.0, UPPER_SLACK);
    }
    Ok(out)
}

/// Index of the largest total index; ties go to the smallest index.
pub fn select_limit_state(indices: &[f64]) -> Result<usize> {
    if indices.is_empty() || indices.iter().any(|v| !v.is_finite()) {
        return Err(Error::Routing("Sobol' indices must be non-empty and finite".into()));
    }
    let (mut best, mut best_val) = (0, indices[0]);
    for (j, &v) in indices.iter().enumerate().skip(1) {
        if v > best_val {
            best = j;
            best_val = v;
        }
    }
    if best_val <= 0.0 {
        return Err(Error::Routing("all total Sobol' indices vanish".into()));
    }
    Ok(best)
}

/// Fallback routing when the response variance is degenerate: the component
/// with the smallest `|mean| / std` among those with positive spread.
pub fn fallback_limit_state(z: &ResponseGaussians) -> Option<usize> {
    (0..z.len())
        .filter(|&j| z.stds[j] > 0.0)
        .min_by(|&a, &b| (z.means[a].abs() / z.stds[a]).total_cmp(&(z.means[b].abs() / z.stds[b])))
}
