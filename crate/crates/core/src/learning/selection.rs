//! Candidate scoring, filtering and selection, and the stopping rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterLabels;
use crate::composition::CompositionExpr;
use crate::error::{Error, Result};
use crate::input::InputModel;
use crate::sensitivity::ResponseGaussians;
use crate::surrogate::SurrogateModel;

/// Predictive Gaussians of every component surrogate at the full input point `x`.
pub fn component_predictions(models: &[SurrogateModel], input: &InputModel, x: &[f64]) -> Result<ResponseGaussians> {
    let mut means = Vec::with_capacity(models.len());
    let mut stds = Vec::with_capacity(models.len());
    for (j, m) in models.iter().enumerate() {
        let p = m.predict(&input.project(x, j))?;
        means.push(p.mean);
        stds.push(p.std());
    }
    ResponseGaussians::new(means, stds)
}

/// System deviation number `|mean| / std` of `h(Z)` from `n` draws of the
/// component responses. Returns `+∞` when the response is practically certain.
pub fn usys_of(z: &ResponseGaussians, expr: &CompositionExpr, n: usize, seed: u64) -> Result<f64> {
    if n < 16 {
        return Err(Error::argument(format!("U_sys needs n >= 16 draws, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = z.len();
    let mut buf = vec![0.0; m];
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        for j in 0..m {
            let xi: f64 = rng.sample(StandardNormal);
            buf[j] = z.means[j] + z.stds[j] * xi;
        }
        let h = expr.eval(&buf);
        if !h.is_finite() {
            return Err(Error::NonFinite { value: h, point: z.means.clone(), context: "composition of sampled responses".into() });
        }
        values.push(h);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    if std < 1e-12 * mean.abs() || std == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(mean.abs() / std)
}

/// [`usys_of`] at a full input point.
pub fn usys(
    models: &[SurrogateModel],
    input: &InputModel,
    expr: &CompositionExpr,
    x: &[f64],
    n: usize,
    seed: u64,
) -> Result<f64> {
    let z = component_predictions(models, input, x)?;
    usys_of(&z, expr, n, seed).map_err(|e| match e {
        Error::NonFinite { value, context, .. } => Error::NonFinite { value, point: x.to_vec(), context },
        other => other,
    })
}

/// Indices of the values at or below the nearest-rank `alpha`-quantile, in
/// ascending index order. Infinite values (certain sign) are never kept.
pub fn filter_candidates(values: &[f64], alpha: f64) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((alpha * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let cutoff = sorted[rank - 1];
    (0..values.len()).filter(|&i| values[i] <= cutoff && values[i].is_finite()).collect()
}

/// One chosen enrichment candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Index into the filtered candidate set.
    pub candidate: usize,
    /// Cluster id, `None` for a DBSCAN noise point.
    pub cluster: Option<usize>,
}

/// Cluster representatives (smallest value per cluster) ordered by value,
/// followed by the noise points ordered by value; at most `n_max` are kept.
pub fn select_enrichment(values: &[f64], labels: &ClusterLabels, n_max: usize) -> Vec<Selection> {
    let order = |a: &Selection, b: &Selection| values[a.candidate].total_cmp(&values[b.candidate]).then(a.candidate.cmp(&b.candidate));
    let mut reps: Vec<Selection> = labels
        .members()
        .into_iter()
        .enumerate()
        .filter_map(|(c, members)| {
            members
                .into_iter()
                .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
                .map(|i| Selection { candidate: i, cluster: Some(c) })
        })
        .collect();
    reps.sort_by(order);
    let mut noise: Vec<Selection> = (0..labels.labels.len())
        .filter(|&i| labels.labels[i].is_none())
        .map(|i| Selection { candidate: i, cluster: None })
        .collect();
    noise.sort_by(order);
    reps.extend(noise);
    reps.truncate(n_max);
    reps
}

/// Reliability-index history and its relative variations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTracker {
    pub betas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl ConvergenceTracker {
    /// Records a new estimate and returns its relative variation, if any.
    pub fn push(&mut self, beta: f64) -> Option<f64> {
        let eps = self.betas.last().map(|&prev| {
            let delta = (beta - prev).abs();
            if prev == 0.0 {
                delta
            } else {
                delta / prev.abs()
            }
        });
        self.betas.push(beta);
        if let Some(e) = eps {
            self.epsilons.push(e);
        }
        eps
    }

    /// Number of trailing variations strictly below `eps_bar`.
    pub fn streak(&self, eps_bar: f64) -> usize {
        self.epsilons.iter().rev().take_while(|&&e| e < eps_bar).count()
    }
}

/// Whether the last `streak_required` variations all lie below `eps_bar`.
pub fn check_convergence(tracker: &ConvergenceTracker, eps_bar: f64, streak_required: usize) -> bool {
    tracker.betas.len() >= 2 && tracker.streak(eps_bar) >= streak_required.max(1)
}
