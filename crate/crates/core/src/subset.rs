//! Subset simulation in standard normal space.
//!
//! Level 0 is crude Monte Carlo; each following level grows `N·p0` Markov
//! chains from the best samples of the previous one using the conditional
//! sampling proposal `u' = ρ u + √(1 − ρ²) ξ`, accepted when the proposal
//! stays inside the current intermediate failure domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::InputModel;
use crate::stats::std_normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SusConfig {
    pub samples_per_level: usize,
    pub p0: f64,
    pub max_levels: usize,
    pub rho: f64,
    pub seed: u64,
}

impl SusConfig {
    /// Defaults used while learning.
    pub fn learning(seed: u64) -> Self {
        Self { samples_per_level: 10_000, p0: 0.1, max_levels: 10, rho: 0.8, seed }
    }

    /// Defaults for the final, finer estimate.
    pub fn final_estimate(seed: u64) -> Self {
        Self { samples_per_level: 100_000, ..Self::learning(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::argument(format!("p0 must lie in (0, 1), got {}", self.p0)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::argument(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.max_levels == 0 {
            return Err(Error::argument("max_levels must be >= 1"));
        }
        let seeds = self.samples_per_level as f64 * self.p0;
        if seeds < 10.0 - 1e-9 {
            return Err(Error::argument(format!("samples_per_level * p0 = {seeds} < 10")));
        }
        if (seeds - seeds.round()).abs() > 1e-9 || self.samples_per_level % (seeds.round() as usize) != 0 {
            return Err(Error::argument("samples_per_level * p0 must be an integer dividing samples_per_level"));
        }
        Ok(())
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusSample {
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
    pub level: usize,
    /// False when the state repeats an earlier sample (chain seed or rejected move).
    pub fresh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    /// Threshold defining the next intermediate domain (0 for the last level).
    pub threshold: f64,
    /// Conditional probability estimated at this level.
    pub probability: f64,
    /// Fraction of accepted MCMC moves (1 at level 0).
    pub acceptance: f64,
    /// Squared CoV contribution of this level.
    pub delta2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusResult {
    pub pf: f64,
    pub cov: f64,
    pub converged: bool,
    /// Upper bound `p0^L` when no failure sample was found.
    pub pf_upper: Option<f64>,
    pub levels: Vec<LevelStats>,
    /// Chain states of every level, `samples_per_level` per level.
    pub samples: Vec<SusSample>,
    /// Rejected MCMC proposals; evaluated but not part of any chain.
    pub rejected: Vec<SusSample>,
}

impl SusResult {
    /// Every point whose limit state was evaluated, each exactly once.
    pub fn evaluated(&self) -> impl Iterator<Item = &SusSample> {
        self.samples.iter().filter(|s| s.fresh).chain(&self.rejected)
    }

    /// Probability usable for a reliability index even when unconverged.
    pub fn pf_or_bound(&self) -> f64 {
        if self.pf > 0.0 {
            self.pf
        } else {
            self.pf_upper.unwrap_or(self.pf)
        }
    }
}

/// `β = −Φ⁻¹(pf)`.
pub fn reliability_index(pf: f64) -> Result<f64> {
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::domain(format!("failure probability must lie in (0, 1), got {pf}")));
    }
    Ok(-std_normal_quantile(pf))
}

fn evaluate<F>(lsf: &F, model: &InputModel, us: Vec<Vec<f64>>) -> Result<Vec<(Vec<f64>, Vec<f64>, f64)>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    us.into_par_iter()
        .map(|u| {
            let x = model.from_standard_slice(&u);
            let y = lsf(&x);
            if y.is_nan() {
                return Err(Error::NonFinite { value: y, point: x, context: "limit state returned NaN".into() });
            }
            Ok((u, x, y))
        })
        .collect()
}

/// Estimates `P[lsf(X) ≤ 0]` and returns every chain state as the sample pool.
pub fn subset_simulation<F>(lsf: F, model: &InputModel, cfg: &SusConfig) -> Result<SusResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let n = cfg.samples_per_level;
    let dim = model.dim();
    let n_chains = (n as f64 * cfg.p0).round() as usize;
    let chain_len = n / n_chains;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let us: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let mut current: Vec<SusSample> = evaluate(&lsf, model, us)?
        .into_iter()
        .map(|(u, x, value)| SusSample { u, x, value, level: 0, fresh: true })
        .collect();

    let mut samples = Vec::with_capacity(n * 4);
    let mut rejected = Vec::new();
    let mut levels: Vec<LevelStats> = Vec::new();
    let mut pf = 1.0;
    let mut acceptance = 1.0;
    let sq = (1.0 - cfg.rho * cfg.rho).sqrt();

    for level in 0..cfg.max_levels {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| current[a].value.total_cmp(&current[b].value).then(a.cmp(&b)));
        let n_fail = current.iter().filter(|s| s.value <= 0.0).count();
        let last = n_fail >= n_chains || level + 1 == cfg.max_levels;
        let threshold = if last { 0.0 } else { 0.5 * (current[order[n_chains - 1]].value + current[order[n_chains]].value) };
        let prob = if last { n_fail as f64 / n as f64 } else { n_chains as f64 / n as f64 };
        let indicator: Vec<bool> = current.iter().map(|s| s.value <= threshold).collect();
        let gamma = if level == 0 { 0.0 } else { chain_correlation(&indicator, n_chains, chain_len, prob) };
        let delta2 = if prob > 0.0 { (1.0 - prob) / (n as f64 * prob) * (1.0 + gamma) } else { 0.0 };
        levels.push(LevelStats { threshold, probability: prob, acceptance, delta2 });
        pf *= prob;

        if last {
            let converged = n_fail >= n_chains;
            let pf_upper = (n_fail == 0).then(|| cfg.p0.powi(level as i32 + 1));
            let cov = levels.iter().map(|l| l.delta2).sum::<f64>().sqrt();
            samples.extend(current);
            return Ok(SusResult { pf, cov, converged, pf_upper, levels, samples, rejected });
        }

        // seeds, in ascending value order, each grows one chain
        let mut chains: Vec<SusSample> = order[..n_chains].iter().map(|&i| current[i].clone()).collect();
        let mut next: Vec<Option<SusSample>> = vec![None; n];
        for (c, s) in chains.iter().enumerate() {
            next[c * chain_len] = Some(SusSample { level: level + 1, fresh: false, ..s.clone() });
        }
        let mut accepted = 0usize;
        for t in 1..chain_len {
            let proposals: Vec<Vec<f64>> = chains
                .iter()
                .map(|s| s.u.iter().map(|&ui| cfg.rho * ui + sq * rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let evaluated = evaluate(&lsf, model, proposals)?;
            for (c, (u, x, value)) in evaluated.into_iter().enumerate() {
                let state = if value <= threshold {
                    accepted += 1;
                    chains[c] = SusSample { u, x, value, level: level + 1, fresh: true };
                    chains[c].clone()
                } else {
                    rejected.push(SusSample { u, x, value, level: level + 1, fresh: true });
                    SusSample { level: level + 1, fresh: false, ..chains[c].clone() }
                };
                next[c * chain_len + t] = Some(state);
            }
        }
        acceptance = accepted as f64 / (n_chains * (chain_len - 1)).max(1) as f64;
        samples.extend(std::mem::replace(&mut current, next.into_iter().map(Option::unwrap).collect()));
    }
    unreachable!("the last level always returns")
}

/// Correlation factor γ of the level estimator from chain-ordered indicators.
fn chain_correlation(indicator: &[bool], n_chains: usize, chain_len: usize, p: f64) -> f64 {
    let r0 = p * (1.0 - p);
    if r0 <= 0.0 {
        return 0.0;
    }
    let n = (n_chains * chain_len) as f64;
    let mut gamma = 0.0;
    for k in 1..chain_len {
        let mut acc = 0.0;
        for c in 0..n_chains {
            let chain = &indicator[c * chain_len..(c + 1) * chain_len];
            acc += (0..chain_len - k).filter(|&t| chain[t] && chain[t + k]).count() as f64;
        }
        let rk = acc / (n - (k * n_chains) as f64) - p * p;
        gamma += 2.0 * (1.0 - k as f64 / chain_len as f64) * rk / r0;
    }
    gamma.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::Marginal;
    use crate::stats::std_normal_cdf;

    fn std_normal_model(dim: usize) -> InputModel {
        InputModel::shared(vec![Marginal::gaussian(0.0, 1.0).unwrap(); dim], 1).unwrap()
    }

    #[test]
    fn linear_tail_probability() {
        let model = std_normal_model(2);
        let cfg = SusConfig { samples_per_level: 10_000, p0: 0.1, max_levels: 10, rho: 0.8, seed: 17 };
        let res = subset_simulation(|x: &[f64]| 3.0 - x[0], &model, &cfg).unwrap();
        let exact = std_normal_cdf(-3.0);
        assert!(res.converged);
        assert!((res.pf - exact).abs() < 3.0 * res.cov * exact, "pf {} cov {}", res.pf, res.cov);
        assert_eq!(res.samples.len(), res.levels.len() * 10_000);
        // every evaluation shows up once: all of level 0, then all but the chain seeds
        let evaluated = 10_000 + (res.levels.len() - 1) * (10_000 - 1000);
        assert_eq!(res.evaluated().count(), evaluated);
        assert!(res.rejected.iter().all(|s| s.value > res.levels[s.level - 1].threshold));
        // thresholds strictly decrease to 0
        let th: Vec<f64> = res.levels.iter().map(|l| l.threshold).collect();
        assert!(th.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(*th.last().unwrap(), 0.0);
        let expected = 0.1f64.powi(res.levels.len() as i32 - 1) * res.levels.last().unwrap().probability;
        assert_eq!(res.pf, expected);
    }

    #[test]
    fn frequent_failure_is_crude_monte_carlo() {
        let model = std_normal_model(1);
        let cfg = SusConfig { samples_per_level: 1000, p0: 0.1, max_levels: 5, rho: 0.8, seed: 3 };
        let q = crate::stats::std_normal_quantile(0.3);
        let res = subset_simulation(|x: &[f64]| x[0] - q, &model, &cfg).unwrap();
        assert_eq!(res.levels.len(), 1);
        let frac = res.samples.iter().filter(|s| s.value <= 0.0).count() as f64 / 1000.0;
        assert_eq!(res.pf, frac);
    }

    #[test]
    fn deterministic_given_seed() {
        let model = std_normal_model(2);
        let cfg = SusConfig { samples_per_level: 2000, p0: 0.1, max_levels: 10, rho: 0.8, seed: 5 };
        let f = |x: &[f64]| 2.5 - (x[0] + x[1]) / 2f64.sqrt();
        let a = subset_simulation(f, &model, &cfg).unwrap();
        let b = subset_simulation(f, &model, &cfg).unwrap();
        assert_eq!(a, b);
        for s in &a.samples {
            assert_eq!(s.value, f(&s.x));
        }
    }

    #[test]
    fn unconverged_reports_bound() {
        let model = std_normal_model(1);
        let cfg = SusConfig { samples_per_level: 1000, p0: 0.1, max_levels: 2, rho: 0.8, seed: 1 };
        let res = subset_simulation(|x: &[f64]| 8.0 - x[0], &model, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.pf, 0.0);
        assert!((res.pf_upper.unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(res.pf_or_bound(), res.pf_upper.unwrap());
    }

    #[test]
    fn nan_is_a_hard_error() {
        let model = std_normal_model(1);
        let cfg = SusConfig { samples_per_level: 1000, p0: 0.1, max_levels: 3, rho: 0.8, seed: 1 };
        let err = subset_simulation(|x: &[f64]| if x[0] > 1.0 { f64::NAN } else { 1.0 }, &model, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SusConfig::learning(0);
        assert!(cfg.validate().is_ok());
        cfg.samples_per_level = 50;
        assert!(cfg.validate().is_err());
        let cfg = SusConfig { p0: 1.0, ..SusConfig::learning(0) };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reliability_index_values() {
        assert!((reliability_index(2.239e-3).unwrap() - 2.842).abs() < 5e-4);
        assert_eq!(reliability_index(0.5).unwrap(), 0.0);
        assert!((reliability_index(3.417e-3).unwrap() - 2.705).abs() < 5e-4);
        assert!(reliability_index(0.0).is_err());
        assert!(reliability_index(1.0).is_err());
        assert!(reliability_index(1e-3).unwrap() > reliability_index(1e-2).unwrap());
    }
}
