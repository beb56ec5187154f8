//! The active-learning loop: fit, estimate, check, score, cluster, route, enrich.

mod selection;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{LimitState, ProblemSpec};
use crate::clustering::{dbscan, default_params};
use crate::error::{Error, Result};
use crate::input::{lhs_sample, InputModel};
use crate::sensitivity::{fallback_limit_state, total_sobol};
use crate::stats::derive_seed;
use crate::subset::{reliability_index, subset_simulation, SusConfig};
use crate::surrogate::{
    fit_kriging, fit_pck, FitOptions, InputMapping, KernelFamily, KrigingTrend, SurrogateDump, SurrogateModel,
};
pub use selection::{
    check_convergence, component_predictions, filter_candidates, select_enrichment, usys, usys_of, ConvergenceTracker,
    Selection,
};
use crate::surrogate::ExperimentalDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Kriging,
    #[default]
    Pck,
}

/// Surrogate family of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Maximum total degree of the polynomial trend (PC-Kriging only).
    pub degree: u32,
    pub kernel: KernelFamily,
    /// Trend of plain Kriging.
    pub trend: KrigingTrend,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self { kind: SurrogateKind::Pck, degree: 3, kernel: KernelFamily::Matern52, trend: KrigingTrend::Linear }
    }
}

impl SurrogateSpec {
    pub fn kriging() -> Self {
        Self { kind: SurrogateKind::Kriging, ..Self::default() }
    }

    pub fn pck(degree: u32) -> Self {
        Self { kind: SurrogateKind::Pck, degree, ..Self::default() }
    }

    /// Smallest design the fit accepts for `dim` inputs.
    pub fn min_design_size(&self, dim: usize) -> usize {
        match (self.kind, self.trend) {
            (SurrogateKind::Pck, _) => 3,
            (SurrogateKind::Kriging, KrigingTrend::Constant) => 3,
            (SurrogateKind::Kriging, KrigingTrend::Linear) => dim + 3,
        }
    }

    /// Default initial design size: `2 M + 1`, raised to the fit's minimum.
    pub fn default_design_size(&self, dim: usize) -> usize {
        (2 * dim + 1).max(self.min_design_size(dim))
    }
}

/// The four independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    /// Initial designs and likelihood multistarts.
    pub global: u64,
    pub sus: u64,
    pub usys: u64,
    pub sobol: u64,
}

impl Seeds {
    /// Splits one seed into four with splitmix64: stream `k` gets
    /// `derive_seed(seed, [k])` for `k = 0..4` in field order.
    pub fn from_single(seed: u64) -> Self {
        Self {
            global: derive_seed(seed, &[0]),
            sus: derive_seed(seed, &[1]),
            usys: derive_seed(seed, &[2]),
            sobol: derive_seed(seed, &[3]),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_single(0)
    }
}

/// Settings of one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Quantile level of the candidate filter.
    pub alpha: f64,
    /// Monte Carlo draws per system deviation number.
    pub n_usys: usize,
    /// Convergence threshold on the relative change of β.
    pub eps_bar: f64,
    /// Consecutive iterations below `eps_bar` needed to stop.
    pub streak: usize,
    /// Enrichment cap per iteration; the input dimension when absent.
    pub n_max: Option<usize>,
    pub max_iterations: usize,
    /// One entry for all components, or one per component.
    pub surrogates: Vec<SurrogateSpec>,
    /// Initial design sizes; `2 M_j + 1` when absent.
    pub initial_sizes: Option<Vec<usize>>,
    /// Samples of the total Sobol' estimator.
    pub n_sobol: usize,
    /// Minimum distance between design points in mapped coordinates.
    pub duplicate_tol: f64,
    pub sus: SusConfig,
    pub sus_final: SusConfig,
    /// Independent repetitions of the final estimate, averaged.
    pub final_repeats: usize,
    pub seeds: Seeds,
    /// Monte Carlo size for per-component failure probabilities of the final
    /// surrogates; 0 skips them.
    pub component_mc: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self::with_seeds(Seeds::default())
    }
}

impl LearnConfig {
    pub fn with_seeds(seeds: Seeds) -> Self {
        Self {
            alpha: 0.01,
            n_usys: 256,
            eps_bar: 5e-3,
            streak: 3,
            n_max: None,
            max_iterations: 100,
            surrogates: vec![SurrogateSpec::default()],
            initial_sizes: None,
            n_sobol: 4096,
            duplicate_tol: 1e-8,
            sus: SusConfig::learning(seeds.sus),
            sus_final: SusConfig::final_estimate(derive_seed(seeds.sus, &[0xf1a1])),
            final_repeats: 10,
            seeds,
            component_mc: 0,
        }
    }

    pub fn surrogate_for(&self, j: usize) -> SurrogateSpec {
        if self.surrogates.len() == 1 {
            self.surrogates[0]
        } else {
            self.surrogates[j]
        }
    }

    pub fn validate(&self, problem: &ProblemSpec) -> Result<()> {
        let m = problem.n_components();
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::argument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.n_usys < 16 {
            return Err(Error::argument("n_usys must be >= 16"));
        }
        if !(self.eps_bar > 0.0) {
            return Err(Error::argument("eps_bar must be positive"));
        }
        if self.streak == 0 || self.max_iterations == 0 || self.n_max == Some(0) || self.final_repeats == 0 {
            return Err(Error::argument("streak, max_iterations, n_max and final_repeats must be >= 1"));
        }
        if self.surrogates.len() != 1 && self.surrogates.len() != m {
            return Err(Error::argument(format!("give 1 or {m} surrogate specifications")));
        }
        if self.n_sobol < 256 {
            return Err(Error::argument("n_sobol must be >= 256"));
        }
        if let Some(sizes) = &self.initial_sizes {
            if sizes.len() != m {
                return Err(Error::argument(format!("initial_sizes needs {m} entries")));
            }
            for (j, &n) in sizes.iter().enumerate() {
                let min = self.surrogate_for(j).min_design_size(problem.input.component_map(j).len());
                if n < min {
                    return Err(Error::argument(format!("initial_sizes[{j}] = {n} is below the minimum {min} of its surrogate")));
                }
            }
        }
        self.sus.validate()?;
        self.sus_final.validate()
    }
}

/// One enrichment: where, why, and which component was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub u_sys: f64,
    pub cluster: Option<usize>,
    pub sobol: Vec<f64>,
    pub component: usize,
    /// Routed by the deviation-number fallback instead of the Sobol' indices.
    pub fallback: bool,
    pub value: f64,
}

/// Summary of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub pf: f64,
    pub beta: f64,
    pub sus_cov: f64,
    pub epsilon: Option<f64>,
    pub evaluations: usize,
    pub candidates: usize,
    pub clusters: usize,
    pub noise: usize,
    pub added: usize,
    pub alpha: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub converged: bool,
    pub pf: f64,
    pub beta: f64,
    pub cov: f64,
    pub iterations: usize,
    /// True limit-state evaluations per component.
    pub evaluations: Vec<usize>,
    pub total_evaluations: usize,
    pub initial_sizes: Vec<usize>,
    pub enrichments: Vec<EnrichmentRecord>,
    pub history: Vec<IterationRecord>,
    /// Failure probabilities of the individual final surrogates, when requested.
    pub component_pf: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    pub surrogates: Vec<SurrogateDump>,
    pub config: LearnConfig,
    pub seeds: Seeds,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    /// Enrichments received by component `j`.
    pub fn enrichments_of(&self, j: usize) -> usize {
        self.enrichments.iter().filter(|e| e.component == j).count()
    }

    /// Relative error of β against a reference value.
    pub fn beta_error(&self, reference: f64) -> f64 {
        (self.beta - reference).abs() / reference
    }
}

/// A true limit state that counts its evaluations and rejects non-finite output.
pub struct CountingLimitState {
    inner: LimitState,
    count: AtomicUsize,
}

impl CountingLimitState {
    pub fn new(inner: LimitState) -> Self {
        Self { inner, count: AtomicUsize::new(0) }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.count.fetch_add(1, Ordering::Relaxed);
        let y = (self.inner.f)(x);
        if !y.is_finite() {
            return Err(Error::NonFinite { value: y, point: x.to_vec(), context: format!("limit state {}", self.inner.id) });
        }
        Ok(y)
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

/// Fits the surrogate of component `j` on `ed`.
pub fn fit_component(
    spec: SurrogateSpec,
    input: &InputModel,
    j: usize,
    ed: &ExperimentalDesign,
    seed: u64,
    duplicate_tol: f64,
) -> Result<SurrogateModel> {
    let marginals = input.component_marginals(j);
    let mapping = match spec.kind {
        SurrogateKind::Kriging => InputMapping::from_moments(&marginals),
        SurrogateKind::Pck => InputMapping::Isoprobabilistic(marginals),
    };
    let opts = FitOptions { kernel: spec.kernel, mapping: Some(mapping), seed, duplicate_tol, ..FitOptions::default() };
    match spec.kind {
        SurrogateKind::Kriging => fit_kriging(ed, spec.trend, &opts),
        SurrogateKind::Pck => fit_pck(ed, spec.degree, &opts),
    }
}

/// Mean prediction of the composed surrogate system.
pub fn system_mean(models: &[SurrogateModel], input: &InputModel, problem: &ProblemSpec, x: &[f64]) -> f64 {
    let z: Vec<f64> = models
        .iter()
        .enumerate()
        .map(|(j, m)| m.predict_mean(&input.project(x, j)).unwrap_or(f64::NAN))
        .collect();
    problem.composition.eval(&z)
}

fn beta_of(pf: f64) -> f64 {
    reliability_index(pf.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)).unwrap_or(f64::NAN)
}

struct Learner<'a> {
    problem: &'a ProblemSpec,
    cfg: &'a LearnConfig,
    lsfs: Vec<CountingLimitState>,
    designs: Vec<ExperimentalDesign>,
    models: Vec<SurrogateModel>,
    enrichments: Vec<EnrichmentRecord>,
    warnings: Vec<String>,
}

impl Learner<'_> {
    fn input(&self) -> &InputModel {
        &self.problem.input
    }

    fn refit(&mut self, j: usize) -> Result<()> {
        let seed = derive_seed(self.cfg.seeds.global, &[2, j as u64, self.designs[j].len() as u64]);
        self.models[j] =
            fit_component(self.cfg.surrogate_for(j), self.input(), j, &self.designs[j], seed, self.cfg.duplicate_tol)?;
        Ok(())
    }

    /// Components ordered by decreasing total index, with the index used.
    fn route(&self, x: &[f64], iteration: usize, k: usize) -> Result<(Vec<f64>, Vec<usize>, bool)> {
        let z = component_predictions(&self.models, self.input(), x)?;
        let seed = derive_seed(self.cfg.seeds.sobol, &[iteration as u64, k as u64]);
        match total_sobol(&self.problem.composition, &z, self.cfg.n_sobol, seed) {
            Ok(s) => {
                let mut order: Vec<usize> = (0..s.len()).filter(|&j| s[j] > 0.0).collect();
                order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
                Ok((s, order, false))
            }
            Err(Error::DegenerateVariance(_)) => {
                let s = vec![0.0; z.len()];
                Ok((s, fallback_limit_state(&z).into_iter().collect(), true))
            }
            Err(e) => Err(e),
        }
    }
}

/// Runs the active-learning analysis of `problem`.
pub fn run(problem: &ProblemSpec, cfg: &LearnConfig) -> Result<RunReport> {
    cfg.validate(problem)?;
    let start = Instant::now();
    let input = &problem.input;
    let m = problem.n_components();
    let n_max = cfg.n_max.unwrap_or(input.dim());
    let bounds = input.initial_design_bounds(input.default_bounds_mode())?;

    let lsfs: Vec<CountingLimitState> = problem.limit_states.iter().cloned().map(CountingLimitState::new).collect();
    let mut designs = Vec::with_capacity(m);
    let mut initial_sizes = Vec::with_capacity(m);
    for (j, lsf) in lsfs.iter().enumerate() {
        let map = input.component_map(j);
        let n0 = cfg.initial_sizes.as_ref().map_or(cfg.surrogate_for(j).default_design_size(map.len()), |s| s[j]);
        let pts = lhs_sample(&bounds.select(map), n0, derive_seed(cfg.seeds.global, &[1, j as u64]))?;
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.0).collect();
        let vals = pts.iter().map(|p| lsf.eval(p)).collect::<Result<Vec<_>>>()?;
        designs.push(ExperimentalDesign::new(pts, vals)?);
        initial_sizes.push(n0);
    }
    let mut learner = Learner { problem, cfg, lsfs, designs, models: Vec::with_capacity(m), enrichments: Vec::new(), warnings: Vec::new() };
    for j in 0..m {
        let seed = derive_seed(cfg.seeds.global, &[2, j as u64, learner.designs[j].len() as u64]);
        learner.models.push(fit_component(cfg.surrogate_for(j), input, j, &learner.designs[j], seed, cfg.duplicate_tol)?);
    }

    let mut tracker = ConvergenceTracker::default();
    let mut history = Vec::new();
    let mut alpha = cfg.alpha;
    let mut alpha_doubled = false;
    let mut converged = false;

    for iteration in 0..cfg.max_iterations {
        let models = &learner.models;
        let t0 = Instant::now();
        let sus = subset_simulation(|x| system_mean(models, input, problem, x), input, &cfg.sus)?;
        log::debug!("subset simulation: {:.3}s, {} samples", t0.elapsed().as_secs_f64(), sus.samples.len());
        let pf = sus.pf_or_bound();
        let beta = beta_of(pf);
        let epsilon = tracker.push(beta);
        let mut record = IterationRecord {
            iteration,
            pf,
            beta,
            sus_cov: sus.cov,
            epsilon,
            evaluations: learner.lsfs.iter().map(CountingLimitState::count).sum(),
            candidates: 0,
            clusters: 0,
            noise: 0,
            added: 0,
            alpha,
        };
        log::info!("iteration {iteration}: pf = {pf:.4e}, beta = {beta:.5}, eps = {epsilon:?}");
        if check_convergence(&tracker, cfg.eps_bar, cfg.streak) {
            converged = true;
            history.push(record);
            break;
        }
        if iteration + 1 == cfg.max_iterations {
            history.push(record);
            break;
        }

        // candidate pool: every evaluated point of every level
        let pool: Vec<&crate::subset::SusSample> = sus.evaluated().collect();
        let scores: Vec<f64> = pool
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                usys(models, input, &problem.composition, &s.x, cfg.n_usys, derive_seed(cfg.seeds.usys, &[iteration as u64, i as u64]))
            })
            .collect::<Result<_>>()?;
        log::debug!("scored {} candidates: {:.3}s", pool.len(), t0.elapsed().as_secs_f64());
        let kept = filter_candidates(&scores, alpha);
        let kept_u: Vec<Vec<f64>> = kept.iter().map(|&i| pool[i].u.clone()).collect();
        let kept_scores: Vec<f64> = kept.iter().map(|&i| scores[i]).collect();
        let (eps, n_min) = default_params(&kept_u);
        let labels = dbscan(&kept_u, eps, n_min);
        let chosen = select_enrichment(&kept_scores, &labels, n_max);
        log::debug!("{} candidates, {} clusters: {:.3}s", kept.len(), labels.n_clusters, t0.elapsed().as_secs_f64());
        record.candidates = kept.len();
        record.clusters = labels.n_clusters;
        record.noise = labels.noise_count();
        let points: Vec<(Vec<f64>, f64, Option<usize>)> =
            chosen.iter().map(|s| (pool[kept[s.candidate]].x.clone(), kept_scores[s.candidate], s.cluster)).collect();
        drop(sus);

        let mut added = 0;
        for (k, (x, u_sys, cluster)) in points.into_iter().enumerate() {
            let (sobol, order, fallback) = learner.route(&x, iteration, k)?;
            let mut target = None;
            for &j in &order {
                let xj = input.project(&x, j);
                if learner.models[j].is_near_design(&xj, cfg.duplicate_tol)? {
                    log::debug!("candidate {x:?} already in the design of g{}", j + 1);
                    continue;
                }
                target = Some((j, xj));
                break;
            }
            let Some((j, xj)) = target else {
                learner.warnings.push(format!("iteration {iteration}: dropped candidate {x:?}, duplicate for every routable component"));
                continue;
            };
            let value = learner.lsfs[j].eval(&xj)?;
            learner.designs[j].push(xj, value)?;
            learner.refit(j)?;
            log::debug!("enriched g{}: {:.3}s", j + 1, t0.elapsed().as_secs_f64());
            learner.enrichments.push(EnrichmentRecord { iteration, point: x, u_sys, cluster, sobol, component: j, fallback, value });
            added += 1;
        }
        record.added = added;
        log::debug!("iteration {iteration} done: {:.3}s", t0.elapsed().as_secs_f64());
        history.push(record);
        if added == 0 {
            if !alpha_doubled {
                alpha = (2.0 * alpha).min(1.0);
                alpha_doubled = true;
                learner.warnings.push(format!("iteration {iteration}: no new points, quantile level raised to {alpha}"));
            } else {
                learner.warnings.push(format!("iteration {iteration}: no new points"));
            }
        }
    }

    let t0 = Instant::now();
    let (pf, cov) = final_estimate(&learner.models, problem, cfg, &mut learner.warnings)?;
    log::debug!("final estimate: {:.3}s", t0.elapsed().as_secs_f64());
    let models = &learner.models;
    if !converged {
        learner.warnings.push(format!("not converged after {} iterations", cfg.max_iterations));
    }
    let component_pf = (cfg.component_mc > 0).then(|| component_failure_probabilities(models, input, cfg.component_mc, derive_seed(cfg.seeds.sus, &[0xc0])));
    let evaluations: Vec<usize> = learner.lsfs.iter().map(CountingLimitState::count).collect();
    Ok(RunReport {
        problem: problem.name.clone(),
        converged,
        pf,
        beta: beta_of(pf),
        cov,
        iterations: history.len(),
        total_evaluations: evaluations.iter().sum(),
        evaluations,
        initial_sizes,
        enrichments: learner.enrichments,
        history,
        component_pf,
        warnings: learner.warnings,
        surrogates: learner.models.iter().map(SurrogateModel::dump).collect(),
        config: cfg.clone(),
        seeds: cfg.seeds,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Average of `final_repeats` independent fine subset simulations on the
/// surrogates. With several repetitions the CoV comes from their spread.
fn final_estimate(models: &[SurrogateModel], problem: &ProblemSpec, cfg: &LearnConfig, warnings: &mut Vec<String>) -> Result<(f64, f64)> {
    let input = &problem.input;
    let mut runs = Vec::with_capacity(cfg.final_repeats);
    for r in 0..cfg.final_repeats {
        let sus_cfg = SusConfig { seed: derive_seed(cfg.sus_final.seed, &[r as u64]), ..cfg.sus_final };
        let res = subset_simulation(|x| system_mean(models, input, problem, x), input, &sus_cfg)?;
        if !res.converged {
            warnings.push(format!("final subset simulation {r} reached max_levels; its pf is an upper bound"));
        }
        runs.push((res.pf_or_bound(), res.cov));
    }
    let k = runs.len() as f64;
    let pf = runs.iter().map(|r| r.0).sum::<f64>() / k;
    let cov = if runs.len() == 1 {
        runs[0].1
    } else {
        let var = runs.iter().map(|r| (r.0 - pf).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt() / pf
    };
    Ok((pf, cov))
}

/// Crude Monte Carlo failure probability of each surrogate on its own.
pub fn component_failure_probabilities(models: &[SurrogateModel], input: &InputModel, n: usize, seed: u64) -> Vec<f64> {
    let xs = input.sample(n, seed);
    (0..models.len())
        .map(|j| {
            let fails = xs
                .par_iter()
                .filter(|x| models[j].predict_mean(&input.project(&x.0, j)).is_ok_and(|g| g <= 0.0))
                .count();
            fails as f64 / n as f64
        })
        .collect()
}
