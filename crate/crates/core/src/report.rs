//! Report documents: a run together with the configuration that produced it,
//! plus plain reference estimates and repeated-run summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::learning::{run, RunReport};
use crate::stats::{derive_seed, five_number_summary};
use crate::subset::{reliability_index, subset_simulation, SusConfig};

/// A run and the configuration echo that reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config: AnalysisConfig,
    pub report: RunReport,
}

impl ReportDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::config(e.path().to_string(), e.into_inner().to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Iteration history as CSV with 17 significant digits.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,pf,beta,sus_cov,epsilon,evaluations,candidates,clusters,noise,added,alpha\n");
        for h in &self.report.history {
            let eps = h.epsilon.map_or(String::new(), |e| format!("{e:.16e}"));
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{},{},{},{},{},{},{:.16e}",
                h.iteration, h.pf, h.beta, h.sus_cov, eps, h.evaluations, h.candidates, h.clusters, h.noise, h.added, h.alpha
            );
        }
        out
    }
}

/// Runs the analysis described by `config`. The echoed configuration carries
/// the explicit seeds, so re-running it reproduces the report.
pub fn run_config(config: &AnalysisConfig) -> Result<ReportDocument> {
    let (problem, cfg) = config.build()?;
    let report = run(&problem, &cfg)?;
    let mut echo = config.clone();
    echo.seeds = Some(config.effective_seeds());
    echo.seed = None;
    Ok(ReportDocument { config: echo, report })
}

/// Subset simulation on the true limit states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEstimate {
    pub problem: String,
    pub pf: f64,
    pub beta: f64,
    /// Spread of the repeats when `repeats > 1`, otherwise the estimator's own CoV.
    pub cov: f64,
    pub repeats: usize,
    pub samples_per_level: usize,
    pub evaluations: usize,
    pub estimates: Vec<f64>,
}

/// Averages `repeats` independent subset simulations of the system limit state,
/// each with the `sus_final` settings of `config`.
pub fn reference_estimate(config: &AnalysisConfig, repeats: usize) -> Result<ReferenceEstimate> {
    if repeats == 0 {
        return Err(Error::argument("repeats must be >= 1"));
    }
    let (problem, cfg) = config.build()?;
    let mut estimates = Vec::with_capacity(repeats);
    let mut evaluations = 0;
    let mut own_cov = 0.0;
    for r in 0..repeats {
        let sus = SusConfig { seed: derive_seed(cfg.sus_final.seed, &[0x5e4, r as u64]), ..cfg.sus_final };
        let res = subset_simulation(|x| problem.system_value(x), &problem.input, &sus)?;
        evaluations += res.evaluated().count();
        own_cov = res.cov;
        estimates.push(res.pf);
    }
    let pf = estimates.iter().sum::<f64>() / repeats as f64;
    let cov = if repeats > 1 {
        let var = estimates.iter().map(|p| (p - pf).powi(2)).sum::<f64>() / (repeats - 1) as f64;
        var.sqrt() / pf / (repeats as f64).sqrt()
    } else {
        own_cov
    };
    Ok(ReferenceEstimate {
        problem: problem.name.clone(),
        pf,
        beta: reliability_index(pf)?,
        cov,
        repeats,
        samples_per_level: cfg.sus_final.samples_per_level,
        evaluations,
        estimates,
    })
}

/// One seed of a repeated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRow {
    pub seed: u64,
    pub converged: bool,
    pub pf: f64,
    pub beta: f64,
    /// Relative β error against the reference, when one is known.
    pub beta_error: Option<f64>,
    pub iterations: usize,
    pub evaluations: Vec<usize>,
    pub total_evaluations: usize,
}

/// Minimum, quartiles and maximum of one quantity across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub quantity: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub problem: String,
    pub reference_beta: Option<f64>,
    pub runs: Vec<RepeatRow>,
    pub spreads: Vec<Spread>,
}

impl RepeatSummary {
    pub fn spread(&self, quantity: &str) -> Option<&Spread> {
        self.spreads.iter().find(|s| s.quantity == quantity)
    }

    /// Fixed-width table of the spreads.
    pub fn table(&self) -> String {
        let mut out = format!("{} ({} runs)\n", self.problem, self.runs.len());
        let _ = writeln!(out, "{:<14} {:>12} {:>12} {:>12} {:>12} {:>12}", "quantity", "min", "q1", "median", "q3", "max");
        for s in &self.spreads {
            let _ = writeln!(out, "{:<14} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>12.5}", s.quantity, s.min, s.q1, s.median, s.q3, s.max);
        }
        out
    }

    /// One row per seed with 17 significant digits.
    pub fn csv(&self) -> String {
        let m = self.runs.first().map_or(0, |r| r.evaluations.len());
        let mut out = String::from("seed,converged,pf,beta,beta_error,iterations,total_evaluations");
        for j in 0..m {
            let _ = write!(out, ",evaluations_g{}", j + 1);
        }
        out.push('\n');
        for r in &self.runs {
            let err = r.beta_error.map_or(String::new(), |e| format!("{e:.16e}"));
            let _ = write!(out, "{},{},{:.16e},{:.16e},{},{},{}", r.seed, r.converged, r.pf, r.beta, err, r.iterations, r.total_evaluations);
            for n in &r.evaluations {
                let _ = write!(out, ",{n}");
            }
            out.push('\n');
        }
        out
    }
}

/// Runs `config` with seeds `first_seed .. first_seed + n` and summarises the spread.
pub fn repeat_runs(config: &AnalysisConfig, n: usize, first_seed: u64) -> Result<RepeatSummary> {
    if n == 0 {
        return Err(Error::argument("the number of repetitions must be >= 1"));
    }
    let problem = config.build_problem()?;
    let reference_beta = problem.reference.map(|r| r.beta);
    let mut runs = Vec::with_capacity(n);
    for k in 0..n as u64 {
        let seed = first_seed + k;
        let mut c = config.clone();
        c.set_seed(seed);
        let doc = run_config(&c)?;
        let r = &doc.report;
        runs.push(RepeatRow {
            seed,
            converged: r.converged,
            pf: r.pf,
            beta: r.beta,
            beta_error: reference_beta.map(|b| r.beta_error(b)),
            iterations: r.iterations,
            evaluations: r.evaluations.clone(),
            total_evaluations: r.total_evaluations,
        });
    }
    let mut spreads = Vec::new();
    let mut push = |name: String, values: Vec<f64>| {
        if let Some([min, q1, median, q3, max]) = five_number_summary(&values) {
            spreads.push(Spread { quantity: name, min, q1, median, q3, max });
        }
    };
    push("beta".into(), runs.iter().map(|r| r.beta).collect());
    if reference_beta.is_some() {
        push("beta_error".into(), runs.iter().filter_map(|r| r.beta_error).collect());
    }
    push("evaluations".into(), runs.iter().map(|r| r.total_evaluations as f64).collect());
    for j in 0..problem.n_components() {
        push(format!("evaluations_g{}", j + 1), runs.iter().map(|r| r.evaluations[j] as f64).collect());
    }
    push("iterations".into(), runs.iter().map(|r| r.iterations as f64).collect());
    Ok(RepeatSummary { problem: problem.name.clone(), reference_beta, runs, spreads })
}
