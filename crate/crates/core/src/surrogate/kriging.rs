//! Profile-likelihood calibration of universal Kriging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::optim::NelderMead;
use super::pce::{build_pce_basis, eval_basis, lar_select};
use super::{ExperimentalDesign, FitOptions, InputMapping, KernelFamily, KrigingTrend, SurrogateModel, TrendKind, TrendSpec};
use crate::error::{Error, Result};
use crate::linalg::{backward_solve_transpose, cholesky_in_place, dot, forward_solve};

/// Smallest admissible process variance.
const SIGMA2_FLOOR: f64 = 1e-300;

struct Profile {
    neg_log_lik: f64,
    nugget: f64,
    sigma2: f64,
    beta: Vec<f64>,
    chol_r: Vec<f64>,
    ft: Vec<f64>,
    resid_t: Vec<f64>,
    chol_g: Vec<f64>,
}

struct Problem<'a> {
    u: &'a [Vec<f64>],
    f: Vec<f64>,
    p: usize,
    y: &'a [f64],
    kernel: KernelFamily,
    nugget: (f64, f64, f64),
}

impl Problem<'_> {
    fn profile(&self, theta: &[f64]) -> Option<Profile> {
        let n = self.u.len();
        let p = self.p;
        let inv_theta: Vec<f64> = theta.iter().map(|t| 1.0 / t).collect();
        let mut base = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                base[i * n + j] = self.kernel.corr_between(&self.u[i], &self.u[j], &inv_theta);
            }
        }
        let (start, factor, cap) = self.nugget;
        let mut nugget = start;
        let chol_r = loop {
            let mut r = base.clone();
            for i in 0..n {
                r[i * n + i] = 1.0 + nugget;
            }
            if cholesky_in_place(&mut r, n) {
                break r;
            }
            nugget *= factor;
            if nugget > cap * (1.0 + 1e-12) {
                return None;
            }
        };

        let mut ft = vec![0.0; n * p];
        let mut col = vec![0.0; n];
        for k in 0..p {
            for i in 0..n {
                col[i] = self.f[i * p + k];
            }
            forward_solve(&chol_r, n, &mut col);
            for i in 0..n {
                ft[i * p + k] = col[i];
            }
        }
        let mut yt = self.y.to_vec();
        forward_solve(&chol_r, n, &mut yt);

        let mut g = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for a in 0..p {
            for b in 0..=a {
                g[a * p + b] = (0..n).map(|i| ft[i * p + a] * ft[i * p + b]).sum();
            }
            rhs[a] = (0..n).map(|i| ft[i * p + a] * yt[i]).sum();
        }
        if !cholesky_in_place(&mut g, p) {
            return None;
        }
        let mut beta = rhs;
        crate::linalg::cholesky_solve(&g, p, &mut beta);
        let resid_t: Vec<f64> = (0..n).map(|i| yt[i] - dot(&ft[i * p..(i + 1) * p], &beta)).collect();
        let sigma2 = (dot(&resid_t, &resid_t) / n as f64).max(SIGMA2_FLOOR);
        let log_det: f64 = (0..n).map(|i| chol_r[i * n + i].ln()).sum::<f64>();
        let neg_log_lik = 0.5 * n as f64 * sigma2.ln() + log_det;
        if !neg_log_lik.is_finite() {
            return None;
        }
        Some(Profile { neg_log_lik, nugget, sigma2, beta, chol_r, ft, resid_t, chol_g: g })
    }
}

/// Fits universal Kriging with a constant or linear trend.
pub fn fit_kriging(ed: &ExperimentalDesign, trend: KrigingTrend, opts: &FitOptions) -> Result<SurrogateModel> {
    let spec = match trend {
        KrigingTrend::Constant => TrendSpec::constant(ed.dim()),
        KrigingTrend::Linear => TrendSpec::linear(ed.dim()),
    };
    fit_with_trend(ed, spec, opts)
}

/// Fits PC-Kriging: a least-angle-regression-selected Hermite trend of total
/// degree ≤ `max_degree`, then Kriging calibration with that trend.
pub fn fit_pck(ed: &ExperimentalDesign, max_degree: u32, opts: &FitOptions) -> Result<SurrogateModel> {
    let mapping = resolve_mapping(ed, opts)?;
    let u: Vec<Vec<f64>> = ed.points().iter().map(|x| mapping.apply(x)).collect::<Result<_>>()?;
    let candidates = build_pce_basis(ed.dim(), max_degree);
    let mut indices = if ed.len() >= 3 {
        lar_select(&candidates, &u, ed.values())?.indices
    } else {
        vec![super::MultiIndex::zero(ed.dim())]
    };
    // keep two residual degrees of freedom for the likelihood
    indices.truncate(ed.len().saturating_sub(2).max(1));
    let trend = TrendSpec { kind: TrendKind::Pce { max_degree }, indices };
    let opts = FitOptions { mapping: Some(mapping), ..opts.clone() };
    fit_with_trend(ed, trend, &opts)
}

fn resolve_mapping(ed: &ExperimentalDesign, opts: &FitOptions) -> Result<InputMapping> {
    let mapping = opts.mapping.clone().unwrap_or_else(|| InputMapping::from_data(ed.points()));
    if mapping.dim() != ed.dim() {
        return Err(Error::argument(format!(
            "input mapping has dimension {}, design has {}",
            mapping.dim(),
            ed.dim()
        )));
    }
    Ok(mapping)
}

/// Fits universal Kriging with an explicit trend basis.
pub fn fit_with_trend(ed: &ExperimentalDesign, trend: TrendSpec, opts: &FitOptions) -> Result<SurrogateModel> {
    let n = ed.len();
    let p = trend.len();
    if p == 0 {
        return Err(Error::argument("trend basis is empty"));
    }
    if n < p + 2 {
        return Err(Error::argument(format!("{n} design points cannot support a trend of {p} terms (need N >= p + 2)")));
    }
    let mapping = resolve_mapping(ed, opts)?;
    let u: Vec<Vec<f64>> = ed.points().iter().map(|x| mapping.apply(x)).collect::<Result<_>>()?;
    for i in 0..n {
        for j in 0..i {
            let d = u[i].iter().zip(&u[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if d < opts.duplicate_tol {
                return Err(Error::argument(format!("design points {j} and {i} are duplicates")));
            }
        }
    }
    let mut f = Vec::with_capacity(n * p);
    let (mut herm, mut row) = (Vec::new(), Vec::new());
    for ui in &u {
        eval_basis(&trend.indices, ui, &mut herm, &mut row);
        f.extend_from_slice(&row);
    }
    let problem = Problem { u: &u, f, p, y: ed.values(), kernel: opts.kernel, nugget: opts.nugget };

    let (theta, mut prof) = match &opts.fixed {
        Some(fixed) => {
            if fixed.theta.len() != ed.dim() || fixed.theta.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::argument("fixed length-scales must be positive, one per dimension"));
            }
            let prof = problem.profile(&fixed.theta).ok_or_else(conditioning)?;
            (fixed.theta.clone(), prof)
        }
        None => optimize_theta(&problem, ed.dim(), opts)?,
    };
    if let Some(s2) = opts.fixed.as_ref().and_then(|f| f.sigma2) {
        if !(s2 > 0.0) {
            return Err(Error::argument("fixed process variance must be positive"));
        }
        prof.sigma2 = s2;
    }
    let mut alpha = prof.resid_t;
    backward_solve_transpose(&prof.chol_r, n, &mut alpha);
    Ok(SurrogateModel {
        mapping,
        trend,
        coefficients: prof.beta,
        kernel: opts.kernel,
        inv_theta: theta.iter().map(|t| 1.0 / t).collect(),
        theta,
        sigma2: prof.sigma2,
        nugget: prof.nugget,
        log_likelihood: -prof.neg_log_lik,
        design: ed.clone(),
        u_train: u,
        chol_r: prof.chol_r,
        ft: prof.ft,
        alpha,
        chol_g: prof.chol_g,
    })
}

fn conditioning() -> Error {
    Error::Conditioning("correlation matrix not positive definite even at the maximum nugget".into())
}

fn optimize_theta(problem: &Problem<'_>, dim: usize, opts: &FitOptions) -> Result<(Vec<f64>, Profile)> {
    let (lo, hi) = (opts.theta_bounds.0.ln(), opts.theta_bounds.1.ln());
    if !(lo < hi) {
        return Err(Error::argument("length-scale bounds must satisfy 0 < lower < upper"));
    }
    let max_evals = if opts.max_evals_per_start > 0 { opts.max_evals_per_start } else { 60 + 40 * dim };
    let nm = NelderMead { lower: vec![lo; dim], upper: vec![hi; dim], max_evals, f_tol: 1e-10, x_tol: 1e-4 };
    let objective = |log_theta: &[f64]| {
        let theta: Vec<f64> = log_theta.iter().map(|v| v.exp()).collect();
        problem.profile(&theta).map_or(f64::INFINITY, |p| p.neg_log_lik)
    };

    // space-filling starts over the log box
    let starts = opts.n_starts.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut columns: Vec<Vec<usize>> = (0..dim)
        .map(|_| {
            let mut v: Vec<usize> = (0..starts).collect();
            rand::seq::SliceRandom::shuffle(v.as_mut_slice(), &mut rng);
            v
        })
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in 0..starts {
        let x0: Vec<f64> = columns
            .iter_mut()
            .map(|c| lo + (c[s] as f64 + rng.random::<f64>()) / starts as f64 * (hi - lo))
            .collect();
        let (x, fx, _) = nm.minimize(objective, &x0, 0.25 * (hi - lo));
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    let (x, fx) = best.unwrap();
    if !fx.is_finite() {
        return Err(conditioning());
    }
    // restart from the incumbent with a small simplex
    let (x, _, _) = nm.minimize(objective, &x, 0.05 * (hi - lo));
    let theta: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    let prof = problem.profile(&theta).ok_or_else(conditioning)?;
    Ok((theta, prof))
}

/// Profile log-likelihood of `model`'s design and trend at other length-scales.
pub fn profile_log_likelihood(model: &SurrogateModel, theta: &[f64]) -> Result<f64> {
    if theta.len() != model.dim() {
        return Err(Error::argument("length-scale vector has the wrong dimension"));
    }
    let p = model.trend.len();
    let mut f = Vec::with_capacity(model.u_train.len() * p);
    let (mut herm, mut row) = (Vec::new(), Vec::new());
    for ui in &model.u_train {
        eval_basis(&model.trend.indices, ui, &mut herm, &mut row);
        f.extend_from_slice(&row);
    }
    let problem = Problem {
        u: &model.u_train,
        f,
        p,
        y: model.design.values(),
        kernel: model.kernel,
        nugget: (model.nugget, 10.0, 1e-4),
    };
    problem.profile(theta).map(|p| -p.neg_log_lik).ok_or_else(conditioning)
}
