//! Hermite polynomial chaos basis and least-angle regression basis selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degree of each univariate factor of a tensor-product polynomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0; dim];
        v[i] = 1;
        MultiIndex(v)
    }

    /// Total degree `|α|₁`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }
}

/// Probabilists' Hermite polynomials normalised to unit variance under the
/// standard normal measure, `ψ_0 … ψ_max_degree` evaluated at `x`.
pub fn hermite_normalized(x: f64, max_degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_degree == 0 {
        return;
    }
    out.push(x);
    // raw recurrence He_{n+1} = x He_n − n He_{n−1}
    for n in 1..max_degree {
        let next = x * out[n] - n as f64 * out[n - 1];
        out.push(next);
    }
    let mut fact = 1.0;
    for (n, v) in out.iter_mut().enumerate().skip(1) {
        fact *= n as f64;
        *v /= fact.sqrt();
    }
}

/// All multi-indices of dimension `dim` with total degree ≤ `max_degree`,
/// ordered by degree then reverse-lexicographically.
pub fn build_pce_basis(dim: usize, max_degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut cur = vec![0u32; dim];
        push_with_degree(&mut out, &mut cur, 0, d);
    }
    out
}

fn push_with_degree(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    if cur.is_empty() {
        if remaining == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k;
        push_with_degree(out, cur, pos + 1, remaining - k);
    }
    cur[pos] = 0;
}

/// Evaluates every multi-index of `basis` at the standardised point `u`.
pub fn eval_basis(basis: &[MultiIndex], u: &[f64], scratch: &mut Vec<Vec<f64>>, out: &mut Vec<f64>) {
    let max_deg = basis.iter().flat_map(|a| a.0.iter().copied()).max().unwrap_or(0) as usize;
    scratch.resize_with(u.len(), Vec::new);
    for (s, &x) in scratch.iter_mut().zip(u) {
        hermite_normalized(x, max_deg, s);
    }
    out.clear();
    out.extend(basis.iter().map(|alpha| {
        alpha
            .0
            .iter()
            .enumerate()
            .map(|(i, &d)| scratch[i][d as usize])
            .product::<f64>()
    }));
}

/// Outcome of a least-angle regression basis selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LarSelection {
    /// Selected multi-indices, constant first, then in LAR entry order.
    pub indices: Vec<MultiIndex>,
    /// Leave-one-out error (relative to the response variance) of the OLS
    /// fit on each prefix of the path; entry `k` uses the constant plus the
    /// first `k` entered regressors.
    pub loo_path: Vec<f64>,
}

/// Selects a sparse basis among `candidates` by least-angle regression.
///
/// `points` are already in standardised (standard normal) coordinates. The
/// constant term is always retained; the path is followed until the basis
/// has `N − 1` terms or the regressors are exhausted, and the prefix with the
/// smallest leave-one-out error wins (ties go to the smaller basis).
pub fn lar_select(candidates: &[MultiIndex], points: &[Vec<f64>], values: &[f64]) -> Result<LarSelection> {
    let n = points.len();
    if n != values.len() {
        return Err(Error::argument("points and values differ in length"));
    }
    if candidates.len() == 1 {
        return Ok(LarSelection { indices: candidates.to_vec(), loo_path: vec![] });
    }
    let dim = points.first().map_or(0, Vec::len);
    let constant = MultiIndex::zero(dim);
    if n < 3 {
        return Err(Error::argument(format!("least-angle regression needs N >= 3, got {n}")));
    }
    let regressors: Vec<&MultiIndex> = candidates.iter().filter(|a| !a.is_constant()).collect();
    if regressors.is_empty() {
        return Ok(LarSelection { indices: vec![constant], loo_path: vec![] });
    }

    // design matrix of the non-constant candidates
    let mut scratch = Vec::new();
    let mut row = Vec::new();
    let owned: Vec<MultiIndex> = regressors.iter().map(|a| (*a).clone()).collect();
    let mut psi = DMatrix::<f64>::zeros(n, owned.len());
    for (i, p) in points.iter().enumerate() {
        eval_basis(&owned, p, &mut scratch, &mut row);
        for (k, v) in row.iter().enumerate() {
            psi[(i, k)] = *v;
        }
    }

    let y = DVector::from_column_slice(values);
    let y_mean = y.mean();
    let yc = y.add_scalar(-y_mean);
    let y_var = yc.norm_squared() / n as f64;

    // centred, unit-norm columns; zero-variance columns are dropped
    let mut cols: Vec<usize> = Vec::new();
    let mut x = DMatrix::<f64>::zeros(n, owned.len());
    for k in 0..owned.len() {
        let c = psi.column(k);
        let mean = c.mean();
        let centred = c.add_scalar(-mean);
        let norm = centred.norm();
        if norm <= 1e-12 * (1.0 + c.norm()) {
            log::warn!("least-angle regression: dropping degenerate regressor {:?}", owned[k].0);
            continue;
        }
        x.set_column(cols.len(), &(centred / norm));
        cols.push(k);
    }
    let x = x.columns(0, cols.len()).into_owned();

    let max_terms = (n - 1).saturating_sub(1).min(cols.len());
    let order = lars_path(&x, &yc, max_terms);

    let mut loo_path = Vec::with_capacity(order.len() + 1);
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..=order.len() {
        let subset: Vec<usize> = order[..k].iter().map(|&c| cols[c]).collect();
        let loo = ols_loo(&psi, &subset, &y) / if y_var > 0.0 { y_var } else { 1.0 };
        loo_path.push(loo);
        if loo < best.0 - 1e-12 {
            best = (loo, k);
        }
    }
    let mut indices = vec![constant];
    indices.extend(order[..best.1].iter().map(|&c| owned[cols[c]].clone()));
    Ok(LarSelection { indices, loo_path })
}

/// Least-angle regression entry order on centred unit-norm columns.
fn lars_path(x: &DMatrix<f64>, y: &DVector<f64>, max_terms: usize) -> Vec<usize> {
    let p = x.ncols();
    let mut active: Vec<usize> = Vec::new();
    let mut mu = DVector::<f64>::zeros(y.len());
    let scale = y.norm().max(1e-300);
    while active.len() < max_terms {
        let r = y - &mu;
        let c = x.transpose() * &r;
        if active.is_empty() {
            let j = (0..p).max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs())).unwrap();
            active.push(j);
        }
        let big_c = active.iter().map(|&j| c[j].abs()).fold(0.0, f64::max);
        if big_c <= 1e-12 * scale {
            break;
        }
        let signs: Vec<f64> = active.iter().map(|&j| c[j].signum()).collect();
        let mut xa = DMatrix::<f64>::zeros(x.nrows(), active.len());
        for (k, &j) in active.iter().enumerate() {
            xa.set_column(k, &(x.column(j) * signs[k]));
        }
        let g = xa.transpose() * &xa;
        let Some(chol) = g.clone().cholesky() else { break };
        let ones = DVector::from_element(active.len(), 1.0);
        let ginv1 = chol.solve(&ones);
        let denom = ones.dot(&ginv1);
        if !(denom > 0.0) {
            break;
        }
        let a_a = denom.powf(-0.5);
        let w = ginv1 * a_a;
        let u = &xa * w;
        let a = x.transpose() * &u;
        let mut step = (big_c / a_a, None);
        for j in 0..p {
            if active.contains(&j) {
                continue;
            }
            for gamma in [(big_c - c[j]) / (a_a - a[j]), (big_c + c[j]) / (a_a + a[j])] {
                if gamma > 1e-14 && gamma < step.0 {
                    step = (gamma, Some(j));
                }
            }
        }
        mu += u * step.0;
        match step.1 {
            Some(j) => active.push(j),
            None => break,
        }
    }
    active
}

/// Mean squared leave-one-out error of the OLS fit on the constant plus the
/// listed columns of `psi`.
fn ols_loo(psi: &DMatrix<f64>, subset: &[usize], y: &DVector<f64>) -> f64 {
    let n = psi.nrows();
    let p = subset.len() + 1;
    let mut a = DMatrix::<f64>::zeros(n, p);
    a.column_mut(0).fill(1.0);
    for (k, &c) in subset.iter().enumerate() {
        a.set_column(k + 1, &psi.column(c));
    }
    let ata = a.transpose() * &a;
    let Some(chol) = ata.cholesky() else { return f64::INFINITY };
    let coef = chol.solve(&(a.transpose() * y));
    let resid = y - &a * coef;
    // leverages h_ii = a_i (AᵀA)⁻¹ a_iᵀ
    let inv = chol.inverse();
    let mut sum = 0.0;
    for i in 0..n {
        let ai = a.row(i);
        let h = (ai * &inv * ai.transpose())[(0, 0)];
        let denom = 1.0 - h;
        if denom <= 1e-10 {
            return f64::INFINITY;
        }
        sum += (resid[i] / denom).powi(2);
    }
    sum / n as f64
}
