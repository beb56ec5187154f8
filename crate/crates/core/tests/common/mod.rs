//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sysrel::clustering::ClusterLabels;
use sysrel::input::{lhs_sample, Hypercube};
use sysrel::surrogate::{ExperimentalDesign, InputMapping, KernelFamily, MultiIndex};

pub fn design<F: Fn(&[f64]) -> f64>(f: F, n: usize, dim: usize, half: f64, seed: u64) -> ExperimentalDesign {
    let cube = Hypercube { lower: vec![-half; dim], upper: vec![half; dim] };
    let pts: Vec<Vec<f64>> = lhs_sample(&cube, n, seed).unwrap().into_iter().map(|p| p.0).collect();
    let vals = pts.iter().map(|p| f(p)).collect();
    ExperimentalDesign::new(pts, vals).unwrap()
}

pub fn identity(dim: usize) -> InputMapping {
    InputMapping::Affine { shift: vec![0.0; dim], scale: vec![1.0; dim] }
}

pub fn hermite(n: u32, x: f64) -> f64 {
    // probabilists' Hermite by recurrence, normalised by sqrt(n!)
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    b / fact.sqrt()
}

pub fn basis_row(indices: &[MultiIndex], x: &[f64]) -> Vec<f64> {
    indices.iter().map(|m| m.0.iter().zip(x).map(|(&d, &v)| hermite(d, v)).product()).collect()
}

pub fn kernel(family: KernelFamily, a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(theta).map(|((x, y), t)| ((x - y) / t).powi(2)).sum();
    match family {
        KernelFamily::Matern52 => {
            let r = r2.sqrt();
            (1.0 + 5f64.sqrt() * r + 5.0 * r2 / 3.0) * (-(5f64.sqrt()) * r).exp()
        }
        KernelFamily::Gaussian => (-0.5 * r2).exp(),
    }
}

/// Universal Kriging predictor with explicit dense inverses.
pub fn dense_predict(
    ed: &ExperimentalDesign,
    indices: &[MultiIndex],
    family: KernelFamily,
    theta: &[f64],
    sigma2: f64,
    nugget: f64,
    x: &[f64],
) -> (f64, f64) {
    let n = ed.len();
    let p = indices.len();
    let pts = ed.points();
    let r = DMatrix::from_fn(n, n, |i, j| kernel(family, &pts[i], &pts[j], theta) + if i == j { nugget } else { 0.0 });
    let f = DMatrix::from_fn(n, p, |i, k| basis_row(indices, &pts[i])[k]);
    let y = DVector::from_column_slice(ed.values());
    let rinv = r.try_inverse().unwrap();
    let g = (f.transpose() * &rinv * &f).try_inverse().unwrap();
    let beta = &g * f.transpose() * &rinv * &y;
    let rx = DVector::from_fn(n, |i, _| kernel(family, x, &pts[i], theta));
    let fx = DVector::from_vec(basis_row(indices, x));
    let mean = fx.dot(&beta) + rx.dot(&(&rinv * (&y - &f * &beta)));
    let u = f.transpose() * &rinv * &rx - &fx;
    let var = sigma2 * (1.0 - rx.dot(&(&rinv * &rx)) + u.dot(&(&g * &u)));
    (mean, var)
}

/// Brute-force DBSCAN reference: core flags, the partition of core points
/// into connected components, and the noise set.
pub struct DbscanOracle {
    pub core: Vec<bool>,
    pub component: Vec<Option<usize>>,
    pub noise: Vec<bool>,
}

fn within(points: &[Vec<f64>], i: usize, j: usize, eps: f64) -> bool {
    points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= eps * eps
}

pub fn dbscan_oracle(points: &[Vec<f64>], eps: f64, n_min: usize) -> DbscanOracle {
    let n = points.len();
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| within(points, i, j, eps)).count() >= n_min.max(1)).collect();
    let mut component: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || component[start].is_some() {
            continue;
        }
        let mut stack = vec![start];
        component[start] = Some(next);
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if core[j] && component[j].is_none() && within(points, i, j, eps) {
                    component[j] = Some(next);
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    let noise = (0..n).map(|i| !core[i] && !(0..n).any(|j| core[j] && within(points, i, j, eps))).collect();
    DbscanOracle { core, component, noise }
}

/// Whether `labels` agree with the oracle: same core and noise points, core
/// points grouped exactly as the components, and every border point in the
/// cluster of one of its core neighbours.
pub fn dbscan_agrees(points: &[Vec<f64>], eps: f64, labels: &ClusterLabels, oracle: &DbscanOracle) -> bool {
    let n = points.len();
    if labels.core != oracle.core {
        return false;
    }
    for i in 0..n {
        if labels.labels[i].is_none() != oracle.noise[i] {
            return false;
        }
        for j in 0..n {
            let same = labels.labels[i] == labels.labels[j];
            if oracle.core[i] && oracle.core[j] && same != (oracle.component[i] == oracle.component[j]) {
                return false;
            }
        }
        if !oracle.core[i] && !oracle.noise[i] {
            let attached = (0..n).any(|j| oracle.core[j] && within(points, i, j, eps) && labels.labels[j] == labels.labels[i]);
            if !attached {
                return false;
            }
        }
    }
    true
}
