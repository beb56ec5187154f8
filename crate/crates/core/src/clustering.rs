//! DBSCAN over Euclidean points with a deterministic visiting order.

use serde::{Deserialize, Serialize};

/// Smallest radius returned by [`default_params`].
pub const EPS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    /// Cluster id per point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    /// Whether each point is a core point.
    pub core: Vec<bool>,
    pub n_clusters: usize,
}

impl ClusterLabels {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Member indices of every cluster, in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                out[*c].push(i);
            }
        }
        out
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn neighbourhood(points: &[Vec<f64>], i: usize, eps2: f64) -> Vec<usize> {
    (0..points.len()).filter(|&j| dist2(&points[i], &points[j]) <= eps2).collect()
}

/// Clusters `points`. The ε-neighbourhood includes the point itself; a point
/// with at least `n_min` neighbours is a core point. Points are visited in
/// ascending index order, so a border point joins the first cluster reaching it.
pub fn dbscan(points: &[Vec<f64>], eps: f64, n_min: usize) -> ClusterLabels {
    let n = points.len();
    let eps2 = eps * eps;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut core = vec![false; n];
    let mut n_clusters = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seeds = neighbourhood(points, i, eps2);
        if seeds.len() < n_min.max(1) {
            continue;
        }
        core[i] = true;
        let cluster = n_clusters;
        n_clusters += 1;
        labels[i] = Some(cluster);
        let mut queue = seeds;
        let mut k = 0;
        while k < queue.len() {
            let s = queue[k];
            k += 1;
            if labels[s].is_none() {
                labels[s] = Some(cluster);
            }
            if visited[s] {
                continue;
            }
            visited[s] = true;
            let ns = neighbourhood(points, s, eps2);
            if ns.len() >= n_min.max(1) {
                core[s] = true;
                queue.extend(ns);
            }
        }
    }
    ClusterLabels { labels, core, n_clusters }
}

/// Default `(eps, n_min)`: `n_min = dim + 1` (capped at the number of points)
/// and `eps` at the knee (largest second difference) of the sorted curve of
/// distances at which each neighbourhood reaches `n_min` points.
pub fn default_params(points: &[Vec<f64>]) -> (f64, usize) {
    let n = points.len();
    if n < 2 {
        return (EPS_FLOOR, 1);
    }
    let dim = points[0].len();
    let n_min = (dim + 1).min(n);
    let k = n_min - 1;
    let mut curve: Vec<f64> = (0..n)
        .map(|i| {
            if k == 0 {
                return 0.0;
            }
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist2(&points[i], &points[j])).collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1].sqrt()
        })
        .collect();
    curve.sort_by(f64::total_cmp);
    let knee = if n < 3 {
        n - 1
    } else {
        (1..n - 1)
            .map(|i| (i, curve[i + 1] - 2.0 * curve[i] + curve[i - 1]))
            .fold((1, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
            .0
    };
    (curve[knee].max(EPS_FLOOR), n_min)
}
