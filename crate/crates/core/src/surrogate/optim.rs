//! Box-constrained Nelder–Mead used for the likelihood search.

pub(crate) struct NelderMead {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub max_evals: usize,
    /// Stop once the simplex spread in function values falls below this.
    pub f_tol: f64,
    /// ... and its diameter below this.
    pub x_tol: f64,
}

impl NelderMead {
    fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Minimises `f` from `x0` with an initial simplex of edge `step`.
    /// Returns the best point, its value and the number of evaluations.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], step: f64) -> (Vec<f64>, f64, usize) {
        let d = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut start = x0.to_vec();
        self.clamp(&mut start);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        let f0 = eval(&start, &mut evals);
        simplex.push((start.clone(), f0));
        for i in 0..d {
            let mut x = start.clone();
            // step inward when the start sits on the upper bound
            x[i] = if x[i] + step <= self.upper[i] { x[i] + step } else { x[i] - step };
            self.clamp(&mut x);
            let fx = eval(&x, &mut evals);
            simplex.push((x, fx));
        }

        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[d].1;
            let diam = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if (worst - best).abs() <= self.f_tol * (1.0 + best.abs()) && diam <= self.x_tol {
                break;
            }
            let mut centroid = vec![0.0; d];
            for (x, _) in &simplex[..d] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / d as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid.iter().zip(&simplex[d].0).map(|(c, w)| c + t * (c - w)).collect();
                self.clamp(&mut p);
                p
            };
            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[d].1 {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < simplex[d].1.min(fr) {
                    simplex[d] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        let mut p: Vec<f64> = x_best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                        self.clamp(&mut p);
                        let fp = eval(&p, &mut evals);
                        *entry = (p, fp);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, fx) = simplex.swap_remove(0);
        (x, fx, evals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead { lower: vec![-5.0; 2], upper: vec![5.0; 2], max_evals: 5000, f_tol: 1e-14, x_tol: 1e-9 };
        let (x, fx, _) = nm.minimize(|p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2), &[-1.2, 1.0], 0.5);
        assert!(fx < 1e-10);
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn respects_bounds() {
        let nm = NelderMead { lower: vec![1.0], upper: vec![2.0], max_evals: 500, f_tol: 1e-12, x_tol: 1e-10 };
        let (x, _, _) = nm.minimize(|p| p[0] * p[0], &[1.5], 0.3);
        assert!((x[0] - 1.0).abs() < 1e-8);
    }
}
