//! Probabilistic input model: independent marginals, per-component
//! projections, isoprobabilistic transforms and initial design sampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{std_normal_cdf, std_normal_quantile, std_normal_sf};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKind {
    Gaussian,
    Lognormal,
    Gumbel,
    Uniform,
}

/// A univariate distribution, stored with both its moment and its natural
/// parameterisation.
///
/// Natural parameters per kind:
/// - gaussian: (mean, std)
/// - lognormal: (mu_ln, sigma_ln) with sigma_ln² = ln(1 + cov²), mu_ln = ln(mean) − sigma_ln²/2
/// - gumbel (maxima): (location, scale) with scale = std·√6/π, location = mean − γ·scale
/// - uniform: (lower, upper)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginal {
    kind: MarginalKind,
    mean: f64,
    std: f64,
    a: f64,
    b: f64,
}

impl Marginal {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && std.is_finite() && std > 0.0) {
            return Err(Error::domain(format!("gaussian needs finite mean and std > 0, got ({mean}, {std})")));
        }
        Ok(Self { kind: MarginalKind::Gaussian, mean, std, a: mean, b: std })
    }

    /// Gaussian from mean and coefficient of variation.
    pub fn gaussian_cov(mean: f64, cov: f64) -> Result<Self> {
        check_cov(mean, cov, "gaussian")?;
        Self::gaussian(mean, (mean * cov).abs())
    }

    pub fn lognormal(mean: f64, cov: f64) -> Result<Self> {
        check_cov(mean, cov, "lognormal")?;
        if mean <= 0.0 {
            return Err(Error::domain(format!("lognormal mean must be > 0, got {mean}")));
        }
        let s2 = (1.0 + cov * cov).ln();
        Ok(Self {
            kind: MarginalKind::Lognormal,
            mean,
            std: mean * cov,
            a: mean.ln() - 0.5 * s2,
            b: s2.sqrt(),
        })
    }

    pub fn gumbel(mean: f64, cov: f64) -> Result<Self> {
        check_cov(mean, cov, "gumbel")?;
        if mean <= 0.0 {
            return Err(Error::domain(format!("gumbel mean must be > 0 with a CoV parameterisation, got {mean}")));
        }
        let std = mean * cov;
        let scale = std * 6f64.sqrt() / std::f64::consts::PI;
        Ok(Self { kind: MarginalKind::Gumbel, mean, std, a: mean - EULER_GAMMA * scale, b: scale })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::domain(format!("uniform needs lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Self {
            kind: MarginalKind::Uniform,
            mean: 0.5 * (lower + upper),
            std: (upper - lower) / 12f64.sqrt(),
            a: lower,
            b: upper,
        })
    }

    /// Builds a marginal from its kind, `param1` (mean or lower bound) and
    /// `param2` (CoV or upper bound).
    pub fn from_params(kind: MarginalKind, param1: f64, param2: f64) -> Result<Self> {
        match kind {
            MarginalKind::Gaussian => Self::gaussian_cov(param1, param2),
            MarginalKind::Lognormal => Self::lognormal(param1, param2),
            MarginalKind::Gumbel => Self::gumbel(param1, param2),
            MarginalKind::Uniform => Self::uniform(param1, param2),
        }
    }

    pub fn kind(&self) -> MarginalKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    /// Natural parameters, see the type docs.
    pub fn natural_params(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Support as a closed interval (infinite ends for unbounded kinds).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            MarginalKind::Gaussian | MarginalKind::Gumbel => (f64::NEG_INFINITY, f64::INFINITY),
            MarginalKind::Lognormal => (0.0, f64::INFINITY),
            MarginalKind::Uniform => (self.a, self.b),
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile_unchecked(0.5)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.cdf_unchecked(x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        let (a, b) = (self.a, self.b);
        Ok(match self.kind {
            MarginalKind::Gaussian => crate::stats::std_normal_pdf((x - a) / b) / b,
            MarginalKind::Lognormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    crate::stats::std_normal_pdf((x.ln() - a) / b) / (b * x)
                }
            }
            MarginalKind::Gumbel => {
                let z = (x - a) / b;
                (-z - (-z).exp()).exp() / b
            }
            MarginalKind::Uniform => {
                if x < a || x > b {
                    0.0
                } else {
                    1.0 / (b - a)
                }
            }
        })
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn cdf_unchecked(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        match self.kind {
            MarginalKind::Gaussian => std_normal_cdf((x - a) / b),
            MarginalKind::Lognormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - a) / b)
                }
            }
            MarginalKind::Gumbel => (-(-(x - a) / b).exp()).exp(),
            MarginalKind::Uniform => ((x - a) / (b - a)).clamp(0.0, 1.0),
        }
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        match self.kind {
            MarginalKind::Gaussian => a + b * std_normal_quantile(p),
            MarginalKind::Lognormal => (a + b * std_normal_quantile(p)).exp(),
            MarginalKind::Gumbel => a - b * (-p.ln()).ln(),
            MarginalKind::Uniform => a + p * (b - a),
        }
    }

    /// Maps `x` to the standard normal space, `u = Φ⁻¹(F(x))`.
    pub fn to_standard(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        let (a, b) = (self.a, self.b);
        let (lo, hi) = self.support();
        if x < lo || x > hi || (self.kind == MarginalKind::Lognormal && x <= 0.0) {
            return Err(Error::domain(format!("{x} lies outside the support [{lo}, {hi}]")));
        }
        Ok(match self.kind {
            MarginalKind::Gaussian => (x - a) / b,
            MarginalKind::Lognormal => (x.ln() - a) / b,
            MarginalKind::Gumbel => {
                let z = (x - a) / b;
                let cdf = (-(-z).exp()).exp();
                if cdf <= 0.5 {
                    std_normal_quantile(cdf)
                } else {
                    // survival = 1 − exp(−e^{−z})
                    -std_normal_quantile(-(-(-z).exp()).exp_m1())
                }
            }
            MarginalKind::Uniform => {
                let t = (x - a) / (b - a);
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else if t >= 1.0 {
                    f64::INFINITY
                } else if t <= 0.5 {
                    std_normal_quantile(t)
                } else {
                    -std_normal_quantile((b - x) / (b - a))
                }
            }
        })
    }

    /// Inverse of [`Marginal::to_standard`].
    pub fn from_standard(&self, u: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        match self.kind {
            MarginalKind::Gaussian => a + b * u,
            MarginalKind::Lognormal => (a + b * u).exp(),
            MarginalKind::Gumbel => {
                if u <= 0.0 {
                    a - b * (-std_normal_cdf(u).ln()).ln()
                } else {
                    a - b * (-(-std_normal_sf(u)).ln_1p()).ln()
                }
            }
            MarginalKind::Uniform => {
                if u <= 0.0 {
                    a + (b - a) * std_normal_cdf(u)
                } else {
                    b - (b - a) * std_normal_sf(u)
                }
            }
        }
    }
}

fn check_cov(mean: f64, cov: f64, what: &str) -> Result<()> {
    if !(mean.is_finite() && cov.is_finite() && cov > 0.0) {
        return Err(Error::domain(format!("{what} needs finite mean and CoV > 0, got ({mean}, {cov})")));
    }
    Ok(())
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("non-finite argument {x}")))
    }
}

/// A point in the standard normal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardPoint(pub Vec<f64>);

/// A point in the physical input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPoint(pub Vec<f64>);

/// Independent marginals plus the index maps selecting each component's inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputModel {
    marginals: Vec<Marginal>,
    component_maps: Vec<Vec<usize>>,
}

impl InputModel {
    pub fn new(marginals: Vec<Marginal>, component_maps: Vec<Vec<usize>>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::argument("input model needs at least one marginal"));
        }
        let dim = marginals.len();
        for (j, map) in component_maps.iter().enumerate() {
            if map.is_empty() {
                return Err(Error::argument(format!("component map {j} is empty")));
            }
            for (k, &i) in map.iter().enumerate() {
                if i >= dim {
                    return Err(Error::argument(format!("component map {j} references input {i} but M = {dim}")));
                }
                if map[..k].contains(&i) {
                    return Err(Error::argument(format!("component map {j} repeats input {i}")));
                }
            }
        }
        Ok(Self { marginals, component_maps })
    }

    /// Model where every component sees all inputs.
    pub fn shared(marginals: Vec<Marginal>, components: usize) -> Result<Self> {
        let all: Vec<usize> = (0..marginals.len()).collect();
        Self::new(marginals, vec![all; components])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn n_components(&self) -> usize {
        self.component_maps.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn component_map(&self, j: usize) -> &[usize] {
        &self.component_maps[j]
    }

    pub fn component_maps(&self) -> &[Vec<usize>] {
        &self.component_maps
    }

    pub fn component_marginals(&self, j: usize) -> Vec<Marginal> {
        self.component_maps[j].iter().map(|&i| self.marginals[i]).collect()
    }

    /// Extracts the sub-vector of `x` feeding component `j`.
    pub fn project(&self, x: &[f64], j: usize) -> Vec<f64> {
        self.component_maps[j].iter().map(|&i| x[i]).collect()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::argument(format!("point has dimension {n}, model has {}", self.dim())));
        }
        Ok(())
    }

    pub fn to_standard(&self, x: &PhysicalPoint) -> Result<StandardPoint> {
        self.check_dim(x.0.len())?;
        let u = self
            .marginals
            .iter()
            .zip(&x.0)
            .map(|(m, &xi)| m.to_standard(xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(StandardPoint(u))
    }

    pub fn from_standard(&self, u: &StandardPoint) -> Result<PhysicalPoint> {
        self.check_dim(u.0.len())?;
        if let Some(v) = u.0.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite standard coordinate {v}")));
        }
        Ok(PhysicalPoint(self.from_standard_slice(&u.0)))
    }

    /// Unchecked transform used on hot paths; `u` must have length M.
    pub(crate) fn from_standard_slice(&self, u: &[f64]) -> Vec<f64> {
        self.marginals.iter().zip(u).map(|(m, &ui)| m.from_standard(ui)).collect()
    }

    /// Draws `n` independent samples of the input vector.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<PhysicalPoint> {
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
                PhysicalPoint(self.from_standard_slice(&u))
            })
            .collect()
    }

    pub fn default_bounds_mode(&self) -> BoundsMode {
        if self.dim() <= 15 {
            BoundsMode::FiveSigma
        } else {
            BoundsMode::Quantile { lower: 1e-5, upper: 1.0 - 1e-5 }
        }
    }

    /// Hypercube used to spread the initial experimental designs.
    pub fn initial_design_bounds(&self, mode: BoundsMode) -> Result<Hypercube> {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for m in &self.marginals {
            let (lo, hi) = marginal_bounds(m, mode)?;
            lower.push(lo);
            upper.push(hi);
        }
        Ok(Hypercube { lower, upper })
    }
}

/// How the initial design hypercube is derived from the marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BoundsMode {
    /// `mean ± 5 std`, clipped to the support.
    FiveSigma,
    /// Marginal quantiles at the two levels.
    Quantile { lower: f64, upper: f64 },
}

/// Floor applied to five-sigma lower bounds of positive-support marginals,
/// relative to the median.
const SUPPORT_FLOOR: f64 = 1e-6;

fn marginal_bounds(m: &Marginal, mode: BoundsMode) -> Result<(f64, f64)> {
    match mode {
        BoundsMode::FiveSigma => {
            let (slo, shi) = m.support();
            let mut lo = m.mean() - 5.0 * m.std();
            let mut hi = m.mean() + 5.0 * m.std();
            if m.kind() == MarginalKind::Lognormal {
                lo = lo.max(SUPPORT_FLOOR * m.median());
            } else {
                lo = lo.max(slo);
            }
            hi = hi.min(shi);
            Ok((lo, hi))
        }
        BoundsMode::Quantile { lower, upper } => {
            if !(lower > 0.0 && upper < 1.0 && lower < upper) {
                return Err(Error::domain(format!("quantile bounds need 0 < lower < upper < 1, got ({lower}, {upper})")));
            }
            Ok((m.quantile(lower)?, m.quantile(upper)?))
        }
    }
}

/// Axis-aligned box `∏ [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypercube {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hypercube {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Restriction to the listed dimensions.
    pub fn select(&self, dims: &[usize]) -> Hypercube {
        Hypercube {
            lower: dims.iter().map(|&i| self.lower[i]).collect(),
            upper: dims.iter().map(|&i| self.upper[i]).collect(),
        }
    }
}

/// Latin hypercube sample of `n` points in `bounds`.
///
/// Every dimension has exactly one point in each of the `n` equal-width strata.
pub fn lhs_sample(bounds: &Hypercube, n: usize, seed: u64) -> Result<Vec<PhysicalPoint>> {
    if n == 0 {
        return Err(Error::argument("latin hypercube sample needs n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = bounds.dim();
    let mut points = vec![vec![0.0; dim]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        strata.shuffle(&mut rng);
        let (lo, hi) = (bounds.lower[d], bounds.upper[d]);
        let width = (hi - lo) / n as f64;
        for (point, &s) in points.iter_mut().zip(&strata) {
            let offset: f64 = rng.random();
            point[d] = (lo + (s as f64 + offset) * width).min(hi);
        }
    }
    Ok(points.into_iter().map(PhysicalPoint).collect())
}
