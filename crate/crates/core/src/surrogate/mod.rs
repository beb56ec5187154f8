//! Kriging and PC-Kriging surrogates of single limit-state functions.
//!
//! Both share one universal-Kriging core: the trend is a set of Hermite
//! multi-indices in standardised coordinates (constant and linear trends are
//! the degree-0 and degree-1 sets), the residual is a stationary Gaussian
//! process with an anisotropic correlation kernel.

mod kriging;
mod optim;
pub mod pce;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::Marginal;
use crate::linalg::{dot, forward_solve};
pub use kriging::{fit_kriging, fit_pck, fit_with_trend, profile_log_likelihood};
pub use pce::{build_pce_basis, lar_select, LarSelection, MultiIndex};

/// Paired inputs and limit-state observations of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalDesign {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl ExperimentalDesign {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::argument(format!(
                "experimental design needs equal, non-zero numbers of points and values ({} vs {})",
                points.len(),
                values.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::argument("experimental design points must share a non-zero dimension"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                value: values[i],
                point: points[i].clone(),
                context: "experimental design observation".into(),
            });
        }
        Ok(Self { points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Appends one observation. Designs only ever grow.
    pub fn push(&mut self, point: Vec<f64>, value: f64) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::argument("dimension mismatch when enriching the experimental design"));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite { value, point, context: "limit-state evaluation".into() });
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    /// Whether some design point lies within `tol` of `x` after dividing each
    /// coordinate difference by `scale`.
    pub fn has_near(&self, x: &[f64], scale: &[f64], tol: f64) -> bool {
        self.points.iter().any(|p| {
            p.iter()
                .zip(x)
                .zip(scale)
                .map(|((a, b), s)| ((a - b) / s).powi(2))
                .sum::<f64>()
                .sqrt()
                < tol
        })
    }
}

/// Correlation family of the Gaussian process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    Matern52,
    Gaussian,
}

impl KernelFamily {
    /// Correlation at scaled distance `r = ‖(x − x')/θ‖`.
    #[inline]
    pub fn correlation(self, r2: f64) -> f64 {
        match self {
            KernelFamily::Matern52 => {
                let s = (5.0 * r2).sqrt();
                (1.0 + s + 5.0 / 3.0 * r2) * (-s).exp()
            }
            KernelFamily::Gaussian => (-0.5 * r2).exp(),
        }
    }

    #[inline]
    pub(crate) fn corr_between(self, a: &[f64], b: &[f64], inv_theta: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(inv_theta)
            .map(|((x, y), it)| {
                let d = (x - y) * it;
                d * d
            })
            .sum();
        self.correlation(r2)
    }
}

/// Per-dimension map from the physical inputs to the coordinates the
/// surrogate is fitted in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputMapping {
    /// `u = (x − shift) / scale`
    Affine { shift: Vec<f64>, scale: Vec<f64> },
    /// `u = Φ⁻¹(F(x))` per marginal.
    #[serde(skip)]
    Isoprobabilistic(Vec<Marginal>),
}

impl InputMapping {
    /// Zero-mean / unit-variance affine map estimated from the design points.
    pub fn from_data(points: &[Vec<f64>]) -> Self {
        let n = points.len() as f64;
        let dim = points[0].len();
        let mut shift = vec![0.0; dim];
        let mut scale = vec![0.0; dim];
        for p in points {
            for (s, v) in shift.iter_mut().zip(p) {
                *s += v / n;
            }
        }
        for p in points {
            for ((s, m), v) in scale.iter_mut().zip(&shift).zip(p) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        InputMapping::Affine { shift, scale }
    }

    /// Affine map using the marginals' means and standard deviations.
    pub fn from_moments(marginals: &[Marginal]) -> Self {
        InputMapping::Affine {
            shift: marginals.iter().map(Marginal::mean).collect(),
            scale: marginals.iter().map(Marginal::std).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputMapping::Affine { shift, .. } => shift.len(),
            InputMapping::Isoprobabilistic(m) => m.len(),
        }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        match self {
            InputMapping::Affine { shift, scale } => {
                out.extend(x.iter().zip(shift).zip(scale).map(|((v, m), s)| (v - m) / s));
            }
            InputMapping::Isoprobabilistic(marginals) => {
                for (m, &v) in marginals.iter().zip(x) {
                    out.push(m.to_standard(v)?);
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.len());
        self.apply_into(x, &mut out)?;
        Ok(out)
    }
}

/// Trend family requested for ordinary / universal Kriging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrigingTrend {
    Constant,
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrendKind {
    Constant,
    Linear,
    Pce { max_degree: u32 },
}

/// Trend basis: the family plus the multi-indices actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSpec {
    pub kind: TrendKind,
    pub indices: Vec<MultiIndex>,
}

impl TrendSpec {
    pub fn constant(dim: usize) -> Self {
        Self { kind: TrendKind::Constant, indices: vec![MultiIndex::zero(dim)] }
    }

    pub fn linear(dim: usize) -> Self {
        let mut indices = vec![MultiIndex::zero(dim)];
        indices.extend((0..dim).map(|i| MultiIndex::unit(dim, i)));
        Self { kind: TrendKind::Linear, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Hyperparameters held fixed instead of estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedHyperparameters {
    /// Length-scales in the mapped coordinates.
    pub theta: Vec<f64>,
    /// Process variance; the maximum-likelihood estimate is used when absent.
    pub sigma2: Option<f64>,
}

/// Knobs of the fitting procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub kernel: KernelFamily,
    /// Defaults to [`InputMapping::from_data`].
    pub mapping: Option<InputMapping>,
    /// Number of multi-start points for the likelihood search.
    pub n_starts: usize,
    /// Box on each length-scale.
    pub theta_bounds: (f64, f64),
    pub seed: u64,
    /// Two design points closer than this in mapped coordinates are rejected.
    pub duplicate_tol: f64,
    /// Relative nugget: first value, growth factor on failed factorisation, cap.
    pub nugget: (f64, f64, f64),
    pub max_evals_per_start: usize,
    pub fixed: Option<FixedHyperparameters>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Matern52,
            mapping: None,
            n_starts: 5,
            theta_bounds: (1e-2, 1e2),
            seed: 0,
            duplicate_tol: 1e-8,
            nugget: (1e-10, 10.0, 1e-4),
            max_evals_per_start: 0,
            fixed: None,
        }
    }
}

/// A fitted Kriging / PC-Kriging predictor.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub(crate) mapping: InputMapping,
    pub(crate) trend: TrendSpec,
    pub(crate) coefficients: Vec<f64>,
    pub(crate) kernel: KernelFamily,
    pub(crate) theta: Vec<f64>,
    pub(crate) inv_theta: Vec<f64>,
    pub(crate) sigma2: f64,
    pub(crate) nugget: f64,
    pub(crate) log_likelihood: f64,
    pub(crate) design: ExperimentalDesign,
    /// Design points in mapped coordinates.
    pub(crate) u_train: Vec<Vec<f64>>,
    /// Lower Cholesky factor of R (row-major, n×n).
    pub(crate) chol_r: Vec<f64>,
    /// L⁻¹ F, row-major n×p.
    pub(crate) ft: Vec<f64>,
    /// R⁻¹ (G − F β̂).
    pub(crate) alpha: Vec<f64>,
    /// Lower Cholesky factor of Fᵀ R⁻¹ F (p×p).
    pub(crate) chol_g: Vec<f64>,
}

/// Predictive Gaussian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Clamped at zero.
    pub variance: f64,
    /// Variance before clamping.
    pub raw_variance: f64,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Serializable snapshot of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDump {
    pub trend: TrendSpec,
    pub coefficients: Vec<f64>,
    pub kernel: KernelFamily,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub nugget: f64,
    pub log_likelihood: f64,
    pub design: ExperimentalDesign,
}

struct Scratch {
    u: Vec<f64>,
    r: Vec<f64>,
    f: Vec<f64>,
    herm: Vec<Vec<f64>>,
    w: Vec<f64>,
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Scratch> = const { std::cell::RefCell::new(Scratch {
        u: Vec::new(), r: Vec::new(), f: Vec::new(), herm: Vec::new(), w: Vec::new(),
    }) };
}

impl SurrogateModel {
    pub fn dim(&self) -> usize {
        self.mapping.dim()
    }

    pub fn design(&self) -> &ExperimentalDesign {
        &self.design
    }

    pub fn trend(&self) -> &TrendSpec {
        &self.trend
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn kernel(&self) -> KernelFamily {
        self.kernel
    }

    pub fn mapping(&self) -> &InputMapping {
        &self.mapping
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn dump(&self) -> SurrogateDump {
        SurrogateDump {
            trend: self.trend.clone(),
            coefficients: self.coefficients.clone(),
            kernel: self.kernel,
            theta: self.theta.clone(),
            sigma2: self.sigma2,
            nugget: self.nugget,
            log_likelihood: self.log_likelihood,
            design: self.design.clone(),
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::argument(format!("point has dimension {}, surrogate expects {}", x.len(), self.dim())));
        }
        Ok(())
    }

    /// Predictive mean and variance at `x` (physical component coordinates).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check(x)?;
        SCRATCH.with(|s| {
            let s = &mut *s.borrow_mut();
            self.mapping.apply_into(x, &mut s.u)?;
            Ok(self.predict_mapped(s, true))
        })
    }

    /// Whether `x` lies within `tol` of a design point in the mapped coordinates.
    pub fn is_near_design(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.check(x)?;
        let u = self.mapping.apply(x)?;
        Ok(self
            .u_train
            .iter()
            .any(|t| t.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < tol))
    }

    /// Predictive mean only (skips the O(N²) variance solve).
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        SCRATCH.with(|s| {
            let s = &mut *s.borrow_mut();
            self.mapping.apply_into(x, &mut s.u)?;
            Ok(self.predict_mapped(s, false).mean)
        })
    }

    fn predict_mapped(&self, s: &mut Scratch, with_variance: bool) -> Prediction {
        let n = self.u_train.len();
        let p = self.trend.len();
        s.r.clear();
        s.r.extend(self.u_train.iter().map(|t| self.kernel.corr_between(&s.u, t, &self.inv_theta)));
        pce::eval_basis(&self.trend.indices, &s.u, &mut s.herm, &mut s.f);
        let mean = dot(&s.f, &self.coefficients) + dot(&s.r, &self.alpha);
        if !with_variance {
            return Prediction { mean, variance: 0.0, raw_variance: 0.0 };
        }
        forward_solve(&self.chol_r, n, &mut s.r);
        let rr = dot(&s.r, &s.r);
        // u = Fᵀ R⁻¹ r − f = (L⁻¹F)ᵀ v − f
        s.w.clear();
        for k in 0..p {
            let mut acc = -s.f[k];
            for i in 0..n {
                acc += self.ft[i * p + k] * s.r[i];
            }
            s.w.push(acc);
        }
        forward_solve(&self.chol_g, p, &mut s.w);
        let trend_term = dot(&s.w, &s.w);
        let raw = self.sigma2 * (1.0 - rr + trend_term);
        Prediction { mean, variance: raw.max(0.0), raw_variance: raw }
    }
}
