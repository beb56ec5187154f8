//! Built-in benchmark problems.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::composition::{parse_composition, CompositionExpr};
use crate::error::{Error, Result};
use crate::input::{InputModel, Marginal};

/// A component limit state evaluated on its projected input vector.
pub type LimitStateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LimitState {
    pub id: String,
    pub f: LimitStateFn,
}

impl fmt::Debug for LimitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LimitState").field("id", &self.id).finish()
    }
}

/// Reference solution attached to a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub pf: f64,
    pub beta: f64,
}

/// A system reliability problem: inputs, component limit states and the
/// composition combining them.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub input_names: Vec<String>,
    pub input: InputModel,
    pub limit_states: Vec<LimitState>,
    pub composition: CompositionExpr,
    pub reference: Option<Reference>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        input_names: Vec<String>,
        input: InputModel,
        limit_states: Vec<LimitState>,
        composition: &str,
        reference: Option<Reference>,
    ) -> Result<Self> {
        let m = limit_states.len();
        if input.n_components() != m {
            return Err(Error::argument(format!(
                "{} component maps for {m} limit states",
                input.n_components()
            )));
        }
        if input_names.len() != input.dim() {
            return Err(Error::argument("one name per input is required"));
        }
        let composition = parse_composition(composition)?.bind(m)?;
        let used = composition.referenced_components();
        if let Some(j) = (0..m).find(|j| !used.contains(j)) {
            return Err(Error::argument(format!("composition does not use component g{}", j + 1)));
        }
        if let Some(r) = reference {
            if !(r.pf > 0.0 && r.pf < 1.0) {
                return Err(Error::argument(format!("reference pf must lie in (0, 1), got {}", r.pf)));
            }
        }
        Ok(Self { name: name.into(), input_names, input, limit_states, composition, reference })
    }

    pub fn n_components(&self) -> usize {
        self.limit_states.len()
    }

    /// System limit state `h(g_1(x_1), …, g_m(x_m))` on the true functions.
    pub fn system_value(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = self
            .limit_states
            .iter()
            .enumerate()
            .map(|(j, ls)| (ls.f)(&self.input.project(x, j)))
            .collect();
        self.composition.eval(&z)
    }
}

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_PROBLEMS: &[&str] = &["four_branch_p6", "four_branch_p7", "roof_truss", "transmission_tower"];

/// Ids accepted by [`builtin_limit_state`].
pub const BUILTIN_LIMIT_STATES: &[&str] = &[
    "four_branch.g1",
    "four_branch.g2",
    "four_branch.g3",
    "four_branch.g4",
    "roof_truss.g1",
    "roof_truss.g2",
    "roof_truss.g3",
];

pub fn builtin_problem(name: &str) -> Result<ProblemSpec> {
    match name {
        "four_branch_p6" => four_branch(6.0),
        "four_branch_p7" => four_branch(7.0),
        "roof_truss" => roof_truss(),
        "transmission_tower" => transmission_tower(),
        _ => Err(Error::argument(format!(
            "unknown problem '{name}'; available: {}",
            BUILTIN_PROBLEMS.join(", ")
        ))),
    }
}

/// A built-in component limit state and the number of inputs it takes.
pub fn builtin_limit_state(id: &str, params: &BTreeMap<String, f64>) -> Result<(LimitStateFn, usize)> {
    let param = |key: &str| {
        params
            .get(key)
            .copied()
            .ok_or_else(|| Error::argument(format!("limit state '{id}' needs parameter '{key}'")))
    };
    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let f: (LimitStateFn, usize) = match id {
        "four_branch.g1" => (Arc::new(|x: &[f64]| 3.0 + 0.1 * (x[0] - x[1]).powi(2) - (x[0] + x[1]) * S), 2),
        "four_branch.g2" => (Arc::new(|x: &[f64]| 3.0 + 0.1 * (x[0] - x[1]).powi(2) + (x[0] + x[1]) * S), 2),
        "four_branch.g3" => {
            let p = param("P")?;
            (Arc::new(move |x: &[f64]| (x[0] - x[1]) + p * S), 2)
        }
        "four_branch.g4" => {
            let p = param("P")?;
            (Arc::new(move |x: &[f64]| (x[1] - x[0]) + p * S), 2)
        }
        // inputs: q, l, A_s, A_c, E_s, E_c
        "roof_truss.g1" => (
            Arc::new(|x: &[f64]| {
                let (q, l) = (x[0], x[1]);
                0.03 - q * l * l / 2.0 * (3.81 / (x[3] * x[5]) + 1.13 / (x[2] * x[4]))
            }),
            6,
        ),
        // inputs: q, l, A_c, f_c
        "roof_truss.g2" => (Arc::new(|x: &[f64]| x[3] * x[2] - 1.185 * x[0] * x[1]), 4),
        // inputs: q, l, A_s, f_s
        "roof_truss.g3" => (Arc::new(|x: &[f64]| x[3] * x[2] - 0.75 * x[0] * x[1]), 4),
        _ => {
            return Err(Error::argument(format!(
                "unknown limit state '{id}'; available: {}",
                BUILTIN_LIMIT_STATES.join(", ")
            )))
        }
    };
    Ok(f)
}

fn builtin(id: &str, params: &BTreeMap<String, f64>) -> Result<LimitState> {
    let (f, _) = builtin_limit_state(id, params)?;
    Ok(LimitState { id: id.to_string(), f })
}

/// Series system of four branches in two standard normal inputs.
pub fn four_branch(p: f64) -> Result<ProblemSpec> {
    if !(p > 0.0) {
        return Err(Error::argument(format!("P must be positive, got {p}")));
    }
    let params = BTreeMap::from([("P".to_string(), p)]);
    let std = Marginal::gaussian(0.0, 1.0)?;
    let input = InputModel::shared(vec![std; 2], 4)?;
    let limit_states = (1..=4).map(|k| builtin(&format!("four_branch.g{k}"), &params)).collect::<Result<_>>()?;
    let reference = if p == 7.0 {
        Some(Reference { pf: 2.239e-3, beta: 2.842 })
    } else if p == 6.0 {
        Some(Reference { pf: 4.484e-3, beta: 2.613 })
    } else {
        None
    };
    ProblemSpec::new(
        format!("four_branch_p{p}"),
        vec!["x1".into(), "x2".into()],
        input,
        limit_states,
        "min(g1, g2, g3, g4)",
        reference,
    )
}

/// Names, means and coefficients of variation of the roof truss inputs.
pub const ROOF_TRUSS_INPUTS: [(&str, f64, f64); 8] = [
    ("q", 20_000.0, 0.07),
    ("l", 12.0, 0.01),
    ("A_s", 9.82e-4, 0.06),
    ("A_c", 0.04, 0.12),
    ("E_s", 2e11, 0.06),
    ("E_c", 3e11, 0.06),
    ("f_s", 3.35e8, 0.12),
    ("f_c", 1.34e7, 0.18),
];

/// Roof truss: tip displacement and two member stresses, lognormal inputs.
pub fn roof_truss() -> Result<ProblemSpec> {
    let marginals = ROOF_TRUSS_INPUTS.iter().map(|&(_, m, c)| Marginal::lognormal(m, c)).collect::<Result<_>>()?;
    let maps = vec![vec![0, 1, 2, 3, 4, 5], vec![0, 1, 3, 7], vec![0, 1, 2, 6]];
    let input = InputModel::new(marginals, maps)?;
    let none = BTreeMap::new();
    let limit_states = (1..=3).map(|k| builtin(&format!("roof_truss.g{k}"), &none)).collect::<Result<_>>()?;
    ProblemSpec::new(
        "roof_truss",
        ROOF_TRUSS_INPUTS.iter().map(|(n, _, _)| n.to_string()).collect(),
        input,
        limit_states,
        "min(g1, g2, g3)",
        Some(Reference { pf: 3.417e-3, beta: 2.705 }),
    )
}

/// The transmission tower needs a finite-element model and copula-dependent
/// inputs, neither of which is provided.
pub fn transmission_tower() -> Result<ProblemSpec> {
    Err(Error::Unsupported(
        "transmission_tower requires a finite-element tower model and dependent (copula) inputs, which are not included".into(),
    ))
}
