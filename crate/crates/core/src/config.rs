//! JSON analysis configuration: problem definition plus learning settings.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bench::{builtin_limit_state, builtin_problem, LimitState, ProblemSpec, Reference};
use crate::composition::parse_limit_state;
use crate::error::{Error, Result};
use crate::input::{InputModel, Marginal, MarginalKind};
use crate::learning::{LearnConfig, Seeds, SurrogateSpec};
use crate::stats::derive_seed;
use crate::subset::SusConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub name: String,
    pub kind: MarginalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    /// Coefficient of variation; `std` may be given instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    /// `[lower, upper]` of a uniform input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Limit state over the names in `map`, e.g. `"3 - x1 + 0.1*(x1 - x2)^2"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    /// Input names the component depends on, in argument order.
    #[serde(default)]
    pub map: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    pub alpha: f64,
    pub n_usys: usize,
    pub eps_bar: f64,
    pub streak: usize,
    pub n_max: Option<usize>,
    pub max_iterations: usize,
    pub n_sobol: usize,
    pub initial_sizes: Option<Vec<usize>>,
    pub final_repeats: usize,
    pub duplicate_tol: f64,
    pub component_mc: usize,
}

impl Default for LearningSection {
    fn default() -> Self {
        let d = LearnConfig::default();
        Self {
            alpha: d.alpha,
            n_usys: d.n_usys,
            eps_bar: d.eps_bar,
            streak: d.streak,
            n_max: d.n_max,
            max_iterations: d.max_iterations,
            n_sobol: d.n_sobol,
            initial_sizes: d.initial_sizes,
            final_repeats: d.final_repeats,
            duplicate_tol: d.duplicate_tol,
            component_mc: d.component_mc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SusSection {
    pub n_level: usize,
    pub p0: f64,
    pub rho: f64,
    pub max_levels: usize,
}

impl Default for SusSection {
    fn default() -> Self {
        let d = SusConfig::learning(0);
        Self { n_level: d.samples_per_level, p0: d.p0, rho: d.rho, max_levels: d.max_levels }
    }
}

impl SusSection {
    fn final_default() -> Self {
        Self { n_level: SusConfig::final_estimate(0).samples_per_level, ..Self::default() }
    }

    fn with_seed(self, seed: u64) -> SusConfig {
        SusConfig { samples_per_level: self.n_level, p0: self.p0, max_levels: self.max_levels, rho: self.rho, seed }
    }
}

/// A complete analysis: either a built-in `problem` or explicit `inputs`,
/// `components` and `composition`, plus the algorithm settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<String>,
    #[serde(default)]
    pub surrogate: SurrogateSpec,
    #[serde(default)]
    pub learning: LearningSection,
    #[serde(default)]
    pub sus: SusSection,
    #[serde(default = "SusSection::final_default")]
    pub sus_final: SusSection,
    /// Single seed split into the four streams; ignored when `seeds` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Seeds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

impl AnalysisConfig {
    /// Configuration of a built-in problem with default settings.
    pub fn builtin(problem: &str, surrogate: SurrogateSpec) -> Self {
        Self {
            name: None,
            problem: Some(problem.to_string()),
            inputs: Vec::new(),
            components: Vec::new(),
            composition: None,
            surrogate,
            learning: LearningSection::default(),
            sus: SusSection::default(),
            sus_final: SusSection::final_default(),
            seed: None,
            seeds: None,
            reference: None,
        }
    }

    /// Parses JSON; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises")
    }

    /// The four seeds in effect.
    pub fn effective_seeds(&self) -> Seeds {
        self.seeds.unwrap_or_else(|| Seeds::from_single(self.seed.unwrap_or(0)))
    }

    /// Replaces every seed with the split of `seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.seeds = None;
    }

    /// Checks the whole document.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    /// Builds the problem and the learning settings.
    pub fn build(&self) -> Result<(ProblemSpec, LearnConfig)> {
        let problem = self.build_problem()?;
        let cfg = self.learn_config(&problem)?;
        Ok((problem, cfg))
    }

    pub fn build_problem(&self) -> Result<ProblemSpec> {
        if let Some(name) = &self.problem {
            for (field, empty) in [
                ("inputs", self.inputs.is_empty()),
                ("components", self.components.is_empty()),
                ("composition", self.composition.is_none()),
            ] {
                if !empty {
                    return Err(Error::config(field, "not allowed together with a built-in problem"));
                }
            }
            let mut p = builtin_problem(name).map_err(|e| Error::config("problem", e.to_string()))?;
            if self.reference.is_some() {
                p.reference = self.reference;
            }
            return Ok(p);
        }
        if self.inputs.is_empty() {
            return Err(Error::config("inputs", "at least one input is required"));
        }
        let mut names: Vec<String> = Vec::new();
        let mut marginals = Vec::new();
        for (i, spec) in self.inputs.iter().enumerate() {
            let path = format!("inputs[{i}]");
            if names.contains(&spec.name) {
                return Err(Error::config(format!("{path}.name"), format!("duplicate input name '{}'", spec.name)));
            }
            names.push(spec.name.clone());
            marginals.push(marginal(spec).map_err(|e| Error::config(&path, e.to_string()))?);
        }
        if self.components.is_empty() {
            return Err(Error::config("components", "at least one component is required"));
        }
        let mut maps = Vec::new();
        let mut limit_states = Vec::new();
        for (j, c) in self.components.iter().enumerate() {
            let path = format!("components[{j}]");
            let expected_id = format!("g{}", j + 1);
            if c.id != expected_id {
                return Err(Error::config(format!("{path}.id"), format!("components must be numbered in order; expected '{expected_id}'")));
            }
            let map: Vec<String> = if c.map.is_empty() && c.expression.is_some() { names.clone() } else { c.map.clone() };
            let mut idx = Vec::new();
            for (k, n) in map.iter().enumerate() {
                let i = names
                    .iter()
                    .position(|x| x == n)
                    .ok_or_else(|| Error::config(format!("{path}.map[{k}]"), format!("unknown input '{n}'")))?;
                idx.push(i);
            }
            let f = match (&c.builtin, &c.expression) {
                (Some(id), None) => {
                    let (f, dims) = builtin_limit_state(id, &c.params).map_err(|e| Error::config(format!("{path}.builtin"), e.to_string()))?;
                    if idx.len() != dims {
                        return Err(Error::config(format!("{path}.map"), format!("'{id}' takes {dims} inputs, map lists {}", idx.len())));
                    }
                    f
                }
                (None, Some(text)) => {
                    let expr = parse_limit_state(text, &map).map_err(|e| Error::config(format!("{path}.expression"), e.to_string()))?;
                    Arc::new(move |x: &[f64]| expr.eval(x)) as crate::bench::LimitStateFn
                }
                _ => return Err(Error::config(path, "give exactly one of 'builtin' or 'expression'")),
            };
            maps.push(idx);
            limit_states.push(LimitState { id: c.builtin.clone().unwrap_or_else(|| c.id.clone()), f });
        }
        let composition = self.composition.as_deref().ok_or_else(|| Error::config("composition", "missing composition"))?;
        let input = InputModel::new(marginals, maps).map_err(|e| Error::config("components", e.to_string()))?;
        let name = self.name.clone().unwrap_or_else(|| "custom".into());
        ProblemSpec::new(name, names, input, limit_states, composition, self.reference).map_err(|e| {
            let field = if matches!(e, Error::Syntax { .. } | Error::Argument(_)) { "composition" } else { "" };
            Error::config(field, e.to_string())
        })
    }

    /// Learning settings for `problem`.
    pub fn learn_config(&self, problem: &ProblemSpec) -> Result<LearnConfig> {
        let seeds = self.effective_seeds();
        let l = &self.learning;
        let surrogates = if self.components.iter().any(|c| c.surrogate.is_some()) {
            self.components.iter().map(|c| c.surrogate.unwrap_or(self.surrogate)).collect()
        } else {
            vec![self.surrogate]
        };
        let cfg = LearnConfig {
            alpha: l.alpha,
            n_usys: l.n_usys,
            eps_bar: l.eps_bar,
            streak: l.streak,
            n_max: l.n_max,
            max_iterations: l.max_iterations,
            surrogates,
            initial_sizes: l.initial_sizes.clone(),
            n_sobol: l.n_sobol,
            duplicate_tol: l.duplicate_tol,
            sus: self.sus.with_seed(seeds.sus),
            sus_final: self.sus_final.with_seed(derive_seed(seeds.sus, &[0xf1a1])),
            final_repeats: l.final_repeats,
            seeds,
            component_mc: l.component_mc,
        };
        cfg.validate(problem).map_err(|e| {
            let msg = e.to_string();
            let field = if msg.contains("p0") || msg.contains("rho") || msg.contains("samples_per_level") || msg.contains("max_levels") {
                "sus"
            } else if msg.contains("surrogate") {
                "surrogate"
            } else {
                "learning"
            };
            Error::config(field, msg)
        })?;
        Ok(cfg)
    }
}

fn marginal(spec: &InputSpec) -> Result<Marginal> {
    if spec.kind == MarginalKind::Uniform {
        let [a, b] = spec.bounds.ok_or_else(|| Error::argument("uniform input needs 'bounds'"))?;
        return Marginal::uniform(a, b);
    }
    let mean = spec.mean.ok_or_else(|| Error::argument("missing 'mean'"))?;
    let cov = match (spec.cov, spec.std) {
        (Some(c), None) => c,
        (None, Some(s)) if mean != 0.0 => s / mean.abs(),
        (None, Some(s)) if spec.kind == MarginalKind::Gaussian => return Marginal::gaussian(mean, s),
        _ => return Err(Error::argument("give exactly one of 'cov' or 'std' (std needs a non-zero mean unless gaussian)")),
    };
    Marginal::from_params(spec.kind, mean, cov)
}
