//! Scenario files: TOML with a `[model]`, an optional `[ambient]`, optional
//! `[tolerances]` overrides and exactly one `[task]`.
//!
//! Coordinates are numbers or expression strings. Expressions may use `pi`,
//! the path parameter `t`, the sweep index `n`, and the `math::` functions of
//! the expression engine (`math::sin(n)`, `math::sqrt(2)`, ...).

use std::f64::consts::PI;

use causality_lab_core::{DistanceBackend, Event, ModelSpec, PointPath, Settings, SpacetimeModel};
use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Value};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Enclosing model for `split` and `ambient-compare`; `model` is the sub-model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<ModelSpec>,
    #[serde(default)]
    pub tolerances: Settings,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coord {
    Number(f64),
    Expr(String),
}

pub type Coords = Vec<Coord>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    /// One expression per coordinate, affine in `t`.
    Affine(Coords),
    Polyline { polyline: Vec<Coords> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    #[default]
    Analytic,
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongCase {
    pub x: Coords,
    pub y: Coords,
    /// Sweep size: `y` (and `x`) are evaluated for `n = 0, …, count − 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Relation {
        p: Coords,
        q: Coords,
    },
    Distance {
        p: Coords,
        q: Coords,
        #[serde(default)]
        backend: BackendName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<usize>,
    },
    Scan {
        path1: PathSpec,
        path2: PathSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refine_iters: Option<usize>,
    },
    Counterexample,
    Refocus {
        x: Coords,
        eps: f64,
        y: Coords,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        /// Strong refocussing checks run alongside the probe.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        strong: Vec<StrongCase>,
    },
    StrongRefocus {
        x: Coords,
        y: Coords,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
    },
    SkyIntersect {
        x: Coords,
        y: Coords,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
    },
    Split {
        anchor: Coords,
        direction: Coords,
    },
    AmbientCompare {
        p: Coords,
        q: Coords,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
    },
    Semicontinuity {
        /// Sequence terms as expressions in `n`.
        p_seq: Coords,
        q_seq: Coords,
        p: Coords,
        q: Coords,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Relation { .. } => "relation",
            Task::Distance { .. } => "distance",
            Task::Scan { .. } => "scan",
            Task::Counterexample => "counterexample",
            Task::Refocus { .. } => "refocus",
            Task::StrongRefocus { .. } => "strong-refocus",
            Task::SkyIntersect { .. } => "sky-intersect",
            Task::Split { .. } => "split",
            Task::AmbientCompare { .. } => "ambient-compare",
            Task::Semicontinuity { .. } => "semicontinuity",
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }
}

/// Evaluates coordinate expressions with `pi`, `t` and `n` bound.
pub struct Evaluator {
    context: HashMapContext<DefaultNumericTypes>,
}

impl Evaluator {
    pub fn new() -> Self {
        let mut context = HashMapContext::<DefaultNumericTypes>::new();
        context
            .set_value("pi".into(), Value::Float(PI))
            .expect("fresh context accepts values");
        Self { context }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.context
            .set_value(name.into(), Value::Float(value))
            .expect("variables keep their float type");
        self
    }

    pub fn coord(&self, c: &Coord, key: &str) -> Result<f64, CliError> {
        let value = match c {
            Coord::Number(v) => *v,
            Coord::Expr(e) => evalexpr::eval_number_with_context(e, &self.context)
                .map_err(|err| CliError::Parse(format!("{key}: cannot evaluate `{e}`: {err}")))?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(CliError::Parse(format!("{key}: value is not finite")))
        }
    }

    pub fn coords(&self, cs: &Coords, key: &str) -> Result<Vec<f64>, CliError> {
        cs.iter()
            .enumerate()
            .map(|(i, c)| self.coord(c, &format!("{key}[{i}]")))
            .collect()
    }
}

impl Default for Evaluator {
    fn default() -> Self {
        Self::new()
    }
}

/// Validated event in `model`.
pub fn event(model: &SpacetimeModel, cs: &Coords, key: &str, n: usize) -> Result<Event, CliError> {
    let x = Evaluator::new().with("n", n as f64).coords(cs, key)?;
    if x.len() != model.dim() {
        return Err(CliError::Parse(format!(
            "{key}: expected {} coordinates, got {}",
            model.dim(),
            x.len()
        )));
    }
    model
        .event(x)
        .map_err(|e| CliError::Parse(format!("{key}: {e}")))
}

pub fn point_path(spec: &PathSpec, dim: usize, key: &str) -> Result<PointPath, CliError> {
    let check_len = |n: usize| {
        if n == dim {
            Ok(())
        } else {
            Err(CliError::Parse(format!("{key}: expected {dim} coordinates, got {n}")))
        }
    };
    match spec {
        PathSpec::Affine(cs) => {
            check_len(cs.len())?;
            let at = |t: f64| Evaluator::new().with("t", t).coords(cs, key);
            let (a, b) = (at(0.0)?, at(1.0)?);
            for probe in [0.25, 0.5, 0.8] {
                let mid = at(probe)?;
                for i in 0..dim {
                    let linear = a[i] + probe * (b[i] - a[i]);
                    if (mid[i] - linear).abs() > 1e-12 * (1.0 + a[i].abs() + b[i].abs()) {
                        return Err(CliError::Parse(format!("{key}[{i}]: expression is not affine in t")));
                    }
                }
            }
            let velocity = a.iter().zip(&b).map(|(x, y)| y - x).collect::<Vec<_>>();
            Ok(PointPath::affine(a, velocity))
        }
        PathSpec::Polyline { polyline } => {
            if polyline.len() < 2 {
                return Err(CliError::Parse(format!("{key}.polyline: needs at least two vertices")));
            }
            let vertices = polyline
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    check_len(v.len())?;
                    Evaluator::new().coords(v, &format!("{key}.polyline[{i}]"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(PointPath::Polyline { vertices })
        }
    }
}

pub fn backend(name: BackendName, nodes: Option<usize>, settings: &Settings) -> DistanceBackend {
    match name {
        BackendName::Analytic => DistanceBackend::Analytic,
        BackendName::Graph => DistanceBackend::Graph {
            nodes: nodes.unwrap_or(settings.graph_nodes),
        },
    }
}
