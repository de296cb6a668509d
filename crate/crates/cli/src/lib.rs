//! Scenario runner behind the `causality-lab` binary.
//!
//! A scenario is parsed, validated into a [`Job`] (models built, events checked
//! against their domains, paths checked to be affine), executed, and rendered
//! into JSON, CSV and SVG reports.

pub mod gallery;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use causality_lab_core::{
    self as core, ambient_relation_compare, counterexample_run, distance, refocus_probe, relation, scan,
    semicontinuity_check, skies_intersect, sky, split_count, strong_refocus_probe, AmbientComparison,
    CausalRelationReport, CounterexampleReport, DistanceBackend, Event, LightRay, PointPath, RefocusReport,
    ScanReport, SemicontinuityReport, Settings, SpacetimeModel, SplitReport, StrongRefocusReport,
};
use serde::Serialize;

pub use output::Format;
use scenario::{Coords, Evaluator, Scenario, Task};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or invalid scenario.
    #[error("{0}")]
    Parse(String),
    #[error("precondition failed: {0}")]
    Precondition(core::Error),
    #[error("numerical failure: {0}")]
    Numerical(core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Precondition(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<core::Error> for CliError {
    fn from(e: core::Error) -> Self {
        match e {
            core::Error::NonconvergentSequence { .. } | core::Error::NoncausalChord { .. } => CliError::Numerical(e),
            _ => CliError::Precondition(e),
        }
    }
}

/// Reads a scenario from disk, falling back to the bundled gallery by name.
pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(err) => match gallery::find(&path.to_string_lossy()) {
            Some(entry) => entry.text.to_string(),
            None => return Err(CliError::Parse(format!("cannot read {}: {err}", path.display()))),
        },
    };
    Scenario::from_toml(&text)
}

/// A scenario with every input evaluated and checked.
pub enum Job {
    Relation { model: SpacetimeModel, p: Event, q: Event },
    Distance { model: SpacetimeModel, p: Event, q: Event, backend: DistanceBackend },
    Scan { model: SpacetimeModel, path1: PointPath, path2: PointPath, grid_n: usize, refine_iters: usize },
    Counterexample,
    Refocus { model: SpacetimeModel, x: Event, eps: f64, y: Event, k: usize, strong: Vec<(Event, Event)> },
    StrongRefocus { model: SpacetimeModel, cases: Vec<(Event, Event)>, k: usize },
    SkyIntersect { model: SpacetimeModel, pairs: Vec<(Event, Event)>, k: usize },
    Split { ambient: SpacetimeModel, sub: SpacetimeModel, ray: LightRay },
    AmbientCompare { sub: SpacetimeModel, ambient: SpacetimeModel, pairs: Vec<(Event, Event)> },
    Semicontinuity { model: SpacetimeModel, p_seq: Coords, q_seq: Coords, p: Event, q: Event },
}

fn build(spec: &Option<core::ModelSpec>, key: &str, settings: &Settings) -> Result<SpacetimeModel, CliError> {
    let spec = spec
        .as_ref()
        .ok_or_else(|| CliError::Parse(format!("missing [{key}] section for this task")))?;
    SpacetimeModel::build(spec, settings).map_err(|e| CliError::Parse(format!("{key}: {e}")))
}

fn pairs(model: &SpacetimeModel, a: &Coords, b: &Coords, keys: [&str; 2], count: usize) -> Result<Vec<(Event, Event)>, CliError> {
    (0..count)
        .map(|n| Ok((scenario::event(model, a, keys[0], n)?, scenario::event(model, b, keys[1], n)?)))
        .collect()
}

fn positive_count(count: Option<usize>, key: &str) -> Result<usize, CliError> {
    match count {
        Some(0) => Err(CliError::Parse(format!("{key}: must be at least 1"))),
        Some(c) => Ok(c),
        None => Ok(1),
    }
}

/// Checks a scenario and evaluates its inputs without running anything heavy.
pub fn prepare(sc: &Scenario) -> Result<Job, CliError> {
    let s = &sc.tolerances;
    let model = || build(&sc.model, "model", s);
    let fan = |m: &SpacetimeModel, k: Option<usize>| k.unwrap_or_else(|| s.fan_for(m.spatial_dim()));
    let job = match &sc.task {
        Task::Relation { p, q } => {
            let model = model()?;
            let (p, q) = (scenario::event(&model, p, "task.p", 0)?, scenario::event(&model, q, "task.q", 0)?);
            Job::Relation { model, p, q }
        }
        Task::Distance { p, q, backend, nodes } => {
            let model = model()?;
            Job::Distance {
                p: scenario::event(&model, p, "task.p", 0)?,
                q: scenario::event(&model, q, "task.q", 0)?,
                backend: scenario::backend(*backend, *nodes, s),
                model,
            }
        }
        Task::Scan { path1, path2, grid_n, refine_iters } => {
            let model = model()?;
            let dim = model.dim();
            Job::Scan {
                path1: scenario::point_path(path1, dim, "task.path1")?,
                path2: scenario::point_path(path2, dim, "task.path2")?,
                grid_n: grid_n.unwrap_or(s.grid_n),
                refine_iters: refine_iters.unwrap_or(s.refine_iters),
                model,
            }
        }
        Task::Counterexample => Job::Counterexample,
        Task::Refocus { x, eps, y, k, strong } => {
            let model = model()?;
            let mut cases = Vec::new();
            for (i, case) in strong.iter().enumerate() {
                let key = format!("task.strong[{i}]");
                let count = positive_count(case.count, &format!("{key}.count"))?;
                cases.extend(pairs(&model, &case.x, &case.y, [format!("{key}.x").as_str(), format!("{key}.y").as_str()], count)?);
            }
            Job::Refocus {
                x: scenario::event(&model, x, "task.x", 0)?,
                y: scenario::event(&model, y, "task.y", 0)?,
                eps: *eps,
                k: fan(&model, *k),
                strong: cases,
                model,
            }
        }
        Task::StrongRefocus { x, y, k, count } => {
            let model = model()?;
            let count = positive_count(*count, "task.count")?;
            Job::StrongRefocus {
                cases: pairs(&model, x, y, ["task.x", "task.y"], count)?,
                k: fan(&model, *k),
                model,
            }
        }
        Task::SkyIntersect { x, y, k, count } => {
            let model = model()?;
            let count = positive_count(*count, "task.count")?;
            Job::SkyIntersect {
                pairs: pairs(&model, x, y, ["task.x", "task.y"], count)?,
                k: fan(&model, *k),
                model,
            }
        }
        Task::Split { anchor, direction } => {
            let ambient = build(&sc.ambient, "ambient", s)?;
            let sub = model()?;
            let anchor = scenario::event(&ambient, anchor, "task.anchor", 0)?;
            let direction = Evaluator::new().coords(direction, "task.direction")?;
            let ray = LightRay::through(&ambient, &anchor, &direction, s.ray_span, s.step)
                .map_err(|e| CliError::Parse(format!("task.direction: {e}")))?;
            Job::Split { ambient, sub, ray }
        }
        Task::AmbientCompare { p, q, count } => {
            let ambient = build(&sc.ambient, "ambient", s)?;
            let sub = model()?;
            let count = positive_count(*count, "task.count")?;
            Job::AmbientCompare {
                pairs: pairs(&sub, p, q, ["task.p", "task.q"], count)?,
                sub,
                ambient,
            }
        }
        Task::Semicontinuity { p_seq, q_seq, p, q } => {
            let model = model()?;
            for n in [1, 2] {
                scenario::event(&model, p_seq, "task.p_seq", n)?;
                scenario::event(&model, q_seq, "task.q_seq", n)?;
            }
            Job::Semicontinuity {
                p: scenario::event(&model, p, "task.p", 0)?,
                q: scenario::event(&model, q, "task.q", 0)?,
                p_seq: p_seq.clone(),
                q_seq: q_seq.clone(),
                model,
            }
        }
    };
    Ok(job)
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceResult {
    #[serde(flatten)]
    pub backend: DistanceBackend,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongCaseResult {
    pub x: Event,
    pub y: Event,
    pub report: StrongRefocusReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefocusResult {
    pub probe: RefocusReport,
    pub strong: Vec<StrongCaseResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkyPairResult {
    pub x: Event,
    pub y: Event,
    pub intersects: bool,
    pub residual: f64,
    pub witness: Option<LightRay>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitResult {
    pub ray: LightRay,
    #[serde(flatten)]
    pub split: SplitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparePairResult {
    pub p: Event,
    pub q: Event,
    #[serde(flatten)]
    pub comparison: AmbientComparison,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResult {
    pub any_condition2_violated: bool,
    pub pairs: Vec<ComparePairResult>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum TaskResult {
    Relation(CausalRelationReport),
    Distance(DistanceResult),
    Scan(ScanReport),
    Counterexample(CounterexampleReport),
    Refocus(RefocusResult),
    StrongRefocus(Vec<StrongCaseResult>),
    SkyIntersect(Vec<SkyPairResult>),
    Split(SplitResult),
    AmbientCompare(CompareResult),
    Semicontinuity(SemicontinuityReport),
}

impl TaskResult {
    /// Scans carried by this result, labelled when there are several.
    pub fn scans(&self) -> Vec<(Option<&'static str>, &ScanReport)> {
        match self {
            TaskResult::Scan(r) => vec![(None, r)],
            TaskResult::Counterexample(r) => vec![(Some("ambient"), &r.ambient), (Some("punctured"), &r.punctured)],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: Scenario,
    pub result: TaskResult,
}

fn sequence_term(cs: &Coords, n: u64) -> Vec<f64> {
    Evaluator::new()
        .with("n", n as f64)
        .coords(cs, "sequence")
        .unwrap_or_else(|_| vec![f64::NAN; cs.len()])
}

pub fn execute(sc: &Scenario, job: Job) -> Result<TaskResult, CliError> {
    let s = &sc.tolerances;
    let result = match job {
        Job::Relation { model, p, q } => TaskResult::Relation(relation(&model, &p, &q, s)?),
        Job::Distance { model, p, q, backend } => TaskResult::Distance(DistanceResult {
            backend,
            distance: distance(&model, &p, &q, backend, s)?,
        }),
        Job::Scan { model, path1, path2, grid_n, refine_iters } => {
            TaskResult::Scan(scan(&model, &path1, &path2, grid_n, refine_iters, s)?)
        }
        Job::Counterexample => TaskResult::Counterexample(counterexample_run(s)?),
        Job::Refocus { model, x, eps, y, k, strong } => TaskResult::Refocus(RefocusResult {
            probe: refocus_probe(&model, &x, eps, &y, k, s)?,
            strong: strong_cases(&model, strong, k, s)?,
        }),
        Job::StrongRefocus { model, cases, k } => TaskResult::StrongRefocus(strong_cases(&model, cases, k, s)?),
        Job::SkyIntersect { model, pairs, k } => {
            let mut out = Vec::with_capacity(pairs.len());
            for (x, y) in pairs {
                let r = skies_intersect(&model, &sky(&model, &x, k, s)?, &sky(&model, &y, k, s)?, s.tol_hit, s)?;
                out.push(SkyPairResult {
                    x,
                    y,
                    intersects: r.intersects,
                    residual: r.residual,
                    witness: r.witness,
                });
            }
            TaskResult::SkyIntersect(out)
        }
        Job::Split { ambient, sub, ray } => {
            let split = split_count(&ambient, &sub, &ray)?;
            TaskResult::Split(SplitResult { ray, split })
        }
        Job::AmbientCompare { sub, ambient, pairs } => {
            let pairs = pairs
                .into_iter()
                .map(|(p, q)| {
                    let comparison = ambient_relation_compare(&sub, &ambient, &p, &q, s)?;
                    Ok(ComparePairResult { p, q, comparison })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            TaskResult::AmbientCompare(CompareResult {
                any_condition2_violated: pairs.iter().any(|r| r.comparison.condition2_violated),
                pairs,
            })
        }
        Job::Semicontinuity { model, p_seq, q_seq, p, q } => TaskResult::Semicontinuity(semicontinuity_check(
            &model,
            &|n| sequence_term(&p_seq, n),
            &|n| sequence_term(&q_seq, n),
            &p,
            &q,
            s,
        )?),
    };
    Ok(result)
}

fn strong_cases(model: &SpacetimeModel, cases: Vec<(Event, Event)>, k: usize, s: &Settings) -> Result<Vec<StrongCaseResult>, CliError> {
    cases
        .into_iter()
        .map(|(x, y)| {
            let report = strong_refocus_probe(model, &x, &y, k, s)?;
            Ok(StrongCaseResult { x, y, report })
        })
        .collect()
}

/// Validates and runs a scenario.
pub fn run(sc: &Scenario) -> Result<Report, CliError> {
    let job = prepare(sc)?;
    Ok(Report {
        tool: "causality-lab",
        version: env!("CARGO_PKG_VERSION"),
        scenario: sc.clone(),
        result: execute(sc, job)?,
    })
}

/// File stem for a scenario's outputs.
pub fn stem(sc: &Scenario) -> String {
    sc.name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_+.".contains(c) { c } else { '_' })
        .collect()
}

/// Rendered output files, in a fixed order.
pub fn render(report: &Report, formats: &[Format]) -> Vec<(String, Vec<u8>)> {
    let stem = stem(&report.scenario);
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut files = Vec::new();
    for format in formats {
        match format {
            Format::Json => files.push((format!("{stem}.json"), output::json(report))),
            Format::Csv | Format::Svg => {
                for (label, scan) in report.result.scans() {
                    let name = match label {
                        Some(l) => format!("{stem}.{l}"),
                        None => stem.clone(),
                    };
                    if format == Format::Csv {
                        files.push((format!("{name}.csv"), output::csv(scan)));
                    } else {
                        files.push((format!("{name}.svg"), output::svg(scan, &name)));
                    }
                }
            }
        }
    }
    files
}

/// Runs a scenario file and writes its reports into `out`.
pub fn run_to_dir(config: &Path, out: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, CliError> {
    let sc = load(config)?;
    let report = run(&sc)?;
    Ok(output::write_all(out, &render(&report, formats))?)
}
