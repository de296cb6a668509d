//! Lorentzian arc length, distance and the causal relation classifier.

mod graph;

pub use graph::{ChronoGraph, GraphBox};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{connect_null, segment_hole_hit, NullCertificate};
use crate::model::{bilinear, sphere_distance, wrap_angle, Event, ModelSpec, SpacetimeModel};
use crate::settings::Settings;

/// Samples along curves evaluated in conformally deformed metrics.
const CURVED_SAMPLES: usize = 64;
/// Trapezoid subdivisions per chord when the metric is not constant.
const CHORD_SUBDIVISIONS: usize = 8;

/// A piecewise smooth future causal curve, sampled at parameters in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalCurve {
    samples: Vec<(f64, Event)>,
    breakpoints: Vec<f64>,
}

impl CausalCurve {
    /// `samples` must start at `u = 0`, end at `u = 1` and increase strictly;
    /// every breakpoint must be one of the sample parameters.
    pub fn new(samples: Vec<(f64, Event)>, breakpoints: Vec<f64>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidBreakpoints(msg.to_string()));
        if samples.len() < 2 {
            return bad("a curve needs at least two samples");
        }
        if samples[0].0 != 0.0 || samples[samples.len() - 1].0 != 1.0 {
            return bad("sample parameters must run from 0 to 1");
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("sample parameters must increase");
        }
        if breakpoints.first() != Some(&0.0) || breakpoints.last() != Some(&1.0) {
            return bad("breakpoints must start at 0 and end at 1");
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return bad("breakpoints must increase");
        }
        if !breakpoints.iter().all(|b| samples.iter().any(|(u, _)| u == b)) {
            return bad("every breakpoint must be a sample parameter");
        }
        Ok(Self {
            samples,
            breakpoints,
        })
    }

    /// Straight chord from `p` to `q`.
    pub fn segment(p: Event, q: Event) -> Self {
        Self {
            samples: vec![(0.0, p), (1.0, q)],
            breakpoints: vec![0.0, 1.0],
        }
    }

    /// Polyline with a corner at every vertex.
    pub fn polyline(vertices: Vec<Event>) -> Self {
        let n = vertices.len() - 1;
        let samples: Vec<(f64, Event)> = vertices
            .into_iter()
            .enumerate()
            .map(|(i, e)| (if i == n { 1.0 } else { i as f64 / n as f64 }, e))
            .collect();
        let breakpoints = samples.iter().map(|(u, _)| *u).collect();
        Self {
            samples,
            breakpoints,
        }
    }

    /// A smooth curve through the given points (corners only at the ends).
    pub fn smooth(points: Vec<Event>) -> Self {
        let mut curve = Self::polyline(points);
        curve.breakpoints = vec![0.0, 1.0];
        curve
    }

    pub fn samples(&self) -> &[(f64, Event)] {
        &self.samples
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

/// Lorentzian arc length `L = Σ_pieces ∫ √(−g(α̇, α̇)) du`, evaluated with the
/// composite trapezoid rule chord by chord. Exact for straight chords of flat
/// metrics.
pub fn arc_length(model: &SpacetimeModel, curve: &CausalCurve) -> Result<f64> {
    let d = model.dim();
    let mut g = vec![0.0; d * d];
    let subdivisions = if model.is_chart_flat() { 1 } else { CHORD_SUBDIVISIONS };
    let mut pieces = vec![0.0; curve.breakpoints.len() - 1];
    for (index, pair) in curve.samples.windows(2).enumerate() {
        let a = pair[0].1.coords();
        let delta = model.chart_delta(a, pair[1].1.coords());
        let euclid2: f64 = delta.iter().map(|c| c * c).sum();
        if euclid2 == 0.0 {
            continue;
        }
        let mid: Vec<f64> = a.iter().zip(&delta).map(|(x, dx)| x + 0.5 * dx).collect();
        model.metric_into(&mid, &mut g);
        let norm = bilinear(&g, d, &delta, &delta);
        let along_t = bilinear(&g, d, &delta, &model.time_orientation(&mid));
        if norm > model.eps_null() * euclid2 || along_t >= 0.0 {
            return Err(Error::NoncausalChord { index });
        }
        let integrand = |s: f64, g: &mut Vec<f64>| {
            let x: Vec<f64> = a.iter().zip(&delta).map(|(x, dx)| x + s * dx).collect();
            model.metric_into(&x, g);
            (-bilinear(g, d, &delta, &delta)).max(0.0).sqrt()
        };
        let mut sum = 0.0;
        let mut prev = integrand(0.0, &mut g);
        for j in 1..=subdivisions {
            let next = integrand(j as f64 / subdivisions as f64, &mut g);
            sum += 0.5 * (prev + next) / subdivisions as f64;
            prev = next;
        }
        let piece = curve
            .breakpoints
            .partition_point(|&b| b <= pair[0].0)
            .saturating_sub(1);
        pieces[piece] += sum;
    }
    Ok(pieces.iter().sum())
}

/// How `distance` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum DistanceBackend {
    /// Closed form for flat and cylinder models and their restrictions.
    Analytic,
    /// Longest path in a chronological grid graph of about `nodes` nodes: a
    /// lower bound on the distance.
    Graph { nodes: usize },
}

fn check_pair(model: &SpacetimeModel, p: &Event, q: &Event) -> Result<()> {
    for e in [p, q] {
        if !model.contains(e.coords())? {
            return Err(Error::EventOutsideDomain(e.coords().to_vec()));
        }
    }
    Ok(())
}

/// Lorentzian distance `d(p, q)`: the supremum of arc lengths of future causal
/// curves from `p` to `q`, and 0 when `q ∉ J⁺(p)`.
pub fn distance(
    model: &SpacetimeModel,
    p: &Event,
    q: &Event,
    backend: DistanceBackend,
    settings: &Settings,
) -> Result<f64> {
    check_pair(model, p, q)?;
    match backend {
        DistanceBackend::Analytic => analytic_distance(model, p.coords(), q.coords()),
        DistanceBackend::Graph { nodes } => graph_distance(model, p, q, nodes, settings.horizon),
    }
}

fn analytic_distance(model: &SpacetimeModel, p: &[f64], q: &[f64]) -> Result<f64> {
    if model.is_conformal() {
        return Err(Error::BackendUnsupported {
            backend: "analytic",
            kind: model.name().to_string(),
        });
    }
    let d = model.dim();
    let dt = q[d - 1] - p[d - 1];
    if dt <= 0.0 {
        return Ok(0.0);
    }
    let value = match model.skeleton() {
        ModelSpec::Minkowski { .. } => {
            let rho = model.separation(p, q).rho;
            (dt - rho) * (dt + rho)
        }
        // Maximize over lifts to the universal cover R × (−π, π).
        ModelSpec::Cylinder { n: 1 } => {
            let base = wrap_angle(q[0] - p[0]);
            (-3..=3)
                .map(|w: i32| {
                    let dx = base + std::f64::consts::TAU * w as f64;
                    (dt - dx.abs()) * (dt + dx.abs())
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
        ModelSpec::Cylinder { n } => {
            let rho = sphere_distance(*n, &p[..*n], &q[..*n]);
            (dt - rho) * (dt + rho)
        }
        _ => unreachable!("skeleton is minkowski or cylinder"),
    };
    Ok(if value > 0.0 { value.sqrt() } else { 0.0 })
}

/// Graph estimate over the coordinate bounding box of the causal diamond of
/// `p` and `q`.
fn graph_distance(model: &SpacetimeModel, p: &Event, q: &Event, nodes: usize, horizon: f64) -> Result<f64> {
    let sep = model.separation(p.coords(), q.coords());
    if sep.gap() <= 0.0 {
        return Ok(0.0);
    }
    let d = model.dim();
    let delta = model.chart_delta(p.coords(), q.coords());
    let half = sep.dt / 2.0;
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for i in 0..d - 1 {
        let center = p.coords()[i] + delta[i] / 2.0;
        lo[i] = center - half;
        hi[i] = center + half;
        if let ModelSpec::Cylinder { n } = model.skeleton() {
            if i < n - 1 {
                lo[i] = lo[i].max(1e-9);
                hi[i] = hi[i].min(std::f64::consts::PI - 1e-9);
            }
        }
    }
    lo[d - 1] = p.t();
    hi[d - 1] = q.t();
    let graph = ChronoGraph::grid(model, &GraphBox { lo, hi }, nodes, horizon)?;
    Ok(graph.longest_path(p, q).unwrap_or(0.0).max(0.0))
}

/// Deterministic graph over `bbox` with at most `nodes` nodes and the
/// configured edge horizon.
pub fn chronological_graph(
    model: &SpacetimeModel,
    bbox: &GraphBox,
    nodes: usize,
    settings: &Settings,
) -> Result<ChronoGraph> {
    ChronoGraph::grid(model, bbox, nodes, settings.horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `q ∈ I⁺(p)`.
    Chronological,
    /// `q ∈ J⁺(p) ∖ I⁺(p)`.
    Horismos,
    /// `q ∉ J⁺(p)`.
    Unrelated,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Curve(CausalCurve),
    Null(NullCertificate),
}

/// Where `q` sits relative to the causal future of `p`.
#[derive(Debug, Clone, Serialize)]
pub struct CausalRelationReport {
    pub p: Event,
    pub q: Event,
    pub relation: Relation,
    pub distance: f64,
    /// Set when `distance` is the length of one causal curve rather than the
    /// supremum (conformally deformed models).
    pub distance_is_lower_bound: bool,
    pub witness: Option<Witness>,
    /// Hole that removes the only null connector of a flat-horismos pair.
    pub blocked_by: Option<usize>,
}

/// Points along the curve that realizes the skeleton distance: a straight
/// chord, the shortest lift on the circle, or a great circle on `S^n`.
fn skeleton_curve(model: &SpacetimeModel, p: &[f64], q: &[f64], count: usize) -> Vec<Vec<f64>> {
    let d = model.dim();
    let delta = model.chart_delta(p, q);
    match model.skeleton() {
        ModelSpec::Cylinder { n } if *n >= 2 => {
            let n = *n;
            let a = sphere_point(n, &p[..n]);
            let b = sphere_point(n, &q[..n]);
            let omega = sphere_distance(n, &p[..n], &q[..n]);
            (0..count)
                .map(|j| {
                    let s = j as f64 / (count - 1) as f64;
                    let unit: Vec<f64> = if omega < 1e-12 {
                        a.clone()
                    } else {
                        let (wa, wb) = (((1.0 - s) * omega).sin(), (s * omega).sin());
                        a.iter()
                            .zip(&b)
                            .map(|(x, y)| (wa * x + wb * y) / omega.sin())
                            .collect()
                    };
                    let mut x = sphere_angles(n, &unit, &p[..n]);
                    x.push(p[d - 1] + s * delta[d - 1]);
                    x
                })
                .collect()
        }
        _ => (0..count)
            .map(|j| {
                let s = j as f64 / (count - 1) as f64;
                model.normalize(p.iter().zip(&delta).map(|(x, dx)| x + s * dx).collect())
            })
            .collect(),
    }
}

fn sphere_point(n: usize, angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut prod = 1.0;
    for &chi in &angles[..n - 1] {
        out.push(prod * chi.cos());
        prod *= chi.sin();
    }
    out.push(prod * angles[n - 1].cos());
    out.push(prod * angles[n - 1].sin());
    out
}

/// Inverse of [`sphere_point`]; `fallback` supplies angles at poles.
fn sphere_angles(n: usize, u: &[f64], fallback: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n - 1 {
        let tail: f64 = u[i + 1..].iter().map(|c| c * c).sum::<f64>().sqrt();
        out.push(tail.atan2(u[i]));
    }
    let phi = u[n].atan2(u[n - 1]);
    out.push(if u[n].hypot(u[n - 1]) < 1e-15 {
        fallback[n - 1]
    } else {
        phi.rem_euclid(std::f64::consts::TAU)
    });
    out
}

/// First hole touched by the polyline through `points`.
fn polyline_hole(model: &SpacetimeModel, points: &[Vec<f64>]) -> Option<usize> {
    if model.holes().is_empty() {
        return None;
    }
    points.windows(2).find_map(|w| {
        let delta = model.chart_delta(&w[0], &w[1]);
        segment_hole_hit(model, &w[0], &delta).map(|(h, _)| h)
    })
}

/// Chronological witness; bends the chord around holes that lie on it.
fn chronological_witness(model: &SpacetimeModel, p: &Event, q: &Event) -> CausalCurve {
    let count = if model.is_chart_flat() { 2 } else { CURVED_SAMPLES };
    let points = skeleton_curve(model, p.coords(), q.coords(), count);
    if polyline_hole(model, &points).is_some() && model.is_chart_flat() {
        let d = model.dim();
        let delta = model.chart_delta(p.coords(), q.coords());
        let gap = model.separation(p.coords(), q.coords()).gap();
        for k in 0..8 {
            let offset = 0.25 * gap / f64::powi(2.0, k / 2) * if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut mid: Vec<f64> = p.coords().iter().zip(&delta).map(|(x, dx)| x + 0.5 * dx).collect();
            mid[0] += offset;
            let bent = vec![p.coords().to_vec(), mid.clone(), q.coords().to_vec()];
            if polyline_hole(model, &bent).is_none() && d >= 2 {
                return CausalCurve::polyline(vec![p.clone(), Event::new(mid), q.clone()]);
            }
        }
    }
    CausalCurve::smooth(points.into_iter().map(Event::new).collect())
}

/// Classifies `q` against the causal future of `p`.
///
/// Chronological iff the distance exceeds `delta_d`. Otherwise a future pair on
/// (or within shooting tolerance of) the null cone is horismos iff a null
/// geodesic from `p` reaches `q`; in excised flat models the straight null
/// connector is tested against the holes in closed form first.
pub fn relation(model: &SpacetimeModel, p: &Event, q: &Event, settings: &Settings) -> Result<CausalRelationReport> {
    check_pair(model, p, q)?;
    if model.chart_distance(p.coords(), q.coords()) == 0.0 {
        return Err(Error::IdenticalEvents);
    }
    let sep = model.separation(p.coords(), q.coords());
    let report = |relation, distance, witness, blocked_by| CausalRelationReport {
        p: p.clone(),
        q: q.clone(),
        relation,
        distance,
        distance_is_lower_bound: model.is_conformal(),
        witness,
        blocked_by,
    };

    let mut distance = 0.0;
    if sep.gap() > 0.0 {
        let witness = chronological_witness(model, p, q);
        distance = if model.is_conformal() {
            arc_length(model, &witness).unwrap_or(0.0)
        } else {
            analytic_distance(model, p.coords(), q.coords())?
        };
        if distance > settings.delta_d {
            return Ok(report(Relation::Chronological, distance, Some(Witness::Curve(witness)), None));
        }
    }

    // A spacelike gap g keeps every null geodesic from p at least |g|/√2 away
    // from q in chart distance, so only near-null future pairs need shooting.
    if sep.dt <= 0.0 || sep.gap() < -2.0 * settings.tol_hit {
        return Ok(report(Relation::Unrelated, distance, None, None));
    }
    if matches!(model.skeleton(), ModelSpec::Minkowski { .. }) && !model.holes().is_empty() {
        let chord = [p.coords().to_vec(), q.coords().to_vec()];
        if let Some(hole) = polyline_hole(model, &chord) {
            return Ok(report(Relation::Unrelated, distance, None, Some(hole)));
        }
    }
    let fan = settings.fan_for(model.spatial_dim());
    let connection = connect_null(model, p, q, fan, settings.tol_hit, settings)?;
    match connection.certificate() {
        Some(cert) if cert.future => Ok(report(
            Relation::Horismos,
            distance,
            Some(Witness::Null(cert.clone())),
            None,
        )),
        _ => Ok(report(Relation::Unrelated, distance, None, connection.blocked_by())),
    }
}

/// True when neither event lies in the causal future of the other.
pub fn causally_unrelated(model: &SpacetimeModel, p: &Event, q: &Event, settings: &Settings) -> Result<bool> {
    Ok(relation(model, p, q, settings)?.relation == Relation::Unrelated
        && relation(model, q, p, settings)?.relation == Relation::Unrelated)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemicontinuityReport {
    /// Smallest distance over the sampled tail of the sequence.
    pub d_limit_inferior: f64,
    pub d_at_limit: f64,
    /// Largest chart distance between a tail term and its limit.
    pub tail_spread: f64,
    pub pass: bool,
}

/// Tail terms are sampled at `n = 2^k` and `2^k + 1` for these `k`.
const TAIL_EXPONENTS: std::ops::RangeInclusive<u32> = 30..=40;
const CONVERGENCE_TOL: f64 = 1e-6;

/// Lower semicontinuity of the analytic distance along `(p_n, q_n) → (p, q)`:
/// passes iff `d(p, q) ≤ liminf d(p_n, q_n) + delta_d`.
pub fn semicontinuity_check(
    model: &SpacetimeModel,
    p_seq: &dyn Fn(u64) -> Vec<f64>,
    q_seq: &dyn Fn(u64) -> Vec<f64>,
    p: &Event,
    q: &Event,
    settings: &Settings,
) -> Result<SemicontinuityReport> {
    check_pair(model, p, q)?;
    let mut liminf = f64::INFINITY;
    let mut spread: f64 = 0.0;
    for k in TAIL_EXPONENTS {
        for n in [1u64 << k, (1u64 << k) + 1] {
            let (pn, qn) = (Event::new(p_seq(n)), Event::new(q_seq(n)));
            check_pair(model, &pn, &qn)?;
            spread = spread
                .max(model.chart_distance(pn.coords(), p.coords()))
                .max(model.chart_distance(qn.coords(), q.coords()));
            liminf = liminf.min(analytic_distance(model, pn.coords(), qn.coords())?);
        }
    }
    if spread > CONVERGENCE_TOL {
        return Err(Error::NonconvergentSequence {
            spread,
            tolerance: CONVERGENCE_TOL,
        });
    }
    let d_at_limit = analytic_distance(model, p.coords(), q.coords())?;
    Ok(SemicontinuityReport {
        d_limit_inferior: liminf,
        d_at_limit,
        tail_spread: spread,
        pass: d_at_limit <= liminf + settings.delta_d,
    })
}
