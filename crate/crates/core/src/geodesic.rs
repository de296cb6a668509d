//! Null geodesics: fixed-step RK4 integration of the geodesic equation with a
//! null projection after every step, celestial-sphere fans, and two-point
//! shooting.
//!
//! Affine parameters are normalized by `g(v, T) = −1` at the start event.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{bilinear, halton, CausalVector, Event, SpacetimeModel};
use crate::optimize::nelder_mead;
use crate::settings::Settings;

/// Upper bound on the affine span of a shot; shots normally stop once they
/// pass the target's time coordinate.
const SHOT_SPAN_LIMIT: f64 = 1e3;
const EXIT_BISECTIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicSample {
    pub s: f64,
    pub event: Event,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    SpanEnd,
    DomainExit { event: Event },
    ExcisionHit { hole: usize, event: Event },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullGeodesic {
    pub start: Event,
    pub initial: CausalVector,
    pub samples: Vec<GeodesicSample>,
    pub termination: Termination,
}

impl NullGeodesic {
    pub fn last(&self) -> &GeodesicSample {
        self.samples.last().expect("geodesics hold at least their start")
    }

    /// Sample coordinates in order.
    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.event.coords())
    }
}

/// How far and which way to integrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub step: f64,
    pub max_span: f64,
    /// Integrate toward increasing affine parameter (future) or decreasing (past).
    pub forward: bool,
    /// Pass through holes, recording only the first crossing.
    pub ignore_holes: bool,
    /// Stop once the time coordinate passes this value in the direction of travel.
    pub t_stop: Option<f64>,
}

impl IntegrationOptions {
    pub fn new(step: f64, max_span: f64) -> Self {
        Self {
            step,
            max_span,
            forward: true,
            ignore_holes: false,
            t_stop: None,
        }
    }

    pub fn backward(mut self) -> Self {
        self.forward = false;
        self
    }
}

/// First hole crossed by a trajectory integrated with `ignore_holes`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HoleCrossing {
    pub hole: usize,
    pub s: f64,
    /// Number of samples strictly before the crossing.
    pub index: usize,
    pub event: Event,
}

#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub geodesic: NullGeodesic,
    pub crossing: Option<HoleCrossing>,
}

impl Trace {
    /// The geodesic as the excised model sees it: cut at the first hole.
    pub fn truncated(&self) -> NullGeodesic {
        match &self.crossing {
            None => self.geodesic.clone(),
            Some(c) => {
                let mut g = self.geodesic.clone();
                g.samples.truncate(c.index);
                let velocity = g.last().velocity.clone();
                g.samples.push(GeodesicSample {
                    s: c.s,
                    event: c.event.clone(),
                    velocity,
                });
                g.termination = Termination::ExcisionHit {
                    hole: c.hole,
                    event: c.event.clone(),
                };
                g
            }
        }
    }
}

/// Integrates the null geodesic through `start` with initial future null
/// `direction` over affine span `max_span`.
pub fn integrate_null(
    model: &SpacetimeModel,
    start: &Event,
    direction: &CausalVector,
    max_span: f64,
    step: f64,
) -> Result<NullGeodesic> {
    integrate_with(model, start, direction, IntegrationOptions::new(step, max_span))
}

/// [`integrate_null`] with explicit options.
pub fn integrate_with(
    model: &SpacetimeModel,
    start: &Event,
    direction: &CausalVector,
    options: IntegrationOptions,
) -> Result<NullGeodesic> {
    if !(options.step > 0.0) {
        return Err(Error::StepNonpositive(options.step));
    }
    if !model.contains(start.coords())? {
        return Err(Error::StartOutsideDomain(start.coords().to_vec()));
    }
    let checked = model.causal_vector(start, direction.components.clone());
    if !checked.is_future_null() {
        let v = &direction.components;
        return Err(Error::NonNullDirection {
            norm: model.inner(start.coords(), v, v),
            future: checked.future,
        });
    }
    Ok(trace(model, start.coords(), &checked.components, options).geodesic)
}

struct Scratch {
    gamma: Vec<f64>,
    metric: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self {
            gamma: vec![0.0; d * d * d],
            metric: vec![0.0; d * d],
        }
    }
}

fn acceleration(model: &SpacetimeModel, x: &[f64], v: &[f64], out: &mut [f64], scratch: &mut Scratch) {
    let d = x.len();
    model.christoffel_into(x, &mut scratch.gamma);
    for k in 0..d {
        let block = &scratch.gamma[k * d * d..(k + 1) * d * d];
        out[k] = -bilinear(block, d, v, v);
    }
}

fn rk4(
    model: &SpacetimeModel,
    x: &[f64],
    v: &[f64],
    h: f64,
    scratch: &mut Scratch,
) -> (Vec<f64>, Vec<f64>) {
    let d = x.len();
    if model.is_chart_flat() {
        let xn = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
        return (xn, v.to_vec());
    }
    let mut a1 = vec![0.0; d];
    let mut a2 = vec![0.0; d];
    let mut a3 = vec![0.0; d];
    let mut a4 = vec![0.0; d];
    acceleration(model, x, v, &mut a1, scratch);
    let x2: Vec<f64> = (0..d).map(|i| x[i] + 0.5 * h * v[i]).collect();
    let v2: Vec<f64> = (0..d).map(|i| v[i] + 0.5 * h * a1[i]).collect();
    acceleration(model, &x2, &v2, &mut a2, scratch);
    let x3: Vec<f64> = (0..d).map(|i| x[i] + 0.5 * h * v2[i]).collect();
    let v3: Vec<f64> = (0..d).map(|i| v[i] + 0.5 * h * a2[i]).collect();
    acceleration(model, &x3, &v3, &mut a3, scratch);
    let x4: Vec<f64> = (0..d).map(|i| x[i] + h * v3[i]).collect();
    let v4: Vec<f64> = (0..d).map(|i| v[i] + h * a3[i]).collect();
    acceleration(model, &x4, &v4, &mut a4, scratch);
    let xn = (0..d)
        .map(|i| x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]))
        .collect();
    let vn = (0..d)
        .map(|i| v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]))
        .collect();
    (xn, vn)
}

/// Re-solves the time component so that `g(v, v) = 0`, keeping the root
/// closest to the current value.
fn project_null(model: &SpacetimeModel, x: &[f64], v: &mut [f64], scratch: &mut Scratch) {
    let d = x.len();
    let t = d - 1;
    model.metric_into(x, &mut scratch.metric);
    let g = &scratch.metric;
    let a = g[t * d + t];
    let b: f64 = (0..t).map(|i| g[t * d + i] * v[i]).sum();
    let c: f64 = (0..t)
        .flat_map(|i| (0..t).map(move |j| (i, j)))
        .map(|(i, j)| g[i * d + j] * v[i] * v[j])
        .sum();
    let disc = (b * b - a * c).max(0.0).sqrt();
    let r1 = (-b + disc) / a;
    let r2 = (-b - disc) / a;
    v[t] = if (r1 - v[t]).abs() <= (r2 - v[t]).abs() { r1 } else { r2 };
}

/// Entry parameter `u ∈ [0, 1]` of the segment `x → x + seg` into the first hole
/// it touches.
pub(crate) fn segment_hole_hit(model: &SpacetimeModel, x: &[f64], seg: &[f64]) -> Option<(usize, f64)> {
    let seg2: f64 = seg.iter().map(|c| c * c).sum();
    let mut best: Option<(usize, f64)> = None;
    for (id, hole) in model.holes().iter().enumerate() {
        let r = model.hit_radius(hole);
        let rel = model.chart_delta(x, &hole.center);
        let rel2: f64 = rel.iter().map(|c| c * c).sum();
        let u = if rel2 <= r * r {
            0.0
        } else {
            if seg2 == 0.0 {
                continue;
            }
            let proj: f64 = rel.iter().zip(seg).map(|(a, b)| a * b).sum();
            let disc = proj * proj - seg2 * (rel2 - r * r);
            if disc < 0.0 {
                continue;
            }
            let u = (proj - disc.sqrt()) / seg2;
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            u
        };
        if best.is_none_or(|(_, b)| u < b) {
            best = Some((id, u));
        }
    }
    best
}

pub(crate) fn trace(model: &SpacetimeModel, x0: &[f64], v0: &[f64], opts: IntegrationOptions) -> Trace {
    let d = model.dim();
    let mut scratch = Scratch::new(d);
    let sign = if opts.forward { 1.0 } else { -1.0 };
    let n_steps = (opts.max_span / opts.step).ceil().max(0.0) as usize;
    let start = Event::new(x0.to_vec());
    let initial = model.causal_vector(&start, v0.to_vec());

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut s = 0.0;
    let mut samples = vec![GeodesicSample {
        s,
        event: Event::new(model.normalize(x.clone())),
        velocity: v.clone(),
    }];
    let mut crossing: Option<HoleCrossing> = None;
    let mut termination = Termination::SpanEnd;

    for i in 0..n_steps {
        let span_left = opts.max_span - i as f64 * opts.step;
        let h = sign * opts.step.min(span_left);
        let (mut xn, mut vn) = rk4(model, &x, &v, h, &mut scratch);
        let mut h_taken = h;
        let exited = !model.in_region(&xn);
        if exited {
            // Largest fraction of the step that stays in the region.
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..EXIT_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let (xm, _) = rk4(model, &x, &v, mid * h, &mut scratch);
                if model.in_region(&xm) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if lo == 0.0 {
                termination = Termination::DomainExit {
                    event: samples.last().unwrap().event.clone(),
                };
                break;
            }
            let (xm, vm) = rk4(model, &x, &v, lo * h, &mut scratch);
            xn = xm;
            vn = vm;
            h_taken = lo * h;
        }

        if !model.holes().is_empty() {
            let seg: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if let Some((hole, u)) = segment_hole_hit(model, &x, &seg) {
                let hit: Vec<f64> = x.iter().zip(&seg).map(|(a, b)| a + u * b).collect();
                let hit_event = Event::new(model.normalize(hit));
                if opts.ignore_holes {
                    if crossing.is_none() {
                        crossing = Some(HoleCrossing {
                            hole,
                            s: s + u * h_taken,
                            index: samples.len(),
                            event: hit_event,
                        });
                    }
                } else {
                    samples.push(GeodesicSample {
                        s: s + u * h_taken,
                        event: hit_event.clone(),
                        velocity: v.clone(),
                    });
                    termination = Termination::ExcisionHit {
                        hole,
                        event: hit_event,
                    };
                    break;
                }
            }
        }

        project_null(model, &xn, &mut vn, &mut scratch);
        x = xn;
        v = vn;
        s += h_taken;
        let event = Event::new(model.normalize(x.clone()));
        samples.push(GeodesicSample {
            s,
            event: event.clone(),
            velocity: v.clone(),
        });
        if exited {
            termination = Termination::DomainExit { event };
            break;
        }
        if let Some(t_stop) = opts.t_stop {
            let t = x[d - 1];
            if (opts.forward && t >= t_stop) || (!opts.forward && t <= t_stop) {
                break;
            }
        }
    }

    Trace {
        geodesic: NullGeodesic {
            start,
            initial,
            samples,
            termination,
        },
        crossing,
    }
}

/// Affine parameter of closest approach to `target` and the chart distance
/// there. The minimizing sample is refined by a parabola through its
/// neighbours.
pub fn closest_approach(model: &SpacetimeModel, geodesic: &NullGeodesic, target: &Event) -> (f64, f64) {
    let (s, r, _) = closest_approach_point(model, &geodesic.samples, target.coords());
    (s, r)
}

/// Like [`closest_approach`] but also returns the interpolated point.
pub(crate) fn closest_approach_point(
    model: &SpacetimeModel,
    samples: &[GeodesicSample],
    target: &[f64],
) -> (f64, f64, Vec<f64>) {
    let rel: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| model.chart_delta(target, s.event.coords()))
        .collect();
    let dist2: Vec<f64> = rel.iter().map(|r| r.iter().map(|c| c * c).sum()).collect();
    let (best, _) = dist2
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &d)| if d < acc.1 { (i, d) } else { acc });
    let sample_point = samples[best].event.coords().to_vec();
    let sample_result = (samples[best].s, dist2[best].sqrt(), sample_point);
    let n = samples.len();
    if n < 3 {
        return sample_result;
    }
    let mid = best.clamp(1, n - 2);
    let idx = [mid - 1, mid, mid + 1];
    let s: Vec<f64> = idx.iter().map(|&i| samples[i].s).collect();
    let f: Vec<f64> = idx.iter().map(|&i| dist2[i]).collect();
    let denom = (s[0] - s[1]) * (s[0] - s[2]) * (s[1] - s[2]);
    if denom == 0.0 || !denom.is_finite() {
        return sample_result;
    }
    let a = (s[2] * (f[1] - f[0]) + s[1] * (f[0] - f[2]) + s[0] * (f[2] - f[1])) / denom;
    let b = (s[2] * s[2] * (f[0] - f[1]) + s[1] * s[1] * (f[2] - f[0]) + s[0] * s[0] * (f[1] - f[2])) / denom;
    let (s_lo, s_hi) = (s[0].min(s[2]), s[0].max(s[2]));
    let s_star = if a > 0.0 {
        (-b / (2.0 * a)).clamp(s_lo, s_hi)
    } else {
        samples[best].s
    };
    // Quadratic Lagrange interpolation of the position relative to the target.
    let basis = [
        (s_star - s[1]) * (s_star - s[2]) / ((s[0] - s[1]) * (s[0] - s[2])),
        (s_star - s[0]) * (s_star - s[2]) / ((s[1] - s[0]) * (s[1] - s[2])),
        (s_star - s[0]) * (s_star - s[1]) / ((s[2] - s[0]) * (s[2] - s[1])),
    ];
    let d = target.len();
    let rel_star: Vec<f64> = (0..d)
        .map(|k| (0..3).map(|j| basis[j] * rel[idx[j]][k]).sum())
        .collect();
    let residual = rel_star.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !residual.is_finite() || residual > sample_result.1 {
        return sample_result;
    }
    let point = model.normalize(target.iter().zip(&rel_star).map(|(t, r)| t + r).collect());
    (s_star, residual, point)
}

/// Orthonormal frame at an event with `e0` along the time orientation.
pub(crate) struct NullFrame {
    e0: Vec<f64>,
    spatial: Vec<Vec<f64>>,
    scale: f64,
}

impl NullFrame {
    pub fn at(model: &SpacetimeModel, x: &[f64]) -> Self {
        let d = model.dim();
        let mut g = vec![0.0; d * d];
        model.metric_into(x, &mut g);
        let inner = |u: &[f64], v: &[f64]| bilinear(&g, d, u, v);
        let t = model.time_orientation(x);
        let tt = -inner(&t, &t);
        let e0: Vec<f64> = t.iter().map(|c| c / tt.sqrt()).collect();
        let mut spatial: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
        for axis in 0..d - 1 {
            let mut u = vec![0.0; d];
            u[axis] = 1.0;
            let along0 = inner(&u, &e0);
            for k in 0..d {
                u[k] += along0 * e0[k];
            }
            for e in &spatial {
                let c = inner(&u, e);
                for k in 0..d {
                    u[k] -= c * e[k];
                }
            }
            let norm = inner(&u, &u).sqrt();
            u.iter_mut().for_each(|c| *c /= norm);
            spatial.push(u);
        }
        Self {
            e0,
            spatial,
            scale: 1.0 / tt.sqrt(),
        }
    }

    /// Future null vector for the unit spatial direction `n`, normalized by
    /// `g(v, T) = −1`.
    pub fn direction(&self, n: &[f64]) -> Vec<f64> {
        let mut v = self.e0.clone();
        for (ni, e) in n.iter().zip(&self.spatial) {
            for k in 0..v.len() {
                v[k] += ni * e[k];
            }
        }
        v.iter_mut().for_each(|c| *c *= self.scale);
        v
    }
}

/// `k` roughly uniform unit vectors on `S^{m−1}`.
pub(crate) fn celestial_points(m: usize, k: usize) -> Vec<Vec<f64>> {
    match m {
        1 => [vec![1.0], vec![-1.0]].into_iter().take(k).collect(),
        2 => (0..k)
            .map(|j| {
                let a = TAU * j as f64 / k as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..k)
                .map(|j| {
                    let z = 1.0 - (2 * j + 1) as f64 / k as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * j as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            const BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
            let mut out = Vec::with_capacity(k);
            let mut index = 1u64;
            while out.len() < k {
                let p: Vec<f64> = (0..m)
                    .map(|i| 2.0 * halton(index, BASES[i % BASES.len()]) - 1.0)
                    .collect();
                index += 1;
                let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 0.05 && norm <= 1.0 {
                    out.push(p.into_iter().map(|c| c / norm).collect());
                }
            }
            out
        }
    }
}

/// Typical angular spacing of a `k`-point fan on `S^{m−1}`.
fn fan_spacing(m: usize, k: usize) -> f64 {
    match m {
        1 => 0.0,
        2 => TAU / k as f64,
        _ => (4.0 * std::f64::consts::PI / k as f64).powf(1.0 / (m - 1) as f64),
    }
}

/// Orthonormal basis of the tangent space of `S^{m−1}` at `n`.
fn tangent_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let m = n.len();
    let skip = (0..m)
        .max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
        .unwrap_or(0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for axis in (0..m).filter(|&a| a != skip) {
        let mut u = vec![0.0; m];
        u[axis] = 1.0;
        let c: f64 = n[axis];
        for k in 0..m {
            u[k] -= c * n[k];
        }
        for b in &basis {
            let c: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            for k in 0..m {
                u[k] -= c * b[k];
            }
        }
        let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        basis.push(u.into_iter().map(|c| c / norm).collect());
    }
    basis
}

fn perturb(n0: &[f64], basis: &[Vec<f64>], a: &[f64]) -> Vec<f64> {
    let mut n = n0.to_vec();
    for (ai, b) in a.iter().zip(basis) {
        for k in 0..n.len() {
            n[k] += ai * b[k];
        }
    }
    let norm = n.iter().map(|c| c * c).sum::<f64>().sqrt();
    n.into_iter().map(|c| c / norm).collect()
}

/// `k` future null directions at `event`, spread over the celestial sphere.
pub fn null_directions_at(model: &SpacetimeModel, event: &Event, k: usize) -> Result<Vec<CausalVector>> {
    if !model.contains(event.coords())? {
        return Err(Error::EventOutsideDomain(event.coords().to_vec()));
    }
    let m = model.spatial_dim();
    if k == 0 || (m == 1 && k != 2) {
        return Err(Error::InvalidFanSize { k, m });
    }
    let frame = NullFrame::at(model, event.coords());
    Ok(celestial_points(m, k)
        .iter()
        .map(|n| model.causal_vector(event, frame.direction(n)))
        .collect())
}

/// A numerically integrated null geodesic from `start` that passes within
/// `residual` of `target`.
#[derive(Debug, Clone, Serialize)]
pub struct NullCertificate {
    pub start: Event,
    pub target: Event,
    /// Initial tangent, normalized by `g(v, T) = −1`.
    pub direction: Vec<f64>,
    /// Whether the shot travelled to the future of `start`.
    pub future: bool,
    pub s_star: f64,
    pub residual: f64,
    pub closest_point: Vec<f64>,
    #[serde(skip)]
    pub geodesic: NullGeodesic,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectFailure {
    /// Best shot as seen by the model (cut at holes).
    pub best: NullCertificate,
    /// Residual of the same shot continued through holes.
    pub unobstructed_residual: f64,
    /// Hole that stops an otherwise successful shot before its closest approach.
    pub blocked_by: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Connection {
    Connected(NullCertificate),
    Failed(ConnectFailure),
}

impl Connection {
    pub fn is_connected(&self) -> bool {
        matches!(self, Connection::Connected(_))
    }

    pub fn certificate(&self) -> Option<&NullCertificate> {
        match self {
            Connection::Connected(c) => Some(c),
            Connection::Failed(_) => None,
        }
    }

    pub fn blocked_by(&self) -> Option<usize> {
        match self {
            Connection::Connected(_) => None,
            Connection::Failed(f) => f.blocked_by,
        }
    }

    /// Residual of the returned certificate or of the best failed shot.
    pub fn residual(&self) -> f64 {
        match self {
            Connection::Connected(c) => c.residual,
            Connection::Failed(f) => f.best.residual,
        }
    }
}

struct Shot {
    future: bool,
    n: Vec<f64>,
    trace: Trace,
    s_star: f64,
    residual: f64,
    point: Vec<f64>,
}

fn shoot(
    model: &SpacetimeModel,
    frame: &NullFrame,
    p: &[f64],
    q: &[f64],
    n: Vec<f64>,
    future: bool,
    step: f64,
) -> Shot {
    let dt = q[q.len() - 1] - p[p.len() - 1];
    let margin = 0.5 * dt.abs() + 20.0 * step;
    let t_stop = q[q.len() - 1] + if future { margin } else { -margin };
    let v = frame.direction(&n);
    let opts = IntegrationOptions {
        step,
        max_span: SHOT_SPAN_LIMIT,
        forward: future,
        ignore_holes: true,
        t_stop: Some(t_stop),
    };
    let trace = trace(model, p, &v, opts);
    let (s_star, residual, point) = closest_approach_point(model, &trace.geodesic.samples, q);
    Shot {
        future,
        n,
        trace,
        s_star,
        residual,
        point,
    }
}

/// Two-point null connection by shooting. Fans of future- and past-directed
/// null geodesics leave `p`; the best is refined with Nelder–Mead over the
/// celestial sphere. Success requires `residual ≤ tol_hit` with no hole or
/// domain boundary before the closest approach.
pub fn connect_null(
    model: &SpacetimeModel,
    p: &Event,
    q: &Event,
    fan: usize,
    tol_hit: f64,
    settings: &Settings,
) -> Result<Connection> {
    for e in [p, q] {
        if !model.contains(e.coords())? {
            return Err(Error::EventOutsideDomain(e.coords().to_vec()));
        }
    }
    if model.chart_distance(p.coords(), q.coords()) == 0.0 {
        return Err(Error::IdenticalEvents);
    }
    let m = model.spatial_dim();
    if fan == 0 || (m == 1 && fan != 2) {
        return Err(Error::InvalidFanSize { k: fan, m });
    }
    let (x, y) = (p.coords(), q.coords());
    let dt = q.t() - p.t();
    let frame = NullFrame::at(model, x);
    let step = settings.step;
    let points = celestial_points(m, fan);

    let mut orientations = Vec::with_capacity(2);
    if dt >= -tol_hit {
        orientations.push(true);
    }
    if dt <= tol_hit {
        orientations.push(false);
    }
    let candidates: Vec<(bool, usize)> = orientations
        .iter()
        .flat_map(|&f| (0..points.len()).map(move |i| (f, i)))
        .collect();
    let residuals: Vec<f64> = candidates
        .par_iter()
        .map(|&(future, i)| shoot(model, &frame, x, y, points[i].clone(), future, step).residual)
        .collect();
    // Sequential reduction keeps the first minimum: future before past, then fan order.
    let (best_idx, _) = residuals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &r)| if r < acc.1 { (i, r) } else { acc });
    let (future, fan_index) = candidates[best_idx];
    let n0 = points[fan_index].clone();

    let mut best = shoot(model, &frame, x, y, n0.clone(), future, step);
    if m >= 2 && best.residual > 0.0 && settings.refine_budget > 0 {
        let basis = tangent_basis(&n0);
        let (a, _) = nelder_mead(
            |a| shoot(model, &frame, x, y, perturb(&n0, &basis, a), future, step).residual,
            &vec![0.0; m - 1],
            fan_spacing(m, fan),
            settings.refine_budget,
        );
        let refined = shoot(model, &frame, x, y, perturb(&n0, &basis, &a), future, step);
        if refined.residual < best.residual {
            best = refined;
        }
    }

    let blocked_before = best
        .trace
        .crossing
        .as_ref()
        .filter(|c| c.s.abs() <= best.s_star.abs())
        .map(|c| c.hole);
    let geodesic = best.trace.truncated();
    let (s_star, residual, closest_point) = match blocked_before {
        None => (best.s_star, best.residual, best.point.clone()),
        Some(_) => closest_approach_point(model, &geodesic.samples, y),
    };
    let certificate = NullCertificate {
        start: p.clone(),
        target: q.clone(),
        direction: frame.direction(&best.n),
        future: best.future,
        s_star,
        residual,
        closest_point,
        geodesic,
    };
    if blocked_before.is_none() && best.residual <= tol_hit {
        return Ok(Connection::Connected(certificate));
    }
    Ok(Connection::Failed(ConnectFailure {
        best: certificate,
        unobstructed_residual: best.residual,
        blocked_by: blocked_before.filter(|_| best.residual <= tol_hit),
    }))
}
