//! Light rays, skies, refocussing probes, ray splitting under restriction, and
//! comparison of causal relations between a sub-model and its ambient model.

use rayon::prelude::*;
use serde::Serialize;

use crate::causality::{relation, Relation};
use crate::error::{Error, Result};
use crate::geodesic::{
    closest_approach_point, connect_null, null_directions_at, segment_hole_hit, trace, GeodesicSample,
    IntegrationOptions, Termination,
};
use crate::model::{Event, SpacetimeModel};
use crate::settings::Settings;

/// An unparameterized future-directed null geodesic, stored as the maximal
/// integrated trajectory through `anchor` in both directions.
#[derive(Debug, Clone, Serialize)]
pub struct LightRay {
    pub anchor: Event,
    /// Future null tangent at the anchor with `g(v, T) = −1`.
    pub direction: Vec<f64>,
    /// Affine parameter range `[s₋ ≤ 0, s₊ ≥ 0]` relative to the anchor.
    pub extent: [f64; 2],
    pub past_end: Termination,
    pub future_end: Termination,
    /// Samples in increasing affine parameter.
    #[serde(skip)]
    pub samples: Vec<GeodesicSample>,
}

impl LightRay {
    /// Integrates the ray through `anchor` with tangent `direction` over
    /// affine span `span` to each side.
    pub fn through(model: &SpacetimeModel, anchor: &Event, direction: &[f64], span: f64, step: f64) -> Result<Self> {
        if !model.contains(anchor.coords())? {
            return Err(Error::EventOutsideDomain(anchor.coords().to_vec()));
        }
        if step <= 0.0 {
            return Err(Error::StepNonpositive(step));
        }
        let v = model.causal_vector(anchor, direction.to_vec());
        if !v.is_future_null() {
            return Err(Error::NonNullDirection {
                norm: model.inner(anchor.coords(), direction, direction),
                future: v.future,
            });
        }
        let scale = -model.inner(anchor.coords(), direction, &model.time_orientation(anchor.coords()));
        let direction: Vec<f64> = direction.iter().map(|c| c / scale).collect();
        let opts = IntegrationOptions::new(step, span);
        let future = trace(model, anchor.coords(), &direction, opts).geodesic;
        let past = trace(model, anchor.coords(), &direction, opts.backward()).geodesic;
        let mut samples: Vec<GeodesicSample> = past.samples.into_iter().skip(1).rev().collect();
        samples.extend(future.samples);
        Ok(Self {
            anchor: anchor.clone(),
            direction,
            extent: [samples[0].s, samples[samples.len() - 1].s],
            past_end: past.termination,
            future_end: future.termination,
            samples,
        })
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.event.coords())
    }

    fn t_range(&self) -> [f64; 2] {
        [self.samples[0].event.t(), self.samples[self.samples.len() - 1].event.t()]
    }

    /// Point of the ray at time coordinate `t` (linear between samples).
    fn at_time(&self, model: &SpacetimeModel, t: f64) -> Vec<f64> {
        let i = self
            .samples
            .partition_point(|s| s.event.t() < t)
            .clamp(1, self.samples.len() - 1);
        let (a, b) = (self.samples[i - 1].event.coords(), self.samples[i].event.coords());
        let (ta, tb) = (a[a.len() - 1], b[b.len() - 1]);
        let f = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        let delta = model.chart_delta(a, b);
        model.normalize(a.iter().zip(&delta).map(|(x, d)| x + f * d).collect())
    }

    /// Chart distance from `x` to the ray polyline. Time increases along the
    /// ray and bounds chart distance from below, so the search stays local.
    fn distance_to(&self, model: &SpacetimeModel, x: &[f64]) -> f64 {
        let n = self.samples.len();
        if n == 1 {
            return model.chart_distance(self.samples[0].event.coords(), x);
        }
        let t = x[x.len() - 1];
        let start = self.samples.partition_point(|s| s.event.t() < t).clamp(1, n - 1) - 1;
        let seg = |i: usize| segment_distance(model, self.samples[i].event.coords(), self.samples[i + 1].event.coords(), x).0;
        let mut best = seg(start);
        let t_of = |i: usize| self.samples[i].event.t();
        let mut i = start;
        while i > 0 && t - t_of(i) < best {
            i -= 1;
            best = best.min(seg(i));
        }
        let mut j = start + 1;
        while j + 1 < n && t_of(j) - t < best {
            best = best.min(seg(j));
            j += 1;
        }
        best
    }
}

/// Distance from `x` to the segment `a → b` and the nearest point on it.
fn segment_distance(model: &SpacetimeModel, a: &[f64], b: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let seg = model.chart_delta(a, b);
    let w = model.chart_delta(a, x);
    let seg2: f64 = seg.iter().map(|c| c * c).sum();
    let u = if seg2 > 0.0 {
        (w.iter().zip(&seg).map(|(p, q)| p * q).sum::<f64>() / seg2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dist = w.iter().zip(&seg).map(|(p, q)| (p - u * q).powi(2)).sum::<f64>().sqrt();
    let point = model.normalize(a.iter().zip(&seg).map(|(p, q)| p + u * q).collect());
    (dist, point)
}

/// `count` equally spaced times in `[lo, hi]`.
fn resample_times(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64)
}

/// Symmetric Hausdorff distance between two rays over the overlap of their
/// time ranges, using `count` resampled points per ray. Infinite when the
/// ranges do not overlap.
pub fn hausdorff_distance(model: &SpacetimeModel, a: &LightRay, b: &LightRay, count: usize) -> f64 {
    let ([a0, a1], [b0, b1]) = (a.t_range(), b.t_range());
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi {
        return f64::INFINITY;
    }
    let one_way = |from: &LightRay, to: &LightRay| {
        resample_times(lo, hi, count)
            .map(|t| to.distance_to(model, &from.at_time(model, t)))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Rays are equal when their point sets agree within `tol` over the overlap.
pub fn same_ray(model: &SpacetimeModel, a: &LightRay, b: &LightRay, settings: &Settings) -> bool {
    hausdorff_distance(model, a, b, settings.hausdorff_samples) <= settings.tol_hit
}

/// The light rays through one event.
#[derive(Debug, Clone, Serialize)]
pub struct Sky {
    pub event: Event,
    pub rays: Vec<LightRay>,
}

/// `k` rays through `x` along a fan of null directions.
pub fn sky(model: &SpacetimeModel, x: &Event, k: usize, settings: &Settings) -> Result<Sky> {
    if k < 2 {
        return Err(Error::InvalidFanSize {
            k,
            m: model.spatial_dim(),
        });
    }
    let directions = null_directions_at(model, x, k)?;
    let rays = directions
        .par_iter()
        .map(|v| LightRay::through(model, x, &v.components, settings.ray_span, settings.step))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sky {
        event: x.clone(),
        rays,
    })
}

/// Two skies intersect iff some light ray passes through both events.
#[derive(Debug, Clone, Serialize)]
pub struct SkyIntersection {
    pub intersects: bool,
    pub residual: f64,
    pub witness: Option<LightRay>,
}

pub fn skies_intersect(model: &SpacetimeModel, s1: &Sky, s2: &Sky, tol: f64, settings: &Settings) -> Result<SkyIntersection> {
    if model.chart_distance(s1.event.coords(), s2.event.coords()) == 0.0 {
        return Err(Error::IdenticalEvents);
    }
    let fan = s1.rays.len().max(s2.rays.len());
    let connection = connect_null(model, &s1.event, &s2.event, fan, tol, settings)?;
    let witness = match connection.certificate() {
        Some(c) => Some(LightRay::through(model, &s1.event, &c.direction, settings.ray_span, settings.step)?),
        None => None,
    };
    Ok(SkyIntersection {
        intersects: witness.is_some(),
        residual: connection.residual(),
        witness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefocusReport {
    pub pass: bool,
    /// First point of each ray inside the neighbourhood, if any.
    pub entries: Vec<Option<Vec<f64>>>,
}

/// Witness check for refocussing at `x`: every ray through `y` enters the
/// chart ball of radius `eps` around `x`.
pub fn refocus_probe(model: &SpacetimeModel, x: &Event, eps: f64, y: &Event, k: usize, settings: &Settings) -> Result<RefocusReport> {
    if model.chart_distance(x.coords(), y.coords()) < eps {
        return Err(Error::YInsideNeighborhood);
    }
    let sky = sky(model, y, k, settings)?;
    let entries: Vec<Option<Vec<f64>>> = sky
        .rays
        .iter()
        .map(|ray| {
            ray.samples.windows(2).find_map(|w| {
                let (d, point) = segment_distance(model, w[0].event.coords(), w[1].event.coords(), x.coords());
                (d <= eps).then_some(point)
            })
        })
        .collect();
    Ok(RefocusReport {
        pass: entries.iter().all(Option::is_some),
        entries,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongRefocusReport {
    pub pass: bool,
    pub worst_residual: f64,
    pub residuals: Vec<f64>,
}

/// Witness check for strong refocussing: every ray through `y` passes
/// through `x` within `tol_hit`.
pub fn strong_refocus_probe(model: &SpacetimeModel, x: &Event, y: &Event, k: usize, settings: &Settings) -> Result<StrongRefocusReport> {
    if model.chart_distance(x.coords(), y.coords()) == 0.0 {
        return Err(Error::IdenticalEvents);
    }
    let sky = sky(model, y, k, settings)?;
    let residuals: Vec<f64> = sky
        .rays
        .iter()
        .map(|ray| closest_approach_point(model, &ray.samples, x.coords()).1)
        .collect();
    let worst_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(StrongRefocusReport {
        pass: worst_residual <= settings.tol_hit,
        worst_residual,
        residuals,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub count: usize,
    pub segments: Vec<LightRay>,
}

/// Splits an ambient ray into the maximal pieces that stay inside `sub`.
pub fn split_count(ambient: &SpacetimeModel, sub: &SpacetimeModel, ray: &LightRay) -> Result<SplitReport> {
    if !sub.is_restriction_of(ambient) {
        return Err(Error::NotARestriction);
    }
    if ray.anchor.dim() != ambient.dim() {
        return Err(Error::RayNotInAmbient("dimension differs from the ambient model".into()));
    }
    if let Some(p) = ray.points().find(|p| !ambient.contains_unchecked(p)) {
        return Err(Error::RayNotInAmbient(format!("sample {p:?} is outside the ambient domain")));
    }

    let samples = &ray.samples;
    let inside: Vec<bool> = samples.iter().map(|s| sub.contains_unchecked(s.event.coords())).collect();
    let mut runs: Vec<(usize, usize, Termination, Termination)> = Vec::new();
    let mut start: Option<(usize, Termination)> = None;
    for i in 0..samples.len() {
        let here = samples[i].event.coords();
        if !inside[i] {
            if let Some((s, entry)) = start.take() {
                runs.push((s, i - 1, entry, boundary(sub, &samples[i - 1], &samples[i])));
            }
            continue;
        }
        if start.is_none() {
            let entry = if i == 0 {
                ray.past_end.clone()
            } else {
                boundary(sub, &samples[i], &samples[i - 1])
            };
            start = Some((i, entry));
        }
        if i + 1 == samples.len() {
            let (s, entry) = start.take().expect("run is open");
            runs.push((s, i, entry, ray.future_end.clone()));
            break;
        }
        if inside[i + 1] {
            let seg = sub.chart_delta(here, samples[i + 1].event.coords());
            if let Some((hole, u)) = segment_hole_hit(sub, here, &seg) {
                let event = Event::new(sub.normalize(here.iter().zip(&seg).map(|(x, d)| x + u * d).collect()));
                let (s, entry) = start.take().expect("run is open");
                runs.push((s, i, entry, Termination::ExcisionHit { hole, event: event.clone() }));
                start = Some((i + 1, Termination::ExcisionHit { hole, event }));
            }
        }
    }

    let segments: Vec<LightRay> = runs
        .into_iter()
        .filter(|(a, b, _, _)| b > a)
        .map(|(a, b, past_end, future_end)| {
            let mid = &samples[(a + b) / 2];
            let x = mid.event.coords();
            let scale = -sub.inner(x, &mid.velocity, &sub.time_orientation(x));
            let pieces: Vec<GeodesicSample> = samples[a..=b]
                .iter()
                .map(|s| GeodesicSample {
                    s: (s.s - mid.s) * scale,
                    event: s.event.clone(),
                    velocity: s.velocity.iter().map(|c| c / scale).collect(),
                })
                .collect();
            LightRay {
                anchor: mid.event.clone(),
                direction: mid.velocity.iter().map(|c| c / scale).collect(),
                extent: [pieces[0].s, pieces[pieces.len() - 1].s],
                past_end,
                future_end,
                samples: pieces,
            }
        })
        .collect();
    Ok(SplitReport {
        count: segments.len(),
        segments,
    })
}

/// How a ray leaving `sub` between the samples `from` (inside) and `to` ends.
fn boundary(sub: &SpacetimeModel, from: &GeodesicSample, to: &GeodesicSample) -> Termination {
    let x = from.event.coords();
    let seg = sub.chart_delta(x, to.event.coords());
    match segment_hole_hit(sub, x, &seg) {
        Some((hole, u)) => Termination::ExcisionHit {
            hole,
            event: Event::new(sub.normalize(x.iter().zip(&seg).map(|(p, d)| p + u * d).collect())),
        },
        None => Termination::DomainExit {
            event: from.event.clone(),
        },
    }
}

/// Relations of a pair computed in a sub-model and in its ambient model.
#[derive(Debug, Clone, Serialize)]
pub struct AmbientComparison {
    pub sub_relation: Relation,
    pub ambient_relation: Relation,
    /// The pair is causally unrelated in the sub-model but related in the ambient.
    pub condition2_violated: bool,
}

/// Relation of `q` to `p`, falling back to that of `p` to `q`: `Unrelated` means
/// causally unrelated in both orders.
fn pair_relation(model: &SpacetimeModel, p: &Event, q: &Event, settings: &Settings) -> Result<Relation> {
    match relation(model, p, q, settings)?.relation {
        Relation::Unrelated => Ok(relation(model, q, p, settings)?.relation),
        r => Ok(r),
    }
}

pub fn ambient_relation_compare(
    sub: &SpacetimeModel,
    ambient: &SpacetimeModel,
    p: &Event,
    q: &Event,
    settings: &Settings,
) -> Result<AmbientComparison> {
    if !sub.is_restriction_of(ambient) {
        return Err(Error::NotARestriction);
    }
    if !sub.contains(p.coords())? || !sub.contains(q.coords())? {
        return Err(Error::PairOutsideSubDomain);
    }
    let sub_relation = pair_relation(sub, p, q, settings)?;
    let ambient_relation = pair_relation(ambient, p, q, settings)?;
    Ok(AmbientComparison {
        sub_relation,
        ambient_relation,
        condition2_violated: sub_relation == Relation::Unrelated && ambient_relation != Relation::Unrelated,
    })
}
