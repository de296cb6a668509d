//! Scans of `d̄(t) = d(p₁(t), p₂(t))` along a pair of point paths: locates the
//! first parameter where the pair stops being chronological and tries to
//! certify a common null geodesic there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causality::{causally_unrelated, relation, Relation, Witness};
use crate::error::{Error, Result};
use crate::geodesic::{closest_approach_point, connect_null, Connection, NullCertificate};
use crate::model::{excise, Event, Hole, ModelSpec, SpacetimeModel};
use crate::settings::Settings;

/// A continuous map `[0, 1] → chart`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PointPath {
    /// `origin + t·velocity`.
    Affine { origin: Vec<f64>, velocity: Vec<f64> },
    /// Linear interpolation between vertices at equally spaced parameters.
    Polyline { vertices: Vec<Vec<f64>> },
}

impl PointPath {
    pub fn constant(x: impl Into<Vec<f64>>) -> Self {
        let origin = x.into();
        let velocity = vec![0.0; origin.len()];
        PointPath::Affine { origin, velocity }
    }

    pub fn affine(origin: impl Into<Vec<f64>>, velocity: impl Into<Vec<f64>>) -> Self {
        PointPath::Affine {
            origin: origin.into(),
            velocity: velocity.into(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PointPath::Affine { origin, .. } => origin.len(),
            PointPath::Polyline { vertices } => vertices.first().map_or(0, Vec::len),
        }
    }

    fn check(&self, model: &SpacetimeModel) -> Result<()> {
        let d = model.dim();
        let dims: Vec<usize> = match self {
            PointPath::Affine { origin, velocity } => vec![origin.len(), velocity.len()],
            PointPath::Polyline { vertices } => {
                if vertices.len() < 2 {
                    return Err(Error::MalformedSpec("a polyline path needs two vertices".into()));
                }
                vertices.iter().map(Vec::len).collect()
            }
        };
        match dims.into_iter().find(|&n| n != d) {
            Some(actual) => Err(Error::DimensionMismatch { expected: d, actual }),
            None => Ok(()),
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        match self {
            PointPath::Affine { origin, velocity } => origin.iter().zip(velocity).map(|(a, b)| a + t * b).collect(),
            PointPath::Polyline { vertices } => {
                let segments = vertices.len() - 1;
                let u = t.clamp(0.0, 1.0) * segments as f64;
                let i = (u.floor() as usize).min(segments - 1);
                let f = u - i as f64;
                vertices[i].iter().zip(&vertices[i + 1]).map(|(a, b)| a + f * (b - a)).collect()
            }
        }
    }

    fn event(&self, model: &SpacetimeModel, t: f64) -> Event {
        Event::new(model.normalize(self.at(t)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TheoremConfirmed,
    CounterexampleNoCommonNullGeodesic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSample {
    pub t: f64,
    pub dbar: f64,
    pub relation: Relation,
}

/// One call to the null shooter while certifying.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationAttempt {
    pub t: f64,
    pub connected: bool,
    pub residual: f64,
    pub blocked_by: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub grid: Vec<ScanSample>,
    /// `[τ₋, τ₊]`: `d̄ > δ_d` at every grid point before `τ₋`, `d̄(τ₊) ≤ δ_d`.
    pub tau_bracket: [f64; 2],
    pub tau_hat: f64,
    pub certificate: Option<NullCertificate>,
    /// Parameter at which the certificate was found.
    pub certified_at: Option<f64>,
    pub verdict: Verdict,
    /// Hole that blocked the best failed certification.
    pub blocking_hole: Option<usize>,
    /// Later grid parameters where `d̄` drops to zero again after being positive.
    pub other_zeros: Vec<f64>,
    /// False for one spatial dimension, where the theorem's hypothesis fails.
    pub hypothesis_m_gt_1: bool,
    pub attempts: Vec<CertificationAttempt>,
}

/// Connects `p₁(t)` to `p₂(t)` with a null geodesic.
pub fn certify_at(
    model: &SpacetimeModel,
    path1: &PointPath,
    path2: &PointPath,
    t: f64,
    settings: &Settings,
) -> Result<Connection> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::ParameterOutOfRange(t));
    }
    path1.check(model)?;
    path2.check(model)?;
    let fan = settings.fan_for(model.spatial_dim());
    connect_null(
        model,
        &path1.event(model, t),
        &path2.event(model, t),
        fan,
        settings.tol_hit,
        settings,
    )
}

fn sample(model: &SpacetimeModel, path1: &PointPath, path2: &PointPath, t: f64, settings: &Settings) -> Result<(ScanSample, Option<NullCertificate>)> {
    let report = relation(model, &path1.event(model, t), &path2.event(model, t), settings)?;
    let certificate = match report.witness {
        Some(Witness::Null(c)) => Some(c),
        _ => None,
    };
    Ok((
        ScanSample {
            t,
            dbar: report.distance,
            relation: report.relation,
        },
        certificate,
    ))
}

/// Brackets `τ = inf{t | d̄(t) = 0}` on a uniform grid of `grid_n` points, then
/// bisects the positivity indicator `refine_iters` times and certifies.
pub fn scan(
    model: &SpacetimeModel,
    path1: &PointPath,
    path2: &PointPath,
    grid_n: usize,
    refine_iters: usize,
    settings: &Settings,
) -> Result<ScanReport> {
    path1.check(model)?;
    path2.check(model)?;
    if grid_n < 11 {
        return Err(Error::GridTooCoarse(grid_n));
    }
    let ev = |path: &PointPath, t| path.event(model, t);
    let start = relation(model, &ev(path1, 0.0), &ev(path2, 0.0), settings)?;
    if start.relation == Relation::Unrelated {
        return Err(Error::EndpointsInvalid(
            "at t = 0 the pair must be chronological or horismos".into(),
        ));
    }
    if !causally_unrelated(model, &ev(path1, 1.0), &ev(path2, 1.0), settings)? {
        return Err(Error::EndpointsInvalid("at t = 1 the pair must be causally unrelated".into()));
    }

    let delta = settings.delta_d;
    let params: Vec<f64> = (0..grid_n).map(|i| i as f64 / (grid_n - 1) as f64).collect();
    let evaluated: Vec<(ScanSample, Option<NullCertificate>)> = params
        .par_iter()
        .map(|&t| sample(model, path1, path2, t, settings))
        .collect::<Result<_>>()?;
    let (grid, certs): (Vec<ScanSample>, Vec<Option<NullCertificate>>) = evaluated.into_iter().unzip();

    let first = grid
        .iter()
        .position(|s| s.dbar <= delta)
        .ok_or_else(|| Error::EndpointsInvalid("d̄ stays positive on the whole grid".into()))?;
    let other_zeros = (first + 1..grid.len())
        .filter(|&i| grid[i].dbar <= delta && grid[i - 1].dbar > delta)
        .map(|i| grid[i].t)
        .collect();
    let mut report = ScanReport {
        tau_bracket: [grid[first].t; 2],
        tau_hat: grid[first].t,
        certificate: None,
        certified_at: None,
        verdict: Verdict::CounterexampleNoCommonNullGeodesic,
        blocking_hole: None,
        other_zeros,
        hypothesis_m_gt_1: model.spatial_dim() > 1,
        attempts: Vec::new(),
        grid,
    };

    if report.grid[first].relation == Relation::Horismos {
        let cert = certs[first].clone().expect("horismos reports carry a null witness");
        report.attempts.push(CertificationAttempt {
            t: report.tau_hat,
            connected: true,
            residual: cert.residual,
            blocked_by: None,
        });
        report.certified_at = Some(report.tau_hat);
        report.certificate = Some(cert);
        report.verdict = Verdict::TheoremConfirmed;
        return Ok(report);
    }

    // d̄ may jump, so bisect the indicator d̄ > δ rather than a root.
    let (mut lo, mut hi) = (report.grid[first.saturating_sub(1)].t, report.grid[first].t);
    if first > 0 {
        for _ in 0..refine_iters {
            let mid = 0.5 * (lo + hi);
            let (s, _) = sample(model, path1, path2, mid, settings)?;
            if s.dbar > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    report.tau_bracket = [lo, hi];
    report.tau_hat = 0.5 * (lo + hi);

    let step = 1.0 / (grid_n - 1) as f64;
    let i_lo = ((lo / step).floor() as usize).saturating_sub(2);
    let i_hi = (((hi / step).ceil() as usize) + 2).min(grid_n - 1);
    let mut candidates = vec![report.tau_hat, lo, hi];
    candidates.extend((i_lo..=i_hi).map(|i| params[i]));
    let mut seen: Vec<f64> = Vec::new();
    for t in candidates {
        if seen.contains(&t) {
            continue;
        }
        seen.push(t);
        let connection = match certify_at(model, path1, path2, t, settings) {
            Ok(c) => c,
            Err(Error::IdenticalEvents) => continue,
            Err(e) => return Err(e),
        };
        report.attempts.push(CertificationAttempt {
            t,
            connected: connection.is_connected(),
            residual: connection.residual(),
            blocked_by: connection.blocked_by(),
        });
        if report.blocking_hole.is_none() {
            report.blocking_hole = connection.blocked_by();
        }
        if let Connection::Connected(cert) = connection {
            report.certificate = Some(cert);
            report.certified_at = Some(t);
            report.verdict = Verdict::TheoremConfirmed;
            report.blocking_hole = None;
            break;
        }
    }
    Ok(report)
}

/// Both scans of the punctured-plane example side by side.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub hole: Vec<f64>,
    pub ambient: ScanReport,
    pub punctured: ScanReport,
    /// Closest approach of the ambient certificate to the hole center.
    pub ambient_certificate_hole_miss: Option<f64>,
}

/// Paths `p₁ ≡ (0, 0)` and `p₂(t) = (4t, 2)` in flat 1+1 space and in the
/// same space with the point `(1, 1)` removed.
pub fn counterexample_run(settings: &Settings) -> Result<CounterexampleReport> {
    let hole = vec![1.0, 1.0];
    let ambient = SpacetimeModel::build(&ModelSpec::minkowski(1), settings)?;
    let punctured = excise(&ambient, vec![Hole::point(hole.clone())])?;
    let path1 = PointPath::constant([0.0, 0.0]);
    let path2 = PointPath::affine([0.0, 2.0], [4.0, 0.0]);
    let (grid_n, iters) = (settings.grid_n, settings.refine_iters);
    let ambient_report = scan(&ambient, &path1, &path2, grid_n, iters, settings)?;
    let punctured_report = scan(&punctured, &path1, &path2, grid_n, iters, settings)?;
    let miss = ambient_report
        .certificate
        .as_ref()
        .map(|c| closest_approach_point(&ambient, &c.geodesic.samples, &hole).1);
    Ok(CounterexampleReport {
        hole,
        ambient: ambient_report,
        punctured: punctured_report,
        ambient_certificate_hole_miss: miss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_spacetime;

    fn flat(m: usize) -> SpacetimeModel {
        build_spacetime(&ModelSpec::minkowski(m)).unwrap()
    }

    fn paper_paths() -> (PointPath, PointPath) {
        (PointPath::constant([0.0, 0.0]), PointPath::affine([0.0, 2.0], [4.0, 0.0]))
    }

    #[test]
    fn flat_2p1_scan_confirms_theorem() {
        let s = Settings::default();
        let m = flat(2);
        let p1 = PointPath::constant([0.0, 0.0, 0.0]);
        let p2 = PointPath::affine([0.0, 0.0, 2.0], [4.0, 0.0, 0.0]);
        let r = scan(&m, &p1, &p2, 101, 20, &s).unwrap();
        assert_eq!(r.verdict, Verdict::TheoremConfirmed);
        assert!((r.tau_hat - 0.5).abs() < 1e-3);
        assert!(r.tau_bracket[1] - r.tau_bracket[0] <= 1e-6);
        assert!(r.certificate.unwrap().residual <= 1e-6);
        assert!(r.hypothesis_m_gt_1);
        assert_eq!(r.grid.len(), 101);
    }

    #[test]
    fn counterexample_verdicts() {
        let s = Settings::default();
        let r = counterexample_run(&s).unwrap();
        assert_eq!(r.ambient.verdict, Verdict::TheoremConfirmed);
        assert!((r.ambient.tau_hat - 0.5).abs() < 1e-3);
        assert!(r.ambient_certificate_hole_miss.unwrap() < 1e-6);
        assert!(!r.ambient.hypothesis_m_gt_1);
        assert_eq!(r.punctured.verdict, Verdict::CounterexampleNoCommonNullGeodesic);
        assert_eq!(r.punctured.blocking_hole, Some(0));
        let [lo, hi] = r.punctured.tau_bracket;
        assert!(lo <= 0.5 && 0.5 <= hi && hi - lo < 1e-6);
        assert!(r.punctured.attempts.len() >= 3);
        assert!(r.punctured.attempts.iter().all(|a| !a.connected));
    }

    #[test]
    fn certify_at_examples() {
        let s = Settings::default();
        let (p1, p2) = paper_paths();
        let ambient = flat(1);
        let c = certify_at(&ambient, &p1, &p2, 0.5, &s).unwrap();
        let cert = c.certificate().unwrap();
        let (_, miss, _) = closest_approach_point(&ambient, &cert.geodesic.samples, &[1.0, 1.0]);
        assert!(miss < 1e-6);

        let punctured = excise(&ambient, vec![Hole::point([1.0, 1.0])]).unwrap();
        let c = certify_at(&punctured, &p1, &p2, 0.5, &s).unwrap();
        assert_eq!(c.blocked_by(), Some(0));

        assert!(!certify_at(&ambient, &p1, &p2, 0.0, &s).unwrap().is_connected());
        assert_eq!(
            certify_at(&ambient, &p1, &p2, 1.5, &s).unwrap_err(),
            Error::ParameterOutOfRange(1.5)
        );
    }

    #[test]
    fn endpoint_and_grid_preconditions() {
        let s = Settings::default();
        let m = flat(1);
        let (p1, p2) = paper_paths();
        assert_eq!(scan(&m, &p1, &p2, 10, 20, &s).unwrap_err(), Error::GridTooCoarse(10));
        let reversed = PointPath::affine([4.0, 2.0], [-4.0, 0.0]);
        assert!(matches!(scan(&m, &p1, &reversed, 101, 20, &s), Err(Error::EndpointsInvalid(_))));
        let stays = PointPath::constant([0.0, 2.0]);
        assert!(matches!(scan(&m, &p1, &stays, 101, 20, &s), Err(Error::EndpointsInvalid(_))));
    }

    #[test]
    fn bracket_off_grid_is_bisected() {
        let s = Settings::default();
        let m = flat(1);
        let p1 = PointPath::constant([0.0, 0.0]);
        // Null at 4τ = 1.7, between grid points.
        let p2 = PointPath::affine([0.0, 1.7], [4.0, 0.0]);
        let r = scan(&m, &p1, &p2, 101, 20, &s).unwrap();
        let [lo, hi] = r.tau_bracket;
        assert!(lo <= 0.425 && 0.425 <= hi && hi - lo < 1e-7, "{lo} {hi}");
        for g in r.grid.iter().filter(|g| g.t < lo) {
            assert!(g.dbar > s.delta_d);
        }
        assert_eq!(r.verdict, Verdict::TheoremConfirmed);
    }

    #[test]
    fn polyline_paths_interpolate() {
        let p = PointPath::Polyline {
            vertices: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 3.0]],
        };
        assert_eq!(p.at(0.25), vec![0.5, 0.5]);
        assert_eq!(p.at(0.75), vec![1.0, 2.0]);
        assert_eq!(p.at(1.0), vec![1.0, 3.0]);
    }

    #[test]
    fn ambient_bracket_covers_first_sub_degradation() {
        let s = Settings::default();
        let (p1, p2) = paper_paths();
        let r = counterexample_run(&s).unwrap();
        let first_sub = r
            .punctured
            .grid
            .iter()
            .find(|g| g.relation != Relation::Chronological)
            .unwrap()
            .t;
        let step = 0.01;
        let [lo, hi] = r.ambient.tau_bracket;
        assert!(lo - step <= first_sub && first_sub <= hi + step);
        let again = scan(&flat(1), &p1, &p2, 101, 20, &s).unwrap();
        assert_eq!(grid_bits(&again.grid), grid_bits(&r.ambient.grid));
    }

    fn grid_bits(grid: &[ScanSample]) -> Vec<(u64, u64)> {
        grid.iter().map(|g| (g.t.to_bits(), g.dbar.to_bits())).collect()
    }
}
