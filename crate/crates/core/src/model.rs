//! Spacetime models: a single global chart, a Lorentzian metric on it, a time
//! orientation, and an open domain (chart range, optional causal-diamond
//! restriction, point holes).
//!
//! Coordinates are ordered with time last and the metric has signature
//! `(+, …, +, −)`. Every built-in model has `∂_t` as its future time
//! orientation and `t` as a time function, which the rest of the crate relies
//! on when it orders events along a null geodesic.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::settings::Settings;

/// Step of the central differences used for Christoffel symbols of
/// conformally deformed metrics.
const FD_STEP: f64 = 1e-5;
const VALIDATION_SAMPLES: usize = 128;

/// Positive scalar fields usable as conformal factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarField {
    Constant { value: f64 },
    /// `exp(Σ coeffs[i]·x_i)`
    ExpLinear { coeffs: Vec<f64> },
    /// `constant + Σ coeffs[i]·x_i`; only positive on part of the chart.
    Affine { constant: f64, coeffs: Vec<f64> },
    Product { factors: Vec<ScalarField> },
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::ExpLinear { coeffs } => dot(coeffs, x).exp(),
            ScalarField::Affine { constant, coeffs } => constant + dot(coeffs, x),
            ScalarField::Product { factors } => factors.iter().map(|f| f.eval(x)).product(),
        }
    }

    /// Pointwise product `self · other`.
    pub fn times(&self, other: &ScalarField) -> ScalarField {
        ScalarField::Product {
            factors: vec![self.clone(), other.clone()],
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            ScalarField::Constant { .. } => Ok(()),
            ScalarField::ExpLinear { coeffs } | ScalarField::Affine { coeffs, .. } => {
                if coeffs.len() == dim {
                    Ok(())
                } else {
                    Err(Error::MalformedSpec(format!(
                        "scalar field has {} coefficients, model dimension is {dim}",
                        coeffs.len()
                    )))
                }
            }
            ScalarField::Product { factors } => factors.iter().try_for_each(|f| f.check_dim(dim)),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A removed point, inflated to a ball of radius `max(radius, eps_hit)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hole {
    pub center: Vec<f64>,
    #[serde(default)]
    pub radius: f64,
}

impl Hole {
    pub fn point(center: impl Into<Vec<f64>>) -> Self {
        Self {
            center: center.into(),
            radius: 0.0,
        }
    }
}

/// Declared causal-class metadata. These are never computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalFlags {
    pub strongly_causal: bool,
    pub causally_simple: bool,
    pub globally_hyperbolic: bool,
}

impl CausalFlags {
    const ALL: CausalFlags = CausalFlags {
        strongly_causal: true,
        causally_simple: true,
        globally_hyperbolic: true,
    };
}

/// Declarative description of a model, as read from scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Flat `R^{m+1}`.
    Minkowski { m: usize },
    /// Einstein cylinder `S^n × (−π, π)` with the unit round metric. For
    /// `n = 1` the chart is `(θ, t)`; for `n ≥ 2` it is hyperspherical
    /// `(χ_1, …, χ_{n−1}, φ, t)` restricted to polar angles in `(0, π)`.
    Cylinder { n: usize },
    Conformal {
        base: Box<ModelSpec>,
        factor: ScalarField,
    },
    Excised {
        base: Box<ModelSpec>,
        holes: Vec<Hole>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        declare: Option<CausalFlags>,
    },
    /// The open causal diamond `I⁺(past_tip) ∩ I⁻(future_tip)` of a flat base.
    Diamond {
        base: Box<ModelSpec>,
        past_tip: Vec<f64>,
        future_tip: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn minkowski(m: usize) -> Self {
        ModelSpec::Minkowski { m }
    }

    pub fn cylinder(n: usize) -> Self {
        ModelSpec::Cylinder { n }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Minkowski { m } => m + 1,
            ModelSpec::Cylinder { n } => n + 1,
            ModelSpec::Conformal { base, .. }
            | ModelSpec::Excised { base, .. }
            | ModelSpec::Diamond { base, .. } => base.dim(),
        }
    }

    fn label(&self) -> String {
        match self {
            ModelSpec::Minkowski { m } => format!("minkowski(m={m})"),
            ModelSpec::Cylinder { n } => format!("cylinder(n={n})"),
            ModelSpec::Conformal { base, .. } => format!("conformal({})", base.label()),
            ModelSpec::Excised { base, holes, .. } => {
                format!("excised({}, {} holes)", base.label(), holes.len())
            }
            ModelSpec::Diamond { base, .. } => format!("diamond({})", base.label()),
        }
    }

    /// Innermost Minkowski or cylinder spec.
    pub fn skeleton(&self) -> &ModelSpec {
        match self {
            ModelSpec::Conformal { base, .. }
            | ModelSpec::Excised { base, .. }
            | ModelSpec::Diamond { base, .. } => base.skeleton(),
            other => other,
        }
    }

    /// The spec with every excision and diamond restriction removed.
    pub fn unrestricted(&self) -> ModelSpec {
        match self {
            ModelSpec::Excised { base, .. } | ModelSpec::Diamond { base, .. } => base.unrestricted(),
            ModelSpec::Conformal { base, factor } => ModelSpec::Conformal {
                base: Box::new(base.unrestricted()),
                factor: factor.clone(),
            },
            other => other.clone(),
        }
    }

    fn has_conformal(&self) -> bool {
        match self {
            ModelSpec::Conformal { .. } => true,
            ModelSpec::Excised { base, .. } | ModelSpec::Diamond { base, .. } => base.has_conformal(),
            _ => false,
        }
    }

    fn collect_holes(&self, out: &mut Vec<Hole>) {
        match self {
            ModelSpec::Conformal { base, .. } | ModelSpec::Diamond { base, .. } => {
                base.collect_holes(out)
            }
            ModelSpec::Excised { base, holes, .. } => {
                base.collect_holes(out);
                out.extend(holes.iter().cloned());
            }
            _ => {}
        }
    }

    fn flags(&self) -> CausalFlags {
        match self {
            ModelSpec::Minkowski { .. } | ModelSpec::Cylinder { .. } => CausalFlags::ALL,
            // Conformal deformations preserve every causal class; a causal
            // diamond of a globally hyperbolic model is globally hyperbolic.
            ModelSpec::Conformal { base, .. } | ModelSpec::Diamond { base, .. } => base.flags(),
            ModelSpec::Excised { base, declare, .. } => declare.unwrap_or(CausalFlags {
                strongly_causal: base.flags().strongly_causal,
                causally_simple: false,
                globally_hyperbolic: false,
            }),
        }
    }

    /// Chart range and region restrictions; ignores holes.
    fn in_region(&self, x: &[f64]) -> bool {
        if x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            ModelSpec::Minkowski { .. } => true,
            ModelSpec::Cylinder { n } => {
                let t = x[*n];
                t > -PI && t < PI && x[..n - 1].iter().all(|&chi| chi > 0.0 && chi < PI)
            }
            ModelSpec::Conformal { base, .. } | ModelSpec::Excised { base, .. } => base.in_region(x),
            ModelSpec::Diamond {
                base,
                past_tip,
                future_tip,
            } => {
                base.in_region(x)
                    && flat_interval(past_tip, x) > 0.0
                    && flat_interval(x, future_tip) > 0.0
            }
        }
    }

    fn metric_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        match self {
            ModelSpec::Minkowski { .. } => {
                out.fill(0.0);
                for i in 0..d - 1 {
                    out[i * d + i] = 1.0;
                }
                out[d * d - 1] = -1.0;
            }
            ModelSpec::Cylinder { .. } => {
                out.fill(0.0);
                let mut scale = 1.0;
                for i in 0..d - 1 {
                    out[i * d + i] = scale;
                    if i + 1 < d - 1 {
                        scale *= x[i].sin().powi(2);
                    }
                }
                out[d * d - 1] = -1.0;
            }
            ModelSpec::Conformal { base, factor } => {
                base.metric_into(x, out);
                let omega = factor.eval(x);
                out.iter_mut().for_each(|g| *g *= omega);
            }
            ModelSpec::Excised { base, .. } | ModelSpec::Diamond { base, .. } => {
                base.metric_into(x, out)
            }
        }
    }

    fn check_factors(&self, x: &[f64]) -> Result<()> {
        match self {
            ModelSpec::Conformal { base, factor } => {
                let value = factor.eval(x);
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::NonpositiveConformalFactor {
                        coords: x.to_vec(),
                        value,
                    });
                }
                base.check_factors(x)
            }
            ModelSpec::Excised { base, .. } | ModelSpec::Diamond { base, .. } => base.check_factors(x),
            _ => Ok(()),
        }
    }

    fn structural_check(&self) -> Result<()> {
        match self {
            ModelSpec::Minkowski { m } if *m < 1 => {
                Err(Error::MalformedSpec("minkowski needs m >= 1".into()))
            }
            ModelSpec::Cylinder { n } if *n < 1 => {
                Err(Error::MalformedSpec("cylinder needs n >= 1".into()))
            }
            ModelSpec::Minkowski { .. } | ModelSpec::Cylinder { .. } => Ok(()),
            ModelSpec::Conformal { base, factor } => {
                base.structural_check()?;
                factor.check_dim(base.dim())
            }
            ModelSpec::Excised { base, holes, .. } => {
                base.structural_check()?;
                let d = base.dim();
                for (index, hole) in holes.iter().enumerate() {
                    if hole.center.len() != d {
                        return Err(Error::MalformedSpec(format!(
                            "hole {index} has {} coordinates, model dimension is {d}",
                            hole.center.len()
                        )));
                    }
                    if !(hole.radius >= 0.0) {
                        return Err(Error::MalformedSpec(format!(
                            "hole {index} has negative radius"
                        )));
                    }
                }
                Ok(())
            }
            ModelSpec::Diamond {
                base,
                past_tip,
                future_tip,
            } => {
                base.structural_check()?;
                if !matches!(base.skeleton(), ModelSpec::Minkowski { .. }) {
                    return Err(Error::MalformedSpec(
                        "diamond restriction needs a Minkowski skeleton".into(),
                    ));
                }
                let d = base.dim();
                if past_tip.len() != d || future_tip.len() != d {
                    return Err(Error::MalformedSpec("diamond tips have wrong dimension".into()));
                }
                if flat_interval(past_tip, future_tip) <= 0.0 {
                    return Err(Error::MalformedSpec(
                        "future_tip must be chronologically after past_tip".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// `Δt − |Δx|` in flat coordinates; positive iff `b` is in the chronological
/// future of `a`.
fn flat_interval(a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let dt = b[d - 1] - a[d - 1];
    let dx = (0..d - 1).map(|i| (b[i] - a[i]).powi(2)).sum::<f64>().sqrt();
    dt - dx
}

/// Separation of two events measured in the model's causal skeleton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    /// Coordinate time difference `t_q − t_p`.
    pub dt: f64,
    /// Spatial distance in the skeleton (minimal over windings on cylinders).
    pub rho: f64,
}

impl Separation {
    /// `Δt − ρ`: positive for chronological, ~0 for null, negative otherwise.
    pub fn gap(&self) -> f64 {
        self.dt - self.rho
    }
}

/// A validated spacetime model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SpacetimeModel {
    name: String,
    spec: ModelSpec,
    dim: usize,
    flags: CausalFlags,
    holes: Vec<Hole>,
    eps_null: f64,
    eps_hit: f64,
    periodic_axis: Option<usize>,
    conformal: bool,
}

impl PartialEq for SpacetimeModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Builds and validates a model from its descriptor with default tolerances.
pub fn build_spacetime(spec: &ModelSpec) -> Result<SpacetimeModel> {
    SpacetimeModel::build(spec, &Settings::default())
}

/// Multiplies the metric of `model` by a positive scalar field.
pub fn apply_conformal(model: &SpacetimeModel, factor: ScalarField) -> Result<SpacetimeModel> {
    let spec = ModelSpec::Conformal {
        base: Box::new(model.spec.clone()),
        factor,
    };
    model.rebuild(spec)
}

/// Removes the given holes from `model`. An empty list returns the model as is.
pub fn excise(model: &SpacetimeModel, holes: Vec<Hole>) -> Result<SpacetimeModel> {
    if holes.is_empty() {
        return Ok(model.clone());
    }
    let spec = ModelSpec::Excised {
        base: Box::new(model.spec.clone()),
        holes,
        declare: None,
    };
    model.rebuild(spec)
}

impl SpacetimeModel {
    pub fn build(spec: &ModelSpec, settings: &Settings) -> Result<Self> {
        spec.structural_check()?;
        let mut holes = Vec::new();
        spec.collect_holes(&mut holes);
        let dim = spec.dim();
        let periodic_axis = match spec.skeleton() {
            ModelSpec::Cylinder { n } => Some(n - 1),
            _ => None,
        };
        let model = SpacetimeModel {
            name: spec.label(),
            spec: spec.clone(),
            dim,
            flags: spec.flags(),
            holes,
            eps_null: settings.eps_null,
            eps_hit: settings.eps_hit,
            periodic_axis,
            conformal: spec.has_conformal(),
        };
        model.check_hole_centers(spec)?;
        model.validate()?;
        Ok(model)
    }

    fn rebuild(&self, spec: ModelSpec) -> Result<Self> {
        let settings = Settings {
            eps_null: self.eps_null,
            eps_hit: self.eps_hit,
            ..Settings::default()
        };
        Self::build(&spec, &settings)
    }

    fn check_hole_centers(&self, spec: &ModelSpec) -> Result<()> {
        match spec {
            ModelSpec::Excised { base, holes, .. } => {
                self.check_hole_centers(base)?;
                let mut base_holes = Vec::new();
                base.collect_holes(&mut base_holes);
                for (index, hole) in holes.iter().enumerate() {
                    let inside = base.in_region(&hole.center)
                        && base_holes
                            .iter()
                            .all(|h| self.chart_distance(&h.center, &hole.center) > self.hit_radius(h));
                    if !inside {
                        return Err(Error::HoleOutsideDomain {
                            index,
                            center: hole.center.clone(),
                        });
                    }
                }
                Ok(())
            }
            ModelSpec::Conformal { base, .. } | ModelSpec::Diamond { base, .. } => {
                self.check_hole_centers(base)
            }
            _ => Ok(()),
        }
    }

    /// Checks signature, time orientation and factor positivity on the
    /// deterministic sample grid.
    fn validate(&self) -> Result<()> {
        let samples = self.sample_coords(VALIDATION_SAMPLES);
        if samples.len() < 100 {
            return Err(Error::MalformedSpec(format!(
                "domain too small to validate: {} sample points",
                samples.len()
            )));
        }
        for x in &samples {
            self.spec.check_factors(x)?;
            self.check_signature(x)?;
            let t = self.time_orientation(x);
            if self.inner(x, &t, &t) >= 0.0 {
                return Err(Error::SignatureCheckFailure {
                    coords: x.clone(),
                    reason: "time orientation is not timelike".into(),
                });
            }
        }
        Ok(())
    }

    /// Exactly one negative eigenvalue and no degenerate directions.
    pub fn check_signature(&self, x: &[f64]) -> Result<()> {
        let g = self.metric_at(x);
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let eig = SymmetricEigen::new(g);
        let negative = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        let degenerate = eig.eigenvalues.iter().any(|l| l.abs() <= 1e-14 * scale);
        if negative != 1 || degenerate {
            return Err(Error::SignatureCheckFailure {
                coords: x.to_vec(),
                reason: format!("eigenvalues {:?}", eig.eigenvalues.as_slice()),
            });
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of spatial dimensions `m`.
    pub fn spatial_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn flags(&self) -> CausalFlags {
        self.flags
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    pub fn eps_null(&self) -> f64 {
        self.eps_null
    }

    pub fn eps_hit(&self) -> f64 {
        self.eps_hit
    }

    pub fn periodic_axis(&self) -> Option<usize> {
        self.periodic_axis
    }

    pub fn is_conformal(&self) -> bool {
        self.conformal
    }

    pub fn skeleton(&self) -> &ModelSpec {
        self.spec.skeleton()
    }

    /// True when the metric is flat in the chart (Christoffel symbols vanish).
    pub fn is_chart_flat(&self) -> bool {
        !self.conformal
            && matches!(
                self.skeleton(),
                ModelSpec::Minkowski { .. } | ModelSpec::Cylinder { n: 1 }
            )
    }

    /// Flat skeleton with no conformal layer: straight null segments are the
    /// unique null connectors.
    pub fn is_flat(&self) -> bool {
        !self.conformal && matches!(self.skeleton(), ModelSpec::Minkowski { .. })
    }

    /// True when `self` is `ambient` with zero or more excisions or diamond
    /// restrictions layered on top.
    pub fn is_restriction_of(&self, ambient: &SpacetimeModel) -> bool {
        let mut spec = &self.spec;
        loop {
            if *spec == ambient.spec {
                return true;
            }
            match spec {
                ModelSpec::Excised { base, .. } | ModelSpec::Diamond { base, .. } => spec = base,
                _ => return false,
            }
        }
    }

    pub fn hit_radius(&self, hole: &Hole) -> f64 {
        hole.radius.max(self.eps_hit)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            })
        }
    }

    /// True iff `coords` is in the chart domain and outside all holes.
    pub fn contains(&self, coords: &[f64]) -> Result<bool> {
        self.check_len(coords)?;
        Ok(self.contains_unchecked(coords))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.in_region(x) && self.hole_at(x).is_none()
    }

    /// Chart range and diamond restrictions, ignoring holes.
    pub fn in_region(&self, x: &[f64]) -> bool {
        self.spec.in_region(x)
    }

    /// Chart range of the causal skeleton only.
    pub(crate) fn skeleton_chart_contains(&self, x: &[f64]) -> bool {
        self.skeleton().in_region(x)
    }

    /// Index of the first hole whose hit ball contains `x`.
    pub fn hole_at(&self, x: &[f64]) -> Option<usize> {
        self.holes
            .iter()
            .position(|h| self.chart_distance(&h.center, x) <= self.hit_radius(h))
    }

    /// Validated event.
    pub fn event(&self, coords: impl Into<Vec<f64>>) -> Result<Event> {
        let coords = coords.into();
        if !self.contains(&coords)? {
            return Err(Error::EventOutsideDomain(coords));
        }
        Ok(Event::new(self.normalize(coords)))
    }

    /// Wraps the periodic coordinate into `[0, 2π)`.
    pub fn normalize(&self, mut coords: Vec<f64>) -> Vec<f64> {
        if let Some(axis) = self.periodic_axis {
            coords[axis] = coords[axis].rem_euclid(TAU);
        }
        coords
    }

    /// `b − a` with the periodic coordinate wrapped into `(−π, π]`.
    pub fn chart_delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut delta: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
        if let Some(axis) = self.periodic_axis {
            delta[axis] = wrap_angle(delta[axis]);
        }
        delta
    }

    /// Euclidean chart distance, periodic coordinate taken modulo 2π.
    pub fn chart_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.chart_delta(a, b).iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn metric_at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.dim * self.dim];
        self.metric_into(x, &mut buf);
        DMatrix::from_row_slice(self.dim, self.dim, &buf)
    }

    /// Row-major metric components at `x`.
    pub fn metric_into(&self, x: &[f64], out: &mut [f64]) {
        self.spec.metric_into(x, out)
    }

    /// Product of all conformal factors at `x` (1 when there are none).
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        fn go(spec: &ModelSpec, x: &[f64]) -> f64 {
            match spec {
                ModelSpec::Conformal { base, factor } => factor.eval(x) * go(base, x),
                ModelSpec::Excised { base, .. } | ModelSpec::Diamond { base, .. } => go(base, x),
                _ => 1.0,
            }
        }
        go(&self.spec, x)
    }

    /// `g(u, v)` at `x`.
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        self.metric_into(x, &mut g);
        bilinear(&g, d, u, v)
    }

    pub fn time_orientation(&self, _x: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; self.dim];
        t[self.dim - 1] = 1.0;
        t
    }

    /// Christoffel symbols `Γ^k_ij` stored at `k·d² + i·d + j`.
    pub fn christoffel_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        if self.is_chart_flat() {
            return;
        }
        if !self.conformal {
            if let ModelSpec::Cylinder { n } = self.skeleton() {
                cylinder_christoffel(*n, x, out);
                return;
            }
        }
        // Central differences of the full metric.
        let mut dg = vec![0.0; d * d * d];
        let mut plus = vec![0.0; d * d];
        let mut minus = vec![0.0; d * d];
        let mut xs = x.to_vec();
        for l in 0..d {
            xs[l] = x[l] + FD_STEP;
            self.metric_into(&xs, &mut plus);
            xs[l] = x[l] - FD_STEP;
            self.metric_into(&xs, &mut minus);
            xs[l] = x[l];
            for ij in 0..d * d {
                dg[l * d * d + ij] = (plus[ij] - minus[ij]) / (2.0 * FD_STEP);
            }
        }
        let g = self.metric_at(x);
        // Far out along an incomplete geodesic the conformal factor can under-
        // or overflow; NaN symbols push the step out of the region.
        let Some(ginv) = g.try_inverse() else {
            out.fill(f64::NAN);
            return;
        };
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for l in 0..d {
                        let lower = dg[i * d * d + l * d + j] + dg[j * d * d + l * d + i]
                            - dg[l * d * d + i * d + j];
                        acc += ginv[(k, l)] * lower;
                    }
                    out[k * d * d + i * d + j] = 0.5 * acc;
                }
            }
        }
    }

    /// Separation measured in the causal skeleton; conformal layers, holes and
    /// restrictions do not change it.
    pub fn separation(&self, p: &[f64], q: &[f64]) -> Separation {
        let d = self.dim;
        let dt = q[d - 1] - p[d - 1];
        let rho = match self.skeleton() {
            ModelSpec::Minkowski { .. } => (0..d - 1)
                .map(|i| (q[i] - p[i]).powi(2))
                .sum::<f64>()
                .sqrt(),
            ModelSpec::Cylinder { n } => sphere_distance(*n, &p[..*n], &q[..*n]),
            _ => unreachable!("skeleton is minkowski or cylinder"),
        };
        Separation { dt, rho }
    }

    /// Classifies `components` at `at` by its causal character.
    pub fn causal_vector(&self, at: &Event, components: Vec<f64>) -> CausalVector {
        let x = at.coords();
        let norm = self.inner(x, &components, &components);
        let euclid2: f64 = components.iter().map(|c| c * c).sum();
        let character = if norm.abs() <= self.eps_null * euclid2 {
            CausalCharacter::Null
        } else if norm < 0.0 {
            CausalCharacter::Timelike
        } else {
            CausalCharacter::Spacelike
        };
        let future = self.inner(x, &components, &self.time_orientation(x)) < 0.0;
        CausalVector {
            components,
            character,
            future,
        }
    }

    /// Deterministic quasi-random sample of in-domain chart points.
    pub fn sample_coords(&self, count: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.sample_box();
        let mut out = Vec::with_capacity(count);
        let mut index = 1u64;
        while out.len() < count && index < 200 * count as u64 + 1000 {
            let x: Vec<f64> = (0..self.dim)
                .map(|axis| lo[axis] + (hi[axis] - lo[axis]) * halton(index, PRIMES[axis % PRIMES.len()]))
                .collect();
            index += 1;
            if self.contains_unchecked(&x) {
                out.push(x);
            }
        }
        out
    }

    fn sample_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut spec = &self.spec;
        loop {
            match spec {
                ModelSpec::Diamond {
                    past_tip,
                    future_tip,
                    ..
                } => {
                    let half = (future_tip[d - 1] - past_tip[d - 1]) / 2.0;
                    let lo = (0..d)
                        .map(|i| {
                            if i == d - 1 {
                                past_tip[i]
                            } else {
                                (past_tip[i] + future_tip[i]) / 2.0 - half
                            }
                        })
                        .collect();
                    let hi = (0..d)
                        .map(|i| {
                            if i == d - 1 {
                                future_tip[i]
                            } else {
                                (past_tip[i] + future_tip[i]) / 2.0 + half
                            }
                        })
                        .collect();
                    return (lo, hi);
                }
                ModelSpec::Conformal { base, .. } | ModelSpec::Excised { base, .. } => spec = base,
                ModelSpec::Minkowski { .. } => return (vec![-4.0; d], vec![4.0; d]),
                ModelSpec::Cylinder { n } => {
                    let mut lo = vec![0.05; d];
                    let mut hi = vec![PI - 0.05; d];
                    lo[n - 1] = 0.0;
                    hi[n - 1] = TAU;
                    lo[d - 1] = -3.1;
                    hi[d - 1] = 3.1;
                    return (lo, hi);
                }
            }
        }
    }
}

const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical inverse of `index` in `base`.
pub(crate) fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

pub(crate) fn bilinear(g: &[f64], d: usize, u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += g[i * d + j] * u[i] * v[j];
        }
    }
    acc
}

/// Wraps an angle difference into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Unit vector in `R^{n+1}` for hyperspherical coordinates.
fn sphere_embed(n: usize, angles: &[f64]) -> Vec<f64> {
    if n == 1 {
        return vec![angles[0].cos(), angles[0].sin()];
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut prod = 1.0;
    for &chi in &angles[..n - 1] {
        out.push(prod * chi.cos());
        prod *= chi.sin();
    }
    let phi = angles[n - 1];
    out.push(prod * phi.cos());
    out.push(prod * phi.sin());
    out
}

/// Great-circle distance on the unit `S^n`.
pub(crate) fn sphere_distance(n: usize, a: &[f64], b: &[f64]) -> f64 {
    if n == 1 {
        return wrap_angle(b[0] - a[0]).abs();
    }
    let u = sphere_embed(n, a);
    let v = sphere_embed(n, b);
    let cos: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    let cross2: f64 = {
        // |u × v|² = |u|²|v|² − (u·v)²
        let uu: f64 = u.iter().map(|x| x * x).sum();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        (uu * vv - cos * cos).max(0.0)
    };
    cross2.sqrt().atan2(cos)
}

/// Closed-form Christoffel symbols of `S^n × R` in hyperspherical
/// coordinates, where the metric is diagonal with
/// `h_i = Π_{j<i} sin² x_j` and `∂_j h_i = 2 cot(x_j) h_i` for `j < i`.
fn cylinder_christoffel(n: usize, x: &[f64], out: &mut [f64]) {
    let d = n + 1;
    let mut h = vec![1.0; n];
    for i in 1..n {
        h[i] = h[i - 1] * x[i - 1].sin().powi(2);
    }
    let dh = |i: usize, j: usize| -> f64 {
        if j < i {
            2.0 * h[i] * x[j].cos() / x[j].sin()
        } else {
            0.0
        }
    };
    for k in 0..n {
        for j in 0..n {
            if j == k {
                continue;
            }
            // Γ^k_kj = Γ^k_jk = ½ ∂_j h_k / h_k
            let mixed = 0.5 * dh(k, j) / h[k];
            out[k * d * d + k * d + j] = mixed;
            out[k * d * d + j * d + k] = mixed;
            // Γ^k_jj = −½ ∂_k h_j / h_k
            out[k * d * d + j * d + j] = -0.5 * dh(j, k) / h[k];
        }
    }
}

/// A point of a model's chart. Construct through [`SpacetimeModel::event`] to
/// get the domain check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Event {
    coords: Vec<f64>,
}

impl Event {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Self {
            coords: coords.into(),
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn t(&self) -> f64 {
        *self.coords.last().expect("events have at least two coordinates")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
}

/// A tangent vector tagged with its causal character and time orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalVector {
    pub components: Vec<f64>,
    pub character: CausalCharacter,
    pub future: bool,
}

impl CausalVector {
    pub fn is_future_null(&self) -> bool {
        self.future && self.character == CausalCharacter::Null
    }
}
