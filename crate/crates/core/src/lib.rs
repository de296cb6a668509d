//! Numerical laboratory for causal structure of Lorentzian spacetimes.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: spacetime models (flat, Einstein cylinder, conformal
//!   deformations, excisions, causal diamonds) and their metric data.
//! * [`geodesic`]: null geodesic integration and two-point null shooting.
//! * [`causality`]: Lorentzian arc length, distance and the causal relation
//!   classifier, plus a chronological graph for lower bounds on distance.
//! * [`homotopy`]: scans of the distance along a pair of point paths that
//!   locate the first parameter where the pair stops being chronological.
//! * [`rays`]: light rays, skies, refocussing probes and sub/ambient
//!   comparisons.

pub mod causality;
pub mod error;
pub mod geodesic;
pub mod homotopy;
pub mod model;
mod optimize;
pub mod rays;
pub mod settings;

pub use causality::{
    arc_length, causally_unrelated, chronological_graph, distance, relation, semicontinuity_check, CausalCurve,
    CausalRelationReport, ChronoGraph, DistanceBackend, GraphBox, Relation, SemicontinuityReport, Witness,
};
pub use error::{Error, Result};
pub use geodesic::{
    closest_approach, connect_null, integrate_null, integrate_with, null_directions_at, Connection,
    ConnectFailure, IntegrationOptions, NullCertificate, NullGeodesic, Termination,
};
pub use homotopy::{
    certify_at, counterexample_run, scan, CertificationAttempt, CounterexampleReport, PointPath, ScanReport,
    ScanSample, Verdict,
};
pub use model::{
    apply_conformal, build_spacetime, excise, CausalCharacter, CausalFlags, CausalVector, Event, Hole,
    ModelSpec, ScalarField, SpacetimeModel,
};
pub use rays::{
    ambient_relation_compare, hausdorff_distance, refocus_probe, same_ray, skies_intersect, sky, split_count,
    strong_refocus_probe, AmbientComparison, LightRay, RefocusReport, Sky, SkyIntersection, SplitReport,
    StrongRefocusReport,
};
pub use settings::Settings;
