//! Fixtures shared by the benchmarks.

use causality_lab_core::{build_spacetime, excise, Event, Hole, ModelSpec, SpacetimeModel};

pub fn flat(m: usize) -> SpacetimeModel {
    build_spacetime(&ModelSpec::minkowski(m)).expect("flat models are valid")
}

pub fn punctured() -> SpacetimeModel {
    excise(&flat(1), vec![Hole::point([1.0, 1.0])]).expect("(1, 1) is in the plane")
}

pub fn cylinder(n: usize) -> SpacetimeModel {
    build_spacetime(&ModelSpec::cylinder(n)).expect("cylinders are valid")
}

pub fn event(coords: &[f64]) -> Event {
    Event::new(coords.to_vec())
}
