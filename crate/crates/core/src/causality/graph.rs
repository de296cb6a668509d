//! Chronological graphs: events joined by short future-timelike chords,
//! weighted by chord proper time. Longest weighted paths give lower bounds on
//! the Lorentzian distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::segment_hole_hit;
use crate::model::{bilinear, Event, ModelSpec, SpacetimeModel};

/// Axis-aligned chart box; time is the last axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl GraphBox {
    pub fn new(lo: impl Into<Vec<f64>>, hi: impl Into<Vec<f64>>) -> Self {
        Self {
            lo: lo.into(),
            hi: hi.into(),
        }
    }

    /// Unit box `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }
}

struct StencilEdge {
    /// Offset in grid steps, time axis last.
    offset: Vec<isize>,
    /// Proper time of the chord, when it does not depend on position.
    weight: Option<f64>,
}

enum Layout {
    Grid {
        counts: Vec<usize>,
        /// Grid linear index → node index (`u32::MAX` for dropped points).
        node_of: Vec<u32>,
        /// Node index → grid multi-index.
        index_of: Vec<Vec<usize>>,
        stencil: Vec<StencilEdge>,
    },
    Explicit {
        preds: Vec<Vec<(usize, f64)>>,
    },
}

/// Directed acyclic graph over events, sorted by time coordinate.
pub struct ChronoGraph {
    model: SpacetimeModel,
    nodes: Vec<Event>,
    horizon: f64,
    layout: Layout,
}

const ABSENT: u32 = u32::MAX;

/// Grid steps an edge may span along each axis. Longer chords add little to
/// longest paths but make the stencil grow like `reach^dim`.
const MAX_REACH: isize = 10;

/// Grid point counts per axis after dyadic refinement within `budget` nodes.
/// Axes are refined in the cyclic order t, x_1, …, x_m; each refinement keeps
/// every existing point, so grids for growing budgets are nested.
fn nested_counts(dim: usize, budget: usize) -> Vec<usize> {
    let mut counts = vec![1usize; dim];
    let order: Vec<usize> = std::iter::once(dim - 1).chain(0..dim - 1).collect();
    let next = |c: usize| if c == 1 { 2 } else { 2 * c - 1 };
    let mut stalled = 0;
    let mut k = 0;
    while stalled < dim {
        let axis = order[k % dim];
        k += 1;
        let mut trial = counts.clone();
        trial[axis] = next(trial[axis]);
        if trial.iter().product::<usize>() <= budget {
            counts = trial;
            stalled = 0;
        } else {
            stalled += 1;
        }
    }
    counts
}

impl ChronoGraph {
    /// Deterministic nested grid over `bbox` with at most `budget` nodes.
    /// Points outside the model (holes, restrictions) are dropped.
    pub fn grid(model: &SpacetimeModel, bbox: &GraphBox, budget: usize, horizon: f64) -> Result<Self> {
        let d = model.dim();
        if budget < 2 {
            return Err(Error::NodeBudgetTooSmall(budget));
        }
        for b in [&bbox.lo, &bbox.hi] {
            if b.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: b.len(),
                });
            }
        }
        for corner in 0..(1usize << d) {
            let c: Vec<f64> = (0..d)
                .map(|i| if corner >> i & 1 == 1 { bbox.hi[i] } else { bbox.lo[i] })
                .collect();
            if !model.skeleton_chart_contains(&c) {
                return Err(Error::BoxOutsideDomain(c));
            }
        }

        let mut counts = nested_counts(d, budget);
        for i in 0..d {
            if bbox.hi[i] <= bbox.lo[i] {
                counts[i] = 1;
            }
        }
        let spacing: Vec<f64> = (0..d)
            .map(|i| {
                if counts[i] > 1 {
                    (bbox.hi[i] - bbox.lo[i]) / (counts[i] - 1) as f64
                } else {
                    0.0
                }
            })
            .collect();

        // Linear order: time axis slowest, so node order is topological.
        let axes: Vec<usize> = std::iter::once(d - 1).chain(0..d - 1).collect();
        let total: usize = counts.iter().product();
        let mut node_of = vec![ABSENT; total];
        let mut index_of = Vec::new();
        let mut nodes = Vec::new();
        let mut multi = vec![0usize; d];
        for linear in 0..total {
            let mut rem = linear;
            for &axis in axes.iter().rev() {
                multi[axis] = rem % counts[axis];
                rem /= counts[axis];
            }
            let coords: Vec<f64> = (0..d).map(|i| bbox.lo[i] + multi[i] as f64 * spacing[i]).collect();
            if model.contains_unchecked(&coords) {
                node_of[linear] = nodes.len() as u32;
                index_of.push(multi.clone());
                nodes.push(Event::new(model.normalize(coords)));
            }
        }

        let stencil = build_stencil(model, &counts, &spacing, horizon);
        debug_assert!(stencil.iter().all(|e| e.offset[d - 1] >= 1));
        Ok(Self {
            model: model.clone(),
            nodes,
            horizon,
            layout: Layout::Grid {
                counts,
                node_of,
                index_of,
                stencil,
            },
        })
    }

    /// Graph over an explicit event list; edges are tested pairwise.
    pub fn from_events(model: &SpacetimeModel, events: Vec<Event>, horizon: f64) -> Result<Self> {
        for e in &events {
            if !model.contains(e.coords())? {
                return Err(Error::EventOutsideDomain(e.coords().to_vec()));
            }
        }
        let mut nodes = events;
        nodes.sort_by(|a, b| a.t().total_cmp(&b.t()));
        let mut graph = Self {
            model: model.clone(),
            nodes,
            horizon,
            layout: Layout::Explicit { preds: Vec::new() },
        };
        let preds: Vec<Vec<(usize, f64)>> = (0..graph.nodes.len())
            .map(|j| {
                (0..j)
                    .filter_map(|i| {
                        graph
                            .edge_weight(graph.nodes[i].coords(), graph.nodes[j].coords())
                            .map(|w| (i, w))
                    })
                    .collect()
            })
            .collect();
        graph.layout = Layout::Explicit { preds };
        if !graph.is_acyclic() {
            unreachable!("chronological edges always increase the time coordinate");
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Event] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Grid point counts per axis (`None` for explicit graphs).
    pub fn grid_counts(&self) -> Option<&[usize]> {
        match &self.layout {
            Layout::Grid { counts, .. } => Some(counts),
            Layout::Explicit { .. } => None,
        }
    }

    /// Proper time of the chord `a → b` if it is a future timelike edge no
    /// longer than the horizon and clear of holes.
    pub fn edge_weight(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        let delta = self.model.chart_delta(a, b);
        if delta.iter().map(|c| c * c).sum::<f64>() > self.horizon * self.horizon {
            return None;
        }
        let base = if translation_invariant(&self.model) {
            flat_weight(&delta)?
        } else {
            midpoint_weight(&self.model, a, &delta)?
        };
        self.finish_weight(a, &delta, base)
    }

    fn finish_weight(&self, a: &[f64], delta: &[f64], base: f64) -> Option<f64> {
        if !self.model.holes().is_empty() && segment_hole_hit(&self.model, a, delta).is_some() {
            return None;
        }
        if translation_invariant(&self.model) && self.model.is_conformal() {
            let mid: Vec<f64> = a.iter().zip(delta).map(|(x, dx)| x + 0.5 * dx).collect();
            return Some(base * self.model.conformal_factor(&mid).sqrt());
        }
        Some(base)
    }

    fn for_each_pred(&self, v: usize, mut f: impl FnMut(usize, f64)) {
        match &self.layout {
            Layout::Explicit { preds } => preds[v].iter().for_each(|&(u, w)| f(u, w)),
            Layout::Grid {
                counts,
                node_of,
                index_of,
                stencil,
            } => {
                let d = counts.len();
                let here = &index_of[v];
                let b = self.nodes[v].coords();
                'edges: for edge in stencil {
                    let mut linear = 0usize;
                    for axis in std::iter::once(d - 1).chain(0..d - 1) {
                        let i = here[axis] as isize - edge.offset[axis];
                        if i < 0 || i >= counts[axis] as isize {
                            continue 'edges;
                        }
                        linear = linear * counts[axis] + i as usize;
                    }
                    let u = node_of[linear];
                    if u == ABSENT {
                        continue;
                    }
                    let u = u as usize;
                    let a = self.nodes[u].coords();
                    let w = match edge.weight {
                        Some(base) if self.model.holes().is_empty() && !self.model.is_conformal() => Some(base),
                        Some(base) => {
                            let delta = self.model.chart_delta(a, b);
                            self.finish_weight(a, &delta, base)
                        }
                        None => self.edge_weight(a, b),
                    };
                    if let Some(w) = w {
                        f(u, w);
                    }
                }
            }
        }
    }

    /// Every edge `(from, to, weight)`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for v in 0..self.nodes.len() {
            self.for_each_pred(v, |u, w| out.push((u, v, w)));
        }
        out
    }

    /// Edges only go forward in node order, which is sorted by time.
    pub fn is_acyclic(&self) -> bool {
        let mut ok = true;
        for v in 0..self.nodes.len() {
            self.for_each_pred(v, |u, _| ok &= u < v);
        }
        ok && self.nodes.windows(2).all(|w| w[0].t() <= w[1].t())
    }

    /// Longest weighted chain `p → nodes → q`; `p` and `q` join the graph as
    /// virtual endpoints. `None` when no chain exists.
    pub fn longest_path(&self, p: &Event, q: &Event) -> Option<f64> {
        let (pt, qt) = (p.t(), q.t());
        let lo = self.nodes.partition_point(|n| n.t() <= pt);
        let hi = self.nodes.partition_point(|n| n.t() < qt);
        let mut best = vec![f64::NEG_INFINITY; self.nodes.len()];
        let mut result = self.edge_weight(p.coords(), q.coords()).unwrap_or(f64::NEG_INFINITY);
        for v in lo..hi.max(lo) {
            let mut value = self
                .edge_weight(p.coords(), self.nodes[v].coords())
                .unwrap_or(f64::NEG_INFINITY);
            self.for_each_pred(v, |u, w| {
                if u >= lo && best[u] > f64::NEG_INFINITY {
                    value = value.max(best[u] + w);
                }
            });
            best[v] = value;
            if value > f64::NEG_INFINITY {
                if let Some(w) = self.edge_weight(self.nodes[v].coords(), q.coords()) {
                    result = result.max(value + w);
                }
            }
        }
        (result > f64::NEG_INFINITY).then_some(result)
    }

    /// Longest path between two graph nodes.
    pub fn longest_path_between(&self, from: usize, to: usize) -> Option<f64> {
        self.longest_path(&self.nodes[from].clone(), &self.nodes[to].clone())
    }
}

fn translation_invariant(model: &SpacetimeModel) -> bool {
    matches!(
        model.skeleton(),
        ModelSpec::Minkowski { .. } | ModelSpec::Cylinder { n: 1 }
    )
}

fn flat_weight(delta: &[f64]) -> Option<f64> {
    let d = delta.len();
    let dt = delta[d - 1];
    let dx2: f64 = delta[..d - 1].iter().map(|c| c * c).sum();
    let v = dt * dt - dx2;
    (dt > 0.0 && v > 0.0).then(|| v.sqrt())
}

fn midpoint_weight(model: &SpacetimeModel, a: &[f64], delta: &[f64]) -> Option<f64> {
    let d = a.len();
    let mid: Vec<f64> = a.iter().zip(delta).map(|(x, dx)| x + 0.5 * dx).collect();
    let mut g = vec![0.0; d * d];
    model.metric_into(&mid, &mut g);
    let norm = bilinear(&g, d, delta, delta);
    let along_t = bilinear(&g, d, delta, &model.time_orientation(&mid));
    (norm < 0.0 && along_t < 0.0).then(|| (-norm).sqrt())
}

fn build_stencil(model: &SpacetimeModel, counts: &[usize], spacing: &[f64], horizon: f64) -> Vec<StencilEdge> {
    let d = counts.len();
    let reach: Vec<isize> = (0..d)
        .map(|i| {
            if counts[i] > 1 {
                ((horizon / spacing[i]).floor() as isize)
                    .min(counts[i] as isize - 1)
                    .min(MAX_REACH)
            } else {
                0
            }
        })
        .collect();
    let invariant = translation_invariant(model);
    let mut out = Vec::new();
    let mut offset = vec![0isize; d];
    let spatial_total: usize = (0..d - 1).map(|i| (2 * reach[i] + 1) as usize).product();
    for dt in 1..=reach[d - 1] {
        for mut k in 0..spatial_total {
            for i in 0..d - 1 {
                let width = (2 * reach[i] + 1) as usize;
                offset[i] = (k % width) as isize - reach[i];
                k /= width;
            }
            offset[d - 1] = dt;
            let delta: Vec<f64> = (0..d).map(|i| offset[i] as f64 * spacing[i]).collect();
            if delta.iter().map(|c| c * c).sum::<f64>() > horizon * horizon {
                continue;
            }
            if invariant {
                if let Some(w) = flat_weight(&delta) {
                    out.push(StencilEdge {
                        offset: offset.clone(),
                        weight: Some(w),
                    });
                }
            } else {
                out.push(StencilEdge {
                    offset: offset.clone(),
                    weight: None,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_spacetime, excise, Hole};

    #[test]
    fn nested_counts_refine_one_axis_at_a_time() {
        assert_eq!(nested_counts(2, 20_000), vec![129, 129]);
        assert_eq!(nested_counts(3, 20_000), vec![33, 17, 33]);
        let small = nested_counts(3, 1000);
        let big = nested_counts(3, 2000);
        for (s, b) in small.iter().zip(&big) {
            assert!(b >= s && (b - 1) % (s - 1).max(1) == 0);
        }
    }

    #[test]
    fn collinear_rest_points() {
        let m = build_spacetime(&ModelSpec::minkowski(1)).unwrap();
        let events = vec![Event::new([0.0, 0.0]), Event::new([0.0, 1.0]), Event::new([0.0, 2.0])];
        let g = ChronoGraph::from_events(&m, events, 1.5).unwrap();
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(a, b, _)| (a, b)).collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert_eq!(g.longest_path_between(0, 2), Some(2.0));
    }

    #[test]
    fn unrelated_pair_has_no_edge() {
        let m = build_spacetime(&ModelSpec::minkowski(1)).unwrap();
        let g = ChronoGraph::from_events(&m, vec![Event::new([0.0, 0.0]), Event::new([4.0, 2.0])], 10.0).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(g.longest_path_between(0, 1), None);
    }

    #[test]
    fn grid_respects_excision() {
        let flat = build_spacetime(&ModelSpec::minkowski(1)).unwrap();
        let m = excise(&flat, vec![Hole::point([1.0, 1.0])]).unwrap();
        let g = ChronoGraph::grid(&m, &GraphBox::new([0.0, 0.0], [2.0, 2.0]), 300, 0.5).unwrap();
        let full = ChronoGraph::grid(&flat, &GraphBox::new([0.0, 0.0], [2.0, 2.0]), 300, 0.5).unwrap();
        assert_eq!(g.node_count() + 1, full.node_count());
        assert!(g
            .nodes()
            .iter()
            .all(|n| m.chart_distance(n.coords(), &[1.0, 1.0]) > m.eps_hit()));
        assert!(g.is_acyclic());
    }

    #[test]
    fn box_outside_chart_is_rejected() {
        let cyl = build_spacetime(&ModelSpec::cylinder(1)).unwrap();
        let err = ChronoGraph::grid(&cyl, &GraphBox::new([0.0, 0.0], [1.0, 4.0]), 100, 0.5).err();
        assert!(matches!(err, Some(Error::BoxOutsideDomain(_))));
    }

    #[test]
    fn grid_path_is_lower_bound() {
        let m = build_spacetime(&ModelSpec::minkowski(1)).unwrap();
        let g = ChronoGraph::grid(&m, &GraphBox::unit(2), 2000, 0.5).unwrap();
        let p = Event::new([0.1, 0.05]);
        let q = Event::new([0.45, 0.93]);
        let exact = (0.88f64 * 0.88 - 0.35 * 0.35).sqrt();
        let est = g.longest_path(&p, &q).unwrap();
        assert!(est <= exact + 1e-12);
        assert!(est > 0.95 * exact, "{est} vs {exact}");
    }
}
