use serde::{Deserialize, Serialize};

/// Numerical knobs shared by every operation. All defaults are overridable and
/// get echoed into reports so a run can be reproduced from its output alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Relative tolerance for classifying a vector as null.
    pub eps_null: f64,
    /// Radius of the ball a point hole is inflated to.
    pub eps_hit: f64,
    /// Fixed affine step of the null geodesic integrator.
    pub step: f64,
    /// Chart distance below which a shot counts as hitting its target.
    pub tol_hit: f64,
    /// Positivity threshold for the analytic distance backend.
    pub delta_d: f64,
    /// Positivity threshold for the graph distance backend.
    pub delta_d_graph: f64,
    /// Shooting fan size; `None` picks a size from the spatial dimension.
    pub fan: Option<usize>,
    /// Objective evaluations allowed when refining the best fan direction.
    pub refine_budget: usize,
    pub grid_n: usize,
    pub refine_iters: usize,
    /// Longest chart chord kept as an edge of a chronological graph.
    pub horizon: f64,
    pub graph_nodes: usize,
    /// Affine span each sky ray is integrated over on both sides.
    pub ray_span: f64,
    /// Resampled points per ray for Hausdorff comparisons.
    pub hausdorff_samples: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            eps_null: 1e-9,
            eps_hit: 1e-6,
            step: 1e-3,
            tol_hit: 1e-6,
            delta_d: 1e-9,
            delta_d_graph: 1e-3,
            fan: None,
            refine_budget: 200,
            grid_n: 101,
            refine_iters: 20,
            horizon: 0.5,
            graph_nodes: 20_000,
            ray_span: 10.0,
            hausdorff_samples: 200,
        }
    }
}

impl Settings {
    /// Fan size for a model with `m` spatial dimensions.
    pub fn fan_for(&self, m: usize) -> usize {
        match (self.fan, m) {
            (_, 1) => 2,
            (Some(k), _) => k,
            (None, 2) => 64,
            (None, _) => 256,
        }
    }
}
