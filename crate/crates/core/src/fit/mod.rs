//! Model conversion fits and validation metrics.
//!
//! Wrap geometry is fitted to a reference moment-arm map with simulated
//! annealing, one independent problem per cluster of coupled wrap surfaces.
//! Force-length parameters are fitted to reference force maps with
//! differential evolution, one problem per muscle.

mod force;
mod optim;
mod validate;
mod wrapping;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, MapError};
use crate::model::{ModelDoc, ModelError};

pub use force::{
    fit_force_params, force_map, force_residual, read_force_maps, write_force_maps, ForceMap,
};
pub use optim::{differential_evolution, simulated_annealing, DeParams, OptimResult, SaParams};
pub use validate::{
    compare_maps, validate_forces, validate_kinematics, validate_moment_arms, ForceValidation,
    MarkerFrame, MomentArmValidation,
};
pub use wrapping::{fit_wrapping, wrap_residual};

/// Default number of samples per swept joint for generated references.
pub const DEFAULT_GRID_POINTS: usize = 50;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("objective is not finite at {point:?}")]
    NonFiniteObjective { point: Vec<f64> },
    #[error("reference does not cover the model: {0}")]
    CoverageMismatch(String),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Search box for wrap fits, relative to the starting model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrapBounds {
    /// Half-width of the box around each side-site coordinate, m.
    pub side_site: f64,
    /// Radius range as a fraction of the starting radius, `r * (1 +- f)`.
    pub radius_fraction: f64,
    /// Half-width of the box around each orientation angle, rad.
    pub orientation: f64,
    pub fit_side_sites: bool,
    pub fit_radius: bool,
    pub fit_orientation: bool,
}

impl Default for WrapBounds {
    fn default() -> Self {
        WrapBounds {
            side_site: 0.01,
            radius_fraction: 0.25,
            orientation: 0.2,
            fit_side_sites: true,
            fit_radius: true,
            fit_orientation: true,
        }
    }
}

/// Search box for force-parameter fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceBounds {
    pub l_min: [f64; 2],
    pub l_max: [f64; 2],
    pub fp_max: [f64; 2],
    /// Multiples of the starting model's `f_max`.
    pub f_max_factor: [f64; 2],
}

impl Default for ForceBounds {
    fn default() -> Self {
        ForceBounds {
            l_min: [0.3, 0.95],
            l_max: [1.05, 2.0],
            fp_max: [0.0, 3.0],
            f_max_factor: [0.5, 2.0],
        }
    }
}

/// Optimizer and fit settings. Every field is echoed in fit reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Explicit bounds per decision variable. The model fits derive them
    /// from `wrap` / `force` when this is empty.
    #[serde(default)]
    pub bounds: Vec<[f64; 2]>,
    /// Start point for the raw optimizers; the box centre when absent. The
    /// model fits always start from the input model.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Per-joint samples for generated reference maps; `grid_points`
    /// evenly spaced samples per joint range when absent.
    #[serde(default)]
    pub q_grid: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Objective evaluations. Wrap fits share it across surface clusters in
    /// proportion to their dimension; force fits spend it per muscle.
    pub budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub sa: SaParams,
    #[serde(default)]
    pub de: DeParams,
    #[serde(default)]
    pub wrap: WrapBounds,
    #[serde(default)]
    pub force: ForceBounds,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl FitConfig {
    pub fn new(bounds: Vec<[f64; 2]>, budget: usize, seed: u64) -> Self {
        FitConfig {
            bounds,
            x0: None,
            q_grid: None,
            grid_points: DEFAULT_GRID_POINTS,
            budget,
            seed,
            sa: SaParams::default(),
            de: DeParams::default(),
            wrap: WrapBounds::default(),
            force: ForceBounds::default(),
        }
    }

    /// The reference sampling grid for `model`.
    pub fn grid_for(&self, model: &ModelDoc) -> Vec<Vec<f64>> {
        match &self.q_grid {
            Some(g) => g.clone(),
            None => crate::geometry::uniform_grid(model, self.grid_points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelDoc,
    /// Sum of squared differences over the reference grid.
    pub residual: f64,
    /// Root mean square of the same differences.
    pub rms: f64,
    /// Moment-arm RMS relative to mean |reference| (wrap fits) or force RMS
    /// relative to `f_max` (force fits), percent.
    pub relative_rms_percent: f64,
    pub initial_residual: f64,
    /// Best-so-far total objective, one entry per batch or generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub seed: u64,
    pub config: FitConfig,
}

impl FitResult {
    /// Report JSON, stable across runs.
    pub fn to_json(&self) -> String {
        crate::model::to_json_17(self)
    }
}

/// Normalized lengths used for generated force maps: 30 samples on
/// [0.4, 1.7].
pub fn default_l_grid() -> Vec<f64> {
    (0..30).map(|i| 0.4 + 1.3 * i as f64 / 29.0).collect()
}

/// Activations used for generated force maps.
pub fn default_a_grid() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0]
}

/// One force map per muscle of `model`.
pub fn force_maps_for(model: &ModelDoc, l_grid: &[f64], a_grid: &[f64]) -> Vec<ForceMap> {
    model
        .muscles
        .iter()
        .map(|m| force_map(&m.name, &m.params, l_grid, a_grid))
        .collect()
}

/// Marker positions of `model` at `n` postures spread along the diagonal of
/// the joint-range box.
pub fn marker_frames(model: &ModelDoc, n: usize) -> Result<Vec<MarkerFrame>, FitError> {
    let compiled = crate::model::CompiledModel::new(model)?;
    (0..n)
        .map(|k| {
            let s = (k as f64 + 0.5) / n as f64;
            let q: Vec<f64> = model
                .joints
                .iter()
                .map(|j| j.range[0] + s * (j.range[1] - j.range[0]))
                .collect();
            let markers = crate::geometry::forward_kinematics_markers(&compiled, &q)?;
            Ok(MarkerFrame { q, markers })
        })
        .collect()
}

/// Sums per-problem best-so-far histories into one non-increasing series.
fn combine_histories(parts: &[Vec<f64>], constant: f64) -> Vec<f64> {
    let n = parts.iter().map(|h| h.len()).max().unwrap_or(0);
    (0..n)
        .map(|k| constant + parts.iter().map(|h| h[k.min(h.len() - 1)]).sum::<f64>())
        .collect()
}

/// Splits `budget` among problems in proportion to `dims`, at least one
/// evaluation each.
fn split_budget(budget: usize, dims: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().sum();
    let mut out: Vec<usize> = dims
        .iter()
        .map(|d| (budget * d / total.max(1)).max(1))
        .collect();
    let used: usize = out.iter().sum();
    if used < budget {
        if let Some(first) = out.first_mut() {
            *first += budget - used;
        }
    }
    out
}
