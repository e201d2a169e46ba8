//! Hill-type muscle-tendon unit with a rigid tendon.
//!
//! Force is `f_max * (a * f_a(l) * f_v(v) + f_p(l)) * cos(pennation)` with
//! lengths normalized by `l0` and velocities by `l0 * v_max`. The curve shapes
//! are parameterized by exactly the four fitted quantities
//! `{l_min, l_max, fp_max, f_max}` so the force-property fit is well posed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TAU_ACT: f64 = 0.010;
pub const DEFAULT_TAU_DEACT: f64 = 0.040;
pub const DEFAULT_V_MAX: f64 = 10.0;
pub const DEFAULT_FV_CURVATURE: f64 = 0.25;
pub const DEFAULT_FV_ECCENTRIC_PLATEAU: f64 = 1.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuscleError {
    #[error("control {0} outside [0, 1]")]
    InvalidControl(f64),
}

/// Per-muscle constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleParams {
    /// Maximum isometric force, N.
    pub f_max: f64,
    /// Normalized length where active force vanishes on the short side.
    pub l_min: f64,
    /// Normalized length where active force vanishes on the long side.
    pub l_max: f64,
    /// Passive force at `l_max`, as a fraction of `f_max`.
    pub fp_max: f64,
    /// Path length (m) that maps to normalized length 1.
    pub l0: f64,
    /// Maximum shortening velocity, normalized lengths per second.
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    /// Constant pennation angle, rad.
    #[serde(default)]
    pub pennation: f64,
    #[serde(default = "default_tau_act")]
    pub tau_act: f64,
    #[serde(default = "default_tau_deact")]
    pub tau_deact: f64,
    /// Hill curvature `a/F0` of the concentric branch.
    #[serde(default = "default_fv_curvature")]
    pub fv_curvature: f64,
    /// Asymptotic force of the eccentric branch.
    #[serde(default = "default_fv_plateau")]
    pub fv_eccentric_plateau: f64,
}

fn default_v_max() -> f64 {
    DEFAULT_V_MAX
}
fn default_tau_act() -> f64 {
    DEFAULT_TAU_ACT
}
fn default_tau_deact() -> f64 {
    DEFAULT_TAU_DEACT
}
fn default_fv_curvature() -> f64 {
    DEFAULT_FV_CURVATURE
}
fn default_fv_plateau() -> f64 {
    DEFAULT_FV_ECCENTRIC_PLATEAU
}

impl MuscleParams {
    /// Parameters with conventional defaults for everything but force and
    /// calibration length.
    pub fn new(f_max: f64, l0: f64) -> Self {
        MuscleParams {
            f_max,
            l_min: 0.5,
            l_max: 1.6,
            fp_max: 1.3,
            l0,
            v_max: DEFAULT_V_MAX,
            pennation: 0.0,
            tau_act: DEFAULT_TAU_ACT,
            tau_deact: DEFAULT_TAU_DEACT,
            fv_curvature: DEFAULT_FV_CURVATURE,
            fv_eccentric_plateau: DEFAULT_FV_ECCENTRIC_PLATEAU,
        }
    }

    /// Human-readable descriptions of every violated parameter invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = [
            self.f_max,
            self.l_min,
            self.l_max,
            self.fp_max,
            self.l0,
            self.v_max,
            self.pennation,
            self.tau_act,
            self.tau_deact,
            self.fv_curvature,
            self.fv_eccentric_plateau,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            out.push("parameters must be finite".to_string());
            return out;
        }
        if !(0.0 < self.l_min && self.l_min < 1.0 && 1.0 < self.l_max) {
            out.push(format!(
                "requires 0 < l_min < 1 < l_max (l_min={}, l_max={})",
                self.l_min, self.l_max
            ));
        }
        if self.fp_max < 0.0 {
            out.push(format!("fp_max must be >= 0 (got {})", self.fp_max));
        }
        if self.f_max <= 0.0 {
            out.push(format!("f_max must be > 0 (got {})", self.f_max));
        }
        if self.l0 <= 0.0 {
            out.push(format!("l0 must be > 0 (got {})", self.l0));
        }
        if self.v_max <= 0.0 {
            out.push(format!("v_max must be > 0 (got {})", self.v_max));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.pennation) {
            out.push(format!(
                "pennation must be in [0, pi/2) (got {})",
                self.pennation
            ));
        }
        if self.tau_act <= 0.0 || self.tau_deact <= 0.0 {
            out.push("activation time constants must be > 0".to_string());
        }
        if self.fv_curvature <= 0.0 || self.fv_eccentric_plateau < 1.0 {
            out.push("force-velocity shape requires curvature > 0 and plateau >= 1".to_string());
        }
        out
    }
}

/// Per-step muscle state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MuscleState {
    pub activation: f64,
    /// Path length, m.
    pub length: f64,
    /// Lengthening rate, m/s.
    pub velocity: f64,
}

/// Active force-length curve: piecewise quadratic through
/// `(l_min, 0)`, `(1, 1)`, `(l_max, 0)`.
pub fn active_force_length(l_norm: f64, params: &MuscleParams) -> f64 {
    if l_norm <= params.l_min || l_norm >= params.l_max {
        return 0.0;
    }
    let x = if l_norm <= 1.0 {
        (l_norm - 1.0) / (1.0 - params.l_min)
    } else {
        (l_norm - 1.0) / (params.l_max - 1.0)
    };
    (1.0 - x * x).clamp(0.0, 1.0)
}

/// Passive force-length curve: zero up to optimal length, then a cubic
/// reaching `fp_max` at `l_max`.
pub fn passive_force_length(l_norm: f64, params: &MuscleParams) -> f64 {
    if l_norm <= 1.0 {
        return 0.0;
    }
    let x = (l_norm - 1.0) / (params.l_max - 1.0);
    params.fp_max * x * x * x
}

/// Force-velocity curve; `v_norm < 0` is shortening, `-1` is maximal
/// shortening velocity.
///
/// Concentric branch is Hill's hyperbola `(1 + v) / (1 - v / k)`. The
/// eccentric branch saturates at the plateau with its slope matched at `v = 0`.
pub fn force_velocity(v_norm: f64, params: &MuscleParams) -> f64 {
    let k = params.fv_curvature;
    if v_norm <= -1.0 {
        0.0
    } else if v_norm <= 0.0 {
        (1.0 + v_norm) / (1.0 - v_norm / k)
    } else {
        let rise = params.fv_eccentric_plateau - 1.0;
        if rise <= 0.0 {
            return 1.0;
        }
        let c = rise * k / (1.0 + k);
        params.fv_eccentric_plateau - rise * c / (c + v_norm)
    }
}

/// Muscle-tendon force along the tendon, N. Never negative.
pub fn muscle_force(state: &MuscleState, params: &MuscleParams) -> f64 {
    muscle_force_scaled(state, params, 1.0)
}

/// Like [`muscle_force`] with the active term scaled by `active_scale`
/// (fatigue uses `f_max_upd / f_max`).
pub fn muscle_force_scaled(state: &MuscleState, params: &MuscleParams, active_scale: f64) -> f64 {
    let (active, passive) = force_components(state, params, active_scale);
    (active + passive) * params.pennation.cos()
}

/// Fiber-direction `(active, passive)` force components, N.
pub fn force_components(
    state: &MuscleState,
    params: &MuscleParams,
    active_scale: f64,
) -> (f64, f64) {
    let l_norm = state.length / params.l0;
    let v_norm = state.velocity / (params.l0 * params.v_max);
    let a = state.activation.clamp(0.0, 1.0);
    let active = params.f_max
        * active_scale.max(0.0)
        * a
        * active_force_length(l_norm, params)
        * force_velocity(v_norm, params);
    let passive = params.f_max * passive_force_length(l_norm, params);
    (active.max(0.0), passive.max(0.0))
}

/// One exact step of `da/dt = (u - a) / tau(u, a)` with `u` held over `dt`.
pub fn activation_step(a: f64, u: f64, dt: f64, params: &MuscleParams) -> Result<f64, MuscleError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(MuscleError::InvalidControl(u));
    }
    let tau = if u > a {
        params.tau_act
    } else {
        params.tau_deact
    };
    let next = u + (a - u) * (-dt / tau).exp();
    Ok(next.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> MuscleParams {
        MuscleParams::new(100.0, 0.2)
    }

    #[test]
    fn force_length_examples() {
        let p = params();
        assert_eq!(active_force_length(1.0, &p), 1.0);
        assert_eq!(active_force_length(0.5, &p), 0.0);
        assert_eq!(active_force_length(1.6, &p), 0.0);
        assert!((active_force_length(0.75, &p) - 0.75).abs() < 1e-15);
        assert_eq!(active_force_length(-3.0, &p), 0.0);
    }

    #[test]
    fn passive_examples() {
        let p = params();
        assert_eq!(passive_force_length(0.9, &p), 0.0);
        assert!((passive_force_length(1.6, &p) - 1.3).abs() < 1e-12);
        assert!((passive_force_length(1.3, &p) - 0.1625).abs() < 1e-12);
    }

    #[test]
    fn force_velocity_examples() {
        let p = params();
        assert_eq!(force_velocity(0.0, &p), 1.0);
        assert_eq!(force_velocity(-1.0, &p), 0.0);
        assert_eq!(force_velocity(-7.0, &p), 0.0);
        let far = force_velocity(1e12, &p);
        assert!((far - 1.4).abs() < 1e-9);
        assert!(force_velocity(5.0, &p) < 1.4);
    }

    #[test]
    fn force_examples() {
        let mut p = params();
        let iso = MuscleState {
            activation: 1.0,
            length: p.l0,
            velocity: 0.0,
        };
        assert_eq!(muscle_force(&iso, &p), 100.0);
        let off = MuscleState {
            activation: 0.0,
            ..iso
        };
        assert_eq!(muscle_force(&off, &p), 0.0);
        p.pennation = PI / 6.0;
        let half = MuscleState {
            activation: 0.5,
            ..iso
        };
        assert!((muscle_force(&half, &p) - 43.30127018922193).abs() < 1e-3);
    }

    #[test]
    fn activation_examples() {
        let p = params();
        assert_eq!(activation_step(0.3, 0.3, 0.01, &p).unwrap(), 0.3);
        let up = activation_step(0.0, 1.0, 0.01, &p).unwrap();
        assert!((up - 0.63212).abs() < 1e-5);
        let down = activation_step(1.0, 0.0, 0.04, &p).unwrap();
        assert!((down - 0.36788).abs() < 1e-5);
        assert_eq!(
            activation_step(0.2, 1.5, 0.01, &p),
            Err(MuscleError::InvalidControl(1.5))
        );
        assert!(activation_step(0.2, -0.1, 0.01, &p).is_err());
    }

    #[test]
    fn curves_have_no_jumps() {
        let p = MuscleParams {
            l_min: 0.6,
            l_max: 1.5,
            fp_max: 1.2,
            ..params()
        };
        let eps = 1e-12;
        for &bp in &[p.l_min, 1.0, p.l_max] {
            for curve in [active_force_length, passive_force_length] {
                let jump = (curve(bp + eps, &p) - curve(bp - eps, &p)).abs();
                assert!(jump < 1e-9, "jump {jump} at {bp}");
            }
        }
        for &bp in &[-1.0, 0.0] {
            let jump = (force_velocity(bp + eps, &p) - force_velocity(bp - eps, &p)).abs();
            assert!(jump < 1e-9);
        }
    }

    #[test]
    fn violations_listed() {
        let mut p = params();
        assert!(p.violations().is_empty());
        p.l_min = 1.2;
        p.f_max = -1.0;
        assert_eq!(p.violations().len(), 2);
    }
}
