//! Muscle-property perturbations: sarcopenia, fatigue, tendon transfer and
//! muscle tear, plus schedules that apply them during a run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelDoc;

/// Default fatigue rate.
pub const DEFAULT_K_FATIGUE: f64 = 1.0;
/// Default sarcopenia force reduction.
pub const DEFAULT_SARCOPENIA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbError {
    #[error("unknown muscle '{0}'")]
    UnknownMuscle(String),
    #[error("tendon transfer of '{0}' onto itself")]
    SelfTransfer(String),
    #[error("cannot remove '{0}', the model's last muscle")]
    LastMuscle(String),
    #[error("sarcopenia fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("fatigue rate must be >= 0, got {0}")]
    InvalidRate(f64),
    #[error("perturbation onsets must be non-decreasing (entry {0})")]
    UnorderedSchedule(usize),
}

/// Per-muscle fatigue memory. `f_max_upd = f_max * exp(-k * integral)` with
/// `integral = ∫ F_act / f_max dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatigueState {
    pub muscles: Vec<String>,
    pub f_max: Vec<f64>,
    pub f_max_upd: Vec<f64>,
    pub integral: Vec<f64>,
    pub k_fatigue: f64,
}

impl FatigueState {
    /// Fresh state for every muscle of `model`.
    pub fn new(model: &ModelDoc, k_fatigue: f64) -> Result<Self, PerturbError> {
        if !(k_fatigue >= 0.0) {
            return Err(PerturbError::InvalidRate(k_fatigue));
        }
        let f_max: Vec<f64> = model.muscles.iter().map(|m| m.params.f_max).collect();
        Ok(FatigueState {
            muscles: model.muscles.iter().map(|m| m.name.clone()).collect(),
            f_max_upd: f_max.clone(),
            integral: vec![0.0; f_max.len()],
            f_max,
            k_fatigue,
        })
    }

    /// Active-force multipliers `f_max_upd / f_max`.
    pub fn scales(&self) -> Vec<f64> {
        self.f_max_upd
            .iter()
            .zip(&self.f_max)
            .map(|(u, f)| u / f)
            .collect()
    }

    /// Re-aligns with a changed muscle set: surviving names keep their
    /// history, new names start fresh.
    pub fn remap(&self, model: &ModelDoc) -> FatigueState {
        let mut next = FatigueState::new(model, self.k_fatigue).expect("rate already validated");
        for (i, name) in next.muscles.iter().enumerate() {
            if let Some(old) = self.muscles.iter().position(|m| m == name) {
                next.integral[i] = self.integral[old];
                next.f_max_upd[i] = next.f_max[i] * (-self.k_fatigue * self.integral[old]).exp();
            }
        }
        next
    }
}

/// Accumulates the fatigue integral over `dt` (rectangle rule) and updates
/// the current maximal forces. Negative forces count as zero.
pub fn fatigue_update(fstate: &FatigueState, f_act: &[f64], dt: f64) -> FatigueState {
    let mut next = fstate.clone();
    for i in 0..next.f_max.len() {
        let f = f_act.get(i).copied().unwrap_or(0.0).max(0.0);
        next.integral[i] += dt * f / next.f_max[i];
        next.f_max_upd[i] = next.f_max[i] * (-next.k_fatigue * next.integral[i]).exp();
    }
    next
}

/// Scales every muscle's maximal isometric force by `1 - fraction`.
pub fn apply_sarcopenia(model: &ModelDoc, fraction: f64) -> Result<ModelDoc, PerturbError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PerturbError::InvalidFraction(fraction));
    }
    let mut out = model.clone();
    for m in &mut out.muscles {
        m.params.f_max *= 1.0 - fraction;
    }
    Ok(out)
}

/// Re-routes `donor` along `recipient`'s path and wraps. The donor keeps its
/// name, force parameters and control channel; the recipient is removed.
pub fn apply_tendon_transfer(
    model: &ModelDoc,
    donor: &str,
    recipient: &str,
) -> Result<ModelDoc, PerturbError> {
    if donor == recipient {
        return Err(PerturbError::SelfTransfer(donor.to_string()));
    }
    let d = model
        .muscle_index(donor)
        .ok_or_else(|| PerturbError::UnknownMuscle(donor.to_string()))?;
    let r = model
        .muscle_index(recipient)
        .ok_or_else(|| PerturbError::UnknownMuscle(recipient.to_string()))?;
    let mut out = model.clone();
    out.muscles[d].path = model.muscles[r].path.clone();
    out.muscles[d].wraps = model.muscles[r].wraps.clone();
    out.muscles.remove(r);
    Ok(out)
}

/// Removes a muscle.
pub fn tear_muscle(model: &ModelDoc, muscle: &str) -> Result<ModelDoc, PerturbError> {
    let i = model
        .muscle_index(muscle)
        .ok_or_else(|| PerturbError::UnknownMuscle(muscle.to_string()))?;
    if model.muscles.len() == 1 {
        return Err(PerturbError::LastMuscle(muscle.to_string()));
    }
    let mut out = model.clone();
    out.muscles.remove(i);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    Sarcopenia {
        #[serde(default = "default_sarcopenia")]
        fraction: f64,
    },
    Fatigue {
        #[serde(default = "default_k")]
        k: f64,
    },
    TendonTransfer {
        donor: String,
        recipient: String,
    },
    Tear {
        muscle: String,
    },
}

fn default_sarcopenia() -> f64 {
    DEFAULT_SARCOPENIA
}
fn default_k() -> f64 {
    DEFAULT_K_FATIGUE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledPerturbation {
    /// Onset time, s.
    pub onset: f64,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerturbationSchedule(pub Vec<ScheduledPerturbation>);

impl PerturbationSchedule {
    pub fn check(&self) -> Result<(), PerturbError> {
        for (i, w) in self.0.windows(2).enumerate() {
            if !(w[0].onset <= w[1].onset) {
                return Err(PerturbError::UnorderedSchedule(i + 1));
            }
        }
        Ok(())
    }
}

/// Applies a model-changing perturbation. Fatigue does not change the model
/// and is returned unchanged here; runs track it in a [`FatigueState`].
pub fn apply_perturbation(model: &ModelDoc, p: &Perturbation) -> Result<ModelDoc, PerturbError> {
    match p {
        Perturbation::Sarcopenia { fraction } => apply_sarcopenia(model, *fraction),
        Perturbation::Fatigue { .. } => Ok(model.clone()),
        Perturbation::TendonTransfer { donor, recipient } => {
            apply_tendon_transfer(model, donor, recipient)
        }
        Perturbation::Tear { muscle } => tear_muscle(model, muscle),
    }
}
