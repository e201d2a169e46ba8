//! Validation metrics: marker kinematics, moment-arm maps and force maps.

use serde::{Deserialize, Serialize};

use super::{force_residual, FitError, ForceMap};
use crate::geometry::{forward_kinematics_markers, moment_arm_map_at, MomentArmMap};
use crate::model::{CompiledModel, ModelDoc};

/// Reference marker positions at one posture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerFrame {
    pub q: Vec<f64>,
    pub markers: Vec<(String, [f64; 3])>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentArmValidation {
    /// RMS over every (muscle, joint, q) sample, m.
    pub rms: f64,
    /// Mean over muscles of RMS / mean |reference|, percent. Muscles with no
    /// moment arm anywhere in the reference are left out.
    pub relative_rms_percent: f64,
    pub per_muscle_percent: Vec<(String, f64)>,
    /// Sum of squared differences, m^2.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceValidation {
    /// Mean over muscles of force RMS / f_max, percent.
    pub relative_rms_percent: f64,
    pub per_muscle_percent: Vec<(String, f64)>,
}

/// RMS Euclidean marker error over all reference frames, m.
pub fn validate_kinematics(model: &ModelDoc, reference: &[MarkerFrame]) -> Result<f64, FitError> {
    let compiled = CompiledModel::new(model)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for frame in reference {
        let got = forward_kinematics_markers(&compiled, &frame.q)?;
        for (name, p) in &frame.markers {
            let (_, m) = got.iter().find(|(g, _)| g == name).ok_or_else(|| {
                FitError::CoverageMismatch(format!("marker '{name}' is not in the model"))
            })?;
            sum += (0..3).map(|k| (m[k] - p[k]).powi(2)).sum::<f64>();
            n += 1;
        }
    }
    if n == 0 {
        return Err(FitError::Config("no reference markers".into()));
    }
    Ok((sum / n as f64).sqrt())
}

/// Requires the model and the reference to name the same muscles and joints.
pub(super) fn check_map_coverage(
    model: &ModelDoc,
    reference: &MomentArmMap,
) -> Result<(), FitError> {
    for m in &model.muscles {
        if reference.muscle_index(&m.name).is_none() {
            return Err(FitError::CoverageMismatch(format!(
                "muscle '{}' is missing from the reference",
                m.name
            )));
        }
    }
    for name in &reference.muscles {
        if model.muscle_index(name).is_none() {
            return Err(FitError::CoverageMismatch(format!(
                "reference muscle '{name}' is not in the model"
            )));
        }
    }
    for j in &model.joints {
        if reference.joint_index(&j.name).is_none() {
            return Err(FitError::CoverageMismatch(format!(
                "joint '{}' is missing from the reference",
                j.name
            )));
        }
    }
    for name in &reference.joints {
        if model.joint_index(name).is_none() {
            return Err(FitError::CoverageMismatch(format!(
                "reference joint '{name}' is not in the model"
            )));
        }
    }
    Ok(())
}

/// The reference's grid and fixed posture, reordered to model joint order.
pub(super) fn grid_in_model_order(
    model: &ModelDoc,
    reference: &MomentArmMap,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut grid = Vec::with_capacity(model.joints.len());
    let mut fixed = model.mid_range_posture();
    let has_fixed = reference.fixed_posture.len() == reference.joints.len();
    for (j, joint) in model.joints.iter().enumerate() {
        let r = reference
            .joint_index(&joint.name)
            .expect("coverage checked");
        grid.push(reference.q_grid[r].clone());
        if has_fixed {
            fixed[j] = reference.fixed_posture[r];
        }
    }
    (grid, fixed)
}

/// The model's moment-arm map for `muscles`, sampled like `reference`.
pub(super) fn model_map_like(
    model: &CompiledModel,
    reference: &MomentArmMap,
    muscles: &[usize],
) -> Result<MomentArmMap, FitError> {
    let (grid, fixed) = grid_in_model_order(model.doc(), reference);
    Ok(moment_arm_map_at(model, &grid, muscles, &fixed)?)
}

/// Compares two maps sample by sample. `reference` sets the muscle list
/// and the normalization of the relative figure; the absolute RMS is
/// symmetric in the two arguments.
pub fn compare_maps(
    reference: &MomentArmMap,
    other: &MomentArmMap,
) -> Result<MomentArmValidation, FitError> {
    let mut residual = 0.0;
    let mut samples = 0usize;
    let mut per_muscle = Vec::new();
    for (mi, name) in reference.muscles.iter().enumerate() {
        let oi = other.muscle_index(name).ok_or_else(|| {
            FitError::CoverageMismatch(format!("muscle '{name}' is missing from the compared map"))
        })?;
        let (mut sq, mut abs, mut n) = (0.0, 0.0, 0usize);
        for (ji, joint) in reference.joints.iter().enumerate() {
            let oj = other.joint_index(joint).ok_or_else(|| {
                FitError::CoverageMismatch(format!(
                    "joint '{joint}' is missing from the compared map"
                ))
            })?;
            if reference.q_grid[ji] != other.q_grid[oj] {
                return Err(FitError::CoverageMismatch(format!(
                    "sample grids differ for joint '{joint}'"
                )));
            }
            for (r, o) in reference.values[mi][ji].iter().zip(&other.values[oi][oj]) {
                sq += (r - o).powi(2);
                abs += r.abs();
                n += 1;
            }
        }
        residual += sq;
        samples += n;
        if n > 0 && abs / n as f64 > 1e-12 {
            per_muscle.push((
                name.clone(),
                100.0 * (sq / n as f64).sqrt() / (abs / n as f64),
            ));
        }
    }
    let rms = if samples == 0 {
        0.0
    } else {
        (residual / samples as f64).sqrt()
    };
    let relative = if per_muscle.is_empty() {
        0.0
    } else {
        per_muscle.iter().map(|(_, p)| p).sum::<f64>() / per_muscle.len() as f64
    };
    Ok(MomentArmValidation {
        rms,
        relative_rms_percent: relative,
        per_muscle_percent: per_muscle,
        residual,
        samples,
    })
}

/// Moment-arm agreement between `model` and a reference map, sampled on
/// the reference grid and fixed posture.
pub fn validate_moment_arms(
    model: &ModelDoc,
    reference: &MomentArmMap,
) -> Result<MomentArmValidation, FitError> {
    check_map_coverage(model, reference)?;
    let compiled = CompiledModel::new(model)?;
    let muscles: Vec<usize> = reference
        .muscles
        .iter()
        .map(|n| compiled.muscle_index(n).expect("coverage checked"))
        .collect();
    let ours = model_map_like(&compiled, reference, &muscles)?;
    compare_maps(reference, &ours)
}

pub(super) fn check_force_coverage(
    model: &ModelDoc,
    reference: &[ForceMap],
) -> Result<(), FitError> {
    for m in &model.muscles {
        if !reference.iter().any(|r| r.muscle == m.name) {
            return Err(FitError::CoverageMismatch(format!(
                "muscle '{}' has no reference force map",
                m.name
            )));
        }
    }
    for r in reference {
        if model.muscle_index(&r.muscle).is_none() {
            return Err(FitError::CoverageMismatch(format!(
                "force map muscle '{}' is not in the model",
                r.muscle
            )));
        }
        r.check()?;
    }
    Ok(())
}

/// Force agreement per muscle, as RMS over the (l, a) grid relative to the
/// model's `f_max`.
pub fn validate_forces(
    model: &ModelDoc,
    reference: &[ForceMap],
) -> Result<ForceValidation, FitError> {
    check_force_coverage(model, reference)?;
    let mut per_muscle = Vec::new();
    for map in reference {
        let params = &model.muscle(&map.muscle).expect("coverage checked").params;
        let (sq, n) = force_residual(params, map);
        per_muscle.push((
            map.muscle.clone(),
            100.0 * (sq / n as f64).sqrt() / params.f_max,
        ));
    }
    let relative = per_muscle.iter().map(|(_, p)| p).sum::<f64>() / per_muscle.len().max(1) as f64;
    Ok(ForceValidation {
        relative_rms_percent: relative,
        per_muscle_percent: per_muscle,
    })
}
