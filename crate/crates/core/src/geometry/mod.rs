//! Muscle path lengths, tendon-excursion moment arms, moment-arm maps and
//! marker forward kinematics.

mod map;
pub mod wrap;

use nalgebra::{DMatrix, Matrix3};
use thiserror::Error;

use crate::model::{CompiledModel, CompiledMuscle, ModelDoc, ModelError, WrapKind};
use crate::spatial::{axis_angle, Vec3};

pub use map::{MapError, MomentArmMap};

/// Central finite-difference step for moment arms, rad.
pub const MOMENT_ARM_STEP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("unknown muscle '{0}'")]
    UnknownMuscle(String),
    #[error("unknown joint '{0}'")]
    UnknownJoint(String),
    #[error("posture has {got} entries, model has {expected} joints")]
    PostureSize { expected: usize, got: usize },
    #[error("muscle '{muscle}': path point inside wrap surface '{surface}'")]
    GeometryDegenerate { muscle: String, surface: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// World placement of every segment for one posture.
#[derive(Debug, Clone)]
pub struct Pose {
    pub rotations: Vec<Matrix3<f64>>,
    pub positions: Vec<Vec3>,
}

impl Pose {
    /// Composes joint transforms from the root outwards. Panics if `q` is
    /// shorter than the joint list; public entry points check sizes first.
    pub fn new(model: &CompiledModel, q: &[f64]) -> Pose {
        let n = model.segments.len();
        let mut rotations = vec![Matrix3::identity(); n];
        let mut positions = vec![Vec3::zeros(); n];
        for &i in &model.order {
            let seg = &model.segments[i];
            match (seg.parent, seg.joint) {
                (Some(p), Some(j)) => {
                    let rp = rotations[p];
                    positions[i] = positions[p] + rp * seg.offset;
                    rotations[i] = rp * axis_angle(&model.joints[j].axis, q[j]);
                }
                _ => {
                    positions[i] = seg.offset;
                }
            }
        }
        Pose {
            rotations,
            positions,
        }
    }

    pub fn point(&self, segment: usize, local: &Vec3) -> Vec3 {
        self.positions[segment] + self.rotations[segment] * local
    }

    /// World joint axis and the point it passes through.
    pub fn joint_axis(&self, model: &CompiledModel, joint: usize) -> (Vec3, Vec3) {
        let j = &model.joints[joint];
        (
            self.rotations[j.parent] * j.axis.into_inner(),
            self.positions[j.child],
        )
    }

    /// Maps a world point into a wrap surface frame.
    fn to_surface(&self, model: &CompiledModel, surface: usize, world: &Vec3) -> Vec3 {
        let s = &model.surfaces[surface];
        let rot = self.rotations[s.segment] * s.rotation;
        let centre = self.point(s.segment, &s.location);
        rot.transpose() * (world - centre)
    }
}

fn check_posture(model: &CompiledModel, q: &[f64]) -> Result<(), GeometryError> {
    if q.len() != model.n_joints() {
        return Err(GeometryError::PostureSize {
            expected: model.n_joints(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Distance from a wrap surface centre to a straight path piece, in the
/// surface's cross-section metric.
fn piece_distance(a: &Vec3, b: &Vec3, kind: WrapKind) -> f64 {
    let (a, b) = match kind {
        WrapKind::Cylinder => (Vec3::new(a.x, a.y, 0.0), Vec3::new(b.x, b.y, 0.0)),
        WrapKind::Sphere => (*a, *b),
    };
    let d = b - a;
    let dd = d.norm_squared();
    let t = if dd > 0.0 {
        (-a.dot(&d) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + d * t).norm()
}

/// For each of the muscle's wraps, the index of the path piece nearest to it.
pub(crate) fn assign_wrap_segments(
    model: &CompiledModel,
    pose: &Pose,
    muscle: &CompiledMuscle,
) -> Vec<usize> {
    let world: Vec<Vec3> = muscle
        .points
        .iter()
        .map(|(s, p)| pose.point(*s, p))
        .collect();
    muscle
        .wraps
        .iter()
        .map(|w| {
            let kind = model.surfaces[w.surface].kind;
            let local: Vec<Vec3> = world
                .iter()
                .map(|p| pose.to_surface(model, w.surface, p))
                .collect();
            let mut best = (0, f64::INFINITY);
            for k in 0..local.len().saturating_sub(1) {
                let d = piece_distance(&local[k], &local[k + 1], kind);
                if d < best.1 {
                    best = (k, d);
                }
            }
            best.0
        })
        .collect()
}

/// Path length of muscle `index` in the given pose.
///
/// Each straight piece is tested against the wraps assigned to it in
/// declaration order; the first one that engages replaces the piece.
pub fn muscle_length(
    model: &CompiledModel,
    pose: &Pose,
    index: usize,
) -> Result<f64, GeometryError> {
    let muscle = &model.muscles[index];
    let world: Vec<Vec3> = muscle
        .points
        .iter()
        .map(|(s, p)| pose.point(*s, p))
        .collect();
    let mut total = 0.0;
    for k in 0..world.len() - 1 {
        let (a, b) = (world[k], world[k + 1]);
        let mut piece = (b - a).norm();
        for w in muscle.wraps.iter().filter(|w| w.piece == k) {
            let surf = &model.surfaces[w.surface];
            let la = pose.to_surface(model, w.surface, &a);
            let lb = pose.to_surface(model, w.surface, &b);
            let side_world = pose.point(surf.segment, &w.side_site);
            let side = pose.to_surface(model, w.surface, &side_world);
            let outcome = match surf.kind {
                WrapKind::Cylinder => wrap::cylinder_path(la, lb, surf.radius, Some(side)),
                WrapKind::Sphere => wrap::sphere_path(la, lb, surf.radius, Some(side)),
            }
            .map_err(|_| GeometryError::GeometryDegenerate {
                muscle: muscle.name.clone(),
                surface: surf.name.clone(),
            })?;
            if outcome.wrapped {
                piece = outcome.length;
                break;
            }
        }
        total += piece;
    }
    // Points outside the piece a wrap acts on must still not sit inside it.
    for w in &muscle.wraps {
        let surf = &model.surfaces[w.surface];
        for p in &world {
            let l = pose.to_surface(model, w.surface, p);
            let radial = match surf.kind {
                WrapKind::Cylinder => (l.x * l.x + l.y * l.y).sqrt(),
                WrapKind::Sphere => l.norm(),
            };
            if radial < surf.radius * (1.0 - 1e-12) {
                return Err(GeometryError::GeometryDegenerate {
                    muscle: muscle.name.clone(),
                    surface: surf.name.clone(),
                });
            }
        }
    }
    Ok(total)
}

/// Lengths of all muscles at posture `q`.
pub fn muscle_lengths(model: &CompiledModel, q: &[f64]) -> Result<Vec<f64>, GeometryError> {
    check_posture(model, q)?;
    let pose = Pose::new(model, q);
    (0..model.n_muscles())
        .map(|m| muscle_length(model, &pose, m))
        .collect()
}

/// Lengths and the full moment-arm matrix (muscles x joints) at `q`.
#[derive(Debug, Clone)]
pub struct MuscleKinematics {
    pub lengths: Vec<f64>,
    pub moment_arms: DMatrix<f64>,
}

/// Evaluates lengths and tendon-excursion moment arms `r = -dl/dq` by
/// central differences with step `h`.
pub fn muscle_kinematics(
    model: &CompiledModel,
    q: &[f64],
    h: f64,
) -> Result<MuscleKinematics, GeometryError> {
    let lengths = muscle_lengths(model, q)?;
    let nm = model.n_muscles();
    let nj = model.n_joints();
    let mut arms = DMatrix::zeros(nm, nj);
    let mut qp = q.to_vec();
    for j in 0..nj {
        qp[j] = q[j] + h;
        let plus = muscle_lengths(model, &qp)?;
        qp[j] = q[j] - h;
        let minus = muscle_lengths(model, &qp)?;
        qp[j] = q[j];
        for m in 0..nm {
            arms[(m, j)] = -(plus[m] - minus[m]) / (2.0 * h);
        }
    }
    Ok(MuscleKinematics {
        lengths,
        moment_arms: arms,
    })
}

/// Moment arm of one muscle about one joint with an explicit difference step.
pub fn moment_arm_with_step(
    model: &CompiledModel,
    q: &[f64],
    muscle: usize,
    joint: usize,
    h: f64,
) -> Result<f64, GeometryError> {
    check_posture(model, q)?;
    let mut qp = q.to_vec();
    qp[joint] = q[joint] + h;
    let plus = muscle_length(model, &Pose::new(model, &qp), muscle)?;
    qp[joint] = q[joint] - h;
    let minus = muscle_length(model, &Pose::new(model, &qp), muscle)?;
    Ok(-(plus - minus) / (2.0 * h))
}

/// Path length of a named muscle at posture `q`, m.
pub fn path_length(model: &ModelDoc, q: &[f64], muscle: &str) -> Result<f64, GeometryError> {
    let compiled = CompiledModel::new(model)?;
    let m = compiled
        .muscle_index(muscle)
        .ok_or_else(|| GeometryError::UnknownMuscle(muscle.to_string()))?;
    check_posture(&compiled, q)?;
    muscle_length(&compiled, &Pose::new(&compiled, q), m)
}

/// Moment arm of a named muscle about a named joint, m. Positive means
/// tension produces positive joint torque.
pub fn moment_arm(
    model: &ModelDoc,
    q: &[f64],
    muscle: &str,
    joint: &str,
) -> Result<f64, GeometryError> {
    let compiled = CompiledModel::new(model)?;
    let m = compiled
        .muscle_index(muscle)
        .ok_or_else(|| GeometryError::UnknownMuscle(muscle.to_string()))?;
    let j = compiled
        .joint_index(joint)
        .ok_or_else(|| GeometryError::UnknownJoint(joint.to_string()))?;
    moment_arm_with_step(&compiled, q, m, j, MOMENT_ARM_STEP)
}

/// Sweeps each joint over its grid with the other joints at mid-range.
pub fn moment_arm_map(
    model: &CompiledModel,
    q_grid: &[Vec<f64>],
) -> Result<MomentArmMap, GeometryError> {
    let muscles: Vec<usize> = (0..model.n_muscles()).collect();
    moment_arm_map_for(model, q_grid, &muscles)
}

/// [`moment_arm_map`] restricted to a subset of muscles (by index).
pub fn moment_arm_map_for(
    model: &CompiledModel,
    q_grid: &[Vec<f64>],
    muscles: &[usize],
) -> Result<MomentArmMap, GeometryError> {
    moment_arm_map_at(model, q_grid, muscles, &model.doc().mid_range_posture())
}

/// [`moment_arm_map_for`] with the non-swept joints held at `fixed`.
pub fn moment_arm_map_at(
    model: &CompiledModel,
    q_grid: &[Vec<f64>],
    muscles: &[usize],
    fixed: &[f64],
) -> Result<MomentArmMap, GeometryError> {
    if q_grid.len() != model.n_joints() {
        return Err(GeometryError::PostureSize {
            expected: model.n_joints(),
            got: q_grid.len(),
        });
    }
    check_posture(model, fixed)?;
    let fixed = fixed.to_vec();
    let nj = model.n_joints();
    let mut values = vec![vec![Vec::new(); nj]; muscles.len()];
    for j in 0..nj {
        for &qj in &q_grid[j] {
            let mut q = fixed.clone();
            q[j] = qj;
            let mut qp = q.clone();
            qp[j] = qj + MOMENT_ARM_STEP;
            let plus = Pose::new(model, &qp);
            qp[j] = qj - MOMENT_ARM_STEP;
            let minus = Pose::new(model, &qp);
            for (row, &m) in muscles.iter().enumerate() {
                let lp = muscle_length(model, &plus, m)?;
                let lm = muscle_length(model, &minus, m)?;
                values[row][j].push(-(lp - lm) / (2.0 * MOMENT_ARM_STEP));
            }
        }
    }
    Ok(MomentArmMap {
        muscles: muscles
            .iter()
            .map(|&m| model.muscles[m].name.clone())
            .collect(),
        joints: model.joints.iter().map(|j| j.name.clone()).collect(),
        q_grid: q_grid.to_vec(),
        values,
        fixed_posture: fixed,
    })
}

/// `n` evenly spaced samples across every joint's range.
pub fn uniform_grid(model: &ModelDoc, n: usize) -> Vec<Vec<f64>> {
    model
        .joints
        .iter()
        .map(|j| {
            if n == 1 {
                return vec![j.mid_range()];
            }
            (0..n)
                .map(|k| j.range[0] + (j.range[1] - j.range[0]) * k as f64 / (n - 1) as f64)
                .collect()
        })
        .collect()
}

/// World positions of every marker at posture `q`.
pub fn forward_kinematics_markers(
    model: &CompiledModel,
    q: &[f64],
) -> Result<Vec<(String, [f64; 3])>, GeometryError> {
    check_posture(model, q)?;
    let pose = Pose::new(model, q);
    Ok(model
        .markers
        .iter()
        .map(|(name, seg, local)| {
            let p = pose.point(*seg, local);
            (name.clone(), [p.x, p.y, p.z])
        })
        .collect())
}

/// Names of joints whose angle lies outside the joint range.
pub fn out_of_range_joints(model: &ModelDoc, q: &[f64]) -> Vec<String> {
    model
        .joints
        .iter()
        .zip(q)
        .filter(|(j, &qj)| qj < j.range[0] || qj > j.range[1])
        .map(|(j, _)| j.name.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_model;
    use crate::model::{MarkerSpec, PathPoint, WrapAssignment, WrapSurfaceSpec};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn straight_two_point_length() {
        let mut m = tiny_model();
        m.muscles[0].path = vec![
            PathPoint {
                segment: "arm".into(),
                local: [0.0, 0.0, -0.05],
            },
            PathPoint {
                segment: "arm".into(),
                local: [0.0, 0.0, -0.15],
            },
        ];
        let l = path_length(&m, &[0.7], "flexor").unwrap();
        assert!((l - 0.10).abs() < 1e-15);
    }

    #[test]
    fn unknown_names() {
        let m = tiny_model();
        assert!(matches!(
            path_length(&m, &[0.0], "nope"),
            Err(GeometryError::UnknownMuscle(_))
        ));
        assert!(matches!(
            moment_arm(&m, &[0.0], "flexor", "nope"),
            Err(GeometryError::UnknownJoint(_))
        ));
        assert!(matches!(
            path_length(&m, &[0.0, 1.0], "flexor"),
            Err(GeometryError::PostureSize { .. })
        ));
    }

    #[test]
    fn path_through_axis_has_zero_moment_arm() {
        let mut m = tiny_model();
        m.muscles[0].path = vec![
            PathPoint {
                segment: "ground".into(),
                local: [0.0, 0.0, -0.1],
            },
            PathPoint {
                segment: "ground".into(),
                local: [0.0, 0.0, -0.3],
            },
            PathPoint {
                segment: "arm".into(),
                local: [0.0, 0.0, -0.1],
            },
        ];
        for q in [0.2, 1.0, 2.0] {
            assert!(moment_arm(&m, &[q], "flexor", "hinge").unwrap().abs() < 1e-9);
        }
    }

    fn coaxial_cylinder_model() -> ModelDoc {
        let mut m = tiny_model();
        m.wrap_surfaces.push(WrapSurfaceSpec {
            name: "drum".into(),
            kind: WrapKind::Cylinder,
            segment: "ground".into(),
            location: [0.0, 0.0, -0.3],
            // Rotate z onto the hinge axis (-y).
            orientation: [FRAC_PI_2, 0.0, 0.0],
            radius: 0.02,
            half_length: 0.05,
        });
        // Both attachments far from the axis, on opposite sides of the drum.
        m.muscles[0].path = vec![
            PathPoint {
                segment: "ground".into(),
                local: [-0.02, 0.0, -0.1],
            },
            PathPoint {
                segment: "arm".into(),
                local: [-0.02, 0.0, -0.1],
            },
        ];
        m.muscles[0].wraps = vec![WrapAssignment {
            surface: "drum".into(),
            side_site: [-0.05, 0.0, -0.3],
        }];
        m
    }

    #[test]
    fn coaxial_wrap_moment_arm_equals_radius() {
        let m = coaxial_cylinder_model();
        for q in [0.3, 1.0, 2.0] {
            let r = moment_arm(&m, &[q], "flexor", "hinge").unwrap();
            assert!((r + 0.02).abs() < 1e-8, "q={q}: r={r}");
        }
        let map = moment_arm_map(&CompiledModel::new(&m).unwrap(), &[vec![0.5, 1.0, 1.5]]).unwrap();
        assert_eq!(map.values[0][0].len(), 3);
        assert!(map.values[0][0].iter().all(|r| (r + 0.02).abs() < 1e-8));
    }

    #[test]
    fn inside_attachment_is_degenerate() {
        let mut m = coaxial_cylinder_model();
        m.muscles[0].path[1].local = [0.0, 0.0, -0.005];
        assert!(matches!(
            path_length(&m, &[1.0], "flexor"),
            Err(GeometryError::GeometryDegenerate { .. })
        ));
    }

    #[test]
    fn quarter_turn_marker() {
        let mut m = tiny_model();
        m.segments[1].parent_offset = [0.0; 3];
        m.markers = vec![
            MarkerSpec {
                name: "axis".into(),
                segment: "arm".into(),
                local: [0.0, 0.0, 0.0],
            },
            MarkerSpec {
                name: "tip".into(),
                segment: "arm".into(),
                local: [0.0, 0.0, -1.0],
            },
        ];
        let c = CompiledModel::new(&m).unwrap();
        let at0 = forward_kinematics_markers(&c, &[0.0]).unwrap();
        let at90 = forward_kinematics_markers(&c, &[FRAC_PI_2]).unwrap();
        assert_eq!(at0[0].1, at90[0].1);
        let tip = at90[1].1;
        assert!((tip[0] - 1.0).abs() < 1e-15 && tip[1].abs() < 1e-15 && tip[2].abs() < 1e-15);
    }

    #[test]
    fn translation_invariance() {
        let m = coaxial_cylinder_model();
        let mut shifted = m.clone();
        shifted.segments[0].parent_offset = [1.5, -2.0, 0.7];
        for q in [0.2, 1.1] {
            let a = path_length(&m, &[q], "flexor").unwrap();
            let b = path_length(&shifted, &[q], "flexor").unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_flagged() {
        let m = tiny_model();
        assert_eq!(out_of_range_joints(&m, &[3.0]), vec!["hinge".to_string()]);
        assert!(out_of_range_joints(&m, &[1.0]).is_empty());
    }
}
