//! Rigid-body dynamics of hinge-joint trees, the muscle-driven integrator,
//! exoskeleton assistance and simulation runs.

mod control;
mod sim;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{muscle_kinematics, GeometryError, Pose, MOMENT_ARM_STEP};
use crate::model::{CompiledModel, ModelError};
use crate::muscle::{activation_step, force_components, MuscleError, MuscleState};
use crate::spatial::Vec3;

pub use control::{ControlContext, ControlPolicy, Controller, TableRow};
pub use sim::{simulate, SimError, SimulationOptions, Trajectory};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("inertia matrix is not positive definite")]
    SingularInertia,
    #[error("non-finite state at t={t} s (reduce dt)")]
    NonFiniteState { t: f64 },
    #[error("dt must be in (0, 0.01], got {0}")]
    InvalidStep(f64),
    #[error("expected {expected} {what}, got {got}")]
    Size {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown exoskeleton joint '{0}'")]
    UnknownJoint(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Muscle(#[from] MuscleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonState {
    pub q: Vec<f64>,
    pub q_dot: Vec<f64>,
    pub t: f64,
}

impl SkeletonState {
    pub fn at_rest(q: Vec<f64>) -> Self {
        let n = q.len();
        SkeletonState {
            q,
            q_dot: vec![0.0; n],
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    /// Joint-space inertia, kg·m².
    pub m: DMatrix<f64>,
    /// Coriolis and centrifugal torques `C(q, q_dot) q_dot`, N·m.
    pub c_qdot: DVector<f64>,
    /// Gravity torques, N·m.
    pub g: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    SemiImplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddedMass {
    pub segment: String,
    pub mass: f64,
}

/// Ideal torque actuator on one joint supplying a fixed fraction of the
/// biological joint torque.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoActuator {
    pub joint: String,
    pub assist_fraction: f64,
    #[serde(default)]
    pub added_masses: Vec<AddedMass>,
}

impl ExoActuator {
    /// Adds the device masses to the model's segments.
    pub fn apply_masses(&self, model: &mut CompiledModel) -> Result<(), ModelError> {
        let masses: Vec<(String, f64)> = self
            .added_masses
            .iter()
            .map(|m| (m.segment.clone(), m.mass))
            .collect();
        model.add_point_masses(&masses)
    }
}

pub fn exo_torque(biological_torque: f64, exo: &ExoActuator) -> f64 {
    exo.assist_fraction * biological_torque
}

/// World-frame kinematic quantities per segment.
struct Frames {
    origin: Vec<Vec3>,
    com: Vec<Vec3>,
    inertia: Vec<Matrix3<f64>>,
    /// World joint axis of the joint driving each segment.
    axis: Vec<Vec3>,
}

fn frames(model: &CompiledModel, q: &[f64]) -> Frames {
    let pose = Pose::new(model, q);
    let n = model.segments.len();
    let mut axis = vec![Vec3::zeros(); n];
    for j in &model.joints {
        axis[j.child] = pose.rotations[j.parent] * j.axis.into_inner();
    }
    let com = (0..n)
        .map(|i| pose.point(i, &model.segments[i].com))
        .collect();
    let inertia = (0..n)
        .map(|i| {
            let r = pose.rotations[i];
            r * Matrix3::from_diagonal(&model.segments[i].inertia) * r.transpose()
        })
        .collect();
    Frames {
        origin: pose.positions,
        com,
        inertia,
        axis,
    }
}

fn check_state(model: &CompiledModel, state: &SkeletonState) -> Result<(), DynamicsError> {
    let n = model.n_joints();
    if state.q.len() != n {
        return Err(DynamicsError::Size {
            what: "joint angles",
            expected: n,
            got: state.q.len(),
        });
    }
    if state.q_dot.len() != n {
        return Err(DynamicsError::Size {
            what: "joint velocities",
            expected: n,
            got: state.q_dot.len(),
        });
    }
    Ok(())
}

fn skew_inertia(d: &Vec3, m: f64) -> Matrix3<f64> {
    // Parallel-axis term m (|d|² E - d dᵀ).
    (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * m
}

/// Joint-space inertia by composite rigid bodies.
fn mass_matrix(model: &CompiledModel, f: &Frames) -> DMatrix<f64> {
    let mut cm: Vec<f64> = model.segments.iter().map(|s| s.mass).collect();
    let mut cc: Vec<Vec3> = f.com.clone();
    let mut ci: Vec<Matrix3<f64>> = f.inertia.clone();
    for &i in model.order.iter().rev() {
        if let Some(p) = model.segments[i].parent {
            let m = cm[p] + cm[i];
            let c = if m > 0.0 {
                (cc[p] * cm[p] + cc[i] * cm[i]) / m
            } else {
                cc[p]
            };
            ci[p] = ci[p]
                + skew_inertia(&(cc[p] - c), cm[p])
                + ci[i]
                + skew_inertia(&(cc[i] - c), cm[i]);
            cm[p] = m;
            cc[p] = c;
        }
    }
    let nj = model.n_joints();
    let mut mm = DMatrix::zeros(nj, nj);
    for (ji, joint) in model.joints.iter().enumerate() {
        let i = joint.child;
        let zi = f.axis[i];
        let lin = zi.cross(&(cc[i] - f.origin[i])) * cm[i];
        let ang = ci[i] * zi;
        // Walk up through every joint that supports segment i.
        let mut s = Some(i);
        while let Some(seg) = s {
            if let Some(jj) = model.segments[seg].joint {
                let n_about = ang + (cc[i] - f.origin[seg]).cross(&lin);
                let v = f.axis[seg].dot(&n_about);
                mm[(jj, ji)] = v;
                mm[(ji, jj)] = v;
            }
            s = model.segments[seg].parent;
        }
    }
    mm
}

/// Recursive Newton-Euler inverse dynamics with base acceleration `-gravity`.
fn rnea(
    model: &CompiledModel,
    f: &Frames,
    qd: &[f64],
    qdd: &[f64],
    gravity: &Vec3,
) -> DVector<f64> {
    let n = model.segments.len();
    let mut w = vec![Vec3::zeros(); n];
    let mut wd = vec![Vec3::zeros(); n];
    let mut a = vec![Vec3::zeros(); n];
    let mut force = vec![Vec3::zeros(); n];
    let mut moment = vec![Vec3::zeros(); n];
    for &i in &model.order {
        let seg = &model.segments[i];
        match (seg.parent, seg.joint) {
            (Some(p), Some(j)) => {
                let z = f.axis[i];
                let r = f.origin[i] - f.origin[p];
                a[i] = a[p] + wd[p].cross(&r) + w[p].cross(&w[p].cross(&r));
                w[i] = w[p] + z * qd[j];
                wd[i] = wd[p] + z * qdd[j] + w[p].cross(&(z * qd[j]));
            }
            _ => a[i] = -gravity,
        }
        let d = f.com[i] - f.origin[i];
        let ac = a[i] + wd[i].cross(&d) + w[i].cross(&w[i].cross(&d));
        force[i] = ac * seg.mass;
        moment[i] = f.inertia[i] * wd[i] + w[i].cross(&(f.inertia[i] * w[i])) + d.cross(&force[i]);
    }
    let mut tau = DVector::zeros(model.n_joints());
    for &i in model.order.iter().rev() {
        let seg = &model.segments[i];
        if let Some(j) = seg.joint {
            tau[j] = f.axis[i].dot(&moment[i]);
        }
        if let Some(p) = seg.parent {
            let r = f.origin[i] - f.origin[p];
            let (fi, ni) = (force[i], moment[i]);
            moment[p] += ni + r.cross(&fi);
            force[p] += fi;
        }
    }
    tau
}

/// Inertia, Coriolis and gravity terms at `state`.
pub fn dynamics_terms(
    model: &CompiledModel,
    state: &SkeletonState,
) -> Result<DynamicsTerms, DynamicsError> {
    check_state(model, state)?;
    let f = frames(model, &state.q);
    let m = mass_matrix(model, &f);
    if m.clone().cholesky().is_none() {
        return Err(DynamicsError::SingularInertia);
    }
    let zeros = vec![0.0; model.n_joints()];
    let c_qdot = rnea(model, &f, &state.q_dot, &zeros, &Vec3::zeros());
    let g = rnea(model, &f, &zeros, &zeros, &model.gravity);
    Ok(DynamicsTerms { m, c_qdot, g })
}

/// Kinetic and potential energy, J.
pub fn energy(model: &CompiledModel, state: &SkeletonState) -> Result<(f64, f64), DynamicsError> {
    check_state(model, state)?;
    let f = frames(model, &state.q);
    let m = mass_matrix(model, &f);
    let qd = DVector::from_column_slice(&state.q_dot);
    let kinetic = 0.5 * qd.dot(&(&m * &qd));
    let potential = -model
        .segments
        .iter()
        .zip(&f.com)
        .map(|(s, c)| s.mass * model.gravity.dot(c))
        .sum::<f64>();
    Ok((kinetic, potential))
}

/// Muscle quantities evaluated at one skeletal state.
#[derive(Debug, Clone, PartialEq)]
pub struct MuscleEval {
    pub lengths: Vec<f64>,
    pub velocities: Vec<f64>,
    /// Muscle-tendon forces, N.
    pub forces: Vec<f64>,
    /// Active fibre force of each muscle (after any fatigue scaling), N.
    pub active_forces: Vec<f64>,
    /// Moment arms, muscles x joints, m.
    pub moment_arms: DMatrix<f64>,
    /// Biological joint torques `R^T F`, N·m.
    pub torques: DVector<f64>,
}

/// Lengths, velocities, forces and torques for activations `a` at `state`.
/// `active_scale` multiplies each muscle's active term (1 when unfatigued).
pub fn evaluate_muscles(
    model: &CompiledModel,
    state: &SkeletonState,
    a: &[f64],
    active_scale: &[f64],
) -> Result<MuscleEval, DynamicsError> {
    let nm = model.n_muscles();
    if a.len() != nm || active_scale.len() != nm {
        return Err(DynamicsError::Size {
            what: "muscle activations",
            expected: nm,
            got: a.len().min(active_scale.len()),
        });
    }
    let kin = muscle_kinematics(model, &state.q, MOMENT_ARM_STEP)?;
    let qd = DVector::from_column_slice(&state.q_dot);
    let velocities: Vec<f64> = (0..nm)
        .map(|m| -kin.moment_arms.row(m).dot(&qd.transpose()))
        .collect();
    let mut forces = Vec::with_capacity(nm);
    let mut active_forces = Vec::with_capacity(nm);
    for (m, muscle) in model.muscles.iter().enumerate() {
        let ms = MuscleState {
            activation: a[m],
            length: kin.lengths[m],
            velocity: velocities[m],
        };
        let (act, pas) = force_components(&ms, &muscle.params, active_scale[m]);
        active_forces.push(act);
        forces.push((act + pas) * muscle.params.pennation.cos());
    }
    let torques = kin.moment_arms.transpose() * DVector::from_column_slice(&forces);
    Ok(MuscleEval {
        lengths: kin.lengths,
        velocities,
        forces,
        active_forces,
        moment_arms: kin.moment_arms,
        torques,
    })
}

/// Everything produced by one integration step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: SkeletonState,
    pub muscles: Vec<MuscleState>,
    /// Muscle evaluation (with updated activations) that drove the step.
    pub eval: MuscleEval,
    pub exo_torque: f64,
}

/// Settings for [`step_with`] beyond the basic inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepConfig<'a> {
    pub exo: Option<&'a ExoActuator>,
    /// Active-force scale per muscle; `None` means all ones.
    pub active_scale: Option<&'a [f64]>,
    pub integrator: Integrator,
}

/// One semi-implicit Euler step with no fatigue.
pub fn step(
    model: &CompiledModel,
    state: &SkeletonState,
    muscles: &[MuscleState],
    u: &[f64],
    exo: Option<&ExoActuator>,
    dt: f64,
) -> Result<StepOutput, DynamicsError> {
    step_with(
        model,
        state,
        muscles,
        u,
        dt,
        StepConfig {
            exo,
            ..Default::default()
        },
    )
}

/// Generalized accelerations with joint damping treated implicitly over `dt`
/// (`dt = 0` gives the plain explicit value).
fn accelerations(
    model: &CompiledModel,
    state: &SkeletonState,
    tau: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>, DynamicsError> {
    let terms = dynamics_terms(model, state)?;
    let qd = DVector::from_column_slice(&state.q_dot);
    let damping = DVector::from_iterator(model.n_joints(), model.joints.iter().map(|j| j.damping));
    let mut lhs = terms.m.clone();
    for j in 0..model.n_joints() {
        lhs[(j, j)] += dt * damping[j];
    }
    let rhs = tau - &terms.c_qdot - &terms.g - damping.component_mul(&qd);
    let chol = lhs.cholesky().ok_or(DynamicsError::SingularInertia)?;
    Ok(chol.solve(&rhs))
}

fn total_torque(eval: &MuscleEval, exo: Option<(&ExoActuator, usize)>) -> (DVector<f64>, f64) {
    let mut tau = eval.torques.clone();
    let mut t_exo = 0.0;
    if let Some((e, j)) = exo {
        t_exo = exo_torque(eval.torques[j], e);
        tau[j] += t_exo;
    }
    (tau, t_exo)
}

/// Advances activations, then the skeleton, by `dt`.
pub fn step_with(
    model: &CompiledModel,
    state: &SkeletonState,
    muscles: &[MuscleState],
    u: &[f64],
    dt: f64,
    cfg: StepConfig,
) -> Result<StepOutput, DynamicsError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    check_state(model, state)?;
    let nm = model.n_muscles();
    if muscles.len() != nm || u.len() != nm {
        return Err(DynamicsError::Size {
            what: "muscle controls",
            expected: nm,
            got: u.len().min(muscles.len()),
        });
    }
    let exo = match cfg.exo {
        Some(e) => {
            let j = model
                .joint_index(&e.joint)
                .ok_or_else(|| DynamicsError::UnknownJoint(e.joint.clone()))?;
            Some((e, j))
        }
        None => None,
    };
    let ones = vec![1.0; nm];
    let scale = cfg.active_scale.unwrap_or(&ones);

    let mut a = Vec::with_capacity(nm);
    for m in 0..nm {
        a.push(activation_step(
            muscles[m].activation,
            u[m],
            dt,
            &model.muscles[m].params,
        )?);
    }

    let eval = evaluate_muscles(model, state, &a, scale)?;
    let (tau, t_exo) = total_torque(&eval, exo);
    let n = model.n_joints();
    let (mut q, mut qd) = match cfg.integrator {
        Integrator::SemiImplicitEuler => {
            let qdd = accelerations(model, state, &tau, dt)?;
            let qd: Vec<f64> = (0..n).map(|j| state.q_dot[j] + dt * qdd[j]).collect();
            let q: Vec<f64> = (0..n).map(|j| state.q[j] + dt * qd[j]).collect();
            (q, qd)
        }
        Integrator::Rk4 => rk4(model, state, &a, scale, exo, dt)?,
    };

    for (j, joint) in model.joints.iter().enumerate() {
        if q[j] < joint.range[0] {
            q[j] = joint.range[0];
            qd[j] = 0.0;
        } else if q[j] > joint.range[1] {
            q[j] = joint.range[1];
            qd[j] = 0.0;
        }
    }
    let t = state.t + dt;
    if q.iter()
        .chain(&qd)
        .chain(&eval.forces)
        .any(|v| !v.is_finite())
    {
        return Err(DynamicsError::NonFiniteState { t });
    }
    let next = SkeletonState { q, q_dot: qd, t };
    let muscle_states = (0..nm)
        .map(|m| MuscleState {
            activation: a[m],
            length: eval.lengths[m],
            velocity: eval.velocities[m],
        })
        .collect();
    Ok(StepOutput {
        state: next,
        muscles: muscle_states,
        eval,
        exo_torque: t_exo,
    })
}

/// Classical RK4 on (q, q_dot) with activations held over the step.
fn rk4(
    model: &CompiledModel,
    state: &SkeletonState,
    a: &[f64],
    scale: &[f64],
    exo: Option<(&ExoActuator, usize)>,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
    let n = model.n_joints();
    let deriv = |q: &[f64], qd: &[f64]| -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
        let s = SkeletonState {
            q: q.to_vec(),
            q_dot: qd.to_vec(),
            t: state.t,
        };
        let tau = if model.n_muscles() > 0 {
            let eval = evaluate_muscles(model, &s, a, scale)?;
            total_torque(&eval, exo).0
        } else {
            DVector::zeros(n)
        };
        let qdd = accelerations(model, &s, &tau, 0.0)?;
        Ok((qd.to_vec(), qdd.iter().copied().collect()))
    };
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(x, k)| x + h * k).collect()
    };
    let (q0, v0) = (&state.q, &state.q_dot);
    let (k1q, k1v) = deriv(q0, v0)?;
    let (k2q, k2v) = deriv(&axpy(q0, &k1q, dt / 2.0), &axpy(v0, &k1v, dt / 2.0))?;
    let (k3q, k3v) = deriv(&axpy(q0, &k2q, dt / 2.0), &axpy(v0, &k2v, dt / 2.0))?;
    let (k4q, k4v) = deriv(&axpy(q0, &k3q, dt), &axpy(v0, &k3v, dt))?;
    let comb = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| x[j] + dt / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * c[j] + d[j]))
            .collect()
    };
    Ok((
        comb(q0, &k1q, &k2q, &k3q, &k4q),
        comb(v0, &k1v, &k2v, &k3v, &k4v),
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{BodySegment, JointSpec, ModelDoc};
    use std::f64::consts::FRAC_PI_2;

    /// Point mass on a massless rod of length `l` hanging along -z.
    pub(crate) fn pendulum(l: f64, damping: f64) -> ModelDoc {
        ModelDoc {
            name: "pendulum".into(),
            gravity: [0.0, 0.0, -9.81],
            segments: vec![
                BodySegment {
                    name: "ground".into(),
                    mass: 0.0,
                    com: [0.0; 3],
                    inertia: [0.0; 3],
                    parent_offset: [0.0; 3],
                },
                BodySegment {
                    name: "bob".into(),
                    mass: 1.0,
                    com: [0.0, 0.0, -l],
                    inertia: [0.0; 3],
                    parent_offset: [0.0; 3],
                },
            ],
            joints: vec![JointSpec {
                name: "swing".into(),
                parent: "ground".into(),
                child: "bob".into(),
                axis: [0.0, -1.0, 0.0],
                range: [-10.0, 10.0],
                damping,
            }],
            muscles: vec![],
            markers: vec![],
            wrap_surfaces: vec![],
        }
    }

    /// Three-link planar-ish chain with skew axes and full inertias.
    pub(crate) fn chain() -> ModelDoc {
        let seg = |name: &str, m: f64, com: [f64; 3], off: [f64; 3]| BodySegment {
            name: name.into(),
            mass: m,
            com,
            inertia: [0.01 * m, 0.02 * m, 0.015 * m],
            parent_offset: off,
        };
        let joint = |name: &str, p: &str, c: &str, axis: [f64; 3]| {
            let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
            JointSpec {
                name: name.into(),
                parent: p.into(),
                child: c.into(),
                axis: [axis[0] / n, axis[1] / n, axis[2] / n],
                range: [-3.0, 3.0],
                damping: 0.0,
            }
        };
        ModelDoc {
            name: "chain".into(),
            gravity: [0.0, 0.0, -9.81],
            segments: vec![
                seg("base", 0.0, [0.0; 3], [0.1, 0.0, 0.0]),
                seg("a", 1.2, [0.02, 0.01, -0.2], [0.0, 0.0, -0.05]),
                seg("b", 0.8, [0.0, -0.03, -0.15], [0.01, 0.0, -0.35]),
                seg("c", 0.3, [0.01, 0.0, -0.05], [0.0, 0.02, -0.3]),
            ],
            joints: vec![
                joint("j1", "base", "a", [0.0, 1.0, 0.0]),
                joint("j2", "a", "b", [0.3, 1.0, 0.1]),
                joint("j3", "b", "c", [1.0, 0.0, 0.2]),
            ],
            muscles: vec![],
            markers: vec![],
            wrap_surfaces: vec![],
        }
    }

    #[test]
    fn pendulum_terms() {
        let m = CompiledModel::new(&pendulum(1.0, 0.0)).unwrap();
        let hanging = dynamics_terms(&m, &SkeletonState::at_rest(vec![0.0])).unwrap();
        assert!((hanging.m[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(hanging.g[0].abs() < 1e-15);
        let level = dynamics_terms(
            &m,
            &SkeletonState {
                q: vec![FRAC_PI_2],
                q_dot: vec![3.0],
                t: 0.0,
            },
        )
        .unwrap();
        assert!((level.g[0] - 9.81).abs() < 1e-12);
        assert_eq!(level.c_qdot[0], 0.0);
    }

    #[test]
    fn mass_matrix_matches_unit_acceleration_inverse_dynamics() {
        let m = CompiledModel::new(&chain()).unwrap();
        let q = [0.3, -0.7, 1.1];
        let f = frames(&m, &q);
        let mm = mass_matrix(&m, &f);
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            let col = rnea(&m, &f, &[0.0; 3], &e, &Vec3::zeros());
            for i in 0..3 {
                assert!((mm[(i, j)] - col[i]).abs() < 1e-12, "M[{i},{j}]");
            }
        }
        assert!(mm.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn gravity_is_potential_gradient() {
        let m = CompiledModel::new(&chain()).unwrap();
        let q = vec![0.4, 0.2, -0.9];
        let g = dynamics_terms(&m, &SkeletonState::at_rest(q.clone()))
            .unwrap()
            .g;
        let h = 1e-6;
        for j in 0..3 {
            let mut qp = q.clone();
            qp[j] += h;
            let up = energy(&m, &SkeletonState::at_rest(qp.clone())).unwrap().1;
            qp[j] -= 2.0 * h;
            let down = energy(&m, &SkeletonState::at_rest(qp)).unwrap().1;
            assert!((g[j] - (up - down) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn coriolis_matches_christoffel_symbols() {
        // C(q, qd) qd = dM/dt qd - 1/2 d(qd' M qd)/dq, by finite differences.
        let m = CompiledModel::new(&chain()).unwrap();
        let q = vec![0.4, 0.2, -0.9];
        let qd = DVector::from_vec(vec![1.5, -2.0, 0.7]);
        let c = dynamics_terms(
            &m,
            &SkeletonState {
                q: q.clone(),
                q_dot: qd.iter().copied().collect(),
                t: 0.0,
            },
        )
        .unwrap()
        .c_qdot;
        let mass = |q: &[f64]| mass_matrix(&m, &frames(&m, q));
        let h = 1e-6;
        let mut mdot = DMatrix::zeros(3, 3);
        let mut grad = DVector::zeros(3);
        for k in 0..3 {
            let mut qp = q.clone();
            qp[k] += h;
            let mp = mass(&qp);
            qp[k] -= 2.0 * h;
            let mm = mass(&qp);
            let dm = (mp - mm) / (2.0 * h);
            mdot += &dm * qd[k];
            grad[k] = 0.5 * qd.dot(&(&dm * &qd));
        }
        let expected = mdot * &qd - grad;
        assert!((c - expected).norm() < 1e-6);
    }

    #[test]
    fn equilibrium_without_gravity() {
        let mut doc = chain();
        doc.gravity = [0.0; 3];
        let m = CompiledModel::new(&doc).unwrap();
        let s = SkeletonState::at_rest(vec![0.1, 0.2, 0.3]);
        let out = step(&m, &s, &[], &[], None, 1e-3).unwrap();
        assert_eq!(out.state.q, s.q);
        assert_eq!(out.state.q_dot, s.q_dot);
    }

    #[test]
    fn rejects_bad_step_and_sizes() {
        let m = CompiledModel::new(&pendulum(1.0, 0.0)).unwrap();
        let s = SkeletonState::at_rest(vec![0.0]);
        assert!(matches!(
            step(&m, &s, &[], &[], None, 0.0),
            Err(DynamicsError::InvalidStep(_))
        ));
        assert!(matches!(
            step(&m, &s, &[], &[], None, 0.02),
            Err(DynamicsError::InvalidStep(_))
        ));
        let bad = SkeletonState::at_rest(vec![0.0, 1.0]);
        assert!(matches!(
            step(&m, &bad, &[], &[], None, 1e-3),
            Err(DynamicsError::Size { .. })
        ));
    }

    #[test]
    fn zero_mass_chain_is_singular() {
        let mut doc = pendulum(1.0, 0.0);
        doc.segments[1].mass = 0.0;
        let m = CompiledModel::new(&doc).unwrap();
        assert!(matches!(
            dynamics_terms(&m, &SkeletonState::at_rest(vec![0.0])),
            Err(DynamicsError::SingularInertia)
        ));
    }

    #[test]
    fn joint_limit_clamps_and_stops() {
        let mut doc = pendulum(1.0, 0.0);
        doc.joints[0].range = [-0.1, 0.1];
        let m = CompiledModel::new(&doc).unwrap();
        let mut s = SkeletonState {
            q: vec![0.09],
            q_dot: vec![5.0],
            t: 0.0,
        };
        for _ in 0..10 {
            s = step(&m, &s, &[], &[], None, 1e-3).unwrap().state;
            assert!(s.q[0] <= 0.1);
        }
    }

    #[test]
    fn exo_torque_definition() {
        let exo = ExoActuator {
            joint: "elbow".into(),
            assist_fraction: 0.5,
            added_masses: vec![],
        };
        assert_eq!(exo_torque(10.0, &exo), 5.0);
        let none = ExoActuator {
            assist_fraction: 0.0,
            ..exo
        };
        assert_eq!(exo_torque(10.0, &none), 0.0);
    }
}
