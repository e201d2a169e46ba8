//! Simulation runs and trajectory records.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    evaluate_muscles, step_with, ControlContext, ControlPolicy, DynamicsError, ExoActuator,
    Integrator, SkeletonState, StepConfig,
};
use crate::model::{CompiledModel, ModelDoc, ModelError};
use crate::perturb::{
    apply_perturbation, FatigueState, PerturbError, Perturbation, PerturbationSchedule,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("at t={t} s: {source}")]
    Step {
        t: f64,
        #[source]
        source: DynamicsError,
    },
    #[error("at t={t} s: controller returned {got} excitations for {expected} muscles")]
    ControlSize { t: f64, expected: usize, got: usize },
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationOptions {
    /// s
    pub duration: f64,
    /// s
    pub dt: f64,
    /// Defaults to mid-range for every joint.
    #[serde(default)]
    pub initial_q: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_activation: f64,
    #[serde(default)]
    pub exo: Option<ExoActuator>,
    #[serde(default)]
    pub perturbations: PerturbationSchedule,
    #[serde(default)]
    pub integrator: Integrator,
}

impl SimulationOptions {
    pub fn new(duration: f64, dt: f64) -> Self {
        SimulationOptions {
            duration,
            dt,
            initial_q: None,
            initial_activation: 0.0,
            exo: None,
            perturbations: PerturbationSchedule::default(),
            integrator: Integrator::default(),
        }
    }
}

/// Per-step record of a run. Muscle columns follow the muscles of the model
/// at the start; a muscle removed mid-run records zero from then on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub joints: Vec<String>,
    pub muscles: Vec<String>,
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub q_dot: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
    /// N
    pub forces: Vec<Vec<f64>>,
    /// N·m
    pub exo_torque: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        h.extend(self.joints.iter().map(|j| format!("q_{j}")));
        h.extend(self.joints.iter().map(|j| format!("qd_{j}")));
        h.extend(self.muscles.iter().map(|m| format!("act_{m}")));
        h.extend(self.muscles.iter().map(|m| format!("F_{m}")));
        h.push("tau_exo".into());
        h
    }

    /// CSV with 9 significant digits per value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k]];
            row.extend(&self.q[k]);
            row.extend(&self.q_dot[k]);
            row.extend(&self.activations[k]);
            row.extend(&self.forces[k]);
            row.push(self.exo_torque[k]);
            out.write_record(row.iter().map(|v| format!("{v:.8e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), SimError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a file written by [`Trajectory::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self, SimError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let bad = |msg: &str| SimError::Config(format!("trajectory csv: {msg}"));
        if header.first().map(String::as_str) != Some("time")
            || header.last().map(String::as_str) != Some("tau_exo")
        {
            return Err(bad("header must start with time and end with tau_exo"));
        }
        let strip = |p: &str| -> Vec<String> {
            header
                .iter()
                .filter_map(|h| h.strip_prefix(p))
                .map(str::to_string)
                .collect()
        };
        let joints = strip("q_");
        let muscles = strip("act_");
        let (nj, nm) = (joints.len(), muscles.len());
        if header.len() != 2 + 2 * nj + 2 * nm
            || strip("qd_").len() != nj
            || strip("F_").len() != nm
        {
            return Err(bad("inconsistent column groups"));
        }
        let mut t = Trajectory {
            joints,
            muscles,
            ..Default::default()
        };
        for rec in rdr.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(&format!("'{s}' is not a number")))
                })
                .collect::<Result<_, _>>()?;
            if v.len() != header.len() {
                return Err(bad("ragged row"));
            }
            t.times.push(v[0]);
            t.q.push(v[1..1 + nj].to_vec());
            t.q_dot.push(v[1 + nj..1 + 2 * nj].to_vec());
            t.activations.push(v[1 + 2 * nj..1 + 2 * nj + nm].to_vec());
            t.forces
                .push(v[1 + 2 * nj + nm..1 + 2 * nj + 2 * nm].to_vec());
            t.exo_torque.push(v[v.len() - 1]);
        }
        Ok(t)
    }
}

struct Runtime {
    doc: ModelDoc,
    model: CompiledModel,
    fatigue: Option<FatigueState>,
}

impl Runtime {
    fn build(doc: ModelDoc, exo: Option<&ExoActuator>) -> Result<CompiledModel, SimError> {
        let mut model = CompiledModel::new(&doc)?;
        if let Some(e) = exo {
            e.apply_masses(&mut model)?;
        }
        Ok(model)
    }
}

/// Runs `policy` on `model` for `opts.duration`. Rows are recorded at every
/// step time including 0 and the end, each with the forces produced by the
/// recorded state and activations.
pub fn simulate(
    model: &ModelDoc,
    policy: &mut dyn ControlPolicy,
    opts: &SimulationOptions,
) -> Result<Trajectory, SimError> {
    if !(opts.duration > 0.0 && opts.duration.is_finite()) {
        return Err(SimError::Config(format!(
            "duration must be > 0, got {}",
            opts.duration
        )));
    }
    if !(opts.dt > 0.0 && opts.dt <= 0.01) {
        return Err(SimError::Config(format!(
            "dt must be in (0, 0.01], got {}",
            opts.dt
        )));
    }
    if !(0.0..=1.0).contains(&opts.initial_activation) {
        return Err(SimError::Config(
            "initial activation must be in [0, 1]".into(),
        ));
    }
    opts.perturbations.check()?;
    let exo = opts.exo.as_ref();
    if let Some(e) = exo {
        if !(e.assist_fraction >= 0.0) {
            return Err(SimError::Config(format!(
                "assist fraction must be >= 0, got {}",
                e.assist_fraction
            )));
        }
    }

    let mut rt = Runtime {
        doc: model.clone(),
        model: Runtime::build(model.clone(), exo)?,
        fatigue: None,
    };
    if let Some(e) = exo {
        if rt.model.joint_index(&e.joint).is_none() {
            return Err(SimError::Config(format!(
                "unknown exoskeleton joint '{}'",
                e.joint
            )));
        }
    }
    let q0 = opts
        .initial_q
        .clone()
        .unwrap_or_else(|| model.mid_range_posture());
    if q0.len() != rt.model.n_joints() {
        return Err(SimError::Config(format!(
            "initial_q has {} entries for {} joints",
            q0.len(),
            rt.model.n_joints()
        )));
    }

    let mut traj = Trajectory {
        joints: rt.model.joints.iter().map(|j| j.name.clone()).collect(),
        muscles: rt.model.muscles.iter().map(|m| m.name.clone()).collect(),
        ..Default::default()
    };
    let exo_joint = exo.and_then(|e| rt.model.joint_index(&e.joint));
    let mut state = SkeletonState::at_rest(q0);
    let mut act = vec![opts.initial_activation; rt.model.n_muscles()];
    let mut pending = opts.perturbations.0.iter().peekable();
    let n_steps = ((opts.duration / opts.dt).round() as usize).max(1);

    for k in 0..=n_steps {
        let t = k as f64 * opts.dt;
        state.t = t;
        while let Some(p) = pending.next_if(|p| p.onset <= t + 1e-12) {
            let old_names: Vec<String> = rt.model.muscles.iter().map(|m| m.name.clone()).collect();
            rt.doc = apply_perturbation(&rt.doc, &p.perturbation)?;
            rt.model = Runtime::build(rt.doc.clone(), exo)?;
            act = rt
                .model
                .muscles
                .iter()
                .map(|m| {
                    old_names
                        .iter()
                        .position(|n| *n == m.name)
                        .map(|i| act[i])
                        .unwrap_or(0.0)
                })
                .collect();
            rt.fatigue = match (&p.perturbation, &rt.fatigue) {
                (Perturbation::Fatigue { k }, _) => Some(FatigueState::new(&rt.doc, *k)?),
                (_, Some(f)) => Some(f.remap(&rt.doc)),
                (_, None) => None,
            };
            log::info!("t={t}: applied {:?}", p.perturbation);
        }

        let scales = rt
            .fatigue
            .as_ref()
            .map(FatigueState::scales)
            .unwrap_or_else(|| vec![1.0; rt.model.n_muscles()]);
        let eval = evaluate_muscles(&rt.model, &state, &act, &scales)
            .map_err(|source| SimError::Step { t, source })?;

        let mut act_row = vec![0.0; traj.muscles.len()];
        let mut force_row = vec![0.0; traj.muscles.len()];
        for (m, muscle) in rt.model.muscles.iter().enumerate() {
            if let Some(col) = traj.muscles.iter().position(|n| *n == muscle.name) {
                act_row[col] = act[m];
                force_row[col] = eval.forces[m];
            }
        }
        traj.times.push(t);
        traj.q.push(state.q.clone());
        traj.q_dot.push(state.q_dot.clone());
        traj.activations.push(act_row);
        traj.forces.push(force_row);
        traj.exo_torque.push(match (exo, exo_joint) {
            (Some(e), Some(j)) => super::exo_torque(eval.torques[j], e),
            _ => 0.0,
        });
        if k == n_steps {
            break;
        }

        let ctx = ControlContext {
            model: &rt.model,
            state: &state,
            dt: opts.dt,
            moment_arms: &eval.moment_arms,
        };
        let u = policy.controls(&ctx);
        if u.len() != rt.model.n_muscles() {
            return Err(SimError::ControlSize {
                t,
                expected: rt.model.n_muscles(),
                got: u.len(),
            });
        }
        let muscles: Vec<_> = (0..u.len())
            .map(|m| crate::muscle::MuscleState {
                activation: act[m],
                length: eval.lengths[m],
                velocity: eval.velocities[m],
            })
            .collect();
        let cfg = StepConfig {
            exo,
            active_scale: Some(&scales),
            integrator: opts.integrator,
        };
        let out = step_with(&rt.model, &state, &muscles, &u, opts.dt, cfg)
            .map_err(|source| SimError::Step { t, source })?;
        if let Some(f) = &rt.fatigue {
            rt.fatigue = Some(crate::perturb::fatigue_update(
                f,
                &out.eval.active_forces,
                opts.dt,
            ));
        }
        act = out.muscles.iter().map(|m| m.activation).collect();
        state = out.state;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tests::pendulum;
    use crate::dynamics::{energy, Controller};
    use crate::model::tests::tiny_model;
    use std::collections::BTreeMap;

    fn zero() -> impl FnMut(&ControlContext) -> Vec<f64> {
        |ctx: &ControlContext| vec![0.0; ctx.model.n_muscles()]
    }

    /// Times of upward zero crossings of q, linearly interpolated.
    fn crossings(t: &Trajectory) -> Vec<f64> {
        (1..t.len())
            .filter(|&k| t.q[k - 1][0] < 0.0 && t.q[k][0] >= 0.0)
            .map(|k| {
                let (a, b) = (t.q[k - 1][0], t.q[k][0]);
                t.times[k - 1] + (t.times[k] - t.times[k - 1]) * (-a) / (b - a)
            })
            .collect()
    }

    #[test]
    fn pendulum_small_angle_period() {
        let doc = pendulum(1.0, 0.0);
        let mut opts = SimulationOptions::new(23.0, 1e-3);
        opts.initial_q = Some(vec![0.05]);
        let traj = simulate(&doc, &mut zero(), &opts).unwrap();
        let c = crossings(&traj);
        assert!(c.len() >= 11);
        let period = (c[10] - c[0]) / 10.0;
        let analytic = 2.0 * std::f64::consts::PI * (1.0f64 / 9.81).sqrt();
        assert!(
            (period / analytic - 1.0).abs() < 0.005,
            "{period} vs {analytic}"
        );
    }

    #[test]
    fn semi_implicit_energy_has_no_drift() {
        let doc = pendulum(1.0, 0.0);
        let model = CompiledModel::new(&doc).unwrap();
        let mut opts = SimulationOptions::new(20.0, 1e-3);
        opts.initial_q = Some(vec![0.5]);
        let traj = simulate(&doc, &mut zero(), &opts).unwrap();
        let e: Vec<f64> = (0..traj.len())
            .map(|k| {
                let s = SkeletonState {
                    q: traj.q[k].clone(),
                    q_dot: traj.q_dot[k].clone(),
                    t: 0.0,
                };
                let (ke, pe) = energy(&model, &s).unwrap();
                ke + pe
            })
            .collect();
        // Compare cycle-averaged energy at the start and end of the run.
        let window = 2010;
        let head: f64 = e[..window].iter().sum::<f64>() / window as f64;
        let tail: f64 = e[e.len() - window..].iter().sum::<f64>() / window as f64;
        // Oscillation energy above the hanging rest state.
        let scale = e[0] + 9.81;
        let drift_per_s = (tail - head).abs() / scale / 18.0;
        assert!(drift_per_s < 1e-3, "{drift_per_s}");
    }

    #[test]
    fn damped_motion_loses_kinetic_energy() {
        let doc = pendulum(1.0, 0.5);
        let mut state = SkeletonState {
            q: vec![0.0],
            q_dot: vec![0.0],
            t: 0.0,
        };
        let mut doc0 = doc.clone();
        doc0.gravity = [0.0; 3];
        let m0 = CompiledModel::new(&doc0).unwrap();
        state.q_dot[0] = 2.0;
        let mut last = f64::INFINITY;
        for _ in 0..2000 {
            state = crate::dynamics::step(&m0, &state, &[], &[], None, 1e-3)
                .unwrap()
                .state;
            let ke = energy(&m0, &state).unwrap().0;
            assert!(ke <= last);
            last = ke;
        }
    }

    #[test]
    fn zero_controller_without_gravity_is_constant() {
        let mut doc = tiny_model();
        doc.gravity = [0.0; 3];
        let traj = simulate(&doc, &mut zero(), &SimulationOptions::new(0.2, 1e-3)).unwrap();
        assert_eq!(traj.len(), 201);
        assert!(traj.q.iter().all(|q| *q == traj.q[0]));
        assert!(traj.forces.iter().all(|f| f[0] == 0.0));
    }

    #[test]
    fn deterministic_and_csv_round_trip() {
        let doc = tiny_model();
        let ctl = Controller::Constant {
            u: BTreeMap::from([("flexor".to_string(), 0.4)]),
        };
        let opts = SimulationOptions::new(0.1, 1e-3);
        let a = simulate(&doc, &mut *ctl.policy(), &opts).unwrap();
        let b = simulate(&doc, &mut *ctl.policy(), &opts).unwrap();
        assert_eq!(a, b);
        let text = a.to_csv_string();
        assert_eq!(text, b.to_csv_string());
        assert!(text.starts_with("time,q_hinge,qd_hinge,act_flexor,F_flexor,tau_exo\n"));
        let back = Trajectory::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.to_csv_string(), text);
        let empty = Trajectory {
            joints: vec!["j".into()],
            ..Default::default()
        };
        assert_eq!(empty.to_csv_string(), "time,q_j,qd_j,tau_exo\n");
    }

    #[test]
    fn mid_run_tear_zeroes_column() {
        let doc = tiny_model();
        let mut two = doc.clone();
        let mut second = doc.muscles[0].clone();
        second.name = "flexor2".into();
        two.muscles.push(second);
        let ctl = Controller::Constant {
            u: BTreeMap::from([("flexor".to_string(), 1.0), ("flexor2".to_string(), 1.0)]),
        };
        let mut opts = SimulationOptions::new(0.05, 1e-3);
        opts.perturbations = serde_json::from_str(
            r#"[{"onset": 0.02, "perturbation": {"kind": "tear", "muscle": "flexor2"}}]"#,
        )
        .unwrap();
        let traj = simulate(&two, &mut *ctl.policy(), &opts).unwrap();
        let k = traj.times.iter().position(|t| *t >= 0.02 - 1e-12).unwrap();
        assert!(traj.forces[k - 1][1] > 0.0);
        assert!(traj.forces[k..].iter().all(|f| f[1] == 0.0));
    }

    #[test]
    fn bad_options_rejected() {
        let doc = tiny_model();
        assert!(simulate(&doc, &mut zero(), &SimulationOptions::new(0.0, 1e-3)).is_err());
        assert!(simulate(&doc, &mut zero(), &SimulationOptions::new(1.0, 0.5)).is_err());
        let mut wrong = |_: &ControlContext| vec![0.0, 0.0];
        assert!(matches!(
            simulate(&doc, &mut wrong, &SimulationOptions::new(0.01, 1e-3)),
            Err(SimError::ControlSize { .. })
        ));
    }
}
