//! Declarative muscle controllers.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SkeletonState;
use crate::model::CompiledModel;

/// What a controller sees each step.
pub struct ControlContext<'a> {
    pub model: &'a CompiledModel,
    pub state: &'a SkeletonState,
    pub dt: f64,
    /// Moment arms at `state`, muscles x joints.
    pub moment_arms: &'a DMatrix<f64>,
}

/// A feedback or open-loop control law returning one excitation per muscle
/// of the current model, each in `[0, 1]`.
pub trait ControlPolicy {
    fn controls(&mut self, ctx: &ControlContext) -> Vec<f64>;
}

impl<F: FnMut(&ControlContext) -> Vec<f64>> ControlPolicy for F {
    fn controls(&mut self, ctx: &ControlContext) -> Vec<f64> {
        self(ctx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    /// Time from which this row applies, s.
    pub t: f64,
    pub u: BTreeMap<String, f64>,
}

/// Muscles are addressed by name; muscles not mentioned (or removed by a
/// perturbation) get zero excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Controller {
    Constant {
        u: BTreeMap<String, f64>,
    },
    /// Zero-order hold over rows sorted by time.
    Table {
        rows: Vec<TableRow>,
    },
    /// PID on joint angles. Each joint's command is shared among the muscles
    /// whose moment arm has the command's sign, in proportion to the arm.
    Proportional {
        target: BTreeMap<String, f64>,
        kp: f64,
        #[serde(default)]
        ki: f64,
        #[serde(default)]
        kd: f64,
    },
}

impl Controller {
    /// Checks excitation values and table ordering.
    pub fn check(&self) -> Result<(), String> {
        let in_range = |u: &BTreeMap<String, f64>| -> Result<(), String> {
            for (name, v) in u {
                if !(0.0..=1.0).contains(v) {
                    return Err(format!("excitation for '{name}' is {v}, outside [0, 1]"));
                }
            }
            Ok(())
        };
        match self {
            Controller::Constant { u } => in_range(u),
            Controller::Table { rows } => {
                for (i, w) in rows.windows(2).enumerate() {
                    if !(w[0].t < w[1].t) {
                        return Err(format!(
                            "table row {} is not later than the previous row",
                            i + 1
                        ));
                    }
                }
                rows.iter().try_for_each(|r| in_range(&r.u))
            }
            Controller::Proportional { kp, ki, kd, .. } => {
                if [kp, ki, kd].iter().any(|g| !(g.is_finite() && **g >= 0.0)) {
                    return Err("controller gains must be finite and >= 0".into());
                }
                Ok(())
            }
        }
    }

    pub fn policy(&self) -> Box<dyn ControlPolicy + Send> {
        match self.clone() {
            Controller::Constant { u } => {
                Box::new(move |ctx: &ControlContext| by_name(ctx.model, &u))
            }
            Controller::Table { rows } => Box::new(move |ctx: &ControlContext| {
                let t = ctx.state.t;
                // A tiny tolerance so a row starting exactly at a step time is
                // not missed by accumulated rounding in t.
                match rows.iter().rev().find(|r| r.t <= t + 1e-9) {
                    Some(r) => by_name(ctx.model, &r.u),
                    None => vec![0.0; ctx.model.n_muscles()],
                }
            }),
            Controller::Proportional { target, kp, ki, kd } => Box::new(Pid {
                target,
                kp,
                ki,
                kd,
                integral: BTreeMap::new(),
            }),
        }
    }
}

fn by_name(model: &CompiledModel, u: &BTreeMap<String, f64>) -> Vec<f64> {
    model
        .muscles
        .iter()
        .map(|m| u.get(&m.name).copied().unwrap_or(0.0))
        .collect()
}

struct Pid {
    target: BTreeMap<String, f64>,
    kp: f64,
    ki: f64,
    kd: f64,
    integral: BTreeMap<String, f64>,
}

impl ControlPolicy for Pid {
    fn controls(&mut self, ctx: &ControlContext) -> Vec<f64> {
        let nm = ctx.model.n_muscles();
        let mut u = vec![0.0; nm];
        for (name, q_star) in &self.target {
            let Some(j) = ctx.model.joint_index(name) else {
                continue;
            };
            let err = q_star - ctx.state.q[j];
            let i = self.integral.entry(name.clone()).or_insert(0.0);
            *i += err * ctx.dt;
            // Keep the integral contribution within one full excitation.
            if self.ki > 0.0 {
                *i = i.clamp(-1.0 / self.ki, 1.0 / self.ki);
            }
            let cmd = self.kp * err + self.ki * *i - self.kd * ctx.state.q_dot[j];
            let col = ctx.moment_arms.column(j);
            let r_max = col.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
            if r_max == 0.0 {
                continue;
            }
            for m in 0..nm {
                u[m] += (cmd * col[m] / r_max).max(0.0);
            }
        }
        u.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let c: Controller =
            serde_json::from_str(r#"{"type": "constant", "u": {"a": 0.5}}"#).unwrap();
        assert!(c.check().is_ok());
        let t: Controller = serde_json::from_str(
            r#"{"type": "table", "rows": [{"t": 0.0, "u": {"a": 1.0}}, {"t": 0.5, "u": {"b": 1.0}}]}"#,
        )
        .unwrap();
        assert!(t.check().is_ok());
        let p: Controller = serde_json::from_str(
            r#"{"type": "proportional", "target": {"elbow": 1.57}, "kp": 2.0}"#,
        )
        .unwrap();
        assert!(p.check().is_ok());
        let bad: Controller =
            serde_json::from_str(r#"{"type": "constant", "u": {"a": 1.5}}"#).unwrap();
        assert!(bad.check().is_err());
        let unordered: Controller = serde_json::from_str(
            r#"{"type": "table", "rows": [{"t": 1.0, "u": {}}, {"t": 0.5, "u": {}}]}"#,
        )
        .unwrap();
        assert!(unordered.check().is_err());
    }
}
