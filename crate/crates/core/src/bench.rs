//! Step-time scaling with muscle count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{step, DynamicsError, SkeletonState};
use crate::model::{CompiledModel, ModelDoc, ModelError};
use crate::muscle::MuscleState;

/// Largest path-point displacement given to duplicated muscles, m.
pub const DUPLICATE_JITTER: f64 = 1e-4;
/// Minimum timed steps per muscle count.
pub const MIN_STEPS: usize = 1000;

const BENCH_DT: f64 = 1e-3;
const REPEATS: usize = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl MachineInfo {
    pub fn current() -> Self {
        MachineInfo {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub muscle_counts: Vec<usize>,
    /// Median over repeats of the mean wall-clock time per step, ns.
    pub ns_per_step: Vec<f64>,
    pub steps: usize,
    pub machine: MachineInfo,
}

/// `model` with every muscle present `k` times. Copies after the first are
/// renamed `<name>#<copy>` and have their path points displaced by up to
/// [`DUPLICATE_JITTER`] per coordinate.
pub fn duplicate_muscles(model: &ModelDoc, k: usize, seed: u64) -> ModelDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = model.clone();
    for copy in 1..k {
        for m in &model.muscles {
            let mut dup = m.clone();
            dup.name = format!("{}#{copy}", m.name);
            for p in &mut dup.path {
                for c in &mut p.local {
                    *c += rng.random_range(-DUPLICATE_JITTER..=DUPLICATE_JITTER);
                }
            }
            out.muscles.push(dup);
        }
    }
    out
}

fn time_steps(model: &CompiledModel, steps: usize) -> Result<f64, BenchError> {
    let nm = model.n_muscles();
    let u = vec![0.3; nm];
    let q0 = model.doc().mid_range_posture();
    let muscles0 = vec![
        MuscleState {
            activation: 0.0,
            length: 0.0,
            velocity: 0.0
        };
        nm
    ];
    let run = |n: usize| -> Result<f64, BenchError> {
        let mut state = SkeletonState::at_rest(q0.clone());
        let mut muscles = muscles0.clone();
        let start = Instant::now();
        for _ in 0..n {
            let out = step(model, &state, &muscles, &u, None, BENCH_DT)?;
            state = out.state;
            muscles = out.muscles;
        }
        Ok(start.elapsed().as_nanos() as f64 / n as f64)
    };
    run((steps / 10).max(10))?;
    let mut means = (0..REPEATS)
        .map(|_| run(steps))
        .collect::<Result<Vec<_>, _>>()?;
    means.sort_by(f64::total_cmp);
    Ok(means[REPEATS / 2])
}

/// Times [`step`] for the base model with its muscles duplicated by each
/// multiplier. Model construction and a warmup run are not timed.
pub fn bench_scaling(
    base: &ModelDoc,
    multipliers: &[usize],
    steps: usize,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    if multipliers.is_empty() || multipliers.contains(&0) {
        return Err(BenchError::Config("multipliers must be >= 1".into()));
    }
    if multipliers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Config(
            "multipliers must be strictly increasing".into(),
        ));
    }
    if steps < MIN_STEPS {
        return Err(BenchError::Config(format!(
            "steps must be >= {MIN_STEPS}, got {steps}"
        )));
    }
    let mut counts = Vec::new();
    let mut times = Vec::new();
    for &k in multipliers {
        let compiled = CompiledModel::new(&duplicate_muscles(base, k, seed))?;
        counts.push(compiled.n_muscles());
        times.push(time_steps(&compiled, steps)?);
    }
    Ok(BenchReport {
        muscle_counts: counts,
        ns_per_step: times,
        steps,
        machine: MachineInfo::current(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_model;

    #[test]
    fn duplicates_are_jittered_and_renamed() {
        let m = tiny_model();
        let d = duplicate_muscles(&m, 3, 7);
        assert_eq!(d.muscles.len(), 3);
        assert_eq!(d.muscles[0], m.muscles[0]);
        assert_eq!(d.muscles[2].name, "flexor#2");
        for (a, b) in d.muscles[1].path.iter().zip(&m.muscles[0].path) {
            for k in 0..3 {
                let off = (a.local[k] - b.local[k]).abs();
                assert!(off <= DUPLICATE_JITTER + 1e-18);
            }
        }
        assert_ne!(d.muscles[1].path, m.muscles[0].path);
        assert_eq!(duplicate_muscles(&m, 3, 7), d);
    }

    #[test]
    fn single_row_report() {
        let r = bench_scaling(&tiny_model(), &[1], MIN_STEPS, 1).unwrap();
        assert_eq!(r.muscle_counts, vec![1]);
        assert_eq!(r.ns_per_step.len(), 1);
        assert!(r.ns_per_step[0] > 0.0);
    }

    #[test]
    fn bad_arguments() {
        assert!(bench_scaling(&tiny_model(), &[], MIN_STEPS, 1).is_err());
        assert!(bench_scaling(&tiny_model(), &[2, 1], MIN_STEPS, 1).is_err());
        assert!(bench_scaling(&tiny_model(), &[0], MIN_STEPS, 1).is_err());
        assert!(bench_scaling(&tiny_model(), &[1], 10, 1).is_err());
    }
}
