//! Bounded derivative-free optimizers: simulated annealing and
//! DE/rand/1/bin differential evolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FitConfig, FitError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaParams {
    /// Starting temperature; `None` picks one so that about 80% of early
    /// uphill moves are accepted.
    #[serde(default)]
    pub initial_temperature: Option<f64>,
    /// Geometric cooling factor applied after each batch.
    #[serde(default = "default_cooling")]
    pub cooling: f64,
    /// Proposal standard deviation as a fraction of each bound width.
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    /// Proposals per batch per decision variable.
    #[serde(default = "default_batch_per_dim")]
    pub batch_per_dim: usize,
}

fn default_cooling() -> f64 {
    0.95
}
fn default_step_scale() -> f64 {
    0.1
}
fn default_batch_per_dim() -> usize {
    10
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            initial_temperature: None,
            cooling: default_cooling(),
            step_scale: default_step_scale(),
            batch_per_dim: default_batch_per_dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeParams {
    /// Defaults to `10 * dims` clamped to [20, 60].
    #[serde(default)]
    pub population: Option<usize>,
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default = "default_cr")]
    pub cr: f64,
}

fn default_f() -> f64 {
    0.7
}
fn default_cr() -> f64 {
    0.9
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams {
            population: None,
            f: default_f(),
            cr: default_cr(),
        }
    }
}

impl DeParams {
    pub fn population_for(&self, dims: usize) -> usize {
        self.population.unwrap_or_else(|| (10 * dims).clamp(20, 60))
    }
}

impl FitConfig {
    fn check(&self) -> Result<(), FitError> {
        if self.bounds.is_empty() {
            return Err(FitError::Config("no decision variables".into()));
        }
        if self.budget == 0 {
            return Err(FitError::Config("budget must be > 0".into()));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] <= b[1]) {
                return Err(FitError::Config(format!(
                    "bounds for variable {i} are not ordered: {b:?}"
                )));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != self.bounds.len() {
                return Err(FitError::Config(format!(
                    "x0 has {} entries for {} variables",
                    x0.len(),
                    self.bounds.len()
                )));
            }
        }
        Ok(())
    }

    fn start(&self) -> Vec<f64> {
        match &self.x0 {
            Some(x) => x
                .iter()
                .zip(&self.bounds)
                .map(|(v, b)| v.clamp(b[0], b[1]))
                .collect(),
            None => self.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evaluations: usize,
    /// Best-so-far objective after the start point and after each batch
    /// (annealing) or generation (evolution).
    pub history: Vec<f64>,
}

/// Reflects `v` back into `[lo, hi]` once, then clamps.
fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let r = if v < lo {
        2.0 * lo - v
    } else if v > hi {
        2.0 * hi - v
    } else {
        v
    };
    r.clamp(lo, hi)
}

fn checked<F: Fn(&[f64]) -> f64>(objective: &F, x: &[f64]) -> Result<f64, FitError> {
    let f = objective(x);
    if f.is_finite() {
        Ok(f)
    } else {
        Err(FitError::NonFiniteObjective { point: x.to_vec() })
    }
}

struct Best {
    x: Vec<f64>,
    f: f64,
}

impl Best {
    fn offer(&mut self, x: &[f64], f: f64) {
        if f < self.f {
            self.f = f;
            self.x = x.to_vec();
        }
    }
}

/// Simulated annealing with Gaussian proposals whose width shrinks as
/// `sqrt(T / T0)`, geometric cooling per batch and reflecting bounds.
pub fn simulated_annealing<F: Fn(&[f64]) -> f64>(
    objective: F,
    cfg: &FitConfig,
) -> Result<OptimResult, FitError> {
    cfg.check()?;
    let sa = &cfg.sa;
    if !(sa.cooling > 0.0 && sa.cooling < 1.0) || !(sa.step_scale > 0.0) || sa.batch_per_dim == 0 {
        return Err(FitError::Config(
            "annealing needs 0 < cooling < 1, step_scale > 0, batch_per_dim > 0".into(),
        ));
    }
    let dims = cfg.bounds.len();
    let width: Vec<f64> = cfg.bounds.iter().map(|b| b[1] - b[0]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut x = cfg.start();
    let mut fx = checked(&objective, &x)?;
    let mut evals = 1;
    let mut best = Best {
        x: x.clone(),
        f: fx,
    };
    let mut history = vec![fx];

    let propose = |x: &[f64], scale: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dims)
            .map(|i| {
                let z: f64 = rng.sample(StandardNormal);
                reflect(
                    x[i] + z * sa.step_scale * width[i] * scale,
                    cfg.bounds[i][0],
                    cfg.bounds[i][1],
                )
            })
            .collect()
    };

    let t0 = match sa.initial_temperature {
        Some(t) if t > 0.0 => t,
        Some(t) => {
            return Err(FitError::Config(format!(
                "initial temperature must be > 0, got {t}"
            )))
        }
        None => {
            // Probe the neighbourhood of the start point.
            let probes = (sa.batch_per_dim * dims).min(cfg.budget.saturating_sub(evals) / 10);
            let mut uphill = Vec::new();
            for _ in 0..probes {
                let y = propose(&x, 1.0, &mut rng);
                let fy = checked(&objective, &y)?;
                evals += 1;
                best.offer(&y, fy);
                if fy > fx {
                    uphill.push(fy - fx);
                }
            }
            if uphill.is_empty() {
                1e-3 * fx.abs().max(1e-12)
            } else {
                -(uphill.iter().sum::<f64>() / uphill.len() as f64) / 0.8f64.ln()
            }
        }
    };

    let batch = sa.batch_per_dim * dims;
    let mut t = t0;
    while evals < cfg.budget {
        let scale = (t / t0).sqrt();
        for _ in 0..batch {
            if evals >= cfg.budget {
                break;
            }
            let y = propose(&x, scale, &mut rng);
            let fy = checked(&objective, &y)?;
            evals += 1;
            best.offer(&y, fy);
            let delta = fy - fx;
            let u: f64 = rng.random();
            if delta <= 0.0 || u < (-delta / t).exp() {
                x = y;
                fx = fy;
            }
        }
        t *= sa.cooling;
        history.push(best.f);
    }
    Ok(OptimResult {
        x_best: best.x,
        f_best: best.f,
        evaluations: evals,
        history,
    })
}

/// DE/rand/1/bin. Trial vectors of one generation are drawn sequentially
/// from the seeded generator and then evaluated in parallel.
pub fn differential_evolution<F: Fn(&[f64]) -> f64 + Sync>(
    objective: F,
    cfg: &FitConfig,
) -> Result<OptimResult, FitError> {
    cfg.check()?;
    let de = &cfg.de;
    let dims = cfg.bounds.len();
    let np = de.population_for(dims);
    if np < 4 {
        return Err(FitError::Config(format!(
            "population must be >= 4, got {np}"
        )));
    }
    if !(de.f > 0.0 && de.f <= 2.0) || !(0.0..=1.0).contains(&de.cr) {
        return Err(FitError::Config(
            "evolution needs 0 < F <= 2 and 0 <= CR <= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            cfg.bounds
                .iter()
                .map(|b| b[0] + (b[1] - b[0]) * rng.random::<f64>())
                .collect()
        })
        .collect();
    if cfg.x0.is_some() {
        pop[0] = cfg.start();
    }

    let evaluate = |xs: &[Vec<f64>]| -> Result<Vec<f64>, FitError> {
        xs.par_iter().map(|x| checked(&objective, x)).collect()
    };
    let n_init = np.min(cfg.budget);
    let mut fit = evaluate(&pop[..n_init])?;
    let mut evals = n_init;
    let best_of = |pop: &[Vec<f64>], fit: &[f64]| -> Best {
        let (i, f) =
            fit.iter().enumerate().fold(
                (0, f64::INFINITY),
                |acc, (i, f)| if *f < acc.1 { (i, *f) } else { acc },
            );
        Best {
            x: pop[i].clone(),
            f,
        }
    };
    let mut best = best_of(&pop[..n_init], &fit);
    let mut history = vec![best.f];
    if n_init < np {
        return Ok(OptimResult {
            x_best: best.x,
            f_best: best.f,
            evaluations: evals,
            history,
        });
    }

    while evals < cfg.budget {
        let n_trials = np.min(cfg.budget - evals);
        let mut trials = Vec::with_capacity(n_trials);
        for i in 0..n_trials {
            let pick = |rng: &mut ChaCha8Rng, taken: &[usize]| loop {
                let r = rng.random_range(0..np);
                if !taken.contains(&r) {
                    break r;
                }
            };
            let r1 = pick(&mut rng, &[i]);
            let r2 = pick(&mut rng, &[i, r1]);
            let r3 = pick(&mut rng, &[i, r1, r2]);
            let j_rand = rng.random_range(0..dims);
            let trial: Vec<f64> = (0..dims)
                .map(|j| {
                    let cross: f64 = rng.random();
                    if j == j_rand || cross < de.cr {
                        let v = pop[r1][j] + de.f * (pop[r2][j] - pop[r3][j]);
                        reflect(v, cfg.bounds[j][0], cfg.bounds[j][1])
                    } else {
                        pop[i][j]
                    }
                })
                .collect();
            trials.push(trial);
        }
        let f_trials = evaluate(&trials)?;
        evals += n_trials;
        for (i, (trial, ft)) in trials.into_iter().zip(f_trials).enumerate() {
            if ft <= fit[i] {
                best.offer(&trial, ft);
                pop[i] = trial;
                fit[i] = ft;
            }
        }
        history.push(best.f);
    }
    Ok(OptimResult {
        x_best: best.x,
        f_best: best.f,
        evaluations: evals,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rastrigin(x: &[f64]) -> f64 {
        10.0 * x.len() as f64
            + x.iter()
                .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                .sum::<f64>()
    }

    #[test]
    fn sa_sphere_5d() {
        let cfg = FitConfig::new(vec![[-5.0, 5.0]; 5], 20_000, 11);
        let r = simulated_annealing(sphere, &cfg).unwrap();
        assert!(r.f_best <= 1e-4, "{}", r.f_best);
        assert_eq!(r.evaluations, 20_000);
        assert_eq!(r.f_best, sphere(&r.x_best));
    }

    #[test]
    fn sa_budget_one_returns_start() {
        let mut cfg = FitConfig::new(vec![[-5.0, 5.0]; 3], 1, 3);
        cfg.x0 = Some(vec![1.0, 2.0, 3.0]);
        let r = simulated_annealing(sphere, &cfg).unwrap();
        assert_eq!(r.x_best, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.f_best, 14.0);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn constant_objective() {
        let cfg = FitConfig::new(vec![[-1.0, 1.0]; 2], 500, 5);
        let r = simulated_annealing(|_: &[f64]| 3.5, &cfg).unwrap();
        assert_eq!(r.f_best, 3.5);
        assert!(r.x_best.iter().all(|v| (-1.0..=1.0).contains(v)));
        let r = differential_evolution(|_: &[f64]| 3.5, &cfg).unwrap();
        assert_eq!(r.f_best, 3.5);
    }

    #[test]
    fn de_sphere_4d() {
        let mut cfg = FitConfig::new(vec![[-5.0, 5.0]; 4], 15_000, 2);
        cfg.de.population = Some(30);
        let r = differential_evolution(sphere, &cfg).unwrap();
        assert!(r.f_best <= 1e-8, "{}", r.f_best);
        assert!(r.evaluations <= 15_000);
    }

    #[test]
    fn de_rastrigin_2d() {
        let cfg = FitConfig::new(vec![[-5.12, 5.12]; 2], 40_000, 9);
        let r = differential_evolution(rastrigin, &cfg).unwrap();
        assert!(r.f_best <= 1e-3, "{}", r.f_best);
    }

    #[test]
    fn de_single_generation() {
        let mut cfg = FitConfig::new(vec![[-5.0, 5.0]; 2], 4, 1);
        cfg.de.population = Some(4);
        let r = differential_evolution(sphere, &cfg).unwrap();
        assert_eq!(r.evaluations, 4);
        assert_eq!(r.history.len(), 1);
        // Best of the initial population, reproduced from the same draws.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| -5.0 + 10.0 * rng.random::<f64>()).collect())
            .collect();
        let best = pop.iter().map(|x| sphere(x)).fold(f64::INFINITY, f64::min);
        assert_eq!(r.f_best, best);
    }

    #[test]
    fn non_finite_objective_reported() {
        let cfg = FitConfig::new(vec![[0.0, 1.0]], 10, 1);
        let err = simulated_annealing(|_: &[f64]| f64::NAN, &cfg).unwrap_err();
        assert!(matches!(err, FitError::NonFiniteObjective { .. }));
        let err = differential_evolution(|x: &[f64]| 1.0 / (x[0] - x[0]), &cfg).unwrap_err();
        assert!(matches!(err, FitError::NonFiniteObjective { .. }));
    }

    #[test]
    fn bad_configs() {
        assert!(simulated_annealing(sphere, &FitConfig::new(vec![], 10, 1)).is_err());
        assert!(simulated_annealing(sphere, &FitConfig::new(vec![[1.0, 0.0]], 10, 1)).is_err());
        assert!(simulated_annealing(sphere, &FitConfig::new(vec![[0.0, 1.0]], 0, 1)).is_err());
        let mut cfg = FitConfig::new(vec![[0.0, 1.0]], 10, 1);
        cfg.de.population = Some(3);
        assert!(differential_evolution(sphere, &cfg).is_err());
    }

    #[test]
    fn reflect_stays_inside() {
        assert_eq!(reflect(1.5, 0.0, 1.0), 0.5);
        assert_eq!(reflect(-0.25, 0.0, 1.0), 0.25);
        assert_eq!(reflect(-7.0, 0.0, 1.0), 1.0);
    }
}
