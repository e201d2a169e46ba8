//! Wrap-geometry fit against a reference moment-arm map.

use rayon::prelude::*;

use super::validate::{check_map_coverage, grid_in_model_order, validate_moment_arms};
use super::{combine_histories, simulated_annealing, split_budget, FitConfig, FitError, FitResult};
use crate::geometry::{moment_arm_map_at, MomentArmMap};
use crate::model::{CompiledModel, ModelDoc, WrapKind};

#[derive(Debug, Clone, Copy)]
enum Var {
    /// Side-site coordinate `k` of wrap `w` of muscle `m`.
    Side {
        m: usize,
        w: usize,
        k: usize,
    },
    Radius {
        s: usize,
    },
    Orientation {
        s: usize,
        k: usize,
    },
}

/// Wrap surfaces coupled through shared muscles, with the muscles that use
/// them.
struct Cluster {
    muscles: Vec<usize>,
    vars: Vec<Var>,
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

fn clusters(model: &ModelDoc, cfg: &FitConfig) -> Vec<Cluster> {
    let ns = model.wrap_surfaces.len();
    let surface = |name: &str| {
        model
            .wrap_surfaces
            .iter()
            .position(|s| s.name == name)
            .expect("validated model")
    };
    let mut parent: Vec<usize> = (0..ns).collect();
    for m in &model.muscles {
        if let Some(first) = m.wraps.first() {
            let a = find(&mut parent, surface(&first.surface));
            for w in &m.wraps[1..] {
                let b = find(&mut parent, surface(&w.surface));
                parent[b] = a;
            }
        }
    }
    let mut out: Vec<(usize, Cluster)> = Vec::new();
    for (mi, m) in model.muscles.iter().enumerate() {
        let Some(first) = m.wraps.first() else {
            continue;
        };
        let root = find(&mut parent, surface(&first.surface));
        let pos = match out.iter().position(|(r, _)| *r == root) {
            Some(p) => p,
            None => {
                out.push((
                    root,
                    Cluster {
                        muscles: Vec::new(),
                        vars: Vec::new(),
                    },
                ));
                out.len() - 1
            }
        };
        let c = &mut out[pos].1;
        c.muscles.push(mi);
        if cfg.wrap.fit_side_sites {
            for w in 0..m.wraps.len() {
                c.vars.extend((0..3).map(|k| Var::Side { m: mi, w, k }));
            }
        }
    }
    for s in 0..ns {
        let root = find(&mut parent, s);
        let Some((_, c)) = out.iter_mut().find(|(r, _)| *r == root) else {
            continue;
        };
        if cfg.wrap.fit_radius {
            c.vars.push(Var::Radius { s });
        }
        // A cylinder's roll about its own axis and any sphere rotation leave
        // the path unchanged; only the two tilts are searched.
        if cfg.wrap.fit_orientation && model.wrap_surfaces[s].kind == WrapKind::Cylinder {
            c.vars.extend((0..2).map(|k| Var::Orientation { s, k }));
        }
    }
    out.into_iter()
        .map(|(_, c)| c)
        .filter(|c| !c.vars.is_empty())
        .collect()
}

fn read(model: &ModelDoc, v: Var) -> f64 {
    match v {
        Var::Side { m, w, k } => model.muscles[m].wraps[w].side_site[k],
        Var::Radius { s } => model.wrap_surfaces[s].radius,
        Var::Orientation { s, k } => model.wrap_surfaces[s].orientation[k],
    }
}

fn write(model: &mut ModelDoc, vars: &[Var], x: &[f64]) {
    for (v, &val) in vars.iter().zip(x) {
        match *v {
            Var::Side { m, w, k } => model.muscles[m].wraps[w].side_site[k] = val,
            Var::Radius { s } => model.wrap_surfaces[s].radius = val,
            Var::Orientation { s, k } => model.wrap_surfaces[s].orientation[k] = val,
        }
    }
}

fn default_bounds(model: &ModelDoc, cfg: &FitConfig, v: Var) -> [f64; 2] {
    let x = read(model, v);
    let w = &cfg.wrap;
    match v {
        Var::Side { .. } => [x - w.side_site, x + w.side_site],
        Var::Radius { .. } => [x * (1.0 - w.radius_fraction), x * (1.0 + w.radius_fraction)],
        Var::Orientation { .. } => [x - w.orientation, x + w.orientation],
    }
}

/// Sum of squared moment-arm differences between `model` and `reference`
/// over the reference grid.
pub fn wrap_residual(model: &ModelDoc, reference: &MomentArmMap) -> Result<f64, FitError> {
    Ok(validate_moment_arms(model, reference)?.residual)
}

/// Fits wrap side sites, radii and cylinder tilts so the model's moment arms
/// match `reference`. Each cluster of coupled surfaces is an independent
/// annealing problem starting from the input model.
pub fn fit_wrapping(
    model: &ModelDoc,
    reference: &MomentArmMap,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    check_map_coverage(model, reference)?;
    let base = CompiledModel::new(model)?;
    if !(0.0..1.0).contains(&cfg.wrap.radius_fraction)
        || cfg.wrap.side_site < 0.0
        || cfg.wrap.orientation < 0.0
    {
        return Err(FitError::Config(
            "wrap bounds need 0 <= radius_fraction < 1 and non-negative widths".into(),
        ));
    }
    let groups = clusters(model, cfg);
    if groups.is_empty() {
        return Err(FitError::Config(
            "the model has no wrap geometry to fit".into(),
        ));
    }
    let total_vars: usize = groups.iter().map(|c| c.vars.len()).sum();
    if !cfg.bounds.is_empty() && cfg.bounds.len() != total_vars {
        return Err(FitError::Config(format!(
            "expected {total_vars} bounds, got {}",
            cfg.bounds.len()
        )));
    }
    let (grid, fixed) = grid_in_model_order(model, reference);
    let reference_rows: Vec<usize> = model
        .muscles
        .iter()
        .map(|m| reference.muscle_index(&m.name).expect("coverage checked"))
        .collect();
    let joint_cols: Vec<usize> = model
        .joints
        .iter()
        .map(|j| reference.joint_index(&j.name).expect("coverage checked"))
        .collect();

    let cluster_residual = |doc: &ModelDoc, muscles: &[usize]| -> f64 {
        let terms: usize = grid.iter().map(|g| g.len()).sum::<usize>() * muscles.len();
        // Infeasible geometry (a path point inside a grown surface) scores
        // as a 1 m error on every sample.
        let infeasible = terms as f64;
        let Ok(compiled) = CompiledModel::new(doc) else {
            return infeasible;
        };
        let Ok(map) = moment_arm_map_at(&compiled, &grid, muscles, &fixed) else {
            return infeasible;
        };
        let mut sq = 0.0;
        for (row, &m) in muscles.iter().enumerate() {
            for (j, &col) in joint_cols.iter().enumerate() {
                for (ours, theirs) in map.values[row][j]
                    .iter()
                    .zip(&reference.values[reference_rows[m]][col])
                {
                    sq += (ours - theirs).powi(2);
                }
            }
        }
        sq
    };

    let dims: Vec<usize> = groups.iter().map(|c| c.vars.len()).collect();
    let budgets = split_budget(cfg.budget, &dims);
    let mut offsets = vec![0];
    for d in &dims {
        offsets.push(offsets.last().unwrap() + d);
    }
    let runs: Vec<_> = groups
        .par_iter()
        .enumerate()
        .map(|(c, group)| {
            let bounds: Vec<[f64; 2]> = if cfg.bounds.is_empty() {
                group
                    .vars
                    .iter()
                    .map(|&v| default_bounds(model, cfg, v))
                    .collect()
            } else {
                cfg.bounds[offsets[c]..offsets[c + 1]].to_vec()
            };
            let x0: Vec<f64> = group.vars.iter().map(|&v| read(model, v)).collect();
            let mut run = cfg.clone();
            run.bounds = bounds;
            run.x0 = Some(x0.clone());
            run.budget = budgets[c];
            run.seed = cfg.seed.wrapping_add(c as u64);
            let start = cluster_residual(model, &group.muscles);
            let opt = simulated_annealing(
                |x: &[f64]| {
                    let mut doc = model.clone();
                    write(&mut doc, &group.vars, x);
                    cluster_residual(&doc, &group.muscles)
                },
                &run,
            )?;
            // Guard against a start point outside explicit bounds.
            let x = if opt.f_best <= start {
                opt.x_best.clone()
            } else {
                x0
            };
            Ok((x, opt))
        })
        .collect::<Result<Vec<_>, FitError>>()?;

    let mut out = model.clone();
    let mut histories = Vec::new();
    let mut evaluations = 0;
    for (group, (x, opt)) in groups.iter().zip(runs) {
        write(&mut out, &group.vars, &x);
        evaluations += opt.evaluations;
        histories.push(opt.history);
    }
    let fitted: Vec<usize> = groups
        .iter()
        .flat_map(|c| c.muscles.iter().copied())
        .collect();
    let rest: Vec<usize> = (0..base.n_muscles())
        .filter(|m| !fitted.contains(m))
        .collect();
    let constant = if rest.is_empty() {
        0.0
    } else {
        cluster_residual(model, &rest)
    };

    let initial = validate_moment_arms(model, reference)?;
    let last = validate_moment_arms(&out, reference)?;
    Ok(FitResult {
        model: out,
        residual: last.residual,
        rms: last.rms,
        relative_rms_percent: last.relative_rms_percent,
        initial_residual: initial.residual,
        history: combine_histories(&histories, constant),
        evaluations,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}
