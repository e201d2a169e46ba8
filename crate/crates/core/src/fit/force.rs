//! Force maps and the per-muscle force-length parameter fit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::validate::{check_force_coverage, validate_forces};
use super::{combine_histories, differential_evolution, FitConfig, FitError, FitResult};
use crate::geometry::MapError;
use crate::model::ModelDoc;
use crate::muscle::{muscle_force, MuscleParams, MuscleState};

/// Isometric muscle force sampled over normalized length and activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceMap {
    pub muscle: String,
    pub l_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    /// Force in N, `values[l][a]`.
    pub values: Vec<Vec<f64>>,
}

impl ForceMap {
    pub fn check(&self) -> Result<(), MapError> {
        let increasing = |g: &[f64]| {
            !g.is_empty() && g.iter().all(|v| v.is_finite()) && g.windows(2).all(|w| w[0] < w[1])
        };
        if !increasing(&self.l_grid) || !increasing(&self.a_grid) {
            return Err(MapError::Shape(format!(
                "grids of '{}' must be finite and strictly increasing",
                self.muscle
            )));
        }
        if self.a_grid[0] < 0.0 || self.a_grid[self.a_grid.len() - 1] > 1.0 {
            return Err(MapError::Shape(format!(
                "activations of '{}' must lie in [0, 1]",
                self.muscle
            )));
        }
        if self.values.len() != self.l_grid.len()
            || self
                .values
                .iter()
                .any(|row| row.len() != self.a_grid.len() || row.iter().any(|v| !v.is_finite()))
        {
            return Err(MapError::Shape(format!(
                "values of '{}' do not match its grids",
                self.muscle
            )));
        }
        Ok(())
    }
}

fn isometric(params: &MuscleParams, l_norm: f64, a: f64) -> f64 {
    muscle_force(
        &MuscleState {
            activation: a,
            length: l_norm * params.l0,
            velocity: 0.0,
        },
        params,
    )
}

/// Samples a muscle's isometric force on an (l, a) grid.
pub fn force_map(muscle: &str, params: &MuscleParams, l_grid: &[f64], a_grid: &[f64]) -> ForceMap {
    ForceMap {
        muscle: muscle.to_string(),
        l_grid: l_grid.to_vec(),
        a_grid: a_grid.to_vec(),
        values: l_grid
            .iter()
            .map(|&l| a_grid.iter().map(|&a| isometric(params, l, a)).collect())
            .collect(),
    }
}

/// Sum of squared force differences between `params` and `map`, and the
/// number of samples.
pub fn force_residual(params: &MuscleParams, map: &ForceMap) -> (f64, usize) {
    let mut sq = 0.0;
    for (l, row) in map.l_grid.iter().zip(&map.values) {
        for (a, f) in map.a_grid.iter().zip(row) {
            sq += (isometric(params, *l, *a) - f).powi(2);
        }
    }
    (sq, map.l_grid.len() * map.a_grid.len())
}

/// Writes maps as `muscle,l_norm,a,force` rows, length-major.
pub fn write_force_maps<W: Write>(maps: &[ForceMap], w: W) -> Result<(), MapError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["muscle", "l_norm", "a", "force"])?;
    for m in maps {
        for (l, row) in m.l_grid.iter().zip(&m.values) {
            for (a, f) in m.a_grid.iter().zip(row) {
                out.write_record([
                    m.muscle.clone(),
                    format!("{l:.16e}"),
                    format!("{a:.16e}"),
                    format!("{f:.16e}"),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads maps written by [`write_force_maps`]. Rows of one muscle must form
/// a full (l, a) product; muscles keep their first-seen order.
pub fn read_force_maps<R: Read>(r: R) -> Result<Vec<ForceMap>, MapError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["muscle", "l_norm", "a", "force"] {
        return Err(MapError::Shape(
            "expected header muscle,l_norm,a,force".into(),
        ));
    }
    let mut rows: Vec<(String, Vec<(f64, f64, f64)>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(MapError::Shape(format!(
                "row {} has {} fields",
                i + 1,
                rec.len()
            )));
        }
        let num = |k: usize| -> Result<f64, MapError> {
            let v: f64 = rec[k].parse().map_err(|_| {
                MapError::Shape(format!("row {}: '{}' is not a number", i + 1, &rec[k]))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(MapError::Shape(format!("row {}: non-finite value", i + 1)))
            }
        };
        let sample = (num(1)?, num(2)?, num(3)?);
        match rows.iter_mut().find(|(m, _)| m == &rec[0]) {
            Some((_, v)) => v.push(sample),
            None => rows.push((rec[0].to_string(), vec![sample])),
        }
    }
    if rows.is_empty() {
        return Err(MapError::Shape("no force samples".into()));
    }
    let mut maps = Vec::with_capacity(rows.len());
    for (muscle, samples) in rows {
        let mut l_grid: Vec<f64> = Vec::new();
        let mut a_grid: Vec<f64> = Vec::new();
        for &(l, a, _) in &samples {
            if !l_grid.contains(&l) {
                l_grid.push(l);
            }
            if !a_grid.contains(&a) {
                a_grid.push(a);
            }
        }
        if samples.len() != l_grid.len() * a_grid.len() {
            return Err(MapError::Shape(format!(
                "samples of '{muscle}' do not form a full grid"
            )));
        }
        let mut values = vec![vec![f64::NAN; a_grid.len()]; l_grid.len()];
        for &(l, a, f) in &samples {
            let li = l_grid
                .iter()
                .position(|v| *v == l)
                .expect("collected above");
            let ai = a_grid
                .iter()
                .position(|v| *v == a)
                .expect("collected above");
            if !values[li][ai].is_nan() {
                return Err(MapError::Shape(format!(
                    "duplicate sample for '{muscle}' at l={l}, a={a}"
                )));
            }
            values[li][ai] = f;
        }
        let map = ForceMap {
            muscle,
            l_grid,
            a_grid,
            values,
        };
        map.check()?;
        maps.push(map);
    }
    Ok(maps)
}

fn with_decision(params: &MuscleParams, x: &[f64]) -> MuscleParams {
    MuscleParams {
        l_min: x[0],
        l_max: x[1],
        fp_max: x[2],
        f_max: x[3],
        ..params.clone()
    }
}

/// Fits `{l_min, l_max, fp_max, f_max}` of every muscle to its reference
/// force map, one differential-evolution run per muscle with the full
/// budget. The remaining muscle parameters are kept.
pub fn fit_force_params(
    model: &ModelDoc,
    reference: &[ForceMap],
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    check_force_coverage(model, reference)?;
    let fb = &cfg.force;
    let mut out = model.clone();
    let mut histories = Vec::new();
    let mut evaluations = 0;
    let mut initial = 0.0;
    let mut samples = 0;
    for (k, map) in reference.iter().enumerate() {
        let mi = model.muscle_index(&map.muscle).expect("coverage checked");
        let start = model.muscles[mi].params.clone();
        let bounds = if cfg.bounds.is_empty() {
            vec![
                fb.l_min,
                fb.l_max,
                fb.fp_max,
                [
                    fb.f_max_factor[0] * start.f_max,
                    fb.f_max_factor[1] * start.f_max,
                ],
            ]
        } else if cfg.bounds.len() == 4 {
            cfg.bounds.clone()
        } else {
            return Err(FitError::Config(format!(
                "force fits take 4 bounds, got {}",
                cfg.bounds.len()
            )));
        };
        if !(bounds[0][1] < 1.0 && bounds[1][0] > 1.0 && bounds[2][0] >= 0.0 && bounds[3][0] > 0.0)
        {
            return Err(FitError::Config(
                "force bounds must keep l_min < 1 < l_max, fp_max >= 0, f_max > 0".into(),
            ));
        }
        let (lo, hi) = (bounds[0][0], bounds[1][1]);
        if map.l_grid.iter().any(|l| *l < lo || *l > hi) {
            return Err(FitError::Config(format!(
                "force map of '{}' samples lengths outside [{lo}, {hi}]",
                map.muscle
            )));
        }
        let (sq0, n) = force_residual(&start, map);
        initial += sq0;
        samples += n;

        let x_start = vec![start.l_min, start.l_max, start.fp_max, start.f_max];
        let mut run = cfg.clone();
        run.bounds = bounds;
        run.x0 = Some(x_start.clone());
        run.seed = cfg.seed.wrapping_add(k as u64);
        let opt = differential_evolution(
            |x: &[f64]| force_residual(&with_decision(&start, x), map).0,
            &run,
        )?;
        evaluations += opt.evaluations;
        // The start point is clamped into the box; keep the input model if
        // it was outside and still better.
        let x = if opt.f_best <= sq0 {
            opt.x_best
        } else {
            x_start
        };
        out.muscles[mi].params = with_decision(&start, &x);
        histories.push(opt.history);
    }
    let residual: f64 = reference
        .iter()
        .map(|map| {
            force_residual(
                &out.muscle(&map.muscle).expect("coverage checked").params,
                map,
            )
            .0
        })
        .sum();
    let relative = validate_forces(&out, reference)?.relative_rms_percent;
    Ok(FitResult {
        model: out,
        residual,
        rms: (residual / samples.max(1) as f64).sqrt(),
        relative_rms_percent: relative,
        initial_residual: initial,
        history: combine_histories(&histories, 0.0),
        evaluations,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_model;

    fn grids() -> (Vec<f64>, Vec<f64>) {
        let l: Vec<f64> = (0..30).map(|i| 0.4 + 1.3 * i as f64 / 29.0).collect();
        (l, vec![0.2, 0.4, 0.6, 0.8, 1.0])
    }

    #[test]
    fn csv_round_trip() {
        let m = tiny_model();
        let (l, a) = grids();
        let maps = vec![
            force_map("flexor", &m.muscles[0].params, &l, &a),
            force_map("b", &m.muscles[0].params, &l[..3], &a[..2]),
        ];
        let mut buf = Vec::new();
        write_force_maps(&maps, &mut buf).unwrap();
        assert_eq!(read_force_maps(buf.as_slice()).unwrap(), maps);
    }

    #[test]
    fn csv_rejects_bad_input() {
        let bad = [
            "",
            "muscle,l_norm,a,force\n",
            "muscle,l,a,force\nx,1,1,1\n",
            "muscle,l_norm,a,force\nx,1,0.5,1\nx,1.1,1,1\n",
            "muscle,l_norm,a,force\nx,1,0.5,NaN\n",
            "muscle,l_norm,a,force\nx,1,2,1\n",
            "muscle,l_norm,a,force\nx,1,0.5,1\nx,1,0.5,2\n",
        ];
        for text in bad {
            assert!(read_force_maps(text.as_bytes()).is_err(), "{text:?}");
        }
    }

    #[test]
    fn synthetic_recovery() {
        let mut m = tiny_model();
        m.muscles[0].params.f_max = 100.0;
        let mut truth = m.muscles[0].params.clone();
        truth.l_min = 0.6;
        truth.l_max = 1.5;
        truth.fp_max = 1.2;
        truth.f_max = 120.0;
        let (l, a) = grids();
        let reference = vec![force_map("flexor", &truth, &l, &a)];
        let cfg = FitConfig::new(vec![], 8_000, 3);
        let r = fit_force_params(&m, &reference, &cfg).unwrap();
        let p = &r.model.muscles[0].params;
        for (got, want) in [
            (p.l_min, 0.6),
            (p.l_max, 1.5),
            (p.fp_max, 1.2),
            (p.f_max, 120.0),
        ] {
            assert!((got / want - 1.0).abs() < 0.01, "{got} vs {want}");
        }
        assert!(r.relative_rms_percent < 0.1, "{}", r.relative_rms_percent);
        assert!(r.residual <= r.initial_residual);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        let recomputed = force_residual(p, &reference[0]).0;
        assert!((r.residual - recomputed).abs() <= 1e-12 * recomputed.max(1.0));
    }

    #[test]
    fn identity_fit_keeps_parameters() {
        let m = tiny_model();
        let (l, a) = grids();
        let reference = vec![force_map("flexor", &m.muscles[0].params, &l, &a)];
        let r = fit_force_params(&m, &reference, &FitConfig::new(vec![], 500, 1)).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.model, m);
    }

    #[test]
    fn coverage_errors() {
        let m = tiny_model();
        let (l, a) = grids();
        let other = vec![force_map("other", &m.muscles[0].params, &l, &a)];
        assert!(matches!(
            fit_force_params(&m, &other, &FitConfig::new(vec![], 10, 1)),
            Err(FitError::CoverageMismatch(_))
        ));
        assert!(matches!(
            fit_force_params(&m, &[], &FitConfig::new(vec![], 10, 1)),
            Err(FitError::CoverageMismatch(_))
        ));
    }
}
