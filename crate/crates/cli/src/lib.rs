//! Command-line front end. [`run_cli`] returns the process exit code: 0 on
//! success, 1 on a domain error, 2 on a usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use myoforge::bench::bench_scaling;
use myoforge::fit::{
    default_a_grid, default_l_grid, fit_force_params, fit_wrapping, force_maps_for, marker_frames,
    read_force_maps, validate_forces, validate_kinematics, validate_moment_arms, write_force_maps,
    FitConfig,
};
use myoforge::geometry::{moment_arm_map, uniform_grid, MomentArmMap};
use myoforge::model::{
    parse_reference_model, serialize_native_model, to_json_17, CompiledModel, ModelDoc,
};
use myoforge::scenario::{load_model_file, ScenarioSpec};

/// Hill-type musculoskeletal simulation and model fitting.
#[derive(Parser, Debug)]
#[command(name = "myoforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a reference XML model to the native JSON format.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a model's structural invariants.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a scenario and write its trajectory CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit wrap geometry to a reference moment-arm map.
    FitWrap(FitArgs),
    /// Fit force-length parameters to reference force maps.
    FitForce(FitArgs),
    /// Compare a model with a reference: markers, moment arms and forces.
    ValidateModel {
        #[arg(long)]
        model: PathBuf,
        /// Reference model, evaluated by this engine.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Reference moment-arm map CSV used instead of the one computed
        /// from the reference model.
        #[arg(long)]
        moment_arms: Option<PathBuf>,
        /// Reference force-map CSV, likewise.
        #[arg(long)]
        force_maps: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time simulation steps as the muscle count grows.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,10")]
        multipliers: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a model's moment-arm map CSV.
    ExportMomentArms {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = myoforge::fit::DEFAULT_GRID_POINTS)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a model's isometric force-map CSV.
    ExportForceMap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// FitConfig JSON; `--seed` and `--budget` override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Worker threads for objective evaluation.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Result report JSON; printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the fitted model as native JSON.
    #[arg(long)]
    out_model: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Parse { input, out } => {
            let parsed = parse_reference_model(&read(&input)?)?;
            for w in &parsed.warnings {
                log::warn!("{}: {w}", input.display());
            }
            write(&out, &serialize_native_model(&parsed.model))?;
            log::info!("wrote {}", out.display());
        }
        Command::Validate { input } => {
            let model = load_model_file(&input)?;
            let report = model.validate();
            if !report.is_empty() {
                eprint!("{report}");
                bail!(
                    "{} violation(s) in {}",
                    report.entries.len(),
                    input.display()
                );
            }
            println!("{}: ok", input.display());
        }
        Command::Simulate { scenario, out } => {
            let spec = ScenarioSpec::load(&scenario)?;
            let traj = spec.run()?;
            let text = traj.to_csv_string();
            emit(out.as_deref().or(spec.output.as_deref()), &text)?;
        }
        Command::FitWrap(args) => fit(args, true)?,
        Command::FitForce(args) => fit(args, false)?,
        Command::ValidateModel {
            model,
            reference,
            moment_arms,
            force_maps,
            out,
        } => {
            let model = load_model_file(&model)?;
            let ref_model = load_model_file(&reference)?;
            let frames = marker_frames(&ref_model, 20)?;
            let kin = validate_kinematics(&model, &frames)?;
            let map = match moment_arms {
                Some(p) => read_map(&p)?,
                None => moment_arm_map(
                    &CompiledModel::new(&ref_model)?,
                    &uniform_grid(&ref_model, 50),
                )?,
            };
            let arms = validate_moment_arms(&model, &map)?;
            let maps = match force_maps {
                Some(p) => read_force_maps(
                    fs::File::open(&p).with_context(|| format!("cannot read {}", p.display()))?,
                )?,
                None => force_maps_for(&ref_model, &default_l_grid(), &default_a_grid()),
            };
            let forces = validate_forces(&model, &maps)?;
            let report = json!({
                "kinematics_rms_m": kin,
                "moment_arms": arms,
                "forces": forces,
            });
            emit(out.as_deref(), &to_json_17(&report))?;
        }
        Command::Bench {
            model,
            multipliers,
            steps,
            seed,
            out,
        } => {
            let model = load_model_file(&model)?;
            let report = bench_scaling(&model, &multipliers, steps, seed)?;
            emit(
                out.as_deref(),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
        }
        Command::ExportMomentArms { model, points, out } => {
            if points == 0 {
                bail!("--points must be >= 1");
            }
            let model = load_model_file(&model)?;
            let map = moment_arm_map(&CompiledModel::new(&model)?, &uniform_grid(&model, points))?;
            write(&out, &map.to_csv_string())?;
        }
        Command::ExportForceMap { model, out } => {
            let model = load_model_file(&model)?;
            let mut buf = Vec::new();
            write_force_maps(
                &force_maps_for(&model, &default_l_grid(), &default_a_grid()),
                &mut buf,
            )?;
            write(&out, &String::from_utf8(buf)?)?;
        }
    }
    Ok(())
}

fn read_map(path: &Path) -> Result<MomentArmMap> {
    let f = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(MomentArmMap::read_csv(f)?)
}

fn fit(args: FitArgs, wrap: bool) -> Result<()> {
    let model: ModelDoc = load_model_file(&args.model)?;
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str(&read(p)?)
            .with_context(|| format!("invalid fit config {}", p.display()))?,
        None => FitConfig::new(vec![], if wrap { 50_000 } else { 20_000 }, 0),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if args.threads == 0 {
        bail!("--threads must be >= 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()?;
    let result = if wrap {
        let reference = read_map(&args.reference)?;
        pool.install(|| fit_wrapping(&model, &reference, &cfg))?
    } else {
        let f = fs::File::open(&args.reference)
            .with_context(|| format!("cannot read {}", args.reference.display()))?;
        let reference = read_force_maps(f)?;
        pool.install(|| fit_force_params(&model, &reference, &cfg))?
    };
    log::info!(
        "residual {:.6e} -> {:.6e} after {} evaluations",
        result.initial_residual,
        result.residual,
        result.evaluations
    );
    if let Some(p) = &args.out_model {
        write(p, &serialize_native_model(&result.model))?;
    }
    emit(args.out.as_deref(), &result.to_json())
}
