//! `pmsm-dnn`: simulate the drive, train the identifier, predict and score.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmsm_dnn_core::adaptation::{feasible_p_interval, sig6};
use pmsm_dnn_core::config::{ExperimentConfig, Handoff, Mode, PRESETS};
use pmsm_dnn_core::data::{
    compute_metrics, gp_smooth, read_csv, write_csv, write_error_history, write_lyapunov_history, write_metrics,
    write_table, MetricsReport,
};
use pmsm_dnn_core::dnn::real_eigenvalues;
use pmsm_dnn_core::pipeline::{self, identify_plant, mode_bounds, predict_model, run_plant, run_teacher};
use pmsm_dnn_core::{Error, IdentificationRun, ModelFile, Trajectory};

type CliResult<T> = std::result::Result<T, Error>;

#[derive(Parser)]
#[command(name = "pmsm-dnn", version, about = "DNN current identifier for a simulated PMSM drive")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long, global = true, env = "PMSM_DNN_CONFIG")]
    config: Option<PathBuf>,
    /// Scenario preset: case1, case2, case3-step, case3-ramp, case3-sin
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Start predictions from the first held-out measurement
    #[arg(long, global = true)]
    warm_start: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Teacher,
    Plant,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop plant simulation to CSV
    Simulate {
        #[arg(long, short, default_value = "trajectory.csv")]
        out: PathBuf,
    },
    /// Train the identifier and write the model and its histories
    Identify {
        /// Plant data CSV (plant mode)
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Open-loop prediction over the held-out part of a data file
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Number of held-out samples to predict; 0 predicts the start point only
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, short, default_value = "prediction.csv")]
        out: PathBuf,
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
    },
    /// Print the admissible interval for p
    Feasibility,
    /// Score a prediction file against ground truth
    Metrics {
        #[arg(long)]
        prediction: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Full pipeline into one directory
    Run {
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
        /// Repeat the plant pipeline for this many consecutive seeds
        #[arg(long)]
        sweep: Option<u64>,
    },
    /// Print the resolved config as JSON
    Config,
}

fn resolve_config(c: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.scenario) {
        (Some(path), preset) => ExperimentConfig::load(path, preset.as_deref())?,
        (None, Some(preset)) => ExperimentConfig::preset(preset)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(m) = c.mode {
        cfg.mode = match m {
            ModeArg::Teacher => Mode::Teacher,
            ModeArg::Plant => Mode::Plant,
        };
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.warm_start {
        cfg.handoff = Handoff::WarmStart;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn peak(traj: &Trajectory, c: usize) -> f64 {
    traj.channel(c).into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn print_run(run: &IdentificationRun) {
    println!("learning law: {}", run.mode);
    match run.feasibility.interval {
        Some((lo, hi)) => println!("p = {} in [{}, {}]", sig6(run.gains.p), sig6(lo), sig6(hi)),
        None => println!("p = {}", sig6(run.gains.p)),
    }
    println!("samples recorded: {}", run.times.len());
    println!("initial |e| = {:.6e}", run.initial_error());
    println!("final |e|   = {:.6e}", run.final_error());
    if run.initial_error() > 0.0 {
        println!("final / initial = {:.6e}", run.final_error() / run.initial_error());
    }
}

fn save_teacher(cfg: &ExperimentConfig, dir: &Path) -> CliResult<()> {
    let ex = run_teacher(cfg)?;
    create_dir(dir)?;
    let mut model = ModelFile::new(ex.run.weights.clone());
    model.x_hat = Some(ex.run.final_x_hat);
    model.write(&dir.join("model.txt"))?;
    write_error_history(&ex.run, &dir.join("error_history.csv"))?;
    write_lyapunov_history(&ex.run, &dir.join("lyapunov_history.csv"))?;
    print_run(&ex.run);
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    let traj = pipeline::simulate(cfg)?;
    write_csv(&traj, out)?;
    println!("samples: {}", traj.len());
    println!("sample rate: {} Hz", cfg.sample_rate);
    println!("peak |i_d| = {:.6e} A", peak(&traj, 0));
    println!("peak |i_q| = {:.6e} A", peak(&traj, 1));
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_identify(cfg: &ExperimentConfig, data: Option<&Path>, out_dir: &Path) -> CliResult<()> {
    if cfg.mode == Mode::Teacher {
        if data.is_some() {
            eprintln!("note: teacher mode trains against the synthetic teacher; --data is ignored");
        }
        return save_teacher(cfg, out_dir);
    }
    let data = data.ok_or_else(|| Error::Config(vec!["plant mode needs --data".into()]))?;
    let traj = read_csv(data)?;
    let n = cfg.n_train.min(traj.len());
    let train = traj.slice(0..n).currents();
    let train = if cfg.smooth { gp_smooth(&train, &cfg.gp)? } else { train };
    let (run, model) = identify_plant(&train, cfg)?;
    create_dir(out_dir)?;
    model.write(&out_dir.join("model.txt"))?;
    write_error_history(&run, &out_dir.join("error_history.csv"))?;
    print_run(&run);
    Ok(())
}

fn cmd_predict(
    cfg: &ExperimentConfig,
    model: &Path,
    data: &Path,
    horizon: Option<usize>,
    out: &Path,
    metrics: &Path,
) -> CliResult<()> {
    let model = ModelFile::read(model)?;
    let traj = read_csv(data)?;
    if traj.len() <= cfg.n_train {
        return Err(Error::InvalidArgument {
            name: "data",
            detail: format!("{} has {} samples; nothing follows the {} training samples", data.display(), traj.len(), cfg.n_train),
        });
    }
    let held_out = traj.slice(cfg.n_train..traj.len()).currents();
    let h = horizon.unwrap_or(held_out.len());
    if h > held_out.len() {
        return Err(Error::InvalidArgument {
            name: "horizon",
            detail: format!("{h} samples requested but only {} held-out samples are available", held_out.len()),
        });
    }
    let truth = held_out.slice(0..h.max(1));
    let start = match cfg.handoff {
        Handoff::Strict => None,
        Handoff::WarmStart => Some(truth.vec2(0)),
    };
    let pred = predict_model(&model, start, truth.len(), truth.t0, truth.dt, cfg)?;
    write_csv(&pred, out)?;
    let report = compute_metrics(&pred, &truth)?;
    write_metrics(&report, metrics)?;
    println!("{report}");
    Ok(())
}

fn cmd_feasibility(cfg: &ExperimentConfig) -> CliResult<()> {
    let (_, eta) = real_eigenvalues(&cfg.network.a0())?;
    let bounds = mode_bounds(cfg);
    let report = feasible_p_interval(bounds.ell(), eta, bounds.beta(cfg.network.act1, cfg.network.act2), cfg.gains.margin)?;
    println!("mode: {}", cfg.mode.learning_mode());
    print!("{report}");
    if let Some(p) = cfg.gains.p {
        let verdict = if report.contains(p) { "inside" } else { "outside" };
        println!("configured p = {} is {verdict} the interval", sig6(p));
    }
    Ok(())
}

/// Rows of `truth` aligned with the prediction's start time.
fn align(pred: &Trajectory, truth: &Trajectory) -> CliResult<Trajectory> {
    if truth.len() == pred.len() {
        return Ok(truth.clone());
    }
    let k = ((pred.t0 - truth.t0) / truth.dt).round();
    let fits = k >= 0.0
        && (truth.t0 + k * truth.dt - pred.t0).abs() <= 1e-6 * truth.dt
        && k as usize + pred.len() <= truth.len();
    if !fits {
        return Err(Error::InvalidArgument {
            name: "truth",
            detail: format!(
                "cannot align {} predicted samples from t = {} with {} truth samples from t = {}",
                pred.len(),
                pred.t0,
                truth.len(),
                truth.t0
            ),
        });
    }
    let k = k as usize;
    Ok(truth.slice(k..k + pred.len()))
}

fn cmd_metrics(prediction: &Path, truth: &Path, out: Option<&Path>) -> CliResult<()> {
    let pred = read_csv(prediction)?.currents();
    let truth = align(&pred, &read_csv(truth)?.currents())?;
    let report = compute_metrics(&pred, &truth)?;
    if let Some(out) = out {
        write_metrics(&report, out)?;
    }
    println!("{report}");
    Ok(())
}

fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path, sweep: Option<u64>) -> CliResult<()> {
    create_dir(out_dir)?;
    let cfg_path = out_dir.join("config.json");
    std::fs::write(&cfg_path, cfg.to_json() + "\n").map_err(|source| Error::Io {
        path: cfg_path.display().to_string(),
        source,
    })?;
    if let Some(n) = sweep {
        return run_sweep(cfg, out_dir, n);
    }
    if cfg.mode == Mode::Teacher {
        return save_teacher(cfg, out_dir);
    }
    let ex = run_plant(cfg)?;
    write_csv(&ex.data, &out_dir.join("data.csv"))?;
    ex.model.write(&out_dir.join("model.txt"))?;
    write_error_history(&ex.run, &out_dir.join("error_history.csv"))?;
    write_csv(&ex.prediction, &out_dir.join("prediction.csv"))?;
    write_metrics(&ex.metrics, &out_dir.join("metrics.csv"))?;
    print_run(&ex.run);
    println!("{}", ex.metrics);
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, n: u64) -> CliResult<()> {
    if cfg.mode == Mode::Teacher {
        return Err(Error::Config(vec!["--sweep runs the plant pipeline; use --mode plant".into()]));
    }
    let seeds: Vec<u64> = (0..n).map(|k| cfg.seed.wrapping_add(k)).collect();
    let results = pipeline::sweep_seeds(cfg, &seeds);
    let mut rows = Vec::new();
    let mut first_fault = None;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(report) => {
                println!("seed {seed}: pooled R2 = {}", report.pooled.r2_text());
                rows.extend(report.csv_rows().into_iter().map(|row| format!("{seed},{row}")));
            }
            Err(e) => {
                println!("seed {seed}: {e}");
                first_fault.get_or_insert(e);
            }
        }
    }
    let path = out_dir.join("sweep.csv");
    write_table(&path, &format!("seed,{}", MetricsReport::CSV_HEADER), rows)?;
    println!("wrote {}", path.display());
    first_fault.map_or(Ok(()), Err)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(&cli.common)?;
    match &cli.command {
        Command::Simulate { out } => cmd_simulate(&cfg, out),
        Command::Identify { data, out_dir } => cmd_identify(&cfg, data.as_deref(), out_dir),
        Command::Predict {
            model,
            data,
            horizon,
            out,
            metrics,
        } => cmd_predict(&cfg, model, data, *horizon, out, metrics),
        Command::Feasibility => cmd_feasibility(&cfg),
        Command::Metrics { prediction, truth, out } => cmd_metrics(prediction, truth, out.as_deref()),
        Command::Run { out_dir, sweep } => cmd_run(&cfg, out_dir, *sweep),
        Command::Config => {
            println!("{}", cfg.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) && cli.common.scenario.is_some() {
                eprintln!("presets: {}", PRESETS.join(", "));
            }
            ExitCode::from(if e.is_numerical() { 1 } else { 2 })
        }
    }
}
