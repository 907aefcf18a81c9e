//! Command-line interface: `check`, `convert`, `simulate`, `verify`,
//! `reconstruct`.
//!
//! Exit codes: 0 success, 1 usage, 2 model validation failure,
//! 3 inadmissible boundary conditions, 4 numerical failure.

use crate::converter::{convert_gpde, pie_from_value, pie_to_value, ConvertError, PieSystem};
use crate::discretizer::DiscretePie;
use crate::expr::Expr;
use crate::models::{self, reference, LoadError};
use crate::oracle::{verify_all, VerifyTarget};
use crate::simulator::{
    run_discrete, write_outputs_csv, write_states_csv, Signals, SimConfig, SimError,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INADMISSIBLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Parser)]
#[command(
    name = "pie-forge",
    about = "PI operator algebra, PIE conversion, and simulation for coupled ODE-PDE models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check admissibility of a model's boundary conditions.
    Check {
        /// Model file (JSON) or builtin id.
        model: String,
    },
    /// Convert a model to its PIE system and write it as JSON.
    Convert {
        model: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate a model (or a converted PIE file) and write CSV histories.
    Simulate(SimulateArgs),
    /// Run verification checks on a builtin example or a random batch.
    Verify {
        /// Builtin example id.
        #[arg(long)]
        builtin: Option<String>,
        /// Seed for the random batch.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random cases.
        #[arg(long, default_value_t = 25)]
        cases: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Map a simulated PIE state history back to model states.
    Reconstruct {
        /// Converted PIE file (JSON).
        pie: PathBuf,
        /// State-snapshot CSV produced by `simulate`.
        trajectory: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Model file (JSON), builtin id, or converted PIE file.
    model: String,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tend: Option<f64>,
    /// Collocation degree.
    #[arg(long)]
    modes: Option<usize>,
    /// Initial distributed profile, one expression in `s` per channel.
    #[arg(long = "ic")]
    ic: Vec<String>,
    /// Initial finite state entries.
    #[arg(long = "ic-ode")]
    ic_ode: Vec<f64>,
    /// Output CSV base path (writes `<path>` and `<path>.states.csv`).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Runs the CLI on the given arguments (excluding the program name is fine;
/// clap handles both). Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version through the error path with status 0.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Convert(#[from] ConvertError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Load(_) | CliError::Json(_) => EXIT_VALIDATION,
            CliError::Convert(ConvertError::Inadmissible)
            | CliError::Convert(ConvertError::NonSquareBc { .. }) => EXIT_INADMISSIBLE,
            CliError::Convert(_) => EXIT_NUMERICAL,
            CliError::Sim(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_VALIDATION,
            CliError::Other(_) => EXIT_USAGE,
        }
    }
}

fn load_model_arg(arg: &str) -> Result<models::LoadedModel, CliError> {
    if models::BUILTIN_IDS.contains(&arg) {
        return Ok(models::load_builtin(arg)?);
    }
    Ok(models::load_model_file(std::path::Path::new(arg))?)
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Check { model } => {
            let loaded = load_model_arg(&model)?;
            for w in &loaded.warnings {
                eprintln!("warning: {}: {}", w.field, w.message);
            }
            let adm = crate::converter::check_admissible(&loaded.model.n, &loaded.model.bc)?;
            let bt = crate::converter::build_bt(&loaded.model.n, &loaded.model.bc)?;
            println!("B_T =");
            for i in 0..bt.rows() {
                let row: Vec<String> = (0..bt.cols())
                    .map(|j| crate::polyalg::serde_io::rat_to_string(&bt[(i, j)]))
                    .collect();
                println!("  [{}]", row.join(", "));
            }
            println!("det(B_T) = {}", crate::polyalg::serde_io::rat_to_string(&adm.det));
            println!("cond(B_T) ~ {:.6e}", adm.cond);
            for w in &adm.warnings {
                eprintln!("warning: {w}");
            }
            if adm.admissible {
                println!("admissible");
                Ok(EXIT_OK)
            } else {
                println!("inadmissible");
                Ok(EXIT_INADMISSIBLE)
            }
        }
        Command::Convert { model, output } => {
            let loaded = load_model_arg(&model)?;
            let conv = convert_gpde(&loaded.model)?;
            let deviations = reference::compare_conversion(&conv, &loaded.model.name);
            let doc = json!({
                "model": loaded.model.name,
                "pie": pie_to_value(&conv.pie),
                "B_T": crate::polyalg::serde_io::ratmat_to_value(&conv.bundle.bt),
                "det": crate::polyalg::serde_io::rat_to_string(&conv.admissibility.det),
                "cond": conv.admissibility.cond,
                "deviations": deviations.iter().map(reference::Deviation::to_value).collect::<Vec<_>>(),
            });
            let text = serde_json::to_string_pretty(&doc)?;
            match output {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => simulate_cmd(args),
        Command::Verify {
            builtin,
            seed,
            cases,
            output,
        } => {
            let target = match builtin {
                Some(id) => VerifyTarget::Builtin(id),
                None => VerifyTarget::Random { seed, cases },
            };
            let report = verify_all(target);
            let text = serde_json::to_string_pretty(&report.to_value())?;
            match output {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
            if report.all_pass() {
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_NUMERICAL)
            }
        }
        Command::Reconstruct {
            pie,
            trajectory,
            output,
        } => reconstruct_cmd(&pie, &trajectory, output),
    }
}

fn simulate_cmd(args: SimulateArgs) -> Result<i32, CliError> {
    // Either a model file/builtin, or a converted PIE JSON document.
    let path = std::path::Path::new(&args.model);
    let as_pie: Option<PieSystem> = if path.exists() {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text).map_err(LoadError::from)?;
        if v.get("pie").is_some() {
            Some(
                pie_from_value(v.get("pie").unwrap())
                    .map_err(|e| CliError::Other(e.to_string()))?,
            )
        } else if v.get("T").is_some() && v.get("A").is_some() {
            Some(pie_from_value(&v).map_err(|e| CliError::Other(e.to_string()))?)
        } else {
            None
        }
    } else {
        None
    };

    let (pie, mut cfg, signals) = match as_pie {
        Some(pie) => {
            let mut cfg = SimConfig::new(
                args.dt.unwrap_or(1e-3),
                args.tend.unwrap_or(1.0),
                args.modes.unwrap_or(32),
            );
            for src in &args.ic {
                cfg.initial.push(
                    Expr::parse(src, "s").map_err(|e| CliError::Other(e.to_string()))?,
                );
            }
            while cfg.initial.len() < pie.dims.n_xhat {
                cfg.initial
                    .push(Expr::parse("0", "s").expect("constant zero"));
            }
            cfg.initial_ode = args.ic_ode.clone();
            cfg.initial_ode.resize(pie.dims.n_x, 0.0);
            (pie, cfg, Signals::default())
        }
        None => {
            let loaded = load_model_arg(&args.model)?;
            let conv = convert_gpde(&loaded.model)?;
            let cfg = loaded.sim.ok_or_else(|| {
                CliError::Other("model file has no sim section; add one or simulate a PIE file".into())
            })?;
            (conv.pie, cfg, loaded.signals)
        }
    };
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(tend) = args.tend {
        cfg.t_end = tend;
    }
    if let Some(modes) = args.modes {
        cfg.modes = modes;
    }

    let disc = DiscretePie::new(&pie, cfg.modes).map_err(SimError::from)?;
    let traj = run_discrete(&disc, &cfg, &signals)?;

    match &args.output {
        Some(path) => {
            let f = std::fs::File::create(path)?;
            write_outputs_csv(&disc, &traj, f)?;
            // The snapshot file carries the internal (fundamental) state;
            // `reconstruct` maps it back to model states.
            let mut states_path = path.clone();
            states_path.set_extension("states.csv");
            let f = std::fs::File::create(&states_path)?;
            write_states_csv(&disc, &traj.t, &traj.states, f)?;
            println!(
                "wrote {} and {} ({} records)",
                path.display(),
                states_path.display(),
                traj.t.len()
            );
        }
        None => {
            write_outputs_csv(&disc, &traj, std::io::stdout().lock())?;
        }
    }
    Ok(EXIT_OK)
}

fn reconstruct_cmd(
    pie_path: &std::path::Path,
    traj_path: &std::path::Path,
    output: Option<PathBuf>,
) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(pie_path)?;
    let v: Value = serde_json::from_str(&text).map_err(LoadError::from)?;
    let pie = if let Some(inner) = v.get("pie") {
        pie_from_value(inner).map_err(|e| CliError::Other(e.to_string()))?
    } else {
        pie_from_value(&v).map_err(|e| CliError::Other(e.to_string()))?
    };

    let (ts, states, modes) = read_states_csv(traj_path, pie.dims.n_x, pie.dims.n_xhat)?;
    let disc = DiscretePie::new(&pie, modes).map_err(SimError::from)?;
    // Inputs are not recorded in the CSV; reconstruction applies the state
    // map alone.
    let rec: Vec<DVector<f64>> = states.iter().map(|x| &disc.m_t * x).collect();
    match output {
        Some(path) => {
            let f = std::fs::File::create(&path)?;
            write_states_csv(&disc, &ts, &rec, f)?;
            println!("wrote {}", path.display());
        }
        None => {
            write_states_csv(&disc, &ts, &rec, std::io::stdout().lock())?;
        }
    }
    Ok(EXIT_OK)
}

/// Reads the long-form state CSV written by `simulate` back into discrete
/// state vectors, inferring the collocation degree from the node count.
fn read_states_csv(
    path: &std::path::Path,
    n_x: usize,
    n_xhat: usize,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, usize), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(f64, String, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CliError::Other(format!(
                "{}:{}: expected 4 columns",
                path.display(),
                lineno + 1
            )));
        }
        let t: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::Other(format!("bad time at line {}", lineno + 1)))?;
        let value: f64 = parts[3]
            .parse()
            .map_err(|_| CliError::Other(format!("bad value at line {}", lineno + 1)))?;
        rows.push((t, parts[2].to_string(), value));
    }
    let mut ts: Vec<f64> = Vec::new();
    for (t, _, _) in &rows {
        if ts.last().is_none_or(|last| (last - t).abs() > 1e-15) {
            ts.push(*t);
        }
    }
    let per_step = rows.len() / ts.len().max(1);
    if per_step <= n_x || !(per_step - n_x).is_multiple_of(n_xhat.max(1)) {
        return Err(CliError::Other(
            "state CSV does not match the PIE dimensions".into(),
        ));
    }
    let nn = (per_step - n_x) / n_xhat.max(1);
    let mut states = Vec::with_capacity(ts.len());
    for (k, _) in ts.iter().enumerate() {
        let chunk = &rows[k * per_step..(k + 1) * per_step];
        let mut x = DVector::zeros(per_step);
        for (i, (_, _, v)) in chunk.iter().enumerate() {
            x[i] = *v;
        }
        states.push(x);
    }
    Ok((ts, states, nn - 1))
}

