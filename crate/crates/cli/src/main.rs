//! `memdimer`: spectra, single runs and phase-map sweeps of PT-symmetric LC
//! dimers with memory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use memdimer_core::circuit::{eigenvalues_closed_form, gamma_c, gamma_pt};
use memdimer_core::diagnostics::{classify_phase, Phase};
use memdimer_core::dynamics::{integrate, DynamicsError};
use memdimer_core::scenario::{ConfigError, ScenarioConfig, VariantKind};
use memdimer_core::sweep::{run_sweep, write_sweep, SweepError, SweepSpec, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "memdimer",
    version,
    about = "PT-symmetric LC dimers with memristive or meminductive elements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form eigenvalues of the static dimer over a range of gamma/gamma_PT.
    Spectrum(Common),
    /// Integrate every run of a scenario; writes trajectory CSV and JSON summary.
    Simulate(Common),
    /// Amplification-rate phase map over the scenario's two sweep axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        parallel: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Step size in periods T0 (overrides the scenario).
    #[arg(long)]
    dt: Option<f64>,
    /// Run length in periods T0 (overrides the scenario).
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Amplification window in periods T0 (overrides the scenario).
    #[arg(long)]
    tau: Option<f64>,
}

enum CliError {
    Config(String),
    Io(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(c) => c.into(),
            SweepError::Io { .. } => CliError::Io(e.to_string()),
            SweepError::Schema { .. } => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        self.apply(&mut cfg)?;
        std::fs::create_dir_all(&self.out).map_err(io_err(&self.out))?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), CliError> {
        for (name, value) in [("dt", self.dt), ("t_end", self.t_end), ("tau", self.tau)] {
            if let Some(v) = value {
                cfg.set_field(name, v)?;
            }
        }
        cfg.validate()?;
        Ok(())
    }
}

fn cmd_spectrum(args: &Common) -> Result<(), CliError> {
    let cfg = args.load()?;
    if cfg.variant != VariantKind::Static {
        return Err(CliError::Config("spectrum needs a static scenario".into()));
    }
    let range = cfg.spectrum.clone().unwrap_or_default();
    let mu = cfg.circuit.mu;
    let g_pt = gamma_pt(mu, 1.0);
    let mut out = String::new();
    writeln!(out, "# schema={SCHEMA_VERSION}").unwrap();
    writeln!(out, "# config_hash={}", cfg.hash()).unwrap();
    writeln!(out, "# mu={mu}").unwrap();
    out.push_str("gamma_rel,re_1,re_2,re_3,re_4,im_1,im_2,im_3,im_4\n");
    for k in 0..range.points {
        let rel =
            range.gamma_rel_min + (range.gamma_rel_max - range.gamma_rel_min) * k as f64 / (range.points - 1) as f64;
        let eps = eigenvalues_closed_form(mu, rel * g_pt, 1.0)
            .map_err(|e| CliError::Config(e.to_string()))?
            .nonzero();
        write!(out, "{rel}").unwrap();
        for e in &eps {
            write!(out, ",{}", e.re).unwrap();
        }
        for e in &eps {
            write!(out, ",{}", e.im).unwrap();
        }
        out.push('\n');
    }
    write_file(&args.out.join("spectrum.csv"), &out)?;
    write_file(&args.out.join("spectrum.toml"), &cfg.to_toml_string())?;
    println!(
        "spectrum: {} rows, gamma_PT = {g_pt}, gamma_c/gamma_PT = {}",
        range.points,
        gamma_c(mu, 1.0) / g_pt
    );
    Ok(())
}

fn cmd_simulate(args: &Common) -> Result<(), CliError> {
    let cfg = args.load()?;
    let runs = cfg.expand_runs()?;
    // resolve everything before integrating anything
    let mut resolved = Vec::with_capacity(runs.len());
    for (label, run) in &runs {
        let mut run = run.clone();
        args.apply(&mut run)?;
        let r = run.resolve()?;
        if r.settings.t_end + 1e-9 * r.tau < 2.0 * r.tau {
            return Err(CliError::Config(format!("run `{label}`: t_end must be at least 2 tau")));
        }
        resolved.push((label, run, r));
    }
    for (label, run, r) in resolved {
        let period = r.params.period();
        let base = json!({
            "schema": SCHEMA_VERSION,
            "label": label,
            "config_hash": run.hash(),
            "config": run.normalized(),
        });
        let summary = match integrate(&r.params, &r.variant, r.phi0, r.mem0, &r.settings) {
            Ok(traj) => {
                let csv_path = args.out.join(format!("{label}.csv"));
                let mut buf = format!(
                    "# schema={SCHEMA_VERSION}\n# config_hash={}\n# label={label}\n",
                    run.hash()
                )
                .into_bytes();
                traj.write_csv(&mut buf, period).map_err(io_err(&csv_path))?;
                std::fs::write(&csv_path, buf).map_err(io_err(&csv_path))?;
                let label_info =
                    classify_phase(&traj, r.tau, r.threshold).map_err(|e| CliError::Config(e.to_string()))?;
                let final_avg = traj.gamma_avg.as_ref().and_then(|g| g.last().copied());
                println!(
                    "{label}: phase={} lambda_amp={:.6e} diverged={}",
                    label_info.label,
                    label_info.lambda_amp,
                    traj.diverged()
                );
                let mut s = base;
                s["lambda_amp"] = json!(label_info.lambda_amp);
                s["phase"] = json!(label_info.label.as_str());
                s["tau_used_periods"] = json!(label_info.tau_used / period);
                s["diverged"] = json!(traj.diverged());
                s["final_gamma_avg"] = json!(final_avg);
                s["final_gamma_avg_rel"] = json!(final_avg.map(|g| g / r.gamma_pt));
                s["final_energy_ratio"] = json!(traj.energy.last().unwrap() / traj.energy[0]);
                s["steps"] = json!(traj.steps);
                s
            }
            Err(DynamicsError::Diverged { time, .. }) => {
                println!("{label}: state became non-finite at t = {:.3} T0", time / period);
                let mut s = base;
                s["lambda_amp"] = json!(null);
                s["phase"] = json!(null);
                s["diverged"] = json!(true);
                s["error"] = json!(format!("state became non-finite at t = {} T0", time / period));
                s
            }
            Err(e) => return Err(CliError::Config(e.to_string())),
        };
        let text = serde_json::to_string_pretty(&summary).expect("summary is valid JSON") + "\n";
        write_file(&args.out.join(format!("{label}.json")), &text)?;
    }
    Ok(())
}

fn cmd_sweep(args: &Common, parallel: Option<usize>) -> Result<(), CliError> {
    let cfg = args.load()?;
    let spec = SweepSpec::from_config(&cfg)?;
    let workers = parallel
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let result = run_sweep(&spec, workers)?;
    write_sweep(&result, &args.out.join("sweep.csv"))?;
    let broken = result
        .cells
        .iter()
        .filter(|c| c.label() == Some(Phase::PTBroken))
        .count();
    let failed = result.cells.iter().filter(|c| c.label().is_none()).count();
    println!(
        "sweep: {} cells ({} broken, {} failed), {} workers, {} steps, {:.2} s",
        result.cells.len(),
        broken,
        failed,
        result.stats.workers,
        result.stats.total_steps,
        result.stats.wall_time.as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep { common, parallel } => cmd_sweep(common, *parallel),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
