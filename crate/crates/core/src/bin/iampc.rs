use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use iampc::controller::Artifacts;
use iampc::design::DesignResult;
use iampc::io;
use iampc::sim::{self, ScenarioConfig, VerifyOptions};
use iampc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "iampc",
    version,
    about = "Indirect-adaptive MPC for polytopic uncertain linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the design LMI and write the terminal ingredients.
    Design {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "design.ia")]
        out: PathBuf,
    },
    /// Compute C, the terminal set and the horizon for a design.
    Sets {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        design: PathBuf,
        #[arg(long, default_value = "suite")]
        out: PathBuf,
    },
    /// Run the closed-loop scenario and write artifacts and traces.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Reuse a design instead of solving the LMI.
        #[arg(long)]
        design: Option<PathBuf>,
        /// Reuse a set suite; requires --design.
        #[arg(long, requires = "design")]
        suite: Option<PathBuf>,
    },
    /// Check a simulation directory; exits with 1 on any failure.
    Verify {
        dir: PathBuf,
        /// Defaults to <dir>/report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also require ‖x(T)‖/‖x(0)‖ below this on nominal runs.
        #[arg(long)]
        convergence_ratio: Option<f64>,
    },
    /// Compare estimator filter gains on the same scenario.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        gains: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, requires = "design")]
        suite: Option<PathBuf>,
    },
}

const SIMULATION_FORMAT: &str = "iampc-simulation";

#[derive(Serialize, Deserialize)]
struct RunEntry {
    run: String,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct SimulationManifest {
    format: String,
    version: u32,
    model_hash: String,
    horizon: usize,
    steps: usize,
    seed: u64,
    runs: Vec<RunEntry>,
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    let cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_artifacts(cfg: &ScenarioConfig, design: Option<&Path>, suite: Option<&Path>) -> Result<Artifacts> {
    let model = cfg.model.build()?;
    let design = match design {
        Some(p) => io::read_design(p)?,
        None => sim::build_design(cfg).map_err(|e| e.in_stage("design"))?,
    };
    let suite = match suite {
        Some(p) => io::read_suite(p)?,
        None => sim::build_suite(cfg, &design).map_err(|e| e.in_stage("sets"))?,
    };
    Artifacts::new(model, design, suite)
}

fn report_design(design: &DesignResult, cfg: &ScenarioConfig) -> Result<()> {
    let model = cfg.model.build()?;
    println!("slack t = {:e}", design.slack);
    println!("eps = {:e}", design.eps_margin);
    println!("min block eigenvalue = {:e}", design.lmi_min_eigenvalue(&model)?);
    Ok(())
}

fn write_artifacts(dir: &Path, a: &Artifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_model(&dir.join("model.json"), &a.model)?;
    io::write_design(&dir.join("design.ia"), &a.design)?;
    io::write_suite(&dir.join("suite"), &a.suite)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Design { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let start = Instant::now();
            let design = sim::build_design(&cfg)?;
            report_design(&design, &cfg)?;
            io::write_design(&out, &design)?;
            println!("wrote {} in {:.2?}", out.display(), start.elapsed());
        }
        Command::Sets { config, design, out } => {
            let cfg = load_config(config.as_deref())?;
            let start = Instant::now();
            let design = io::read_design(&design)?;
            design.check_model(&cfg.model.build()?)?;
            let suite = sim::build_suite(&cfg, &design)?;
            io::write_suite(&out, &suite)?;
            println!(
                "C: {} rows, C_xu: {} rows, X_N: {} rows",
                suite.c.num_rows(),
                suite.cxu.num_rows(),
                suite.x_n.num_rows()
            );
            println!("N = {}", suite.n);
            println!("wrote {} in {:.2?}", out.display(), start.elapsed());
        }
        Command::Simulate {
            config,
            out,
            design,
            suite,
        } => {
            let cfg = load_config(config.as_deref())?;
            let start = Instant::now();
            let artifacts = Arc::new(load_artifacts(&cfg, design.as_deref(), suite.as_deref())?);
            println!("N = {}", artifacts.horizon());
            write_artifacts(&out, &artifacts)?;
            std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
            let traces = sim::run_scenario(&cfg, &artifacts)?;
            let trace_dir = out.join("traces");
            std::fs::create_dir_all(&trace_dir)?;
            let mut runs = Vec::with_capacity(traces.len());
            for tr in &traces {
                let file = format!("traces/{}.csv", tr.info.run);
                sim::write_csv_file(&out.join(&file), std::slice::from_ref(tr))?;
                runs.push(RunEntry {
                    run: tr.info.run.clone(),
                    file,
                });
            }
            io::write_json(
                &out.join("manifest.json"),
                &SimulationManifest {
                    format: SIMULATION_FORMAT.into(),
                    version: io::FORMAT_VERSION,
                    model_hash: artifacts.model.hash(),
                    horizon: artifacts.horizon(),
                    steps: cfg.steps,
                    seed: cfg.seed,
                    runs,
                },
            )?;
            println!(
                "{} runs of {} steps in {:.2?}",
                traces.len(),
                cfg.steps,
                start.elapsed()
            );
        }
        Command::Verify {
            dir,
            out,
            convergence_ratio,
        } => {
            let manifest: SimulationManifest = io::read_json(&dir.join("manifest.json"))?;
            if manifest.format != SIMULATION_FORMAT {
                return Err(Error::Parse(format!("{}: not a simulation manifest", dir.display())));
            }
            let artifacts = Artifacts::new(
                io::read_model(&dir.join("model.json"))?,
                io::read_design(&dir.join("design.ia"))?,
                io::read_suite(&dir.join("suite"))?,
            )?;
            if artifacts.model.hash() != manifest.model_hash {
                return Err(Error::ArtifactMismatch(
                    "manifest model hash differs from model.json".into(),
                ));
            }
            let mut traces = Vec::with_capacity(manifest.runs.len());
            for entry in &manifest.runs {
                traces.extend(sim::read_csv_file(&dir.join(&entry.file))?);
            }
            let opts = VerifyOptions {
                convergence_ratio,
                ..VerifyOptions::default()
            };
            let report = sim::verify_traces(&traces, &artifacts, &opts);
            let path = out.unwrap_or_else(|| dir.join("report.json"));
            io::write_json(&path, &report)?;
            println!(
                "{} runs, {} steps: {}",
                report.runs,
                report.steps,
                if report.passed { "PASS" } else { "FAIL" }
            );
            if let Some(g) = report.iss.gamma_hat {
                println!("estimated ISS gain = {g:e}");
            }
            for f in report.failures.iter().take(10) {
                println!("  {} failed in {} at step {}: {:e}", f.check, f.run, f.step, f.value);
            }
            println!("wrote {}", path.display());
            return Ok(report.passed);
        }
        Command::Sweep {
            config,
            gains,
            out,
            design,
            suite,
        } => {
            let cfg = load_config(config.as_deref())?;
            let artifacts = Arc::new(load_artifacts(&cfg, design.as_deref(), suite.as_deref())?);
            let summaries = sim::sweep_filter_gain(&cfg, &artifacts, &gains)?;
            sim::write_sweep_files(&out, &summaries)?;
            println!(
                "{:>10} {:>12} {:>10} {:>10} {:>10}",
                "gain", "peak V", "max settle", "mean", "unsettled"
            );
            for s in &summaries {
                println!(
                    "{:>10} {:>12.4e} {:>10} {:>10} {:>10}",
                    s.gain,
                    s.peak_value,
                    s.max_settling_step.map_or("-".into(), |v| v.to_string()),
                    s.mean_settling_step.map_or("-".into(), |v| format!("{v:.1}")),
                    s.unsettled_runs
                );
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
