use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmnls_lab::config::{parse_config, Experiment, RunConfig};
use dmnls_lab::error::Result;
use dmnls_lab::experiments::{run, selftest};
use dmnls_lab::report_io::{write_report, write_selftest};

#[derive(Parser)]
#[command(name = "dmnls-lab", version, about = "NLS / dispersion-managed NLS laboratory on the 2-D torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one equation from the configured initial data.
    Simulate(RunArgs),
    /// Compare rescaled NLS and dispersion-managed runs over a lambda sweep.
    LimitStudy(RunArgs),
    /// Split the defect of rescaled NLS solutions at the cutoff frequency.
    DefectScan(RunArgs),
    /// Measure the response of the dispersion-managed flow to perturbations.
    Stability(RunArgs),
    /// Scan the shifted Duhamel ratio for seeded random forcings.
    StrichartzProbe(RunArgs),
    /// Run the invariant suite at small size.
    Selftest(RunArgs),
    /// Re-run the experiment recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// File of `key = value` lines, applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    knobs: Knobs,
}

macro_rules! knobs {
    ($($field:ident),* $(,)?) => {
        #[derive(Args)]
        struct Knobs {
            $(
                #[arg(long)]
                $field: Option<String>,
            )*
        }

        impl Knobs {
            fn pairs(&self) -> Vec<(String, String)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field).to_string(), v.clone()));
                    }
                )*
                out
            }
        }
    };
}

knobs!(
    grid_n,
    box_length,
    dt,
    t_final,
    lambda_list,
    eta_list,
    quad_nodes,
    theta_grid,
    cutoff_n,
    seed,
    snapshot_stride,
    output_dir,
    equation,
    method,
    initial_data,
    amplitude,
    width,
    probe_count,
    shift_grid,
    probe_times,
    probe_band,
    write_snapshots,
    record_runtime,
    richardson_check,
);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    let (experiment, args) = match command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::LimitStudy(a) => (Experiment::LimitStudy, a),
        Command::DefectScan(a) => (Experiment::DefectScan, a),
        Command::Stability(a) => (Experiment::Stability, a),
        Command::StrichartzProbe(a) => (Experiment::StrichartzProbe, a),
        Command::Selftest(a) => {
            let pairs = a.knobs.pairs();
            let explicit_dir = pairs.iter().any(|(k, _)| k == "output_dir");
            let cfg = parse_config(Experiment::Selftest, a.config.as_deref(), &pairs)?;
            return run_selftest(&cfg, explicit_dir || a.config.is_some());
        }
        Command::Replay {
            manifest,
            output_dir,
        } => {
            let mut cfg = RunConfig::from_manifest(&manifest)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if cfg.experiment == Experiment::Selftest {
                return run_selftest(&cfg, true);
            }
            return run_experiment(&cfg);
        }
    };
    let cfg = parse_config(experiment, args.config.as_deref(), &args.knobs.pairs())?;
    run_experiment(&cfg)
}

fn run_experiment(cfg: &RunConfig) -> Result<u8> {
    let report = run(cfg)?;
    let files = write_report(&report, cfg, &cfg.output_dir)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    for (name, slope) in &report.fitted_slopes {
        println!("slope {name} = {slope:.6}");
    }
    for flag in &report.flags {
        println!("flag: {flag}");
    }
    for failure in &report.failures {
        eprintln!("row failed: {failure}");
    }
    Ok(if report.failures.is_empty() { 0 } else { 1 })
}

fn run_selftest(cfg: &RunConfig, write: bool) -> Result<u8> {
    let report = selftest();
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        match &c.error {
            Some(e) => println!("{status} {}: {e}", c.name),
            None => println!("{status} {}: {:e} (limit {:e})", c.name, c.value, c.limit),
        }
    }
    println!(
        "{} of {} checks passed in {:.1} s",
        report.checks.len() - report.failures().len(),
        report.checks.len(),
        report.seconds
    );
    if write {
        let p = write_selftest(&report, &cfg.output_dir)?;
        println!("wrote {}", p.display());
    }
    Ok(if report.passed() { 0 } else { 1 })
}
