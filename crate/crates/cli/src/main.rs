//! `gapwatch` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gapwatch::config::{dump_config, load_config, parse_override, ConfigError};
use gapwatch::controller::check_stability;
use gapwatch::monitor::compute_limits;
use gapwatch::oracle::run_oracle_suite;
use gapwatch::output::write_run;
use gapwatch::sim::{run, LeadSource, SimError};
use gapwatch::trajectory::synth_oscillation_profile;
use gapwatch::SimConfigF64;

#[derive(Parser)]
#[command(
    name = "gapwatch",
    version,
    about = "Platoon time-gap monitoring simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write records.csv, events.jsonl and summary.json
    Run(Common),
    /// Write the synthetic lead acceleration profile as profile.csv
    SynthProfile(Common),
    /// Validate the configuration and print its canonical form
    CheckConfig(Common),
    /// Cross-check the closed-form posterior against grid quadrature
    Oracle {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Largest acceptable relative error
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (`section.key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable, applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory
    #[arg(long, env = "GAPWATCH_OUT", default_value = "out")]
    out: PathBuf,
    /// Shorthand for `--set sim.rng_seed=N`
    #[arg(long)]
    seed: Option<u64>,
}

struct Failure {
    code: &'static str,
    message: String,
    exit: u8,
}

impl Failure {
    fn validation(code: &'static str, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
            exit: 1,
        }
    }

    fn runtime(code: &'static str, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
            exit: 2,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::validation(e.code(), e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(m) => Failure::validation("InvariantViolation", m),
            SimError::Trajectory(e) => Failure::validation("Trajectory", e),
            SimError::Estimator(e) => Failure::runtime("Estimator", e),
            e @ SimError::Collision { .. } => Failure::runtime("CollisionDetected", e),
        }
    }
}

impl Common {
    fn load(&self) -> Result<SimConfigF64, Failure> {
        let mut overrides = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(seed) = self.seed {
            overrides.push(("sim.rng_seed".into(), seed.to_string()));
        }
        Ok(load_config(self.config.as_deref(), &overrides)?)
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::runtime("Io", format!("{}: {e}", path.display()))
}

fn cmd_run(args: &Common) -> Result<(), Failure> {
    let cfg = args.load()?;
    let output = run(&cfg)?;
    write_run(&output, &args.out).map_err(|e| io_failure(&args.out, e))?;
    let s = &output.summary;
    let triggers: usize = s.vehicles.iter().map(|v| v.trigger_times.len()).sum();
    println!(
        "wrote {} records, {} events to {} ({} excursions, {} setting changes)",
        output.records.len(),
        output.events.len(),
        args.out.display(),
        s.total_violations,
        triggers
    );
    match output.aborted {
        Some(reason) => Err(Failure::runtime("CollisionDetected", reason)),
        None => Ok(()),
    }
}

fn cmd_synth_profile(args: &Common) -> Result<(), Failure> {
    let cfg = args.load()?;
    let LeadSource::Synth {
        v_low,
        v_high,
        a_mag,
        n_cycles,
    } = cfg.lead.source
    else {
        return Err(Failure::validation(
            "InvariantViolation",
            "synth-profile needs lead.source = synth",
        ));
    };
    let profile = synth_oscillation_profile(v_low, v_high, a_mag, n_cycles, cfg.dt)
        .map_err(|e| Failure::validation("Trajectory", e))?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let path = args.out.join("profile.csv");
    let file = std::fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    profile
        .write_csv(&mut w)
        .map_err(|e| io_failure(&path, e))?;
    std::io::Write::flush(&mut w).map_err(|e| io_failure(&path, e))?;
    println!("wrote {} samples to {}", profile.len(), path.display());
    Ok(())
}

fn cmd_check_config(args: &Common) -> Result<(), Failure> {
    let cfg = args.load()?;
    print!("{}", dump_config(&cfg)?);
    let l = compute_limits(&cfg.chart);
    let eig = check_stability(&cfg.controller);
    println!("# limits: lcl {} cl {} ucl {}", l.lcl, l.cl, l.ucl);
    println!(
        "# closed-loop eigenvalues: {}",
        eig.iter()
            .map(|z| format!("{:.4}{:+.4}i", z.re, z.im))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn cmd_oracle(cases: usize, seed: u64, tol: f64) -> Result<(), Failure> {
    let r = run_oracle_suite(cases, seed);
    println!(
        "{} cases: max relative error mean {:.3e}, covariance {:.3e}",
        r.cases, r.max_mean_rel_err, r.max_cov_rel_err
    );
    if r.max_mean_rel_err.max(r.max_cov_rel_err) > tol {
        return Err(Failure::validation(
            "OracleMismatch",
            format!("deviation exceeds {tol:e}"),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::SynthProfile(a) => cmd_synth_profile(a),
        Command::CheckConfig(a) => cmd_check_config(a),
        Command::Oracle { cases, seed, tol } => cmd_oracle(*cases, *seed, *tol),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ERROR {}: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}
