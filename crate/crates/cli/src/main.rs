//! `lugre-lab`: run, compare, sweep and verify LuGre friction observer scenarios.

mod report;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use lugre_core::verify::{run_suite, Suite};

use report::{RunReport, VariantReport};
use scenario::{Scenario, Variant};

#[derive(Debug)]
pub enum CliError {
    /// Bad command line.
    Usage(String),
    /// The scenario does not parse or validate.
    Config(String),
    Diverged(String),
    VerifyFailed(usize),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::VerifyFailed(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Diverged(m) => write!(f, "{m}"),
            CliError::VerifyFailed(n) => write!(f, "{n} check(s) failed"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "lugre-lab", version, about = "LuGre friction observer simulations and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory and report.
    Run(ScenarioArgs),
    /// Simulate the same scenario under several observer or compensation variants.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Variants, optionally with overrides such as `existing:k=0.5`.
        #[arg(required = true, help = format!("Variants: {}", scenario::VARIANT_HELP))]
        variants: Vec<String>,
    },
    /// Run one scenario per value of a numeric config field.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Dotted field path, e.g. `controller.ki` or `observer.schedule.alpha`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, conflicts_with = "range", required_unless_present = "range")]
        values: Option<String>,
        /// `lo:hi:n` grid.
        #[arg(long)]
        range: Option<String>,
        /// Space the range logarithmically.
        #[arg(long, requires = "range")]
        log: bool,
    },
    /// Run a verification suite: gains, lemmas, oracle or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario: table1-velocity, table1-position or open-loop-sinusoid.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the scenario duration.
    #[arg(long)]
    duration: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, CliError> {
        let sc = scenario::load(self.config.as_deref(), self.preset.as_deref())?;
        scenario::finalize(sc, self.dt, self.duration)
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var("LUGRE_LAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("LUGRE_LAB_THREADS must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))
}

fn cmd_run(args: &ScenarioArgs) -> Result<(), CliError> {
    let sc = args.load()?;
    let traj = report::simulate(&sc.config)?;
    let out = args.out_dir()?;
    let csv = out.join(format!("{}.csv", sc.id));
    report::write_trajectory(&traj, &csv)?;
    let variant = sc.config.observer.map_or("scenario", |o| o.schedule.name());
    let run = RunReport {
        scenario: sc.id.clone(),
        command: "run",
        variants: vec![report::summarise(variant, &traj, csv)],
        report: out.join("report.json"),
    };
    report::write_json(&run, &run.report)?;
    print!("{}", report::table(&run));
    Ok(())
}

fn cmd_compare(args: &ScenarioArgs, specs: &[String]) -> Result<(), CliError> {
    if specs.len() < 2 {
        return Err(CliError::Usage(format!("compare needs at least 2 variants, got {}", specs.len())));
    }
    let sc = args.load()?;
    let variants: Vec<(String, Variant)> =
        specs.iter().map(|s| scenario::parse_variant(s)).collect::<Result<_, _>>()?;
    let configs: Vec<_> = variants
        .iter()
        .map(|(name, v)| scenario::apply_variant(&sc.config, v).map(|c| (name.clone(), c)))
        .collect::<Result<_, _>>()?;
    let out = args.out_dir()?.to_path_buf();
    let pool = thread_pool()?;

    let results: Vec<Result<VariantReport, CliError>> = pool.install(|| {
        configs
            .par_iter()
            .map(|(name, cfg)| {
                let traj = report::simulate(cfg)?;
                let csv = out.join(format!("{}__{}.csv", sc.id, file_safe(name)));
                report::write_trajectory(&traj, &csv)?;
                Ok(report::summarise(name, &traj, csv))
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut first_error = None;
    for ((name, _), r) in configs.iter().zip(results) {
        match r {
            Ok(v) => reports.push(v),
            Err(e) => {
                eprintln!("variant {name}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    let run = RunReport { scenario: sc.id, command: "compare", variants: reports, report: out.join("compare.json") };
    report::write_json(&run, &run.report)?;
    print!("{}", report::table(&run));
    first_error.map_or(Ok(()), Err)
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct SweepRow {
    value: f64,
    status: String,
    rmse: Option<f64>,
    steady_state_error: Option<f64>,
    overshoot: Option<f64>,
    settling_time: Option<f64>,
    decay_rate_e_z: Option<f64>,
    r_squared_e_z: Option<f64>,
    decay_rate_e_f: Option<f64>,
    r_squared_e_f: Option<f64>,
    lyapunov_monotone: Option<bool>,
}

impl SweepRow {
    fn new(value: f64, outcome: &Result<VariantReport, CliError>) -> Self {
        let mut row = SweepRow {
            value,
            status: "ok".into(),
            rmse: None,
            steady_state_error: None,
            overshoot: None,
            settling_time: None,
            decay_rate_e_z: None,
            r_squared_e_z: None,
            decay_rate_e_f: None,
            r_squared_e_f: None,
            lyapunov_monotone: None,
        };
        match outcome {
            Err(CliError::Diverged(_)) => row.status = "diverged".into(),
            Err(_) => row.status = "invalid".into(),
            Ok(v) => {
                if let Some(m) = v.tracking {
                    row.rmse = Some(m.rmse);
                    row.steady_state_error = Some(m.steady_state_error);
                    row.overshoot = Some(m.overshoot);
                    row.settling_time = Some(m.settling_time);
                }
                let fit = |ch: &str| v.decay.iter().find(|d| d.channel == ch).and_then(|d| d.fit);
                row.decay_rate_e_z = fit("e_z").map(|f| f.rate);
                row.r_squared_e_z = fit("e_z").map(|f| f.r_squared);
                row.decay_rate_e_f = fit("e_f").map(|f| f.rate);
                row.r_squared_e_f = fit("e_f").map(|f| f.r_squared);
                row.lyapunov_monotone = v.lyapunov_monotone.as_ref().map(|c| c.passed);
            }
        }
        row
    }
}

fn cmd_sweep(
    args: &ScenarioArgs,
    param: &str,
    values: Option<&str>,
    range: Option<&str>,
    log: bool,
) -> Result<(), CliError> {
    let grid = match (values, range) {
        (Some(v), _) => scenario::parse_values(v)?,
        (None, Some(r)) => scenario::parse_range(r, log)?,
        (None, None) => return Err(CliError::Usage("sweep needs --values or --range".into())),
    };
    let sc = args.load()?;
    // Reject a bad path or value before any run starts.
    let configs: Vec<_> = grid.iter().map(|&x| scenario::with_field(&sc.config, param, x)).collect::<Result<_, _>>()?;
    let out = args.out_dir()?.to_path_buf();
    let pool = thread_pool()?;

    let outcomes: Vec<Result<VariantReport, CliError>> = pool.install(|| {
        configs
            .par_iter()
            .zip(&grid)
            .map(|(cfg, &x)| {
                scenario::validate(cfg)?;
                let traj = report::simulate(cfg)?;
                Ok(report::summarise(&format!("{param}={x}"), &traj, PathBuf::new()))
            })
            .collect()
    });

    let path = out.join("sweep.csv");
    let mut writer =
        csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut diverged = 0;
    for (&x, outcome) in grid.iter().zip(&outcomes) {
        if let Err(e) = outcome {
            eprintln!("{param}={x}: {e}");
            diverged += usize::from(matches!(e, CliError::Diverged(_)));
        }
        writer.serialize(SweepRow::new(x, outcome)).map_err(|e| CliError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Io(e.to_string()))?;

    println!("scenario {} sweep over {param}", sc.id);
    println!("{:>12}  {:>9}  {:>11}  {:>11}", "value", "status", "rmse", "rate_e_z");
    for (&x, outcome) in grid.iter().zip(&outcomes) {
        let row = SweepRow::new(x, outcome);
        let f = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.4e}"));
        println!("{x:>12.5e}  {:>9}  {:>11}  {:>11}", row.status, f(row.rmse), f(row.decay_rate_e_z));
    }
    println!("wrote {}", path.display());

    if let Some(e) = outcomes.into_iter().find_map(|o| o.err().filter(|e| !matches!(e, CliError::Diverged(_)))) {
        return Err(e);
    }
    if diverged > 0 {
        return Err(CliError::Diverged(format!("{diverged} of {} runs diverged", grid.len())));
    }
    Ok(())
}

fn cmd_verify(suite: &str, seed: u64) -> Result<(), CliError> {
    let suite: Suite = suite.parse().map_err(CliError::Usage)?;
    let report = run_suite(suite, seed).map_err(|e| CliError::Io(format!("suite could not complete: {e}")))?;
    println!("suite {} (seed {seed})", report.suite.name());
    for check in &report.checks {
        println!("{check}");
    }
    let failed = report.failures().count();
    println!("{} of {} checks passed", report.checks.len() - failed, report.checks.len());
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare { scenario, variants } => cmd_compare(scenario, variants),
        Command::Sweep { scenario, param, values, range, log } => {
            cmd_sweep(scenario, param, values.as_deref(), range.as_deref(), *log)
        }
        Command::Verify { suite, seed } => cmd_verify(suite, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lugre-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
