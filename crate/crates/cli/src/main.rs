use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tube_nmpc::controllers::ControllerKind;
use tube_nmpc::harness::output::{self, CSV_SCHEMA_VERSION};
use tube_nmpc::harness::{
    monte_carlo, run_controller, run_metrics, wy_sweep_specs, ControllerSpec, HarnessError, MetricsReport,
    MonteCarloResult, RunFailure, Scenario, ScenarioContext,
};
use tube_nmpc::parallel::ExecutionConfig;

const THREADS_ENV: &str = "TUBE_NMPC_THREADS";

#[derive(Parser)]
#[command(name = "tube-nmpc", version, about = "Closed-loop NMPC experiments on a co-digestion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the diet schedule and reference outputs on the control grid.
    References {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One closed loop.
    Run {
        scenario: PathBuf,
        /// Controller name; the scenario's own when absent.
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Realization index within the seed.
        #[arg(long, default_value_t = 0)]
        run_index: u64,
        /// Exact plant: no kinetic error, noise or knockdown.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired Monte-Carlo batch over one or more controllers.
    Montecarlo {
        scenario: PathBuf,
        /// Comma-separated `kind` or `kind:preset` entries.
        #[arg(long, value_delimiter = ',')]
        controllers: Vec<String>,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Monte-Carlo batches over the seven output-weight diagonals.
    WySweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "classical,offline-tube")]
        controllers: Vec<String>,
        #[command(flatten)]
        batch: BatchArgs,
    },
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also run each controller once without uncertainty.
    #[arg(long)]
    nominal: bool,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Simulation(String),
    Aborted(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::Aborted(_) => 4,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Parse(_) | HarnessError::Io { .. } => Failure::Config(e.to_string()),
            other => Failure::Simulation(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    scenario: PathBuf,
    command: String,
    args: Vec<String>,
    seed: u64,
    artifact_version: String,
    csv_schema: u32,
    out_dir: PathBuf,
    started_unix: f64,
    status: String,
    elapsed_seconds: Option<f64>,
}

struct Session {
    manifest: RunManifest,
    started: Instant,
}

impl Session {
    fn open(scenario: &Path, command: &str, seed: u64, out: &Path) -> Result<Self, Failure> {
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let s = Self {
            manifest: RunManifest {
                scenario: scenario.to_path_buf(),
                command: command.to_string(),
                args: std::env::args().skip(1).collect(),
                seed,
                artifact_version: env!("CARGO_PKG_VERSION").to_string(),
                csv_schema: CSV_SCHEMA_VERSION,
                out_dir: out.to_path_buf(),
                started_unix,
                status: "running".into(),
                elapsed_seconds: None,
            },
            started: Instant::now(),
        };
        s.write()?;
        Ok(s)
    }

    fn write(&self) -> Result<(), Failure> {
        let json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        output::write_atomic(&self.manifest.out_dir.join("manifest.json"), &json)?;
        Ok(())
    }

    fn close(mut self, status: &str) -> Result<(), Failure> {
        self.manifest.status = status.to_string();
        self.manifest.elapsed_seconds = Some(self.started.elapsed().as_secs_f64());
        self.write()
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Ok(Scenario::from_file(path)?)
}

fn context(scenario: Scenario, path: &Path) -> Result<ScenarioContext, Failure> {
    Ok(ScenarioContext::new(scenario, path.parent())?)
}

fn out_dir(flag: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    flag.or_else(|| scenario.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name))
}

fn execution(sequential: bool) -> Result<ExecutionConfig, Failure> {
    if sequential {
        return Ok(ExecutionConfig::sequential());
    }
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
        ),
        Err(_) => None,
    };
    Ok(ExecutionConfig::parallel(threads))
}

fn valid_names() -> String {
    ControllerKind::ALL.map(|k| k.name()).join(", ")
}

fn parse_kind(name: &str) -> Result<ControllerKind, Failure> {
    ControllerKind::parse(name.trim())
        .ok_or_else(|| Failure::Config(format!("unknown controller '{name}'; valid: {}", valid_names())))
}

fn parse_spec(s: &str) -> Result<ControllerSpec, Failure> {
    let kind = s.split(':').next().unwrap_or_default();
    parse_kind(kind)?;
    ControllerSpec::parse(s).ok_or_else(|| Failure::Config(format!("bad controller spec '{s}'")))
}

fn file_label(i: usize, label: &str) -> String {
    let clean: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    format!("{i:02}_{clean}")
}

fn print_table(reports: &[&MetricsReport]) {
    println!(
        "{:<32} {:>5} {:>6} {:>16} {:>16} {:>9} {:>6}",
        "controller", "runs", "failed", "RMSE qM; ratio %", "sigma S2 mean;max", "S2 max", "sat"
    );
    for r in reports {
        println!(
            "{:<32} {:>5} {:>6} {:>7.2}; {:>6.2} {:>7.3}; {:>6.3} {:>9.3} {:>6.3}",
            r.label,
            r.n_runs,
            r.n_failed,
            r.rmse_rel[0],
            r.rmse_rel[1],
            r.sigma_bar_s2,
            r.sigma_max_s2,
            r.s2_max,
            r.saturation_fraction
        );
    }
}

fn cmd_references(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let scenario = load(path)?;
    let out = out_dir(out, &scenario);
    let seed = scenario.uncertainty.seed;
    let session = Session::open(path, "references", seed, &out)?;
    let ctx = context(scenario, path)?;
    let names: Vec<String> = ctx.nominal.config.feedstocks.iter().map(|f| f.name.clone()).collect();
    output::write_references(
        &out.join("d_ref.csv"),
        &out.join("y_ref.csv"),
        &ctx.references,
        ctx.nominal.layout(),
        &names,
    )?;
    println!("references for {} written to {}", ctx.scenario.name, out.display());
    session.close("ok")
}

struct RunOpts {
    controller: Option<String>,
    seed: Option<u64>,
    run_index: u64,
    exact: bool,
    out: Option<PathBuf>,
}

fn cmd_run(path: &Path, o: RunOpts) -> Result<(), Failure> {
    let mut scenario = load(path)?;
    let kind = match &o.controller {
        Some(name) => parse_kind(name)?,
        None => scenario.controller.mode,
    };
    if let Some(seed) = o.seed {
        scenario.uncertainty.seed = seed;
    }
    if o.exact {
        scenario = scenario.without_uncertainty();
    }
    let out = out_dir(o.out, &scenario);
    let session = Session::open(path, "run", scenario.uncertainty.seed, &out)?;
    let ctx = context(scenario, path)?;
    let real = ctx.realization(o.run_index);
    let run = run_controller(&ctx, kind, &real)?;
    let layout = ctx.nominal.layout();
    output::write_runs_csv(&out.join("run.csv"), layout, &[&run])?;
    output::write_trajectory_csv(&out.join("trajectory.csv"), layout, &run)?;
    output::write_realizations_csv(&out.join("realizations.csv"), std::slice::from_ref(&real))?;
    let report = run_metrics(&ctx, kind.name(), &run);
    output::write_metrics_csv(&out.join("metrics.csv"), &[&report])?;
    print_table(&[&report]);
    match &run.failure {
        None => session.close("ok"),
        Some(RunFailure::SolverAbort { step }) => {
            session.close("aborted")?;
            Err(Failure::Aborted(format!(
                "solver aborted at step {step}; partial results kept in {}",
                out.display()
            )))
        }
        Some(RunFailure::Simulation { step, message }) => {
            session.close("failed")?;
            Err(Failure::Simulation(format!("plant simulation failed at step {step}: {message}")))
        }
    }
}

fn write_batch(ctx: &ScenarioContext, mc: &MonteCarloResult, out: &Path) -> Result<(), Failure> {
    let layout = ctx.nominal.layout();
    output::write_realizations_csv(&out.join("realizations.csv"), &mc.realizations)?;
    for (i, r) in mc.results.iter().enumerate() {
        let runs: Vec<_> = r.runs.iter().collect();
        output::write_runs_csv(&out.join(format!("runs_{}.csv", file_label(i, &r.spec.label))), layout, &runs)?;
        if let Some(nom) = &r.nominal {
            let name = format!("nominal_{}.csv", file_label(i, &r.spec.label));
            output::write_runs_csv(&out.join(name), layout, &[nom])?;
        }
    }
    let reports: Vec<&MetricsReport> = mc.results.iter().map(|r| &r.report).collect();
    output::write_metrics_csv(&out.join("metrics.csv"), &reports)?;
    print_table(&reports);
    Ok(())
}

fn batch(path: &Path, command: &str, specs: Vec<ControllerSpec>, b: BatchArgs) -> Result<(), Failure> {
    let mut scenario = load(path)?;
    if let Some(n) = b.runs {
        if n == 0 {
            return Err(Failure::Config("--runs must be at least 1".into()));
        }
        scenario.uncertainty.n_runs = n;
    }
    if let Some(seed) = b.seed {
        scenario.uncertainty.seed = seed;
    }
    let exec = execution(b.sequential)?;
    let out = out_dir(b.out, &scenario);
    let session = Session::open(path, command, scenario.uncertainty.seed, &out)?;
    let ctx = context(scenario, path)?;
    let mc = monte_carlo(&ctx, &specs, exec, b.nominal)?;
    write_batch(&ctx, &mc, &out)?;
    if mc.results.iter().all(|r| r.report.n_failed == r.report.n_runs) {
        session.close("failed")?;
        return Err(Failure::Simulation("every run aborted".into()));
    }
    session.close("ok")
}

fn cmd_montecarlo(path: &Path, controllers: Vec<String>, b: BatchArgs) -> Result<(), Failure> {
    let specs = if controllers.is_empty() {
        vec![ControllerSpec::new(load(path)?.controller.mode)]
    } else {
        controllers.iter().map(|s| parse_spec(s)).collect::<Result<_, _>>()?
    };
    batch(path, "montecarlo", specs, b)
}

fn cmd_wy_sweep(path: &Path, controllers: Vec<String>, b: BatchArgs) -> Result<(), Failure> {
    let kinds: Vec<ControllerKind> = controllers.iter().map(|s| parse_kind(s)).collect::<Result<_, _>>()?;
    let base = load(path)?.controller.weights;
    batch(path, "wy-sweep", wy_sweep_specs(&kinds, &base), b)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::References { scenario, out } => cmd_references(&scenario, out),
        Command::Run {
            scenario,
            controller,
            seed,
            run_index,
            exact,
            out,
        } => cmd_run(
            &scenario,
            RunOpts {
                controller,
                seed,
                run_index,
                exact,
                out,
            },
        ),
        Command::Montecarlo {
            scenario,
            controllers,
            batch,
        } => cmd_montecarlo(&scenario, controllers, batch),
        Command::WySweep {
            scenario,
            controllers,
            batch,
        } => cmd_wy_sweep(&scenario, controllers, batch),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) | Failure::Simulation(m) | Failure::Aborted(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
