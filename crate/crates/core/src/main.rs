use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use meanfield_lab::scenario::{
    all_stages, convergence_sweep, describe_sweep, run_stages, sweep_artifact, write_outputs, Artifact,
    Scenario, Stage, SweepTarget,
};
use meanfield_lab::verify::run_all;
use meanfield_lab::Error;

/// Mean-field dissipative spin chain: macroscopic, mesoscopic and exact
/// finite-N dynamics.
#[derive(Parser, Debug)]
#[command(name = "meanfield-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the scenario.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for per-N runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Macroscopic trajectory CSV.
    Macro,
    /// Fluctuation covariance CSV along the macroscopic trajectory.
    Meso,
    /// Finite-N observables, one CSV (and characteristic-function JSON) per N.
    Micro,
    /// Stationary-state report for the truncated single-mode example.
    Fock,
    /// Every configured stage.
    Run,
    /// Convergence sweep over the scenario's N values.
    Sweep {
        #[arg(long, value_enum)]
        target: TargetArg,
    },
    /// Runs the acceptance suite.
    Verify {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    MacroMeans,
    FluctCov,
    PairCorr,
}

impl From<TargetArg> for SweepTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::MacroMeans => SweepTarget::MacroMeans,
            TargetArg::FluctCov => SweepTarget::FluctCov,
            TargetArg::PairCorr => SweepTarget::PairCorr,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if matches!(e, Error::Io { .. }) {
        1
    } else {
        3
    }
}

fn load(cli: &Cli) -> Result<(Scenario, PathBuf), Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    Ok((cfg, out))
}

fn emit(cfg: &Scenario, out: &Path, artifacts: &[Artifact]) -> Result<(), Error> {
    let manifest = write_outputs(out, artifacts, cfg)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, out.join(&f.path).display());
    }
    println!("manifest: {}", out.join(meanfield_lab::scenario::MANIFEST_NAME).display());
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, Error> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let stages = match &cli.command {
        Command::Verify { only } => {
            if let Some(bad) = only.iter().find(|i| !(1..=12).contains(*i)) {
                return Err(Error::Config(format!("unknown criterion {bad}")));
            }
            let outcomes = run_all(only, |o| println!("{o}"));
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            if let Some(out) = &cli.out {
                let reports: Vec<Artifact> = outcomes
                    .iter()
                    .filter_map(|o| o.report.as_ref().map(sweep_artifact))
                    .collect();
                if !reports.is_empty() {
                    std::fs::create_dir_all(out).map_err(|source| Error::Io { path: out.clone(), source })?;
                    for a in &reports {
                        let p = out.join(&a.name);
                        std::fs::write(&p, &a.bytes).map_err(|source| Error::Io { path: p.clone(), source })?;
                        println!("{}", p.display());
                    }
                }
            }
            return Ok(if failed == 0 { 0 } else { 1 });
        }
        Command::Macro => vec![Stage::Macro],
        Command::Meso => vec![Stage::Meso],
        Command::Micro => vec![Stage::Micro],
        Command::Fock => vec![Stage::Fock],
        Command::Run => Vec::new(),
        Command::Sweep { target } => {
            let (cfg, out) = load(cli)?;
            let report = convergence_sweep(&cfg, (*target).into())?;
            println!("{}", describe_sweep(&report));
            emit(&cfg, &out, &[sweep_artifact(&report)])?;
            return Ok(0);
        }
    };
    let (cfg, out) = load(cli)?;
    let stages = if stages.is_empty() { all_stages(&cfg) } else { stages };
    let v = cfg.validate()?;
    let artifacts = run_stages(&v, &stages)?;
    emit(&cfg, &out, &artifacts)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
