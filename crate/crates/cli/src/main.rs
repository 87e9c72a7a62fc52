use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use usc_radiance::scenario::cache::PointCache;
use usc_radiance::scenario::config::{apply_params, ConfigFile};
use usc_radiance::scenario::validate::invariant_suite;
use usc_radiance::scenario::{run, RunContext, Scenario, SweepSpec};
use usc_radiance::{Error, SystemParams};

mod plot;

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "usc-radiance", version, about = "Collective radiance sweeps for qubits in an ultrastrongly coupled resonator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Run configuration (`[system]` plus one section per scenario).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for CSV and SVG output.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Also write an SVG plot per table.
    #[arg(long, global = true)]
    plot: bool,
    /// Replace the photon cutoff n_max of the base parameters.
    #[arg(long, global = true, value_name = "N")]
    nmax_override: Option<usize>,
    /// Exit with status 1 if any point is flagged or the truncation check fails.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Dressed energies versus coupling strength.
    Spectrum,
    /// Radiance witness versus drive frequency.
    Radiance,
    /// Radiance curves for several resonator detunings.
    Detuning,
    /// Left/right peak values and maximum R over a (lambda, Omega) grid.
    Map,
    /// Photon flux versus drive frequency and its peaks.
    Excitation,
    /// Radiance with and without the longitudinal coupling term.
    Parity,
    /// Run the physical invariant checks.
    Validate,
}

impl Command {
    fn scenario(self) -> Option<Scenario> {
        Some(match self {
            Command::Spectrum => Scenario::EnergySpectrum,
            Command::Radiance => Scenario::RadianceVsDrive,
            Command::Detuning => Scenario::DetuningSweep,
            Command::Map => Scenario::PeakMap,
            Command::Excitation => Scenario::ExcitationSpectrum,
            Command::Parity => Scenario::ParityCompare,
            Command::Validate => return None,
        })
    }
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidParameter { .. } => Failure::Usage(e.to_string()),
            other => Failure::Failed(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    Ok(ConfigFile::parse(&text)?)
}

fn validate(cfg: &ConfigFile, g: &GlobalArgs) -> Result<(), Failure> {
    let mut p = SystemParams::default();
    if let Some(sys) = cfg.section("system") {
        apply_params(&mut p, sys)?;
    }
    if let Some(n) = g.nmax_override {
        p.n_max = n;
    }
    p.validate()?;
    let checks = invariant_suite(&p, &Default::default())?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Failed(format!("{failed} of {} checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn sweep(scenario: Scenario, cfg: &ConfigFile, g: &GlobalArgs) -> Result<(), Failure> {
    let mut spec = SweepSpec::from_config(scenario, cfg)?;
    if let Some(n) = g.nmax_override {
        spec.base.n_max = n;
        spec.validate()?;
    }
    spec.output_dir = g.out.clone();
    let cache = PointCache::from_env_or(g.out.join(".cache"))?;
    log::info!("cache at {}", cache.dir().display());
    let ctx = RunContext {
        cache: Some(cache),
        ..Default::default()
    };
    let result = run(&spec, &ctx)?;
    for path in result.write_csv(&g.out)? {
        println!("wrote {}", path.display());
    }
    if g.plot {
        for path in plot::write_plots(&result, &g.out).map_err(Failure::Failed)? {
            println!("wrote {}", path.display());
        }
    }
    println!("max solver residual {:.3e}", result.max_residual);
    match &result.convergence {
        Some(c) => println!(
            "truncation check: {} changed by at most {:.3e} over {} points (tolerance {:.1e}) {}",
            c.quantity,
            c.max_change,
            c.samples,
            c.tolerance,
            if c.passed() { "ok" } else { "FAILED" }
        ),
        None => println!("truncation check skipped"),
    }
    if !result.flagged.is_empty() {
        eprintln!("{} flagged points", result.flagged.len());
        for f in &result.flagged {
            log::warn!("{f}");
        }
    }
    let problems = result.strict_problems();
    if g.strict && !problems.is_empty() {
        return Err(Failure::Failed(problems.join("\n")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    }
    let outcome = load_config(cli.global.config.as_deref()).and_then(|cfg| match cli.command.scenario() {
        Some(s) => sweep(s, &cfg, &cli.global),
        None => validate(&cfg, &cli.global),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
