use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfgas_cli::validate::has_errors;
use mfgas_cli::{run_stages, validate, Analysis, CliError, ExperimentConfig, RunManifest, Stage};

/// Mean-field gas experiments: equilibrium densities, Gibbs sampling and local statistics.
#[derive(Parser)]
#[command(name = "mfgas", version)]
struct Cli {
    /// Experiment config (TOML), or a run manifest (JSON) to reproduce.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides run.out_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for replica-parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the equilibrium density.
    Equilibrium,
    /// Solve, then sample replicas.
    Sample,
    /// Bulk Poisson analysis.
    BulkStats,
    /// Edge Poisson analysis.
    EdgeStats,
    /// Gumbel analysis of the largest particle.
    Gumbel,
    /// All stages with the analyses listed in the config.
    Pipeline,
    /// Check the config and print findings.
    Validate,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Parse("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.run.out_dir = dir.clone();
    }
    Ok(config)
}

fn report(manifest: &RunManifest) -> ExitCode {
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    for s in &manifest.stages {
        println!("{:<28} {:>9.2}s{}", s.stage, s.seconds, if s.cached { "  (cached)" } else { "" });
    }
    for v in &manifest.verdicts {
        let p = v.verdict.p_value.map(|p| format!(" p={p:.4}")).unwrap_or_default();
        println!(
            "N={:<8} {:?} {:<28} {} statistic={:.4}{p} threshold={}",
            v.n,
            v.verdict.analysis,
            v.verdict.name,
            if v.verdict.passed { "PASS" } else { "FAIL" },
            v.verdict.statistic,
            v.verdict.threshold
        );
    }
    println!("manifest: {}", manifest.config.run.out_dir.join("manifest.json").display());
    if manifest.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let config = load(cli)?;
    let (last, analyses) = match cli.command {
        Command::Validate => {
            let findings = validate(&config);
            for f in &findings {
                println!("{f}");
            }
            if findings.is_empty() {
                println!("ok");
            }
            return Ok(if has_errors(&findings) { ExitCode::from(1) } else { ExitCode::SUCCESS });
        }
        Command::Equilibrium => (Stage::Equilibrium, vec![]),
        Command::Sample => (Stage::Sample, vec![]),
        Command::BulkStats => (Stage::Stats, vec![Analysis::Bulk]),
        Command::EdgeStats => (Stage::Stats, vec![Analysis::Edge]),
        Command::Gumbel => (Stage::Stats, vec![Analysis::Gumbel]),
        Command::Pipeline => (Stage::Stats, config.stats.analyses.clone()),
    };
    Ok(report(&run_stages(&config, last, &analyses)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
