use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use transportability::{KlDirection, Predictor};
use transportability_cli::output::OutputLock;
use transportability_cli::{
    config, fit, ingest, report, similarity, transport, CliError, LoadedConfig, Overrides, EXIT_USAGE,
};

/// Corpus similarity, transportability and performance prediction.
#[derive(Debug, Parser)]
#[command(name = "transport", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true, default_value = "transport.toml")]
    config: PathBuf,
    /// Only run studies with this source domain.
    #[arg(long, global = true)]
    source: Option<String>,
    /// Replace every study's targets (comma separated dataset/split keys).
    #[arg(long, global = true, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    /// Fit only this predictor.
    #[arg(long, global = true)]
    predictor: Option<Predictor>,
    #[arg(long, global = true, value_parser = parse_direction)]
    kl_direction: Option<KlDirection>,
    #[arg(long, global = true)]
    kl_epsilon: Option<f64>,
    /// Apply the small-sample correction to tau_var.
    #[arg(long, global = true)]
    bias_corrected: bool,
    /// Feature-hash seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Let `report` run with missing stages.
    #[arg(long, global = true)]
    allow_partial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse corpora and build domain profiles.
    Ingest,
    /// Similarity tables per source domain.
    Similarity,
    /// Transport ratios and variation per study.
    Transport,
    /// Fit score-vs-similarity curves.
    Fit,
    /// Predict a score from a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: f64,
    },
    /// Collect stage outputs into one report.
    Report,
    /// All stages in order.
    Run,
}

fn parse_direction(s: &str) -> Result<KlDirection, String> {
    match s {
        "forward" => Ok(KlDirection::Forward),
        "reverse" => Ok(KlDirection::Reverse),
        other => Err(format!("expected `forward` or `reverse`, got `{other}`")),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        source: cli.source.clone(),
        targets: cli.targets.clone(),
        predictor: cli.predictor,
        kl_direction: cli.kl_direction,
        kl_epsilon: cli.kl_epsilon,
        bias_corrected: cli.bias_corrected,
        seed: cli.seed,
        out: cli.out.clone(),
    }
}

fn ingest_stage(cfg: &LoadedConfig) -> Result<(), CliError> {
    let outcome = ingest::run(cfg)?;
    for id in &outcome.cache_hits {
        eprintln!("cache hit: {id}");
    }
    for id in &outcome.built {
        eprintln!("built: {id}");
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for (_, e) in &outcome.failures {
        eprintln!("error: {e}");
    }
    match outcome.failures.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

fn similarity_stage(cfg: &LoadedConfig) -> Result<(), CliError> {
    for file in similarity::run(cfg)? {
        print!("{}", similarity::render(&file));
    }
    Ok(())
}

fn transport_stage(cfg: &LoadedConfig) -> Result<(), CliError> {
    let (_, text) = transport::run(cfg)?;
    print!("{text}");
    Ok(())
}

fn fit_stage(cfg: &LoadedConfig) -> Result<(), CliError> {
    let summary = fit::run(cfg)?;
    for k in &summary.skipped {
        eprintln!(
            "warning: skipped fit {} ({}) {}: {}",
            k.system, k.source, k.predictor, k.reason
        );
    }
    print!("{}", fit::render(&summary));
    Ok(())
}

fn report_stage(cfg: &LoadedConfig, allow_partial: bool) -> Result<(), CliError> {
    let outcome = report::run(cfg, allow_partial)?;
    for stage in &outcome.absent {
        eprintln!("warning: {stage} outputs absent");
    }
    print!("{}", outcome.text);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Command::Predict { model, x } = &cli.command {
        println!("{}", fit::predict(model, *x)?);
        return Ok(());
    }
    let cfg = config::load(&cli.config, &overrides(&cli))?;
    let _lock = OutputLock::acquire(&cfg.out_dir())?;
    match cli.command {
        Command::Ingest => ingest_stage(&cfg),
        Command::Similarity => similarity_stage(&cfg),
        Command::Transport => transport_stage(&cfg),
        Command::Fit => fit_stage(&cfg),
        Command::Report => report_stage(&cfg, cli.allow_partial),
        Command::Run => {
            ingest_stage(&cfg)?;
            similarity_stage(&cfg)?;
            transport_stage(&cfg)?;
            fit_stage(&cfg)?;
            report_stage(&cfg, cli.allow_partial)
        }
        Command::Predict { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
