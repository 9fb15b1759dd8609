use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oqrw_cli::{presets, run, CliError, CliResult, ExperimentConfig, Mode, OUT_ENV};

#[derive(Parser)]
#[command(name = "oqrw", version, about = "Open quantum random walk simulations")]
struct Cli {
    #[command(subcommand)]
    mode: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete Kraus walks.
    Discrete(Common),
    /// Continuous-time stochastic walks.
    Sde(Common),
    /// Matrix Fokker-Planck solver.
    Fp(Common),
    /// Telegraph walker comparison.
    Toy(Common),
    /// Estimators over a prior `sde` run directory.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled configuration (fig1..fig5, toy).
    #[arg(long)]
    preset: Option<String>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; runs write into `<out>/<label>`.
    #[arg(long, env = OUT_ENV, default_value = "runs")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// `key.path=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run directory to analyze.
    input: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn configs(mode: Mode, c: &Common, input: Option<PathBuf>) -> CliResult<Vec<ExperimentConfig>> {
    let mut list = match (&c.config, &c.preset) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --config or --preset".into())),
        (Some(path), None) => vec![ExperimentConfig::load(path)?],
        (None, Some(name)) => presets::preset(name)?,
        (None, None) if mode == Mode::Analyze => vec![ExperimentConfig::new(Mode::Analyze, "analysis", Default::default())],
        (None, None) => return Err(CliError::Config("need --config or --preset".into())),
    };
    for cfg in list.iter_mut() {
        *cfg = cfg.with_overrides(&c.overrides)?;
        if let Some(s) = c.seed {
            cfg.seed = s;
        }
        if input.is_some() {
            cfg.input = input.clone();
        }
        if cfg.mode != mode {
            return Err(CliError::Config(format!("mode: config `{}` is {}, not {}", cfg.label, cfg.mode.name(), mode.name())));
        }
        cfg.validate()?;
    }
    Ok(list)
}

fn execute(cli: Cli) -> CliResult<()> {
    let (mode, common, input) = match cli.mode {
        Command::Discrete(c) => (Mode::Discrete, c, None),
        Command::Sde(c) => (Mode::Sde, c, None),
        Command::Fp(c) => (Mode::Fp, c, None),
        Command::Toy(c) => (Mode::Toy, c, None),
        Command::Analyze(a) => (Mode::Analyze, a.common, a.input),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    for cfg in configs(mode, &common, input)? {
        let root = cfg.output.clone().unwrap_or_else(|| common.out.clone());
        let outcome = run(&cfg, &root)?;
        println!("{}: {} files in {}", cfg.label, outcome.manifest.outputs.len(), outcome.dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oqrw: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
