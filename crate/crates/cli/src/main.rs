use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ccdd_cli::presets::{preset, presets, NAMES};
use ccdd_cli::{execute, verify, CliError, ExperimentConfig, Kind};

/// Run CCDD sensing experiments from JSON configs.
///
/// `ccdd-sense <kind> --config <path>` runs an experiment,
/// `ccdd-sense presets [--write DIR]` lists or exports the presets and
/// `ccdd-sense verify <dir>` checks the config hash of a run's outputs.
#[derive(Debug, Parser)]
#[command(name = "ccdd-sense", version)]
struct Args {
    /// Experiment kind, `presets` or `verify`.
    command: String,
    /// Output directory for `verify`.
    target: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use a built-in preset instead of a config file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Caps worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Override a scalar field, e.g. `--set drive.theta_m=0`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// With `presets`: write each preset to DIR/<name>.json.
    #[arg(long)]
    write: Option<PathBuf>,
}

fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut overrides = args.overrides.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => preset(name)
            .ok_or_else(|| CliError::Schema(format!("unknown preset `{name}`; known: {}", NAMES.join(", "))))?
            .to_json(),
        (None, None) => return Err(CliError::Schema("need --config or --preset".into())),
    };
    ExperimentConfig::parse(&text, &overrides)
}

fn main_inner(args: Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match args.command.as_str() {
        "presets" => {
            for (name, cfg) in presets() {
                match &args.write {
                    Some(dir) => {
                        std::fs::create_dir_all(dir)?;
                        std::fs::write(dir.join(format!("{name}.json")), cfg.to_json() + "\n")?;
                    }
                    None => println!("{name}\t{}", cfg.kind),
                }
            }
            Ok(())
        }
        "verify" => {
            let dir = args
                .target
                .as_ref()
                .ok_or_else(|| CliError::Schema("verify needs an output directory".into()))?;
            for f in verify(dir)? {
                println!("ok\t{f}");
            }
            Ok(())
        }
        kind => {
            let kind: Kind = kind.parse()?;
            let cfg = load(&args)?;
            if cfg.kind != kind {
                return Err(CliError::Schema(format!("config is for `{}`, not `{kind}`", cfg.kind)));
            }
            let manifest = execute(&cfg, args.plots)?;
            println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccdd-sense: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
