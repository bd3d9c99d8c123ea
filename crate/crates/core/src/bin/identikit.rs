use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use identikit::config::{Analysis, RunConfig};
use identikit::report::{list_models, run, EXIT_ANALYSIS, EXIT_OK, EXIT_VALIDATION};

/// Identifiability analysis for parametric models.
#[derive(Debug, Parser)]
#[command(name = "identikit", version)]
struct Cli {
    /// fim, profile, sobol, recover, design-score or all (overrides `analysis` in the config)
    #[arg(value_parser = |s: &str| s.parse::<Analysis>())]
    analysis: Option<Analysis>,

    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,

    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Print the built-in models and exit.
    #[arg(long)]
    list_models: bool,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_models {
        print!("{}", list_models());
        return exit(EXIT_OK);
    }
    let Some(config_path) = cli.config else {
        eprintln!("error: --config is required");
        return exit(EXIT_VALIDATION);
    };
    let mut config = match RunConfig::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return exit(EXIT_VALIDATION);
        }
    };
    let Some(analysis) = cli.analysis.or(config.analysis) else {
        eprintln!("error: an analysis is required (fim, profile, sobol, recover, design-score, all)");
        return exit(EXIT_VALIDATION);
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let Some(out) = cli.out.or_else(|| config.output.clone()) else {
        eprintln!("error: no output directory; pass --out or set `output` in the config");
        return exit(EXIT_VALIDATION);
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return exit(EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return exit(EXIT_ANALYSIS);
        }
    }
    match run(&config, analysis, &out) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", out.join(f).display());
            }
            exit(EXIT_OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.exit_code())
        }
    }
}
