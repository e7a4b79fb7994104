mod cli;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use multimarker::{Error, Result};

use cli::{Cli, Command};
use config::RunConfig;

fn exit_code(category: &str) -> u8 {
    match category {
        "usage" => 2,
        "data" => 3,
        "format" => 4,
        "io" => 5,
        "mismatch" => 6,
        "dimension" => 7,
        "parameter" => 8,
        _ => 9,
    }
}

fn report(category: &str, message: &str) -> ExitCode {
    let body = serde_json::json!({ "error": category, "message": message });
    eprintln!("{body}");
    ExitCode::from(exit_code(category))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.set_seed(cli.seed);
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Fit(a) => {
            cfg.apply_sampler(&a.sampler);
            cfg.apply_scale(&a.scale);
            if let Some(l) = &a.levels {
                cfg.levels = Some(l.clone());
            }
            commands::fit(&cfg, a)
        }
        Command::Predict(a) => commands::predict(&cfg, a),
        Command::Simulate(a) => {
            cfg.apply_scenario(&a.scenario)?;
            commands::simulate(&cfg, a)
        }
        Command::Loocv(a) => {
            cfg.apply_sampler(&a.sampler);
            cfg.apply_scale(&a.scale);
            if let Some(l) = &a.levels {
                cfg.levels = Some(l.clone());
            }
            commands::loocv_cmd(&cfg, a)
        }
        Command::Bench(a) => {
            cfg.apply_sampler(&a.sampler);
            cfg.apply_scale(&a.scale);
            cfg.apply_scenario(&a.scenario)?;
            commands::bench(&cfg, a)
        }
        Command::Diag(a) => commands::diag(&cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report("usage", e.to_string().trim());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.category(), &e.to_string()),
    }
}
