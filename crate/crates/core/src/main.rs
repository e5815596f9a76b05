use clap::{Parser, Subcommand};
use slowfast_ldp::cli;
use std::path::PathBuf;
use std::process::ExitCode;

/// Slow-fast large-deviation experiments.
#[derive(Parser)]
#[command(name = "slowfast", version)]
struct Args {
    /// Replace the seed in the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Write outputs here instead of the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Print the model presets and their parameters.
    ListPresets,
    /// Parse and validate a config without running it.
    CheckConfig { config: PathBuf },
}

fn fail(e: &slowfast_ldp::Error) -> ExitCode {
    eprintln!("{}", cli::error_report(e));
    match e {
        slowfast_ldp::Error::Config { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", serde_json::json!({"error": "threads", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    }
    match args.command {
        Command::ListPresets => {
            print!("{}", cli::list_presets());
            ExitCode::SUCCESS
        }
        Command::CheckConfig { config } => {
            let checked = cli::load_config(&config).and_then(|mut c| {
                if let Some(s) = args.seed_override {
                    c.seed = s;
                }
                cli::validate(c)
            });
            match checked {
                Ok(v) => {
                    let report = serde_json::json!({
                        "ok": true,
                        "experiment": v.config.experiment.name(),
                        "regimes": v.regimes.iter().map(|(a, r)| serde_json::json!({"alpha": a, "regime": r})).collect::<Vec<_>>(),
                        "conditions": v.conditions,
                        "notices": v.notices,
                    });
                    println!("{report}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Run { config } => match cli::run_path(&config, args.seed_override, args.out.as_deref()) {
            Ok(s) => {
                for f in &s.files {
                    println!("{}", s.output_dir.join(f).display());
                }
                println!("{}", s.output_dir.join("manifest.json").display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
