use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tzitzeica::config::RunConfig;
use tzitzeica::pipeline::{log_file, run_pipeline, Stage};
use tzitzeica::Error;

/// Solve the Tzitzeica equation and build the corresponding minimal surface in S⁵.
#[derive(Parser, Debug)]
#[command(name = "tzitzeica", version)]
struct Args {
    /// solve | wave | frame | surface | report | export
    stage: String,
    /// Flat `key = value` run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: &Args) -> Result<Vec<PathBuf>, Error> {
    let stage: Stage = args.stage.parse()?;
    let loaded = RunConfig::load(&args.config);
    let mut config = match loaded {
        Ok(c) => c,
        Err(e) => {
            // the pipeline never started, so leave its log here if we can
            if let Some(out) = &args.out {
                let text = format!("stage={stage}\nmessage={e}\nerror={}\n", e.name());
                let _ = std::fs::create_dir_all(out).and_then(|_| std::fs::write(log_file(out, stage), text));
            }
            return Err(e);
        }
    };
    if let Some(out) = &args.out {
        config.out = out.clone();
    }
    run_pipeline(&config, stage)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let help = !e.use_stderr();
            let _ = e.print();
            if help {
                return ExitCode::SUCCESS;
            }
            eprintln!("error=parse");
            return ExitCode::from(2);
        }
    };
    match run(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            eprintln!("error={}", e.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
