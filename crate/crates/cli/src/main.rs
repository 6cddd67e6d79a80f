use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use ksauth_cli::{cmd_keygen, cmd_register, cmd_run, Cli, Command};
use ksauth_core::harness::Outcome;

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Keygen(common) => {
            let config = common.resolve()?;
            let public = cmd_keygen(&config).context("keygen failed")?;
            println!("n = {}", public.n.to_str_radix(16));
            println!("g = {}", public.g.to_str_radix(16));
            println!("y = {}", public.y.to_str_radix(16));
            println!("wrote parameters to {}", config.output_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Register { common, id, password } => {
            let config = common.resolve()?;
            let card = cmd_register(&config, &id, &password).context("registration failed")?;
            println!("registered {id}; card written to {}", card.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { common, scenario, params } => {
            let config = common.resolve()?;
            let run = cmd_run(&scenario, &config, params.as_deref())?;
            let report = &run.report;
            let mut counts: Vec<(Outcome, usize)> = Vec::new();
            for record in &report.outcomes {
                match counts.iter_mut().find(|(o, _)| *o == record.outcome) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((record.outcome, 1)),
                }
            }
            counts.sort();
            println!("scenario {} ({} trials)", run.scenario, report.trials);
            for (outcome, n) in counts {
                println!("  {outcome}: {n}");
            }
            if let Some(size) = report.history_size {
                println!("  history_size: {size}");
            }
            println!(
                "expectation {}; outputs in {}",
                if run.passed { "met" } else { "NOT met" },
                config.output_path.display()
            );
            Ok(if run.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
