use std::process::ExitCode;

use clap::Parser;
use fibercoat_cli::commands::{
    bench_table, cmd_bench, cmd_compare, cmd_convergence, cmd_list, cmd_run, cmd_spinup,
};
use fibercoat_cli::{Cli, Command};

fn write_json(path: &Option<std::path::PathBuf>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, serde_json::to_string_pretty(value)? + "\n")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let s = cmd_run(&args)?;
            Ok(if s.completed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Compare(args) => {
            let r = cmd_compare(&args)?;
            print!("{}", r.to_text());
            write_json(&args.out, &r)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence(args) => {
            let t = cmd_convergence(&args)?;
            print!("{}", t.to_text());
            write_json(&args.out, &t)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench(args) => {
            let rows = cmd_bench(&args)?;
            print!("{}", bench_table(&rows));
            write_json(&args.out, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Spinup(args) => {
            let path = cmd_spinup(&args)?;
            if !args.quiet {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            print!("{}", cmd_list());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
