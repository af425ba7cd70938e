mod args;
mod commands;
mod context;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use mdap_core::rng::with_threads;
use mdap_core::Error;

use args::{Cli, Command};
use context::Context;

/// 0 on success, 1 on a failed check or runtime error, 2 on bad input.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Hypothesis(_) | Error::Expr { .. } => 2,
        Error::CheckFailed(_) | Error::CapExceeded { .. } | Error::NonFinite(_) | Error::FlowOverflow { .. } => 1,
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let ctx = Context::resolve(cli, std::env::vars())?;
    let start = Instant::now();
    let out = with_threads(ctx.threads, || match &cli.command {
        Command::Count(_) => commands::count(&ctx),
        Command::Vol(_) => commands::vol(&ctx),
        Command::Tessellate(_) => commands::tessellate(&ctx),
        Command::Height(_) => commands::height_cmd(&ctx),
        Command::Controlled(_) => commands::controlled(&ctx),
        Command::Corr(_) => commands::corr(&ctx),
        Command::Schmidt(_) => commands::schmidt(&ctx),
        Command::Experiment(_) => commands::experiment(&ctx),
    })?;
    let wall = start.elapsed().as_secs_f64();
    output::emit(&ctx, &out, cli.global.out.as_deref(), cli.global.format, wall)?;
    if out.failures.is_empty() {
        return Ok(0);
    }
    for f in &out.failures {
        eprintln!("FAILED {f}");
    }
    Ok(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
