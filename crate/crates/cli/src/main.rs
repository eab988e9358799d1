use std::process::ExitCode;

use clap::Parser;

use sip_cli::args::{Cli, Cmd};
use sip_cli::{bench, commands};

/// Stable machine-parsable error code for the one-line error prefix.
fn error_code(err: &anyhow::Error) -> &'static str {
    use sip_core::Error as E;
    if let Some(e) = err.downcast_ref::<E>() {
        match e {
            E::MalformedLine { .. }
            | E::NegativeWeight { .. }
            | E::SelfLoop { .. }
            | E::UnknownToken { .. } => "E_PARSE",
            E::Io(_) => "E_IO",
            E::NoConvergence { .. } | E::NonFinite(_) => "E_NUMERIC",
            E::EmptyStream => "E_STREAM",
            _ => "E_INPUT",
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "E_IO"
    } else {
        "E_STATE"
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Fit(args) => commands::cmd_fit(&args),
        Cmd::Generate(args) => commands::cmd_generate(&args),
        Cmd::Threshold(args) => commands::cmd_threshold(&args),
        Cmd::Heatmap(args) => commands::cmd_heatmap(&args),
        Cmd::Bench(args) => bench::cmd_bench(&args),
        Cmd::Synth(args) => commands::cmd_synth(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("SIP_ERR {}: {:#}", error_code(&err), err);
            ExitCode::from(2)
        }
    }
}
