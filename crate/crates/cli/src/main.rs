// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use anyhow::Context;
use scp_sdn_cli::{emit, parse_config, run_experiment, CliError};

fn fail(err: anyhow::Error, code: u8) -> ExitCode {
    eprintln!("scp-sdn: {err:#}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let config = match parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(CliError::Args(e)) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(CliError::Args(e)) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let code = e.exit_code();
            return fail(anyhow::Error::new(e).context("invalid configuration"), code);
        }
    };
    let output = config.output.as_deref();
    match run_experiment(&config) {
        Ok(rows) => match emit(&rows, config.format, output).context("writing results") {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e, 2),
        },
        Err(partial) => {
            // Flush what finished before reporting the failure.
            let _ = emit(&partial.rows, config.format, output);
            let code = partial.error.exit_code();
            fail(anyhow::Error::new(partial.error).context("run failed"), code)
        }
    }
}
