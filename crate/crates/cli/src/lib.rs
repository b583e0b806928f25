//! Command-line front end: flag/config resolution, manifests, CSV and SVG
//! emission around the `l2v-core` operations.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use l2v_core::error::StageExt;
use l2v_core::{Error, ErrorClass};
use serde_json::{json, Value};

/// 0 ok, 2 usage, 3 IO/format, 4 dimension/shape, 5 degenerate math.
pub fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Format => 3,
        ErrorClass::Dimension => 4,
        ErrorClass::Degenerate => 5,
    }
}

pub fn error_record(err: &Error) -> Value {
    let class = err.class();
    json!({
        "error": {
            "class": class.as_str(),
            "exit_code": exit_code(class),
            "stage": err.stage(),
            "message": err.to_string(),
        }
    })
}

fn report(record: &Value) {
    let mut stderr = std::io::stderr().lock();
    let _ = writeln!(stderr, "{record}");
}

fn print_results(results: &serde_json::Map<String, Value>) {
    for (k, v) in results {
        println!("{k}: {v}");
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn main_with<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            report(&json!({
                "error": {
                    "class": ErrorClass::Usage.as_str(),
                    "exit_code": exit_code(ErrorClass::Usage),
                    "stage": "parse_args",
                    "message": e.render().to_string().trim_end(),
                }
            }));
            return exit_code(ErrorClass::Usage);
        }
    };
    let outcome = commands::dispatch(cli.command).and_then(|(run, _)| {
        let results = run.results().clone();
        let written = run.commit().stage("write_output")?;
        Ok((results, written))
    });
    match outcome {
        Ok((results, written)) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            print_results(&results);
            0
        }
        Err(e) => {
            report(&error_record(&e));
            exit_code(e.class())
        }
    }
}
