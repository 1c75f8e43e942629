//! `reslevy` command-line entry point.
//!
//! Usage: `reslevy COMMAND [--config FILE] [--key value]...`
//!
//! Exit codes: 0 success, 1 configuration error, 2 failed check,
//! 3 numerical failure or unwritable output.

mod config;
mod error;
mod output;
mod run;

use std::process;

use config::{parse_args, KEYS};

fn print_usage() {
    eprintln!("usage: reslevy <classify|simulate|lifetime|verify|criteria-map> [--config FILE] [--key value]...");
    eprintln!("keys (also accepted in the config file as `key = value`):");
    for (k, _, help) in KEYS {
        eprintln!("  --{:<18} {}", k.replace('_', "-"), help);
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        print_usage();
        process::exit(if args.is_empty() { 1 } else { 0 });
    }
    let rc = match parse_args(&args, |p| {
        std::fs::read_to_string(p).map_err(|e| e.to_string())
    }) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {e}");
            process::exit(1);
        }
    };
    let seed_env = std::env::var(run::SEED_ENV).ok();
    match run::run(rc, seed_env.as_deref()) {
        Ok(outcome) => process::exit(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            process::exit(e.exit_code());
        }
    }
}
