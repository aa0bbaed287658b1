//! The `gola` command-line program: TOML configuration with flag
//! overrides, pipeline dispatch and artifact output.

mod args;
mod commands;
mod config;
mod targets;

use std::ffi::OsString;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use crate::error::Error;

pub use args::{Cli, Command, GolaArgs, TargetArgs};
pub use commands::{execute, Artifacts};
pub use config::{
    parse_config, parse_file_config, CommandKind, EvalConfig, FileConfig, GenerateConfig, PushforwardConfig,
    RefineConfig, RobustnessConfig, RunConfig, SensitivityConfig, TargetConfig, DEFAULT_OUT_DIR, DEFAULT_SEED,
    OUT_DIR_ENV,
};
pub use targets::{bimodal2d, gauss2d, BUILTINS};

/// Exit status for a completed run.
pub const EXIT_OK: i32 = 0;
/// Exit status when a pipeline stage fails.
pub const EXIT_RUNTIME: i32 = 1;
/// Exit status for invalid configuration or arguments.
pub const EXIT_CONFIG: i32 = 2;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn error_json(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parse `args` (including the program name) into a resolved
/// configuration without running anything.
pub fn parse_args<I, T>(args: I) -> crate::Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    parse_config(&cli)
}

/// Parse `args` (including the program name) and run. Returns the exit
/// status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    let cfg = match parse_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            return exit_code(&e);
        }
    };
    run(&cfg)
}

/// Execute a resolved configuration, writing artifacts, a manifest and, on
/// failure, `error.json` into the output directory.
pub fn run(cfg: &RunConfig) -> i32 {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let mut art = match Artifacts::new(&cfg.out) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            return exit_code(&e);
        }
    };
    let outcome = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.unwrap_or(0)).build() {
        Ok(pool) => pool.install(|| execute(cfg, &mut art)),
        Err(e) => Err(Error::Config(format!("cannot start worker pool: {e}"))),
    };
    let (status, stdout) = match outcome {
        Ok(s) => (EXIT_OK, s),
        Err(e) => {
            let body = error_json(&e);
            eprintln!("{body}");
            let _ = art.write("error.json", &format!("{body}\n"));
            (exit_code(&e), None)
        }
    };
    let manifest = json!({
        "command": cfg.command,
        "seed": cfg.seed,
        "status": status,
        "config": cfg,
        "versions": {
            "gola": env!("CARGO_PKG_VERSION"),
            "os": std::env::consts::OS,
            "arch": std::env::consts::ARCH,
        },
        "started_unix_seconds": started,
        "wall_clock_seconds": clock.elapsed().as_secs_f64(),
        "artifacts": art.written,
    });
    if let Err(e) = art.write_json("manifest.json", &manifest) {
        eprintln!("{}", error_json(&e));
        return if status == EXIT_OK { EXIT_RUNTIME } else { status };
    }
    if let Some(s) = stdout {
        println!("{s}");
    }
    status
}

/// Entry point of the binary.
pub fn main() -> ! {
    std::process::exit(run_from_args(std::env::args_os()))
}
