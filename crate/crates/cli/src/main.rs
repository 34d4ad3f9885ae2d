//! `fittsview`: batch pipeline stages and the labeling server.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fittsview_core::synth::SceneKind;

use config::{parse_angle, InputError, Tuning};

#[derive(Debug, Parser)]
#[command(name = "fittsview", version, about = "Lasso-friendly viewpoint recommendation for point cloud labeling")]
struct Cli {
    /// TOML config file; flags take precedence over it.
    #[arg(long, global = true, env = "FITTSVIEW_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split semantic labels into instances with adaptive DBSCAN.
    Cluster {
        #[arg(long)]
        manifest: PathBuf,
        /// Per-point instance ids; `.txt`/`.csv` writes text, anything else packed u32.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommend one viewpoint per instance, easiest first.
    Recommend {
        #[arg(long)]
        manifest: PathBuf,
        /// JSON output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lasso difficulty of one instance seen from (alpha, beta).
    Estimate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        instance: u32,
        #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, value_parser = parse_angle)]
        beta: f64,
    },
    /// Write a synthetic scene with its labels and manifest.
    Synth {
        #[arg(long, value_parser = |s: &str| s.parse::<SceneKind>().map_err(|e| e.to_string()))]
        scene: SceneKind,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["bin", "csv"], default_value = "bin")]
        format: String,
    },
    /// mIoU of predicted labels against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Labels before editing; adds the mIoU delta.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Score only these categories; repeat for several.
        #[arg(long = "category", value_name = "ID")]
        categories: Vec<u32>,
    },
    /// Run the HTTP labeling service.
    Serve {
        /// Dataset manifest; repeat for several.
        #[arg(long = "manifest")]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        /// Directory for saved sessions.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<fittsview_core::Error>() {
            return if e.is_input_error() { 2 } else { 3 };
        }
        if cause.is::<InputError>() {
            return 2;
        }
    }
    3
}

/// The error chain, skipping causes whose text a parent already includes.
fn message(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let s = cause.to_string();
        if !msg.contains(&s) {
            msg.push_str(": ");
            msg.push_str(&s);
        }
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
