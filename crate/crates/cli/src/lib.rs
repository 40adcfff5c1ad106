//! Command-line front end and HTTP service for the sketch refinement engine.

pub mod commands;
pub mod server;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use sketchrefine::shape_space::{DEFAULT_K, DEFAULT_LATENT_DIM};
use sketchrefine::structure::Magnitude;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sketchrefine",
    version,
    about = "Refine part-segmented human-figure sketches"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of labelled figure sketches.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit part shape spaces and a skeleton prior to a corpus directory.
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LATENT_DIM)]
        d: usize,
        /// Index file; the prior is written next to it as `<stem>.prior.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine one item directory (sketch.png, labels.png, keypoints.json).
    Refine {
        #[arg(long)]
        index: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K, value_parser = positive)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long)]
        no_projection: bool,
        #[arg(long)]
        no_transform: bool,
    },
    /// Perturb corpus figures and measure how far refinement restores them.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Translate px, rotate degrees, scale fraction, shear fraction.
        #[arg(long, default_value = "10,15,0.1,0.05")]
        magnitude: MagnitudeArg,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long)]
        report: PathBuf,
    },
    /// Serve the refinement API over HTTP.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// `T,R,S,H` perturbation bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnitudeArg(pub Magnitude);

impl FromStr for MagnitudeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!(
                "expected four comma-separated numbers T,R,S,H, got {s:?}"
            ));
        }
        let mut v = [0.0; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
            if !slot.is_finite() || *slot < 0.0 {
                return Err(format!("{p:?} must be finite and non-negative"));
            }
        }
        if v[2] >= 1.0 {
            return Err("scale bound must be below 1".into());
        }
        Ok(MagnitudeArg(Magnitude {
            translate: v[0],
            rotate_deg: v[1],
            scale: v[2],
            shear: v[3],
        }))
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}
