use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sketchrefine::corpus::{
    build_index, export_corpus, labels_to_png, load_corpus_dir, load_index, load_prior, prior_path,
    sample_corpus, save_index, save_prior, sketch_to_png, Provenance, SpecBounds,
};
use sketchrefine::figure::{Affine2, PartLabel, PART_SIZE};
use sketchrefine::pipeline::{
    evaluate_recovery, rgb_to_png, run_pipeline_raw, RefineOptions, RefineRequest, Timings,
};
use sketchrefine::shape_space::{BuildOptions, ProjectionResult, ShapeSpaceIndex};
use sketchrefine::structure::{FigureKeypoints, SkeletonPrior, StructureOptions};
use sketchrefine::Error;
use thiserror::Error;

use crate::server::{self, StartupError};
use crate::{Command, EXIT_DATA, EXIT_INTERNAL};

pub const CORPUS_MANIFEST: &str = "corpus.json";
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const PREVIEW_FILE: &str = "preview.png";

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Startup(#[from] StartupError),
}

impl CommandError {
    pub fn code(&self) -> &'static str {
        match self {
            CommandError::Core(e) => e.code(),
            CommandError::Startup(e) => e.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        let data = match self {
            CommandError::Core(e) => e.is_data_error(),
            CommandError::Startup(e) => e.is_data_error(),
        };
        if data {
            EXIT_DATA
        } else {
            EXIT_INTERNAL
        }
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CommandError {
    fn from(e: serde_json::Error) -> Self {
        CommandError::Core(Error::Json(e))
    }
}

pub type CommandResult<T = ()> = Result<T, CommandError>;

/// Loads an index and the prior stored beside it.
pub fn load_model(index: &Path) -> Result<(ShapeSpaceIndex, SkeletonPrior), StartupError> {
    if !index.is_file() {
        return Err(StartupError::IndexNotFound(index.to_path_buf()));
    }
    let shapes = load_index(index)?;
    let prior = load_prior(&prior_path(index))?;
    Ok((shapes, prior))
}

#[derive(Serialize)]
struct CorpusManifest<'a> {
    n: usize,
    seed: u64,
    specs: Vec<&'a sketchrefine::corpus::FigureSpec>,
}

pub fn gen(n: usize, seed: u64, out: &Path) -> CommandResult {
    let items = sample_corpus(n, seed, &SpecBounds::default())?;
    export_corpus(&items, out)?;
    let specs = items
        .iter()
        .filter_map(|i| match &i.provenance {
            Provenance::Synthetic { spec } => Some(spec),
            Provenance::Ingested { .. } => None,
        })
        .collect();
    let manifest = CorpusManifest { n, seed, specs };
    fs::write(
        out.join(CORPUS_MANIFEST),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    log::info!("wrote {n} items to {}", out.display());
    Ok(())
}

pub fn build(corpus: &Path, d: usize, out: &Path) -> CommandResult {
    let items = load_corpus_dir(corpus, PART_SIZE)?;
    let (index, prior) = build_index(
        &items,
        &BuildOptions {
            dim: d,
            ..BuildOptions::default()
        },
    )?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_index(out, &index)?;
    save_prior(&prior_path(out), &prior)?;
    for (class, space) in &index.spaces {
        log::info!("{}: n = {}, d = {}", class.name(), space.len(), space.dim());
    }
    Ok(())
}

/// Deterministic part of a refinement, written next to the rasters.
#[derive(Debug, Serialize)]
pub struct RefineReport {
    pub width: usize,
    pub height: usize,
    pub transforms: BTreeMap<PartLabel, Vec<Affine2>>,
    pub total_transforms: BTreeMap<PartLabel, Affine2>,
    pub projections: BTreeMap<PartLabel, ProjectionResult>,
    pub energy_trace: Vec<f64>,
    pub keypoints: serde_json::Value,
}

pub fn refine(index: &Path, input: &Path, out: &Path, options: RefineOptions) -> CommandResult {
    let (shapes, prior) = load_model(index)?;
    let req = RefineRequest {
        item_dir: Some(input.to_path_buf()),
        options,
        ..RefineRequest::default()
    };
    let result = run_pipeline_raw(&req, &shapes, &prior)?;
    fs::create_dir_all(out)?;
    fs::write(
        out.join(sketchrefine::corpus::SKETCH_FILE),
        sketch_to_png(&result.sketch)?,
    )?;
    fs::write(
        out.join(sketchrefine::corpus::LABELS_FILE),
        labels_to_png(&result.parsing)?,
    )?;
    fs::write(out.join(PREVIEW_FILE), rgb_to_png(&result.preview)?)?;
    let report = RefineReport {
        width: result.sketch.width(),
        height: result.sketch.height(),
        transforms: result.transforms,
        total_transforms: result.total_transforms,
        projections: result.projections,
        energy_trace: result.energy_trace,
        keypoints: keypoints_value(&result.keypoints)?,
    };
    fs::write(
        out.join(REPORT_FILE),
        serde_json::to_string_pretty(&report)?,
    )?;
    fs::write(
        out.join(TIMINGS_FILE),
        serde_json::to_string_pretty(&result.timings)?,
    )?;
    log_timings(&result.timings);
    Ok(())
}

fn keypoints_value(kps: &FigureKeypoints) -> CommandResult<serde_json::Value> {
    Ok(serde_json::from_str(
        &sketchrefine::corpus::keypoints_to_json(kps)?,
    )?)
}

fn log_timings(t: &Timings) {
    log::info!(
        "decode {:.1} ms, projection {:.1} ms, structure {:.1} ms, assemble {:.1} ms, preview {:.1} ms, total {:.1} ms",
        t.decode_ms,
        t.projection_ms,
        t.structure_ms,
        t.assemble_ms,
        t.preview_ms,
        t.total_ms
    );
}

pub fn eval(
    index: &Path,
    corpus: &Path,
    seeds: usize,
    magnitude: sketchrefine::structure::Magnitude,
    steps: usize,
    report: &Path,
) -> CommandResult {
    let (_, prior) = load_model(index)?;
    let items = load_corpus_dir(corpus, PART_SIZE)?;
    let opts = StructureOptions {
        steps,
        ..StructureOptions::default()
    };
    let result = evaluate_recovery(&items, &prior, seeds, magnitude, &opts)?;
    if let Some(parent) = report.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(report, serde_json::to_string_pretty(&result)?)?;
    println!(
        "mean joint gap {:.4} -> {:.4} px (ratio {:.4}) over {} runs",
        result.mean_pre_gap, result.mean_post_gap, result.ratio, result.seeds
    );
    Ok(())
}

pub fn serve(index: &Path, host: &str, port: u16) -> CommandResult {
    let (shapes, prior) = load_model(index)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = server::bind(host, port).await?;
        log::info!("listening on {}", listener.local_addr()?);
        let app = server::router(server::AppState::new(shapes, prior));
        axum::serve(listener, app).await?;
        Ok(())
    })
}

pub fn execute(command: Command) -> CommandResult {
    match command {
        Command::Gen { n, seed, out } => gen(n, seed, &out),
        Command::BuildIndex { corpus, d, out } => build(&corpus, d, &out),
        Command::Refine {
            index,
            input,
            out,
            k,
            steps,
            no_projection,
            no_transform,
        } => refine(
            &index,
            &input,
            &out,
            RefineOptions {
                k,
                steps,
                skip_projection: no_projection,
                skip_transformation: no_transform,
                ..RefineOptions::default()
            },
        ),
        Command::Eval {
            index,
            corpus,
            seeds,
            magnitude,
            steps,
            report,
        } => eval(&index, &corpus, seeds, magnitude.0, steps, &report),
        Command::Serve { index, port, host } => serve(&index, &host, port),
    }
}
