//! Command implementations behind the `synergy` binary and their file
//! formats. Each command returns a [`CliError`] whose
//! [`exit_code`](CliError::exit_code) is what the process exits with.

pub mod config;
pub mod files;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::attention::{attention_map, position_dominant_probe, BlockProjection};
use crate::error::Error;
use crate::pipeline::{attention_map_at, default_map_block, run_batch, EditOutcome, PipelineConfig};
use crate::rope::Rope;

pub use config::RunConfigFile;

pub const TRACE_FILE: &str = "trace.tsv";
pub const FINAL_FILE: &str = "final_states.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::DegenerateSimilarity { .. } => Self::Numerical(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    RunConfigFile::parse(&read(path)?)
        .map(|f| f.to_pipeline())
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// `"R,C"` to a grid cell.
pub fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(',')
        .ok_or_else(|| format!("expected ROW,COL, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad cell index `{v}`"));
    Ok((num(r)?, num(c)?))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: RunConfigFile,
    steps: usize,
    files: [&'a str; 2],
}

fn write_outcome(dir: &Path, outcome: &EditOutcome) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write(&dir.join(TRACE_FILE), &files::write_trace(&outcome.trace.steps))?;
    let mut finals = String::new();
    files::write_matrix(&mut finals, "source final", &outcome.src_final);
    files::write_matrix(&mut finals, "target final", &outcome.tgt_final);
    write(&dir.join(FINAL_FILE), &finals)?;
    let manifest = Manifest {
        tool: "synergy",
        version: env!("CARGO_PKG_VERSION"),
        config: RunConfigFile::from_pipeline(&outcome.trace.config),
        steps: outcome.trace.steps.len(),
        files: [TRACE_FILE, FINAL_FILE],
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write(&dir.join(MANIFEST_FILE), &json)
}

/// Runs one case into `out_dir`, or several into `out_dir/case_NNN`.
///
/// `w` overrides the schedule with a fixed weight. `jobs` bounds the worker
/// threads for multi-case runs; outputs do not depend on it.
pub fn cmd_run(configs: &[PathBuf], out_dir: &Path, w: Option<f64>, jobs: Option<usize>) -> Result<(), CliError> {
    if configs.is_empty() {
        return Err(CliError::Usage("at least one --config is required".into()));
    }
    if let Some(w) = w {
        if !(0.0..=1.0).contains(&w) {
            return Err(CliError::Usage(format!("--w must lie in [0, 1], got {w}")));
        }
    }
    let mut parsed = Vec::with_capacity(configs.len());
    for path in configs {
        let mut cfg = load_config(path)?;
        if w.is_some() {
            cfg.w_override = w;
        }
        parsed.push(cfg);
    }
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
            .install(|| run_batch(&parsed)),
        None => run_batch(&parsed),
    };

    let single = results.len() == 1;
    let mut first_err: Option<CliError> = None;
    for (i, res) in results.into_iter().enumerate() {
        let dir = if single {
            out_dir.to_path_buf()
        } else {
            out_dir.join(format!("case_{i:03}"))
        };
        let res = res.map_err(CliError::from).and_then(|o| write_outcome(&dir, &o));
        if let Err(e) = res {
            let e = if single { e } else { tag_case(e, i, &configs[i]) };
            eprintln!("error: {e}");
            let worse = first_err.as_ref().is_none_or(|f| e.exit_code() > f.exit_code());
            if worse {
                first_err = Some(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn tag_case(e: CliError, i: usize, path: &Path) -> CliError {
    let where_ = format!("case {i} ({})", path.display());
    match e {
        CliError::Usage(m) => CliError::Usage(format!("{where_}: {m}")),
        CliError::Numerical(m) => CliError::Numerical(format!("{where_}: {m}")),
    }
}

pub fn cmd_stats(trace_paths: &[PathBuf], out_path: &Path) -> Result<(), CliError> {
    if trace_paths.is_empty() {
        return Err(CliError::Usage("at least one trace file is required".into()));
    }
    let mut traces = Vec::with_capacity(trace_paths.len());
    for p in trace_paths {
        traces.push(files::parse_trace(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?);
    }
    let st = stats::step_stats(&traces).map_err(CliError::Usage)?;
    write(out_path, &stats::write_stats(&st, traces.len()))
}

/// Source of the map written by [`cmd_map`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapSource {
    /// The configured backbone at the first timestep.
    Backbone { block: Option<usize> },
    /// The synthetic position-dominant stream with identity projections.
    PositionProbe,
}

pub fn cmd_map(
    config_path: &Path,
    cell: (usize, usize),
    w: f64,
    out_path: &Path,
    source: MapSource,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(CliError::Usage(format!("--w must lie in [0, 1], got {w}")));
    }
    let cfg = load_config(config_path)?;
    cfg.backbone.grid.index(cell.0, cell.1)?;
    let (map, block) = match source {
        MapSource::Backbone { block } => {
            let block = block.unwrap_or_else(|| default_map_block(&cfg.backbone));
            (attention_map_at(&cfg, block, w, cell)?, block)
        }
        MapSource::PositionProbe => {
            let rope = Rope::new(cfg.backbone.rope.clone())?;
            let (stream, _) = position_dominant_probe(&rope, cfg.backbone.grid, cell, cfg.backbone.n_txt_tokens)?;
            let proj = BlockProjection::identity(rope.config().d_model());
            (attention_map(&stream, &stream, &proj, &rope, w, cell)?, 0)
        }
    };
    write(out_path, &files::write_map(&map, cell, w, block))
}
