//! Browser bindings for the demo page in `www/`.
//!
//! The exported functions are thin wrappers over plain Rust ones so the
//! logic can be tested natively.

use attn_synergy::attention::{attention_map, position_dominant_probe, BlockProjection, Grid};
use attn_synergy::measurement::{adaptive_weight, Thresholds};
use attn_synergy::pipeline::{attention_map_at, default_map_block, run_edit, PipelineConfig};
use attn_synergy::rope::Rope;
use wasm_bindgen::prelude::*;

fn pipeline(src_prompt: &str, tgt_prompt: &str, seed: u64, grid_side: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(src_prompt, tgt_prompt);
    cfg.backbone.seed = seed;
    cfg.backbone.grid = Grid::new(grid_side, grid_side);
    cfg
}

/// Row-major `grid_side x grid_side` map for the query at `(row, col)`.
#[allow(clippy::too_many_arguments)]
pub fn map_values(
    src_prompt: &str,
    tgt_prompt: &str,
    seed: u64,
    grid_side: usize,
    row: usize,
    col: usize,
    w: f64,
    probe: bool,
) -> Result<Vec<f64>, String> {
    if !(0.0..=1.0).contains(&w) {
        return Err(format!("w must lie in [0, 1], got {w}"));
    }
    let cfg = pipeline(src_prompt, tgt_prompt, seed, grid_side);
    let map = if probe {
        let rope = Rope::new(cfg.backbone.rope.clone()).map_err(|e| e.to_string())?;
        let (stream, _) = position_dominant_probe(&rope, cfg.backbone.grid, (row, col), cfg.backbone.n_txt_tokens)
            .map_err(|e| e.to_string())?;
        let proj = BlockProjection::identity(rope.config().d_model());
        attention_map(&stream, &stream, &proj, &rope, w, (row, col))
    } else {
        attention_map_at(&cfg, default_map_block(&cfg.backbone), w, (row, col))
    };
    map.map(|m| m.into_data()).map_err(|e| e.to_string())
}

/// Per-step `m_mean` and applied weight for one schedule.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    m_mean: Vec<f64>,
    weights: Vec<f64>,
}

#[wasm_bindgen]
impl Trace {
    #[wasm_bindgen(getter)]
    pub fn m_mean(&self) -> Vec<f64> {
        self.m_mean.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }
}

/// `w_override` of `None` runs the adaptive schedule.
pub fn edit_trace(
    src_prompt: &str,
    tgt_prompt: &str,
    seed: u64,
    steps: usize,
    w_override: Option<f64>,
) -> Result<Trace, String> {
    let mut cfg = pipeline(src_prompt, tgt_prompt, seed, 4);
    cfg.backbone.n_steps = steps;
    cfg.w_override = w_override;
    let out = run_edit(&cfg).map_err(|e| e.to_string())?;
    Ok(Trace {
        m_mean: out.trace.steps.iter().map(|s| s.m_mean).collect(),
        weights: out.trace.steps.iter().map(|s| s.weight_applied).collect(),
    })
}

/// Weight rule sampled at `n` evenly spaced measurements over `[lo, hi]`.
pub fn weight_samples(m_min: f64, m_max: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    let th = Thresholds::new(m_min, m_max).map_err(|e| e.to_string())?;
    if n < 2 || hi <= lo {
        return Err("need n >= 2 samples over a non-empty range".into());
    }
    Ok((0..n)
        .map(|i| adaptive_weight(lo + (hi - lo) * i as f64 / (n - 1) as f64, &th))
        .collect())
}

#[wasm_bindgen(js_name = attentionMap)]
#[allow(clippy::too_many_arguments)]
pub fn attention_map_js(
    src_prompt: &str,
    tgt_prompt: &str,
    seed: u32,
    grid_side: usize,
    row: usize,
    col: usize,
    w: f64,
    probe: bool,
) -> Result<Vec<f64>, JsError> {
    map_values(src_prompt, tgt_prompt, seed.into(), grid_side, row, col, w, probe).map_err(|e| JsError::new(&e))
}

/// `schedule` is `"adaptive"` or a fixed weight such as `"0"` or `"1"`.
#[wasm_bindgen(js_name = editTrace)]
pub fn edit_trace_js(
    src_prompt: &str,
    tgt_prompt: &str,
    seed: u32,
    steps: usize,
    schedule: &str,
) -> Result<Trace, JsError> {
    let w = match schedule {
        "adaptive" => None,
        s => Some(
            s.parse::<f64>()
                .map_err(|_| JsError::new(&format!("bad schedule `{s}`")))?,
        ),
    };
    edit_trace(src_prompt, tgt_prompt, seed.into(), steps, w).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = weightCurve)]
pub fn weight_curve_js(m_min: f64, m_max: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    weight_samples(m_min, m_max, lo, hi, n).map_err(|e| JsError::new(&e))
}
