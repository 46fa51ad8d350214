//! Paired source/target denoising with adaptive attention sharing.
//!
//! Both branches start from the same latent. At every step all blocks run
//! for both branches; in shared blocks the target branch attends to the
//! source branch's image keys and values with rotary weight `w`. The block
//! similarities of that step give `M_t`, and `M_t` sets `w` for the next
//! step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention::{attention_map, TokenStream};
use crate::backbone::{
    block_forward, denoise_step, encode_prompt, init_backbone, initial_noise, BackboneConfig, BackboneParams,
};
use crate::error::{Error, Result};
use crate::measurement::{
    adaptive_weight, editing_measurement, image_similarity, text_similarity, BlockSimilarity, StepRecord, Thresholds,
};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub src_prompt: String,
    pub tgt_prompt: String,
    pub backbone: BackboneConfig,
    pub thresholds: Thresholds,
    /// Fixed weight for every step instead of the adaptive schedule.
    pub w_override: Option<f64>,
}

impl PipelineConfig {
    pub fn new(src_prompt: impl Into<String>, tgt_prompt: impl Into<String>) -> Self {
        Self {
            src_prompt: src_prompt.into(),
            tgt_prompt: tgt_prompt.into(),
            backbone: BackboneConfig::default(),
            thresholds: Thresholds::default(),
            w_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.thresholds.validate()?;
        if let Some(w) = self.w_override {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidConfig(format!("w_override must lie in [0, 1], got {w}")));
            }
        }
        Ok(())
    }
}

/// Per-step records, first entry is `t = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditingTrace {
    pub steps: Vec<StepRecord>,
    pub config: PipelineConfig,
}

impl EditingTrace {
    /// Weight the schedule assigns to the step following `steps[..=i]`.
    pub fn scheduled_weight(&self, i: usize) -> f64 {
        match self.config.w_override {
            Some(w) => w,
            None if i == 0 => 1.0,
            None => adaptive_weight(self.steps[i - 1].m_mean, &self.config.thresholds),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditOutcome {
    pub src_final: Matrix,
    pub tgt_final: Matrix,
    pub trace: EditingTrace,
}

fn next_weight(config: &PipelineConfig, previous: Option<&StepRecord>) -> f64 {
    match (config.w_override, previous) {
        (Some(w), _) => w,
        (None, None) => 1.0,
        (None, Some(prev)) => adaptive_weight(prev.m_mean, &config.thresholds),
    }
}

fn ensure_finite(m: &Matrix, what: &'static str, timestep: usize, block: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what, timestep, block })
    }
}

/// Runs every block once for both branches at one timestep.
///
/// Returns the final streams and the per-block similarities.
fn run_blocks(
    params: &BackboneParams,
    mut src: TokenStream,
    mut tgt: TokenStream,
    w: f64,
    timestep: usize,
) -> Result<(TokenStream, TokenStream, Vec<BlockSimilarity>)> {
    let mut sims = Vec::with_capacity(params.config.n_blocks);
    for block in 0..params.config.n_blocks {
        let (src_next, src_attn) = block_forward(&src, block, params, w, None)?;
        let shared = params.config.is_shared(block).then_some(&src);
        let (tgt_next, tgt_attn) = block_forward(&tgt, block, params, w, shared)?;
        for (m, what) in [
            (&src_attn.txt, "source text attention"),
            (&src_attn.img, "source image attention"),
            (&tgt_attn.txt, "target text attention"),
            (&tgt_attn.img, "target image attention"),
            (&src_next.image, "source image stream"),
            (&tgt_next.image, "target image stream"),
        ] {
            ensure_finite(m, what, timestep, block)?;
        }
        let s_txt = text_similarity(&src_attn.txt, &tgt_attn.txt)?;
        let s_img = image_similarity(&src_attn.img, &tgt_attn.img)?;
        sims.push(BlockSimilarity::new(block, s_txt, s_img)?);
        src = src_next;
        tgt = tgt_next;
    }
    Ok((src, tgt, sims))
}

pub fn run_edit(config: &PipelineConfig) -> Result<EditOutcome> {
    config.validate()?;
    let params = init_backbone(&config.backbone)?;
    run_edit_with(config, &params)
}

/// [`run_edit`] with prebuilt backbone parameters.
pub fn run_edit_with(config: &PipelineConfig, params: &BackboneParams) -> Result<EditOutcome> {
    config.validate()?;
    let bb = &params.config;
    let n_steps = bb.n_steps;
    let txt_src = encode_prompt(&config.src_prompt, bb)?;
    let txt_tgt = encode_prompt(&config.tgt_prompt, bb)?;
    let mut x_src = initial_noise(bb);
    let mut x_tgt = x_src.clone();
    let mut steps: Vec<StepRecord> = Vec::with_capacity(n_steps);

    for t in (1..=n_steps).rev() {
        let w = next_weight(config, steps.last());
        let src = TokenStream::new(txt_src.clone(), x_src.clone(), bb.grid)?;
        let tgt = TokenStream::new(txt_tgt.clone(), x_tgt.clone(), bb.grid)?;
        let (src_out, tgt_out, blocks) = run_blocks(params, src, tgt, w, t)?;
        let m_mean = editing_measurement(&blocks)?;
        if !m_mean.is_finite() {
            return Err(Error::NonFinite {
                what: "editing measurement",
                timestep: t,
                block: bb.n_blocks - 1,
            });
        }
        steps.push(StepRecord {
            timestep: t,
            blocks,
            m_mean,
            weight_applied: w,
        });
        x_src = denoise_step(&x_src, &src_out.image, t, n_steps)?;
        x_tgt = denoise_step(&x_tgt, &tgt_out.image, t, n_steps)?;
    }

    Ok(EditOutcome {
        src_final: x_src,
        tgt_final: x_tgt,
        trace: EditingTrace {
            steps,
            config: config.clone(),
        },
    })
}

/// Independent runs; result `i` belongs to `configs[i]` whatever the thread
/// schedule. Uses the ambient rayon pool.
pub fn run_batch(configs: &[PipelineConfig]) -> Vec<Result<EditOutcome>> {
    configs.par_iter().map(run_edit).collect()
}

/// Attention map of the target query at `cell` over the source image, taken
/// in `block` at the first timestep with every shared block before it using
/// weight `w`.
pub fn attention_map_at(config: &PipelineConfig, block: usize, w: f64, cell: (usize, usize)) -> Result<Matrix> {
    config.validate()?;
    let params = init_backbone(&config.backbone)?;
    let bb = &params.config;
    if block >= bb.n_blocks {
        return Err(Error::BlockOutOfRange {
            block,
            n_blocks: bb.n_blocks,
        });
    }
    let noise = initial_noise(bb);
    let mut src = TokenStream::new(encode_prompt(&config.src_prompt, bb)?, noise.clone(), bb.grid)?;
    let mut tgt = TokenStream::new(encode_prompt(&config.tgt_prompt, bb)?, noise, bb.grid)?;
    for b in 0..block {
        let (s, _) = block_forward(&src, b, &params, w, None)?;
        let (g, _) = block_forward(&tgt, b, &params, w, bb.is_shared(b).then_some(&src))?;
        src = s;
        tgt = g;
    }
    attention_map(&tgt, &src, &params.blocks[block].attn, &params.rope, w, cell)
}

/// First shared block, or block 0 when nothing is shared.
pub fn default_map_block(config: &BackboneConfig) -> usize {
    config.shared_blocks.iter().next().copied().unwrap_or(0)
}
