//! Deterministic stand-in for a pretrained MM-DiT.
//!
//! Every weight comes from a splitmix64 stream keyed by
//! `(seed, block index, matrix role)`, prompts are embedded by hashing
//! whitespace tokens with 64-bit FNV-1a, and a block is joint attention plus
//! a residual tanh MLP. Nothing here is learned; it only has to be a fixed,
//! reproducible function so the sharing and scheduling logic has something
//! to act on.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::attention::{self_attention, shared_attention, AttentionOutput, BlockProjection, Grid, TokenStream};
use crate::error::{Error, Result};
use crate::numerics::{matmul, Matrix};
use crate::rope::{Rope, RopeConfig};

/// Blocks where FLUX.1-dev tolerates sharing without positional artifacts.
pub const FLUX_SHARED_BLOCKS: [usize; 13] = [0, 7, 8, 9, 10, 18, 25, 28, 37, 42, 45, 50, 56];

/// Half-width of the uniform weight distribution.
pub const WEIGHT_RANGE: f64 = 0.05;

const ROLE_WQ: u64 = 0;
const ROLE_WK: u64 = 1;
const ROLE_WV: u64 = 2;
const ROLE_WO: u64 = 3;
const ROLE_MLP_IN: u64 = 4;
const ROLE_MLP_OUT: u64 = 5;

/// splitmix64 (Steele, Lea, Flood 2014).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for `seed` and a list of tags: the seed is
    /// successively xored with the mixed tag and re-mixed.
    pub fn keyed(seed: u64, tags: &[u64]) -> Self {
        let mut s = seed;
        for &t in tags {
            s = mix(s ^ mix(t));
        }
        Self::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        finalize(self.state)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }
}

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(x: u64) -> u64 {
    finalize(x.wrapping_add(0x9E37_79B9_7F4A_7C15))
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub rope: RopeConfig,
    pub n_blocks: usize,
    pub shared_blocks: BTreeSet<usize>,
    pub n_txt_tokens: usize,
    pub grid: Grid,
    pub seed: u64,
    pub n_steps: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            rope: RopeConfig {
                head_dim: 16,
                axis_dims: vec![4, 6, 6],
                theta_base: 10_000.0,
                num_heads: 4,
            },
            n_blocks: 8,
            shared_blocks: [0, 2, 5].into_iter().collect(),
            n_txt_tokens: 4,
            grid: Grid::new(4, 4),
            seed: 0,
            n_steps: 10,
        }
    }
}

impl BackboneConfig {
    pub fn d_model(&self) -> usize {
        self.rope.d_model()
    }

    pub fn is_shared(&self, block: usize) -> bool {
        self.shared_blocks.contains(&block)
    }

    /// Replaces the shared set with the FLUX list; needs at least 57 blocks.
    pub fn with_flux_shared_blocks(mut self) -> Result<Self> {
        if self.n_blocks <= FLUX_SHARED_BLOCKS[FLUX_SHARED_BLOCKS.len() - 1] {
            return Err(Error::InvalidConfig(format!(
                "the FLUX shared-block preset needs at least 57 blocks, config has {}",
                self.n_blocks
            )));
        }
        self.shared_blocks = FLUX_SHARED_BLOCKS.into_iter().collect();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.rope.validate()?;
        if self.n_blocks == 0 {
            return Err(Error::InvalidConfig("n_blocks must be positive".into()));
        }
        if let Some(&b) = self.shared_blocks.iter().find(|&&b| b >= self.n_blocks) {
            return Err(Error::InvalidConfig(format!(
                "shared block {b} outside 0..{}",
                self.n_blocks
            )));
        }
        if self.n_txt_tokens == 0 {
            return Err(Error::InvalidConfig("n_txt_tokens must be positive".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("grid must have at least one cell".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub attn: BlockProjection,
    pub mlp_in: Matrix,
    pub mlp_out: Matrix,
}

impl BlockParams {
    pub fn zeros(d_model: usize) -> Self {
        let z = Matrix::zeros(d_model, d_model);
        Self {
            attn: BlockProjection {
                wq: z.clone(),
                wk: z.clone(),
                wv: z.clone(),
                wo: z.clone(),
            },
            mlp_in: z.clone(),
            mlp_out: z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    pub config: BackboneConfig,
    pub rope: Rope,
    pub blocks: Vec<BlockParams>,
}

impl BackboneParams {
    /// Assembles parameters from explicit blocks.
    pub fn from_blocks(config: BackboneConfig, blocks: Vec<BlockParams>) -> Result<Self> {
        config.validate()?;
        if blocks.len() != config.n_blocks {
            return Err(Error::LengthMismatch {
                what: "block parameters",
                expected: config.n_blocks,
                got: blocks.len(),
            });
        }
        let rope = Rope::new(config.rope.clone())?;
        Ok(Self { config, rope, blocks })
    }
}

fn weight_matrix(seed: u64, block: usize, role: u64, d: usize) -> Matrix {
    let mut rng = SplitMix64::keyed(seed, &[block as u64, role]);
    Matrix::from_fn(d, d, |_, _| WEIGHT_RANGE * rng.next_signed())
}

pub fn init_backbone(config: &BackboneConfig) -> Result<BackboneParams> {
    config.validate()?;
    let d = config.d_model();
    let s = config.seed;
    let blocks = (0..config.n_blocks)
        .map(|b| BlockParams {
            attn: BlockProjection {
                wq: weight_matrix(s, b, ROLE_WQ, d),
                wk: weight_matrix(s, b, ROLE_WK, d),
                wv: weight_matrix(s, b, ROLE_WV, d),
                wo: weight_matrix(s, b, ROLE_WO, d),
            },
            mlp_in: weight_matrix(s, b, ROLE_MLP_IN, d),
            mlp_out: weight_matrix(s, b, ROLE_MLP_OUT, d),
        })
        .collect();
    BackboneParams::from_blocks(config.clone(), blocks)
}

fn signed_row(seed: u64, d: usize) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..d).map(|_| rng.next_signed()).collect()
}

/// Hash-based text encoder: `n_txt_tokens x d_model`, entries in `[-1, 1]`.
///
/// Row `r` is the embedding of word `r`, seeded by `fnv1a(word)`. Rows past
/// the last word are padding seeded by `fnv1a(prompt ++ 0xff ++ r as u64 LE)`.
/// Longer prompts fold word `i` into row `i % n_txt_tokens`, averaging the
/// words that land on the same row.
pub fn encode_prompt(prompt: &str, config: &BackboneConfig) -> Result<Matrix> {
    let words: Vec<&str> = prompt.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::Empty("prompt"));
    }
    let n = config.n_txt_tokens;
    let d = config.d_model();
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        let row_words: Vec<&str> = words.iter().skip(r).step_by(n).copied().collect();
        let row = if row_words.is_empty() {
            let mut key = prompt.as_bytes().to_vec();
            key.push(0xff);
            key.extend_from_slice(&(r as u64).to_le_bytes());
            signed_row(fnv1a(&key), d)
        } else {
            let mut acc = vec![0.0; d];
            for w in &row_words {
                for (a, v) in acc.iter_mut().zip(signed_row(fnv1a(w.as_bytes()), d)) {
                    *a += v;
                }
            }
            let k = row_words.len() as f64;
            acc.into_iter().map(|a| a / k).collect()
        };
        out.row_mut(r).copy_from_slice(&row);
    }
    Ok(out)
}

/// Shared starting latent: `n_img x d_model` uniform in `[-1, 1)`, keyed by
/// `(seed, fnv1a("noise"))`.
pub fn initial_noise(config: &BackboneConfig) -> Matrix {
    let mut rng = SplitMix64::keyed(config.seed, &[fnv1a(b"noise")]);
    Matrix::from_fn(config.grid.len(), config.d_model(), |_, _| rng.next_signed())
}

fn residual_block(x: &Matrix, attn: &Matrix, p: &BlockParams) -> Result<Matrix> {
    let h = x.add(&matmul(attn, &p.attn.wo)?)?;
    let hidden = matmul(&h, &p.mlp_in)?.map(f64::tanh);
    h.add(&matmul(&hidden, &p.mlp_out)?)
}

/// One transformer block.
///
/// On shared blocks positions are scaled by `w`: the target branch passes
/// `shared_src` and attends to the source image keys/values, the source
/// branch passes `None` and runs self-attention. Unshared blocks run
/// ordinary self-attention with unscaled positions and reject `shared_src`.
///
/// Returns the updated stream and the attention output before `Wo`.
pub fn block_forward(
    stream: &TokenStream,
    block_index: usize,
    params: &BackboneParams,
    w: f64,
    shared_src: Option<&TokenStream>,
) -> Result<(TokenStream, AttentionOutput)> {
    let p = params.blocks.get(block_index).ok_or(Error::BlockOutOfRange {
        block: block_index,
        n_blocks: params.blocks.len(),
    })?;
    let attn = match shared_src {
        Some(src) if params.config.is_shared(block_index) => shared_attention(stream, src, &p.attn, &params.rope, w)?,
        Some(_) => return Err(Error::UnexpectedSharedSource { block: block_index }),
        None if params.config.is_shared(block_index) => self_attention(stream, &p.attn, &params.rope, w)?,
        None => self_attention(stream, &p.attn, &params.rope, 1.0)?,
    };
    let next = TokenStream::with_positions(
        residual_block(&stream.text, &attn.txt, p)?,
        residual_block(&stream.image, &attn.img, p)?,
        stream.grid,
        stream.positions.clone(),
    )?;
    Ok((next, attn))
}

/// Euler update `x + (f_out - x) / T`.
pub fn denoise_step(x: &Matrix, f_out: &Matrix, _t: usize, n_steps: usize) -> Result<Matrix> {
    if n_steps == 0 {
        return Err(Error::InvalidConfig("denoise_step with T = 0".into()));
    }
    let delta = f_out.sub(x)?;
    x.add(&delta.scale(1.0 / n_steps as f64))
}
