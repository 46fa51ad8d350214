//! Rotary position embeddings over 3-axis position ids, with a continuous
//! weight `w` that scales every position before rotation.
//!
//! A head of `head_dim` channels is cut into contiguous axis segments
//! (`axis_dims`, FLUX uses `[16, 56, 56]` for the `(0, i, j)` ids). Inside a
//! segment of size `d`, channel pair `(2k, 2k + 1)` is rotated by the angle
//! `w * p * theta_k` with `theta_k = base^(-2k / d)`.
//!
//! Because every angle is linear in `w * p`, the attention score between a
//! rotated query and key only depends on `w * (p_k - p_q)`. At `w = 0` the
//! embedding is the identity and attention becomes position-agnostic.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

/// Number of position-id axes (`t`, row, column).
pub const AXES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopeConfig {
    pub head_dim: usize,
    pub axis_dims: Vec<usize>,
    pub theta_base: f64,
    pub num_heads: usize,
}

impl Default for RopeConfig {
    /// FLUX.1-dev geometry: 24 heads of 128 channels split `[16, 56, 56]`.
    fn default() -> Self {
        Self {
            head_dim: 128,
            axis_dims: vec![16, 56, 56],
            theta_base: 10_000.0,
            num_heads: 24,
        }
    }
}

impl RopeConfig {
    pub fn new(head_dim: usize, axis_dims: Vec<usize>, theta_base: f64, num_heads: usize) -> Result<Self> {
        let cfg = Self {
            head_dim,
            axis_dims,
            theta_base,
            num_heads,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis_dims.len() != AXES {
            return Err(Error::InvalidConfig(format!(
                "expected {AXES} axis dims, got {}",
                self.axis_dims.len()
            )));
        }
        if let Some(&odd) = self.axis_dims.iter().find(|&&d| d % 2 != 0) {
            return Err(Error::OddAxisDim(odd));
        }
        let sum: usize = self.axis_dims.iter().sum();
        if sum != self.head_dim {
            return Err(Error::InvalidConfig(format!(
                "axis dims sum to {sum}, head_dim is {}",
                self.head_dim
            )));
        }
        if !(self.theta_base > 1.0 && self.theta_base.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "theta_base must be a finite value > 1, got {}",
                self.theta_base
            )));
        }
        if self.num_heads == 0 || self.head_dim == 0 {
            return Err(Error::InvalidConfig("num_heads and head_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn d_model(&self) -> usize {
        self.num_heads * self.head_dim
    }
}

/// Position id of one token: `(t, row, col)`. Real-valued so ids can be
/// scaled by a fractional weight.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PositionId(pub [f64; AXES]);

impl PositionId {
    pub const ZERO: Self = Self([0.0; AXES]);

    pub fn new(t: f64, row: f64, col: f64) -> Self {
        Self([t, row, col])
    }

    /// FLUX image-token id `[0, row, col]`.
    pub fn grid(row: usize, col: usize) -> Self {
        Self([0.0, row as f64, col as f64])
    }

    pub fn scaled(self, w: f64) -> Self {
        Self(self.0.map(|p| w * p))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.is_finite())
    }
}

impl Add for PositionId {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|a| self.0[a] + rhs.0[a]))
    }
}

impl Sub for PositionId {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|a| self.0[a] - rhs.0[a]))
    }
}

/// `theta_k = base^(-2k / axis_dim)` for `k in 0..axis_dim / 2`.
pub fn frequencies(axis_dim: usize, theta_base: f64) -> Result<Vec<f64>> {
    if !axis_dim.is_multiple_of(2) {
        return Err(Error::OddAxisDim(axis_dim));
    }
    Ok((0..axis_dim / 2)
        .map(|k| theta_base.powf(-((2 * k) as f64) / axis_dim as f64))
        .collect())
}

/// A validated config with its per-axis frequency tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Rope {
    config: RopeConfig,
    freqs: Vec<Vec<f64>>,
}

impl Rope {
    pub fn new(config: RopeConfig) -> Result<Self> {
        config.validate()?;
        let freqs = config
            .axis_dims
            .iter()
            .map(|&d| frequencies(d, config.theta_base))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, freqs })
    }

    pub fn config(&self) -> &RopeConfig {
        &self.config
    }

    /// Rotates one head-sized slice in place.
    pub fn rotate_head(&self, v: &mut [f64], pos: PositionId, w: f64) {
        debug_assert_eq!(v.len(), self.config.head_dim);
        let mut offset = 0;
        for (axis, freqs) in self.freqs.iter().enumerate() {
            let p = w * pos.0[axis];
            if p != 0.0 {
                for (k, &theta) in freqs.iter().enumerate() {
                    let (sin, cos) = (p * theta).sin_cos();
                    let i = offset + 2 * k;
                    let (x, y) = (v[i], v[i + 1]);
                    v[i] = x * cos - y * sin;
                    v[i + 1] = x * sin + y * cos;
                }
            }
            offset += 2 * freqs.len();
        }
    }

    /// Rotates every head of a `d_model`-wide row in place.
    pub fn rotate_heads(&self, v: &mut [f64], pos: PositionId, w: f64) {
        debug_assert_eq!(v.len(), self.config.d_model());
        for head in v.chunks_exact_mut(self.config.head_dim) {
            self.rotate_head(head, pos, w);
        }
    }

    pub fn apply(&self, v: &[f64], pos: PositionId, w: f64) -> Result<Vec<f64>> {
        if v.len() != self.config.head_dim {
            return Err(Error::LengthMismatch {
                what: "rope input",
                expected: self.config.head_dim,
                got: v.len(),
            });
        }
        let mut out = v.to_vec();
        self.rotate_head(&mut out, pos, w);
        Ok(out)
    }

    pub fn scaled_inner_product(
        &self,
        q: &[f64],
        k: &[f64],
        pos_q: PositionId,
        pos_k: PositionId,
        w: f64,
    ) -> Result<f64> {
        Ok(dot(&self.apply(q, pos_q, w)?, &self.apply(k, pos_k, w)?))
    }
}

pub fn apply_rope(v: &[f64], pos: PositionId, w: f64, config: &RopeConfig) -> Result<Vec<f64>> {
    Rope::new(config.clone())?.apply(v, pos, w)
}

/// `<RoPE(q, w*pos_q), RoPE(k, w*pos_k)>`, which equals
/// `q^T R(w * (pos_k - pos_q)) k`.
pub fn scaled_inner_product(
    q: &[f64],
    k: &[f64],
    pos_q: PositionId,
    pos_k: PositionId,
    w: f64,
    config: &RopeConfig,
) -> Result<f64> {
    Rope::new(config.clone())?.scaled_inner_product(q, k, pos_q, pos_k, w)
}

/// Builds the explicit block-diagonal rotation matrix; used to cross-check
/// the pairwise path.
#[derive(Debug, Clone)]
pub struct RotationOracle {
    config: RopeConfig,
}

impl RotationOracle {
    pub fn new(config: RopeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    /// `head_dim x head_dim` matrix of 2x2 blocks `[[cos, -sin], [sin, cos]]`.
    pub fn matrix(&self, pos: PositionId, w: f64) -> Matrix {
        let n = self.config.head_dim;
        let mut r = Matrix::zeros(n, n);
        let mut offset = 0;
        for (axis, &d) in self.config.axis_dims.iter().enumerate() {
            for k in 0..d / 2 {
                let theta = self.config.theta_base.powf(-2.0 * k as f64 / d as f64);
                let angle = (w * pos.0[axis]) * theta;
                let (s, c) = (angle.sin(), angle.cos());
                let i = offset + 2 * k;
                r.set(i, i, c);
                r.set(i, i + 1, -s);
                r.set(i + 1, i, s);
                r.set(i + 1, i + 1, c);
            }
            offset += d;
        }
        r
    }
}

pub fn oracle_rotation_matrix(pos: PositionId, w: f64, config: &RopeConfig) -> Result<Matrix> {
    Ok(RotationOracle::new(config.clone())?.matrix(pos, w))
}
