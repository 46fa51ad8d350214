//! Joint text+image attention for one block, plus the shared variant where
//! target image queries read source image keys and values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, matmul, softmax_in_place, Matrix};
use crate::rope::{PositionId, Rope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
}

impl Grid {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index of `(row, col)`, or an error when outside the grid.
    pub fn index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.height || col >= self.width {
            return Err(Error::CellOutOfRange {
                row,
                col,
                height: self.height,
                width: self.width,
            });
        }
        Ok(row * self.width + col)
    }

    /// Canonical `[0, row, col]` ids in row-major order.
    pub fn positions(&self) -> Vec<PositionId> {
        (0..self.len())
            .map(|r| PositionId::grid(r / self.width, r % self.width))
            .collect()
    }
}

/// One branch's tokens entering a block.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    pub text: Matrix,
    pub image: Matrix,
    pub grid: Grid,
    pub positions: Vec<PositionId>,
}

impl TokenStream {
    /// Image row `r` sits at grid cell `(r / width, r % width)`.
    pub fn new(text: Matrix, image: Matrix, grid: Grid) -> Result<Self> {
        let positions = grid.positions();
        Self::with_positions(text, image, grid, positions)
    }

    /// Like [`TokenStream::new`] with an explicit per-image-token id table.
    pub fn with_positions(text: Matrix, image: Matrix, grid: Grid, positions: Vec<PositionId>) -> Result<Self> {
        if image.rows() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "image tokens vs grid cells",
                expected: grid.len(),
                got: image.rows(),
            });
        }
        if positions.len() != image.rows() {
            return Err(Error::LengthMismatch {
                what: "position ids",
                expected: image.rows(),
                got: positions.len(),
            });
        }
        if text.cols() != image.cols() {
            return Err(text.mismatch("token stream", &image));
        }
        Ok(Self {
            text,
            image,
            grid,
            positions,
        })
    }

    pub fn d_model(&self) -> usize {
        self.image.cols()
    }

    pub fn n_txt(&self) -> usize {
        self.text.rows()
    }

    pub fn n_img(&self) -> usize {
        self.image.rows()
    }
}

/// Q/K/V/O projections of one block, each `d_model x d_model`, applied as
/// `x * W`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjection {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
}

impl BlockProjection {
    pub fn identity(d_model: usize) -> Self {
        let id = Matrix::identity(d_model);
        Self {
            wq: id.clone(),
            wk: id.clone(),
            wv: id.clone(),
            wo: id,
        }
    }

    fn check(&self, d_model: usize) -> Result<()> {
        for m in [&self.wq, &self.wk, &self.wv, &self.wo] {
            if m.shape() != (d_model, d_model) {
                return Err(Error::ShapeMismatch {
                    op: "block projection",
                    left_rows: m.rows(),
                    left_cols: m.cols(),
                    right_rows: d_model,
                    right_cols: d_model,
                });
            }
        }
        Ok(())
    }
}

/// Attention output split by token type, before the output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub txt: Matrix,
    pub img: Matrix,
}

/// Multi-head scaled dot-product attention `softmax(QK^T / sqrt(d)) V`.
///
/// `q`, `k`, `v` are `n x d_model`; head `h` owns columns
/// `h * head_dim..(h + 1) * head_dim`.
pub fn multi_head_attention(q: &Matrix, k: &Matrix, v: &Matrix, num_heads: usize) -> Result<Matrix> {
    attention_with_probs(q, k, v, num_heads, None).map(|(out, _)| out)
}

/// Same as [`multi_head_attention`] and, for `probe_row`, the per-head
/// probability rows over all keys.
fn attention_with_probs(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    num_heads: usize,
    probe_row: Option<usize>,
) -> Result<(Matrix, Vec<Vec<f64>>)> {
    if q.cols() != k.cols() {
        return Err(q.mismatch("attention q/k", k));
    }
    if k.shape() != v.shape() {
        return Err(k.mismatch("attention k/v", v));
    }
    let d_model = q.cols();
    if num_heads == 0 || !d_model.is_multiple_of(num_heads) {
        return Err(Error::InvalidConfig(format!(
            "d_model {d_model} not divisible into {num_heads} heads"
        )));
    }
    let head_dim = d_model / num_heads;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut out = Matrix::zeros(q.rows(), d_model);
    let mut probes = Vec::new();
    let mut scores = vec![0.0; k.rows()];
    for h in 0..num_heads {
        let cols = h * head_dim..(h + 1) * head_dim;
        for i in 0..q.rows() {
            let qi = &q.row(i)[cols.clone()];
            for (j, s) in scores.iter_mut().enumerate() {
                *s = dot(qi, &k.row(j)[cols.clone()]) * scale;
            }
            softmax_in_place(&mut scores);
            if probe_row == Some(i) {
                probes.push(scores.clone());
            }
            let oi = &mut out.row_mut(i)[cols.clone()];
            for (j, &p) in scores.iter().enumerate() {
                for (o, &vj) in oi.iter_mut().zip(&v.row(j)[cols.clone()]) {
                    *o += p * vj;
                }
            }
        }
    }
    Ok((out, probes))
}

fn rotated(m: &Matrix, positions: &[PositionId], rope: &Rope, w: f64) -> Matrix {
    let mut out = m.clone();
    for (r, &pos) in positions.iter().enumerate() {
        rope.rotate_heads(out.row_mut(r), pos, w);
    }
    out
}

fn check_streams(tgt: &TokenStream, src: &TokenStream, proj: &BlockProjection, rope: &Rope) -> Result<()> {
    if tgt.grid != src.grid {
        return Err(Error::GridMismatch {
            tgt_h: tgt.grid.height,
            tgt_w: tgt.grid.width,
            src_h: src.grid.height,
            src_w: src.grid.width,
        });
    }
    let d_model = rope.config().d_model();
    for s in [tgt, src] {
        if s.d_model() != d_model {
            return Err(Error::LengthMismatch {
                what: "token width vs heads x head_dim",
                expected: d_model,
                got: s.d_model(),
            });
        }
    }
    proj.check(d_model)
}

/// Builds `[Q_txt^tgt; RoPE(Q_img^tgt)]`, `[K_txt^tgt; RoPE(K_img^src)]` and
/// `[V_txt^tgt; V_img^src]`.
fn shared_qkv(
    tgt: &TokenStream,
    src: &TokenStream,
    proj: &BlockProjection,
    rope: &Rope,
    w: f64,
) -> Result<(Matrix, Matrix, Matrix)> {
    check_streams(tgt, src, proj, rope)?;
    let q_img = rotated(&matmul(&tgt.image, &proj.wq)?, &tgt.positions, rope, w);
    let k_img = rotated(&matmul(&src.image, &proj.wk)?, &src.positions, rope, w);
    let q = matmul(&tgt.text, &proj.wq)?.vstack(&q_img)?;
    let k = matmul(&tgt.text, &proj.wk)?.vstack(&k_img)?;
    let v = matmul(&tgt.text, &proj.wv)?.vstack(&matmul(&src.image, &proj.wv)?)?;
    Ok((q, k, v))
}

fn split(out: &Matrix, n_txt: usize) -> AttentionOutput {
    AttentionOutput {
        txt: out.slice_rows(0, n_txt),
        img: out.slice_rows(n_txt, out.rows()),
    }
}

/// Target queries over target text plus source image keys/values. Image Q
/// and K are rotated with positions scaled by `w`; text tokens are not
/// rotated. With `src == tgt` this is ordinary joint self-attention.
pub fn shared_attention(
    tgt: &TokenStream,
    src: &TokenStream,
    proj: &BlockProjection,
    rope: &Rope,
    w: f64,
) -> Result<AttentionOutput> {
    let (q, k, v) = shared_qkv(tgt, src, proj, rope, w)?;
    let out = multi_head_attention(&q, &k, &v, rope.config().num_heads)?;
    Ok(split(&out, tgt.n_txt()))
}

pub fn self_attention(stream: &TokenStream, proj: &BlockProjection, rope: &Rope, w: f64) -> Result<AttentionOutput> {
    shared_attention(stream, stream, proj, rope, w)
}

/// Head-averaged attention from the target image query at `query_cell` onto
/// the source image keys, renormalized over the grid.
pub fn attention_map(
    tgt: &TokenStream,
    src: &TokenStream,
    proj: &BlockProjection,
    rope: &Rope,
    w: f64,
    query_cell: (usize, usize),
) -> Result<Matrix> {
    let cell = tgt.grid.index(query_cell.0, query_cell.1)?;
    let (q, k, v) = shared_qkv(tgt, src, proj, rope, w)?;
    let n_txt = tgt.n_txt();
    let (_, probes) = attention_with_probs(&q, &k, &v, rope.config().num_heads, Some(n_txt + cell))?;

    let mut weights = vec![0.0; tgt.n_img()];
    for head in &probes {
        for (acc, &p) in weights.iter_mut().zip(&head[n_txt..]) {
            *acc += p;
        }
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|x| *x /= total);
    } else {
        let uniform = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|x| *x = uniform);
    }
    Matrix::new(tgt.grid.height, tgt.grid.width, weights)
}

/// Row-major position of the largest entry; first one wins on ties.
pub fn argmax_cell(map: &Matrix) -> (usize, usize) {
    let mut best = 0;
    for (i, &v) in map.data().iter().enumerate() {
        if v > map.data()[best] {
            best = i;
        }
    }
    (best / map.cols(), best % map.cols())
}

/// Synthetic stream where the rotary term decides retrieval.
///
/// Every image token carries the same content `c`, placed on the
/// lowest-frequency-index (`theta = 1`) pair of the row and column segments
/// of each head, except one decoy cell holding `1.5 c`. With identity
/// projections and `w = 1` the query cell scores `2|a|^2` against itself and
/// at most `1.5 (cos di + cos dj) |a|^2` against the decoy, so the query
/// attends to its own cell; at `w = 0` the decoy wins on magnitude.
///
/// Returns the stream (use it as both source and target) and the decoy cell.
pub fn position_dominant_probe(
    rope: &Rope,
    grid: Grid,
    query_cell: (usize, usize),
    n_txt: usize,
) -> Result<(TokenStream, (usize, usize))> {
    const AMPLITUDE: f64 = 3.0;
    const DECOY_GAIN: f64 = 1.5;
    grid.index(query_cell.0, query_cell.1)?;
    let cfg = rope.config();
    if cfg.axis_dims[1] < 2 || cfg.axis_dims[2] < 2 {
        return Err(Error::InvalidConfig(
            "probe needs row and column rotary segments".into(),
        ));
    }
    let closeness = |r: usize, c: usize| {
        let di = r as f64 - query_cell.0 as f64;
        let dj = c as f64 - query_cell.1 as f64;
        di.cos() + dj.cos()
    };
    let decoy = (0..grid.len())
        .map(|i| (i / grid.width, i % grid.width))
        .filter(|&cell| cell != query_cell)
        .min_by(|a, b| closeness(a.0, a.1).total_cmp(&closeness(b.0, b.1)))
        .ok_or_else(|| Error::InvalidConfig("probe needs at least two grid cells".into()))?;
    if DECOY_GAIN * closeness(decoy.0, decoy.1) >= 2.0 {
        return Err(Error::InvalidConfig(format!(
            "grid {}x{} too small for a position-dominant probe",
            grid.height, grid.width
        )));
    }

    let mut content = vec![0.0; cfg.d_model()];
    let row_pair = cfg.axis_dims[0];
    let col_pair = cfg.axis_dims[0] + cfg.axis_dims[1];
    for head in content.chunks_exact_mut(cfg.head_dim) {
        head[row_pair] = AMPLITUDE;
        head[col_pair] = AMPLITUDE;
    }
    let decoy_index = decoy.0 * grid.width + decoy.1;
    let image = Matrix::from_fn(grid.len(), cfg.d_model(), |r, c| {
        if r == decoy_index {
            DECOY_GAIN * content[c]
        } else {
            content[c]
        }
    });
    let stream = TokenStream::new(Matrix::zeros(n_txt, cfg.d_model()), image, grid)?;
    Ok((stream, decoy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rope::RopeConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rope() -> Rope {
        Rope::new(RopeConfig::new(6, vec![2, 2, 2], 10_000.0, 2).unwrap()).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn stream(rng: &mut ChaCha8Rng, n_txt: usize, grid: Grid) -> TokenStream {
        TokenStream::new(random(rng, n_txt, 12), random(rng, grid.len(), 12), grid).unwrap()
    }

    fn proj(rng: &mut ChaCha8Rng) -> BlockProjection {
        BlockProjection {
            wq: random(rng, 12, 12),
            wk: random(rng, 12, 12),
            wv: random(rng, 12, 12),
            wo: random(rng, 12, 12),
        }
    }

    #[test]
    fn two_token_closed_form() {
        // one head of width 2, identity projections
        let rope = Rope::new(RopeConfig::new(2, vec![0, 2, 0], 10_000.0, 1).unwrap()).unwrap();
        let t = [0.3, -0.8];
        let x = [0.9, 0.4];
        let s = TokenStream::new(Matrix::from_rows(&[t]), Matrix::from_rows(&[x]), Grid::new(1, 1)).unwrap();
        let out = self_attention(&s, &BlockProjection::identity(2), &rope, 1.0).unwrap();

        let d = |a: [f64; 2], b: [f64; 2]| (a[0] * b[0] + a[1] * b[1]) / 2f64.sqrt();
        let mix = |q: [f64; 2]| {
            let (a, b) = (d(q, t), d(q, x));
            let m = a.max(b);
            let (ea, eb) = ((a - m).exp(), (b - m).exp());
            let (pa, pb) = (ea / (ea + eb), eb / (ea + eb));
            [pa * t[0] + pb * x[0], pa * t[1] + pb * x[1]]
        };
        let (ot, oi) = (mix(t), mix(x));
        assert!((out.txt.get(0, 0) - ot[0]).abs() <= 1e-12);
        assert!((out.txt.get(0, 1) - ot[1]).abs() <= 1e-12);
        assert!((out.img.get(0, 0) - oi[0]).abs() <= 1e-12);
        assert!((out.img.get(0, 1) - oi[1]).abs() <= 1e-12);
    }

    #[test]
    fn zero_weight_equals_zero_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let grid = Grid::new(2, 3);
        let s = stream(&mut rng, 2, grid);
        let p = proj(&mut rng);
        let zeroed =
            TokenStream::with_positions(s.text.clone(), s.image.clone(), grid, vec![PositionId::ZERO; 6]).unwrap();
        let a = self_attention(&s, &p, &rope(), 0.0).unwrap();
        let b = self_attention(&zeroed, &p, &rope(), 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn permuting_image_tokens_permutes_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = Grid::new(2, 2);
        let s = stream(&mut rng, 1, grid);
        let p = proj(&mut rng);
        let perm = [2, 0, 3, 1];
        let image = Matrix::from_fn(4, 12, |r, c| s.image.get(perm[r], c));
        let positions = perm.iter().map(|&i| s.positions[i]).collect();
        let shuffled = TokenStream::with_positions(s.text.clone(), image, grid, positions).unwrap();

        let base = self_attention(&s, &p, &rope(), 1.0).unwrap();
        let moved = self_attention(&shuffled, &p, &rope(), 1.0).unwrap();
        for (r, &from) in perm.iter().enumerate() {
            for c in 0..12 {
                assert!((moved.img.get(r, c) - base.img.get(from, c)).abs() <= 1e-12);
            }
        }
        assert!(moved.txt.max_abs_diff(&base.txt) <= 1e-12);
    }

    #[test]
    fn shared_with_identical_source_is_self_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = stream(&mut rng, 3, Grid::new(3, 3));
        let p = proj(&mut rng);
        for w in [0.0, 0.37, 1.0] {
            assert_eq!(
                shared_attention(&s, &s.clone(), &p, &rope(), w).unwrap(),
                self_attention(&s, &p, &rope(), w).unwrap()
            );
        }
    }

    /// Concatenate, score, softmax and mix with plain loops, one head at a time.
    #[allow(clippy::needless_range_loop)]
    fn naive_shared(
        tgt: &TokenStream,
        src: &TokenStream,
        p: &BlockProjection,
        rope: &Rope,
        w: f64,
        use_rope: bool,
    ) -> Matrix {
        let cfg = rope.config();
        let hd = cfg.head_dim;
        let proj_row = |x: &[f64], m: &Matrix| -> Vec<f64> {
            (0..m.cols())
                .map(|c| (0..x.len()).map(|k| x[k] * m.get(k, c)).sum())
                .collect()
        };
        let mut qs = Vec::new();
        let mut ks = Vec::new();
        let mut vs = Vec::new();
        for r in 0..tgt.n_txt() {
            qs.push(proj_row(tgt.text.row(r), &p.wq));
            ks.push(proj_row(tgt.text.row(r), &p.wk));
            vs.push(proj_row(tgt.text.row(r), &p.wv));
        }
        for r in 0..tgt.n_img() {
            let mut q = proj_row(tgt.image.row(r), &p.wq);
            let mut k = proj_row(src.image.row(r), &p.wk);
            if use_rope {
                for h in 0..cfg.num_heads {
                    let qh = rope.apply(&q[h * hd..(h + 1) * hd], tgt.positions[r], w).unwrap();
                    let kh = rope.apply(&k[h * hd..(h + 1) * hd], src.positions[r], w).unwrap();
                    q[h * hd..(h + 1) * hd].copy_from_slice(&qh);
                    k[h * hd..(h + 1) * hd].copy_from_slice(&kh);
                }
            }
            qs.push(q);
            ks.push(k);
            vs.push(proj_row(src.image.row(r), &p.wv));
        }
        let n = qs.len();
        let mut out = Matrix::zeros(n, cfg.d_model());
        for h in 0..cfg.num_heads {
            for i in 0..n {
                let logits: Vec<f64> = (0..n)
                    .map(|j| (0..hd).map(|c| qs[i][h * hd + c] * ks[j][h * hd + c]).sum::<f64>() / (hd as f64).sqrt())
                    .collect();
                let m = logits.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in 0..hd {
                    let v: f64 = (0..n).map(|j| e[j] / z * vs[j][h * hd + c]).sum();
                    out.set(i, h * hd + c, v);
                }
            }
        }
        out
    }

    #[test]
    fn shared_matches_naive_concat_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let grid = Grid::new(2, 2);
        let tgt = stream(&mut rng, 1, grid);
        let src = stream(&mut rng, 1, grid);
        let p = proj(&mut rng);
        let got = shared_attention(&tgt, &src, &p, &rope(), 0.6).unwrap();
        let want = naive_shared(&tgt, &src, &p, &rope(), 0.6, true);
        assert!(got.txt.vstack(&got.img).unwrap().max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn zero_weight_matches_rope_free_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let grid = Grid::new(2, 2);
        let tgt = stream(&mut rng, 2, grid);
        let src = stream(&mut rng, 2, grid);
        let p = proj(&mut rng);
        let got = shared_attention(&tgt, &src, &p, &rope(), 0.0).unwrap();
        let want = naive_shared(&tgt, &src, &p, &rope(), 0.0, false);
        assert!(got.txt.vstack(&got.img).unwrap().max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn output_is_linear_in_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = stream(&mut rng, 2, Grid::new(2, 2));
        let p = proj(&mut rng);
        let doubled = BlockProjection {
            wv: p.wv.scale(2.0),
            ..p.clone()
        };
        let a = self_attention(&s, &p, &rope(), 1.0).unwrap();
        let b = self_attention(&s, &doubled, &rope(), 1.0).unwrap();
        assert!(b.img.max_abs_diff(&a.img.scale(2.0)) <= 1e-12);
        assert!(b.txt.max_abs_diff(&a.txt.scale(2.0)) <= 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = stream(&mut rng, 1, Grid::new(2, 2));
        let b = stream(&mut rng, 1, Grid::new(1, 4));
        assert!(matches!(
            shared_attention(&a, &b, &proj(&mut rng), &rope(), 1.0),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn map_sums_to_one_and_rejects_bad_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid = Grid::new(3, 3);
        let tgt = stream(&mut rng, 2, grid);
        let src = stream(&mut rng, 2, grid);
        let p = proj(&mut rng);
        let map = attention_map(&tgt, &src, &p, &rope(), 1.0, (1, 2)).unwrap();
        assert_eq!(map.shape(), (3, 3));
        assert!((map.data().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(matches!(
            attention_map(&tgt, &src, &p, &rope(), 1.0, (3, 0)),
            Err(Error::CellOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_weight_map_follows_content_not_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let grid = Grid::new(2, 3);
        let tgt = stream(&mut rng, 1, grid);
        let src = stream(&mut rng, 1, grid);
        let p = proj(&mut rng);
        let perm = [4, 2, 5, 0, 1, 3];
        let image = Matrix::from_fn(6, 12, |r, c| src.image.get(perm[r], c));
        let moved = TokenStream::new(src.text.clone(), image, grid).unwrap();

        let base = attention_map(&tgt, &src, &p, &rope(), 0.0, (1, 1)).unwrap();
        let after = attention_map(&tgt, &moved, &p, &rope(), 0.0, (1, 1)).unwrap();
        for (r, &from) in perm.iter().enumerate() {
            assert!((after.data()[r] - base.data()[from]).abs() <= 1e-12);
        }
    }

    #[test]
    fn head_split_merge_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = random(&mut rng, 5, 12);
        let heads: Vec<Vec<f64>> = (0..5)
            .flat_map(|r| m.row(r).chunks(6).map(<[f64]>::to_vec).collect::<Vec<_>>())
            .collect();
        let merged: Vec<f64> = heads.concat();
        assert_eq!(Matrix::new(5, 12, merged).unwrap(), m);
    }

    #[test]
    fn probe_argmax_follows_position_at_full_weight() {
        let rope = Rope::new(RopeConfig::new(16, vec![4, 6, 6], 10_000.0, 4).unwrap()).unwrap();
        let grid = Grid::new(4, 4);
        let p = BlockProjection::identity(64);
        for query in [(1, 1), (2, 1), (0, 3), (3, 3)] {
            let (s, decoy) = position_dominant_probe(&rope, grid, query, 4).unwrap();
            let full = attention_map(&s, &s, &p, &rope, 1.0, query).unwrap();
            let none = attention_map(&s, &s, &p, &rope, 0.0, query).unwrap();
            // brute force over every cell
            let best = (0..16).fold(0, |b, i| if full.data()[i] > full.data()[b] { i } else { b });
            assert_eq!((best / 4, best % 4), query);
            assert_eq!(argmax_cell(&full), query);
            assert_eq!(argmax_cell(&none), decoy);
            assert_ne!(argmax_cell(&none), query);
        }
    }
}
