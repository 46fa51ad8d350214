//! Per-step editing measurement and the adaptive positional weight.
//!
//! For each block the source and target attention outputs are compared
//! separately on text tokens (`s_txt`) and image tokens (`s_img`). The ratio
//! `s_img / s_txt`, averaged over all blocks, is the measurement `M_t`; the
//! next step's rotary weight is a clamped linear function of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, Matrix};

/// Below this magnitude a text similarity is treated as degenerate.
pub const MIN_TEXT_SIMILARITY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSimilarity {
    pub block_index: usize,
    pub s_txt: f64,
    pub s_img: f64,
    pub ratio: f64,
}

impl BlockSimilarity {
    pub fn new(block_index: usize, s_txt: f64, s_img: f64) -> Result<Self> {
        if s_txt.is_nan() || s_txt.abs() < MIN_TEXT_SIMILARITY {
            return Err(Error::DegenerateSimilarity {
                block: block_index,
                s_txt,
            });
        }
        Ok(Self {
            block_index,
            s_txt,
            s_img,
            ratio: s_img / s_txt,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub timestep: usize,
    pub blocks: Vec<BlockSimilarity>,
    pub m_mean: f64,
    pub weight_applied: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub m_min: f64,
    pub m_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { m_min: 0.9, m_max: 1.0 }
    }
}

impl Thresholds {
    pub fn new(m_min: f64, m_max: f64) -> Result<Self> {
        let th = Self { m_min, m_max };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_min.is_finite() && self.m_max.is_finite() && self.m_min < self.m_max) {
            return Err(Error::InvalidConfig(format!(
                "thresholds need finite m_min < m_max, got m_min={} m_max={}",
                self.m_min, self.m_max
            )));
        }
        Ok(())
    }
}

/// Similarity of source and target text-token attention outputs.
pub fn text_similarity(src_txt: &Matrix, tgt_txt: &Matrix) -> Result<f64> {
    cosine_similarity(src_txt, tgt_txt)
}

/// Similarity of source and target image-token attention outputs.
pub fn image_similarity(src_img: &Matrix, tgt_img: &Matrix) -> Result<f64> {
    cosine_similarity(src_img, tgt_img)
}

/// Mean of `s_img / s_txt` over all blocks.
pub fn editing_measurement(records: &[BlockSimilarity]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("editing_measurement"));
    }
    let mut sum = 0.0;
    for r in records {
        if r.s_txt.is_nan() || r.s_txt.abs() < MIN_TEXT_SIMILARITY {
            return Err(Error::DegenerateSimilarity {
                block: r.block_index,
                s_txt: r.s_txt,
            });
        }
        sum += r.s_img / r.s_txt;
    }
    Ok(sum / records.len() as f64)
}

/// Rotary weight for the next step: 0 above `m_max`, 1 below `m_min`,
/// linear in between (the linear branch covers both endpoints).
pub fn adaptive_weight(m_prev: f64, th: &Thresholds) -> f64 {
    if m_prev > th.m_max {
        0.0
    } else if m_prev < th.m_min {
        1.0
    } else {
        (th.m_max - m_prev) / (th.m_max - th.m_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(i: usize, s_txt: f64, s_img: f64) -> BlockSimilarity {
        BlockSimilarity::new(i, s_txt, s_img).unwrap()
    }

    fn per_row_oracle(a: &Matrix, b: &Matrix) -> f64 {
        let n = a.rows();
        (0..n)
            .map(|r| {
                let (x, y) = (a.row(r), b.row(r));
                let ab: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                let na: f64 = x.iter().map(|p| p * p).sum::<f64>().sqrt();
                let nb: f64 = y.iter().map(|q| q * q).sum::<f64>().sqrt();
                ab / (na * nb)
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn similarity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let a = Matrix::from_fn(4, 6, |_, _| rng.gen_range(-1.0..1.0));
        let b = Matrix::from_fn(4, 6, |_, _| rng.gen_range(-1.0..1.0));
        assert_eq!(text_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(text_similarity(&a, &a.scale(-1.0)).unwrap(), -1.0);
        assert!((text_similarity(&a, &b).unwrap() - per_row_oracle(&a, &b)).abs() <= 1e-12);

        assert_eq!(image_similarity(&b, &b).unwrap(), 1.0);
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]);
        let y = Matrix::from_rows(&[[0.0, 3.0], [-1.0, 0.0]]);
        assert_eq!(image_similarity(&x, &y).unwrap(), 0.0);
        assert!((image_similarity(&b, &a).unwrap() - per_row_oracle(&b, &a)).abs() <= 1e-12);
        assert!(image_similarity(&a, &Matrix::zeros(3, 6)).is_err());
    }

    #[test]
    fn measurement_examples() {
        assert_eq!(
            editing_measurement(&[block(0, 0.7, 0.7), block(1, 0.3, 0.3)]).unwrap(),
            1.0
        );
        assert_eq!(
            editing_measurement(&[block(0, 1.0, 0.8), block(1, 1.0, 1.2)]).unwrap(),
            1.0
        );
        let m = editing_measurement(&[block(0, 1.0, 0.9), block(1, 1.0, 0.95), block(2, 1.0, 1.05)]).unwrap();
        assert!((m - 0.966_666_666_666_666_6).abs() < 1e-15);
    }

    #[test]
    fn measurement_errors() {
        assert_eq!(editing_measurement(&[]), Err(Error::Empty("editing_measurement")));
        assert!(matches!(
            BlockSimilarity::new(3, 1e-7, 0.5),
            Err(Error::DegenerateSimilarity { block: 3, .. })
        ));
        let sneaky = BlockSimilarity {
            block_index: 1,
            s_txt: 0.0,
            s_img: 0.2,
            ratio: f64::INFINITY,
        };
        assert!(matches!(
            editing_measurement(&[block(0, 1.0, 1.0), sneaky]),
            Err(Error::DegenerateSimilarity { block: 1, .. })
        ));
    }

    #[test]
    fn adaptive_weight_table() {
        let th = Thresholds::default();
        assert_eq!(adaptive_weight(1.05, &th), 0.0);
        assert_eq!(adaptive_weight(0.85, &th), 1.0);
        assert_eq!(adaptive_weight(1.0, &th), 0.0);
        assert_eq!(adaptive_weight(0.9, &th), 1.0);
        // 0.95 and 0.9 are not exact in binary; the f64 result is within a few ulp of 0.5
        assert!((adaptive_weight(0.95, &th) - 0.5).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn thresholds_validation() {
        assert!(Thresholds::new(1.0, 0.9).is_err());
        assert!(Thresholds::new(0.9, 0.9).is_err());
        assert!(Thresholds::new(f64::NAN, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn weight_non_increasing(a in -1.0f64..3.0, b in -1.0f64..3.0, lo in 0.0f64..1.0, gap in 0.01f64..1.0) {
            let th = Thresholds::new(lo, lo + gap).unwrap();
            let (m1, m2) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(adaptive_weight(m1, &th) >= adaptive_weight(m2, &th));
        }

        #[test]
        fn weight_in_unit_interval(m in -10.0f64..10.0, lo in -2.0f64..2.0, gap in 1e-3f64..2.0) {
            let w = adaptive_weight(m, &Thresholds::new(lo, lo + gap).unwrap());
            prop_assert!((0.0..=1.0).contains(&w));
        }

        #[test]
        fn weight_is_continuous(m in 0.5f64..1.5, eps in 0.0f64..1e-6) {
            let th = Thresholds::default();
            let jump = (adaptive_weight(m + eps, &th) - adaptive_weight(m, &th)).abs();
            prop_assert!(jump <= eps / (th.m_max - th.m_min) + 1e-12);
        }

        #[test]
        fn mean_of_copies_is_the_ratio(s_txt in 0.01f64..1.0, s_img in -1.0f64..1.0, n in 1usize..20) {
            let b = block(0, s_txt, s_img);
            let m = editing_measurement(&vec![b; n]).unwrap();
            prop_assert!((m - b.ratio).abs() <= 1e-12);
        }
    }
}
