//! Run configuration file: a flat TOML document, one key per setting.
//!
//! ```toml
//! src_prompt = "a horse standing in a field"   # required
//! tgt_prompt = "a horse rearing in a field"    # required
//! seed = 0
//! steps = 10
//! grid_height = 4
//! grid_width = 4
//! blocks = 8
//! shared_blocks = [0, 2, 5]
//! n_txt_tokens = 4
//! num_heads = 4
//! head_dim = 16
//! axis_dims = [4, 6, 6]
//! theta_base = 10000.0
//! m_min = 0.9
//! m_max = 1.0
//! # w_override = 0.0   # fixed rotary weight instead of the adaptive schedule
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::attention::Grid;
use crate::backbone::BackboneConfig;
use crate::measurement::Thresholds;
use crate::pipeline::PipelineConfig;
use crate::rope::RopeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub src_prompt: String,
    pub tgt_prompt: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default = "defaults::grid_side")]
    pub grid_height: usize,
    #[serde(default = "defaults::grid_side")]
    pub grid_width: usize,
    #[serde(default = "defaults::blocks")]
    pub blocks: usize,
    #[serde(default = "defaults::shared_blocks")]
    pub shared_blocks: Vec<usize>,
    #[serde(default = "defaults::n_txt_tokens")]
    pub n_txt_tokens: usize,
    #[serde(default = "defaults::num_heads")]
    pub num_heads: usize,
    #[serde(default = "defaults::head_dim")]
    pub head_dim: usize,
    #[serde(default = "defaults::axis_dims")]
    pub axis_dims: Vec<usize>,
    #[serde(default = "defaults::theta_base")]
    pub theta_base: f64,
    #[serde(default = "defaults::m_min")]
    pub m_min: f64,
    #[serde(default = "defaults::m_max")]
    pub m_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_override: Option<f64>,
}

mod defaults {
    use super::*;

    pub fn steps() -> usize {
        BackboneConfig::default().n_steps
    }
    pub fn grid_side() -> usize {
        4
    }
    pub fn blocks() -> usize {
        BackboneConfig::default().n_blocks
    }
    pub fn shared_blocks() -> Vec<usize> {
        BackboneConfig::default().shared_blocks.into_iter().collect()
    }
    pub fn n_txt_tokens() -> usize {
        BackboneConfig::default().n_txt_tokens
    }
    pub fn num_heads() -> usize {
        BackboneConfig::default().rope.num_heads
    }
    pub fn head_dim() -> usize {
        BackboneConfig::default().rope.head_dim
    }
    pub fn axis_dims() -> Vec<usize> {
        BackboneConfig::default().rope.axis_dims
    }
    pub fn theta_base() -> f64 {
        BackboneConfig::default().rope.theta_base
    }
    pub fn m_min() -> f64 {
        Thresholds::default().m_min
    }
    pub fn m_max() -> f64 {
        Thresholds::default().m_max
    }
}

/// Defaults as shown in `--help`.
pub const DEFAULTS_HELP: &str = "config keys (TOML, flat): src_prompt, tgt_prompt (required); \
seed=0 steps=10 grid_height=4 grid_width=4 blocks=8 shared_blocks=[0,2,5] n_txt_tokens=4 \
num_heads=4 head_dim=16 axis_dims=[4,6,6] theta_base=10000 m_min=0.9 m_max=1.0; \
optional w_override in [0,1]. Unknown keys are rejected.";

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let file: Self = toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())?;
        file.check_keys()?;
        Ok(file)
    }

    /// Value checks that name the key at fault.
    fn check_keys(&self) -> Result<(), String> {
        let bad = |key: &str, why: String| Err(format!("key `{key}`: {why}"));
        if self.src_prompt.trim().is_empty() {
            return bad("src_prompt", "must contain at least one word".into());
        }
        if self.tgt_prompt.trim().is_empty() {
            return bad("tgt_prompt", "must contain at least one word".into());
        }
        if self.steps == 0 {
            return bad("steps", "must be positive".into());
        }
        if self.grid_height == 0 {
            return bad("grid_height", "must be positive".into());
        }
        if self.grid_width == 0 {
            return bad("grid_width", "must be positive".into());
        }
        if self.blocks == 0 {
            return bad("blocks", "must be positive".into());
        }
        if let Some(b) = self.shared_blocks.iter().find(|&&b| b >= self.blocks) {
            return bad("shared_blocks", format!("block {b} outside 0..{}", self.blocks));
        }
        if self.n_txt_tokens == 0 {
            return bad("n_txt_tokens", "must be positive".into());
        }
        if self.num_heads == 0 {
            return bad("num_heads", "must be positive".into());
        }
        if let Err(e) = self.rope().validate() {
            return bad("axis_dims", e.to_string());
        }
        if let Err(e) = Thresholds::new(self.m_min, self.m_max) {
            return bad("m_min", e.to_string());
        }
        if let Some(w) = self.w_override {
            if !(0.0..=1.0).contains(&w) {
                return bad("w_override", format!("{w} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn rope(&self) -> RopeConfig {
        RopeConfig {
            head_dim: self.head_dim,
            axis_dims: self.axis_dims.clone(),
            theta_base: self.theta_base,
            num_heads: self.num_heads,
        }
    }

    pub fn to_pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            src_prompt: self.src_prompt.clone(),
            tgt_prompt: self.tgt_prompt.clone(),
            backbone: BackboneConfig {
                rope: self.rope(),
                n_blocks: self.blocks,
                shared_blocks: self.shared_blocks.iter().copied().collect(),
                n_txt_tokens: self.n_txt_tokens,
                grid: Grid::new(self.grid_height, self.grid_width),
                seed: self.seed,
                n_steps: self.steps,
            },
            thresholds: Thresholds {
                m_min: self.m_min,
                m_max: self.m_max,
            },
            w_override: self.w_override,
        }
    }

    pub fn from_pipeline(cfg: &PipelineConfig) -> Self {
        let bb = &cfg.backbone;
        Self {
            src_prompt: cfg.src_prompt.clone(),
            tgt_prompt: cfg.tgt_prompt.clone(),
            seed: bb.seed,
            steps: bb.n_steps,
            grid_height: bb.grid.height,
            grid_width: bb.grid.width,
            blocks: bb.n_blocks,
            shared_blocks: bb.shared_blocks.iter().copied().collect(),
            n_txt_tokens: bb.n_txt_tokens,
            num_heads: bb.rope.num_heads,
            head_dim: bb.rope.head_dim,
            axis_dims: bb.rope.axis_dims.clone(),
            theta_base: bb.rope.theta_base,
            m_min: cfg.thresholds.m_min,
            m_max: cfg.thresholds.m_max,
            w_override: cfg.w_override,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let f = RunConfigFile::parse("src_prompt = \"a cat\"\ntgt_prompt = \"a dog\"\n").unwrap();
        let p = f.to_pipeline();
        assert_eq!(p.backbone, BackboneConfig::default());
        assert_eq!(p.thresholds, Thresholds::default());
        assert_eq!(p.w_override, None);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfigFile::parse("src_prompt = \"a\"\ntgt_prompt = \"b\"\nfoo = 1\n").unwrap_err();
        assert!(err.contains("foo"), "{err}");
    }

    #[test]
    fn bad_values_name_the_key() {
        for (line, key) in [
            ("steps = 0", "steps"),
            ("shared_blocks = [9]", "shared_blocks"),
            ("axis_dims = [4, 5, 7]", "axis_dims"),
            ("m_min = 2.0", "m_min"),
            ("w_override = 1.5", "w_override"),
            ("seed = \"x\"", "seed"),
        ] {
            let text = format!("src_prompt = \"a\"\ntgt_prompt = \"b\"\n{line}\n");
            let err = RunConfigFile::parse(&text).unwrap_err();
            assert!(err.contains(key), "{line}: {err}");
        }
        let err = RunConfigFile::parse("tgt_prompt = \"b\"\n").unwrap_err();
        assert!(err.contains("src_prompt"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut p = PipelineConfig::new("a b", "c d");
        p.w_override = Some(0.25);
        p.backbone.seed = 99;
        let f = RunConfigFile::from_pipeline(&p);
        assert_eq!(RunConfigFile::parse(&f.to_toml()).unwrap().to_pipeline(), p);
    }
}
