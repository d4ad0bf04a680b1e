use std::fmt;
use std::str::FromStr;

use crate::autodiff::TensorError;
use crate::kv::KvMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Single,
    Dual,
}

impl Variant {
    pub fn streams(self) -> usize {
        match self {
            Variant::Single => 1,
            Variant::Dual => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Single => "single",
            Variant::Dual => "dual",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Variant::Single),
            "dual" => Ok(Variant::Dual),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub blocks_per_stream: usize,
    /// Output channels of each encoder block.
    pub channel_schedule: Vec<usize>,
    pub fusion_blocks: usize,
    pub fusion_dim: usize,
    pub heads: usize,
    pub dense_units: usize,
    pub tcn_blocks: usize,
    pub tcn_kernel: usize,
    pub tcn_dilations: Vec<usize>,
    pub classes: usize,
    pub epsilon_weighting: f64,
    /// Hidden width of the modality-weighting MLP.
    pub weighting_hidden: usize,
    /// Input samples per scored epoch.
    pub epoch_samples: usize,
}

const PAPER_SCHEDULE: [usize; 9] = [16, 16, 32, 32, 64, 64, 128, 128, 256];

pub const CONFIG_KEYS: [&str; 14] = [
    "variant",
    "blocks_per_stream",
    "channel_schedule",
    "fusion_blocks",
    "fusion_dim",
    "heads",
    "dense_units",
    "tcn_blocks",
    "tcn_kernel",
    "tcn_dilations",
    "classes",
    "epsilon_weighting",
    "weighting_hidden",
    "epoch_samples",
];

impl ModelConfig {
    /// Full-size single-stream network.
    pub fn paper_single() -> Self {
        ModelConfig {
            variant: Variant::Single,
            blocks_per_stream: 8,
            channel_schedule: PAPER_SCHEDULE[..8].to_vec(),
            fusion_blocks: 0,
            fusion_dim: 256,
            heads: 8,
            dense_units: 128,
            tcn_blocks: 2,
            tcn_kernel: 7,
            tcn_dilations: vec![1, 2, 4, 8, 16, 32],
            classes: 4,
            epsilon_weighting: 1e-8,
            weighting_hidden: 64,
            epoch_samples: 1024,
        }
    }

    /// Full-size dual-stream network.
    pub fn paper_dual() -> Self {
        ModelConfig {
            variant: Variant::Dual,
            blocks_per_stream: 9,
            channel_schedule: PAPER_SCHEDULE.to_vec(),
            fusion_blocks: 3,
            ..ModelConfig::paper_single()
        }
    }

    /// Narrow networks that train on a single core in minutes.
    pub fn desk(variant: Variant) -> Self {
        let base = ModelConfig {
            variant,
            blocks_per_stream: 8,
            channel_schedule: vec![4, 4, 8, 8, 16, 16, 32, 32],
            fusion_blocks: 0,
            fusion_dim: 32,
            heads: 4,
            dense_units: 32,
            tcn_blocks: 2,
            tcn_kernel: 5,
            tcn_dilations: vec![1, 2, 4],
            classes: 4,
            epsilon_weighting: 1e-8,
            weighting_hidden: 8,
            epoch_samples: 1024,
        };
        match variant {
            Variant::Single => base,
            Variant::Dual => ModelConfig {
                blocks_per_stream: 9,
                channel_schedule: vec![4, 4, 8, 8, 16, 16, 32, 32, 32],
                fusion_blocks: 2,
                ..base
            },
        }
    }

    /// Small dual network for overfitting 1024-sample epochs.
    pub fn mini_dual() -> Self {
        ModelConfig {
            variant: Variant::Dual,
            blocks_per_stream: 6,
            channel_schedule: vec![4, 4, 8, 8, 16, 16],
            fusion_blocks: 1,
            fusion_dim: 16,
            heads: 2,
            dense_units: 16,
            tcn_blocks: 1,
            tcn_kernel: 3,
            tcn_dilations: vec![1, 2],
            classes: 4,
            epsilon_weighting: 1e-8,
            weighting_hidden: 4,
            epoch_samples: 1024,
        }
    }

    /// Two blocks per stream, width 8, two heads, 8-sample epochs: small
    /// enough for finite-difference checks of the whole network.
    pub fn tiny_dual() -> Self {
        ModelConfig {
            blocks_per_stream: 2,
            channel_schedule: vec![4, 8],
            fusion_dim: 8,
            dense_units: 4,
            tcn_dilations: vec![1, 2],
            epoch_samples: 8,
            ..ModelConfig::mini_dual()
        }
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let bad = |m: String| Err(TensorError::Config(m));
        if self.classes != 4 {
            return bad(format!("classes must be 4, got {}", self.classes));
        }
        if self.blocks_per_stream == 0 || self.channel_schedule.len() != self.blocks_per_stream {
            return bad(format!(
                "channel_schedule has {} entries for {} blocks",
                self.channel_schedule.len(),
                self.blocks_per_stream
            ));
        }
        if self.channel_schedule.contains(&0) {
            return bad("channel_schedule entries must be positive".into());
        }
        if self.heads == 0 || self.fusion_dim == 0 || self.fusion_dim % self.heads != 0 {
            return bad(format!("fusion_dim {} not divisible by {} heads", self.fusion_dim, self.heads));
        }
        if self.dense_units == 0 || self.tcn_kernel == 0 || self.weighting_hidden == 0 {
            return bad("dense_units, tcn_kernel and weighting_hidden must be positive".into());
        }
        if self.tcn_blocks > 0 && (self.tcn_dilations.is_empty() || self.tcn_dilations.contains(&0)) {
            return bad("tcn_dilations must be non-empty and positive".into());
        }
        if !(self.epsilon_weighting.is_finite() && self.epsilon_weighting > 0.0) {
            return bad(format!("epsilon_weighting {} must be positive", self.epsilon_weighting));
        }
        let pool = 1usize.checked_shl(self.blocks_per_stream as u32).unwrap_or(0);
        if pool == 0 || self.epoch_samples == 0 || self.epoch_samples % pool != 0 {
            return bad(format!(
                "epoch_samples {} not divisible by 2^{}",
                self.epoch_samples, self.blocks_per_stream
            ));
        }
        if self.variant == Variant::Dual && self.channel_schedule.last() != Some(&self.fusion_dim) {
            return bad(format!(
                "dual encoder must end at fusion_dim {}, schedule ends at {:?}",
                self.fusion_dim,
                self.channel_schedule.last()
            ));
        }
        Ok(())
    }

    /// Encoder steps left per epoch after all blocks.
    pub fn steps_per_epoch(&self) -> usize {
        self.epoch_samples >> self.blocks_per_stream
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.set("variant", self.variant);
        kv.set("blocks_per_stream", self.blocks_per_stream);
        kv.set_list("channel_schedule", &self.channel_schedule);
        kv.set("fusion_blocks", self.fusion_blocks);
        kv.set("fusion_dim", self.fusion_dim);
        kv.set("heads", self.heads);
        kv.set("dense_units", self.dense_units);
        kv.set("tcn_blocks", self.tcn_blocks);
        kv.set("tcn_kernel", self.tcn_kernel);
        kv.set_list("tcn_dilations", &self.tcn_dilations);
        kv.set("classes", self.classes);
        kv.set("epsilon_weighting", self.epsilon_weighting);
        kv.set("weighting_hidden", self.weighting_hidden);
        kv.set("epoch_samples", self.epoch_samples);
        kv
    }

    /// Overrides the keys present in `kv`; unknown keys are rejected and the
    /// result is validated.
    pub fn apply_kv(mut self, kv: &KvMap) -> Result<Self, TensorError> {
        let cfg = |e: crate::kv::KvError| TensorError::Config(e.to_string());
        kv.reject_unknown(&CONFIG_KEYS).map_err(cfg)?;
        macro_rules! scalar {
            ($($f:ident),*) => {$(
                if let Some(v) = kv.get(stringify!($f)).map_err(cfg)? {
                    self.$f = v;
                }
            )*};
        }
        scalar!(blocks_per_stream, fusion_blocks, fusion_dim, heads, dense_units, tcn_blocks, tcn_kernel);
        scalar!(classes, epsilon_weighting, weighting_hidden, epoch_samples);
        if let Some(v) = kv.raw("variant") {
            self.variant = v.parse().map_err(TensorError::Config)?;
        }
        if let Some(v) = kv.get_list("channel_schedule").map_err(cfg)? {
            self.channel_schedule = v;
        }
        if let Some(v) = kv.get_list("tcn_dilations").map_err(cfg)? {
            self.tcn_dilations = v;
        }
        self.validate()?;
        Ok(self)
    }
}
