use super::TrainError;
use crate::kv::{KvError, KvMap};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    /// Whole recordings per optimisation step.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Global gradient-norm clip; off by default.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            weight_decay: 1e-5,
            batch_size: 2,
            max_epochs: 50,
            patience: 7,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            grad_clip: None,
        }
    }
}

pub const TRAIN_KEYS: [&str; 10] = [
    "lr",
    "weight_decay",
    "batch_size",
    "max_epochs",
    "patience",
    "beta1",
    "beta2",
    "adam_eps",
    "seed",
    "grad_clip",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return bad("batch_size, patience and max_epochs must be at least 1".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad(format!("betas ({}, {}) must lie in [0, 1)", self.beta1, self.beta2));
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad(format!("adam_eps {} must be positive", self.adam_eps));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("grad_clip {c} must be positive"));
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.set("lr", self.lr);
        kv.set("weight_decay", self.weight_decay);
        kv.set("batch_size", self.batch_size);
        kv.set("max_epochs", self.max_epochs);
        kv.set("patience", self.patience);
        kv.set("beta1", self.beta1);
        kv.set("beta2", self.beta2);
        kv.set("adam_eps", self.adam_eps);
        kv.set("seed", self.seed);
        match self.grad_clip {
            Some(c) => kv.set("grad_clip", c),
            None => kv.set("grad_clip", "off"),
        }
        kv
    }

    /// Overrides the keys present in `kv`; unknown keys are rejected.
    pub fn apply_kv(mut self, kv: &KvMap) -> Result<Self, TrainError> {
        let cfg = |e: KvError| TrainError::Config(e.to_string());
        kv.reject_unknown(&TRAIN_KEYS).map_err(cfg)?;
        macro_rules! scalar {
            ($($f:ident),*) => {$(
                if let Some(v) = kv.get(stringify!($f)).map_err(cfg)? {
                    self.$f = v;
                }
            )*};
        }
        scalar!(lr, weight_decay, batch_size, max_epochs, patience, beta1, beta2, adam_eps, seed);
        match kv.raw("grad_clip") {
            None => {}
            Some("off") => self.grad_clip = None,
            Some(_) => self.grad_clip = Some(kv.require("grad_clip").map_err(cfg)?),
        }
        self.validate()?;
        Ok(self)
    }
}
