//! Settings resolved from a config file plus command-line overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use somno::augment::AugmentParams;
use somno::data::{SplitRatios, SynthConfig};
use somno::experiment::Strategy;
use somno::kv::KvMap;
use somno::model::{ModelConfig, Variant, CONFIG_KEYS};
use somno::sigproc::Rate;
use somno::train::{TrainConfig, TRAIN_KEYS};

use crate::error::CliError;

const RUN_KEYS: [&str; 2] = ["strategy", "preset"];
const SYNTH_KEYS: [&str; 7] = ["n_subjects", "n_epochs", "seed", "noise_floor", "train_ratio", "val_ratio", "test_ratio"];
const AUGMENT_KEYS: [&str; 6] = ["noise_sigma", "drift_amplitude", "drift_freq", "spike_prob", "spike_amplitude", "seed"];
const SECTIONS: [&str; 5] = ["run", "synth", "augment", "model", "train"];

/// Base network size before `model.*` overrides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(format!("unknown preset `{s}` (expected paper or desk)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        })
    }
}

/// Command-line values that override config keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<(String, u64)>,
    pub strategy: Option<Strategy>,
    pub epochs: Option<usize>,
}

/// Fully resolved settings; every key has been checked.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub preset: Preset,
    pub n_subjects: usize,
    pub ratios: SplitRatios,
    pub synth: SynthConfig,
    pub augment: AugmentParams,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(&KvMap::default()).expect("defaults resolve")
    }
}

fn section_keys(kv: &KvMap, section: &str, allowed: &[&str]) -> Result<KvMap, CliError> {
    let sub = kv.section(section);
    sub.reject_unknown(allowed).map_err(|e| CliError::Config(format!("{section}: {e}")))?;
    Ok(sub)
}

macro_rules! apply {
    ($kv:expr, $target:expr, $($f:ident),*) => {$(
        if let Some(v) = $kv.get(stringify!($f))? {
            $target.$f = v;
        }
    )*};
}

impl RunConfig {
    pub fn resolve(kv: &KvMap) -> Result<Self, CliError> {
        if let Some(k) = kv.keys().find(|k| !SECTIONS.iter().any(|s| k.starts_with(&format!("{s}.")))) {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        let run = section_keys(kv, "run", &RUN_KEYS)?;
        let strategy: Strategy = match run.raw("strategy") {
            Some(s) => s.parse().map_err(CliError::Config)?,
            None => Strategy::Ppg,
        };
        let preset: Preset = match run.raw("preset") {
            Some(s) => s.parse().map_err(CliError::Config)?,
            None => Preset::Paper,
        };

        let s = section_keys(kv, "synth", &SYNTH_KEYS)?;
        let mut synth = SynthConfig::default();
        apply!(s, synth, n_epochs, seed, noise_floor);
        synth.validate()?;
        let n_subjects = s.get("n_subjects")?.unwrap_or(20);
        let mut ratios = SplitRatios::default();
        for (key, slot) in [("train_ratio", &mut ratios.train), ("val_ratio", &mut ratios.val), ("test_ratio", &mut ratios.test)] {
            if let Some(v) = s.get(key)? {
                *slot = v;
            }
        }
        ratios.validate()?;

        let a = section_keys(kv, "augment", &AUGMENT_KEYS)?;
        let mut augment = AugmentParams::default();
        apply!(a, augment, noise_sigma, drift_amplitude, drift_freq, spike_prob, spike_amplitude, seed);
        augment.validate(Rate::MODEL.nyquist()).map_err(|e| CliError::Config(e.to_string()))?;

        let variant = strategy.variant();
        let base = match (preset, variant) {
            (Preset::Paper, Variant::Single) => ModelConfig::paper_single(),
            (Preset::Paper, Variant::Dual) => ModelConfig::paper_dual(),
            (Preset::Desk, v) => ModelConfig::desk(v),
        };
        let model = base.apply_kv(&section_keys(kv, "model", &CONFIG_KEYS)?)?;
        if model.variant != variant {
            return Err(CliError::Config(format!(
                "strategy {strategy} needs a {variant} model, model.variant is {}",
                model.variant
            )));
        }
        let train = TrainConfig::default().apply_kv(&section_keys(kv, "train", &TRAIN_KEYS)?)?;
        Ok(RunConfig { strategy, preset, n_subjects, ratios, synth, augment, model, train })
    }

    /// Reads `path` (when given), applies `overrides` on top and resolves.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut kv = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                KvMap::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => KvMap::default(),
        };
        if let Some((key, seed)) = &overrides.seed {
            kv.set(key.clone(), seed);
        }
        if let Some(s) = &overrides.strategy {
            kv.set("run.strategy", s);
        }
        if let Some(n) = overrides.epochs {
            kv.set("train.max_epochs", n);
        }
        RunConfig::resolve(&kv)
    }

    /// Every setting as a key map that [`RunConfig::resolve`] reads back.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.set("run.strategy", &self.strategy);
        kv.set("run.preset", self.preset);
        kv.set("synth.n_subjects", self.n_subjects);
        kv.set("synth.n_epochs", self.synth.n_epochs);
        kv.set("synth.seed", self.synth.seed);
        kv.set("synth.noise_floor", self.synth.noise_floor);
        kv.set("synth.train_ratio", self.ratios.train);
        kv.set("synth.val_ratio", self.ratios.val);
        kv.set("synth.test_ratio", self.ratios.test);
        let a = &self.augment;
        kv.set("augment.noise_sigma", a.noise_sigma);
        kv.set("augment.drift_amplitude", a.drift_amplitude);
        kv.set("augment.drift_freq", a.drift_freq);
        kv.set("augment.spike_prob", a.spike_prob);
        kv.set("augment.spike_amplitude", a.spike_amplitude);
        kv.set("augment.seed", a.seed);
        kv.merge(&self.model.to_kv().with_prefix("model"));
        kv.merge(&self.train.to_kv().with_prefix("train"));
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::resolve(&KvMap::parse(text).unwrap())
    }

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.strategy, Strategy::Ppg);
        assert_eq!(c.model, ModelConfig::paper_single());
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.n_subjects, 20);
    }

    #[test]
    fn round_trip() {
        let c = parse("run.strategy = ppg+aug\nrun.preset = desk\ntrain.lr = 1e-3\naugment.seed = 4\nsynth.n_epochs = 5").unwrap();
        assert_eq!(c.model, ModelConfig::desk(Variant::Dual));
        assert_eq!(c.train.lr, 1e-3);
        assert_eq!(RunConfig::resolve(&c.to_kv()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["train.momentum = 0.9", "lr = 1", "gpu.count = 2", "run.speed = 1", "augment.gain = 2"] {
            assert!(matches!(parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn variant_must_match_strategy() {
        let err = parse("run.strategy = ppg\nrun.preset = desk\nmodel.variant = dual").unwrap_err();
        assert!(err.to_string().contains("needs a single model"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let o = Overrides { seed: Some(("train.seed".into(), 9)), strategy: Some(Strategy::PpgAug), epochs: Some(1) };
        let c = RunConfig::load(None, &o).unwrap();
        assert_eq!((c.train.seed, c.train.max_epochs), (9, 1));
        assert_eq!(c.model.variant, Variant::Dual);
    }
}
