//! Input strategies and end-to-end train/test runs.

use std::fmt;
use std::str::FromStr;

use crate::augment::{augment_ppg, AugmentError, AugmentParams};
use crate::autodiff::TensorError;
use crate::data::{DataError, Recording, AUG_CHANNEL, PPG_CHANNEL};
use crate::eval::{EvalError, EvalReport};
use crate::model::{build_model, Model, ModelConfig, Variant};
use crate::train::{prepare, train_loop, Prepared, TrainConfig, TrainError, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Which signals feed the network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// PPG alone, single-stream.
    Ppg,
    /// PPG plus an augmented copy of itself, dual-stream.
    PpgAug,
    /// PPG plus a named channel stored in the recording, dual-stream.
    PpgFile(String),
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ppg" => Ok(Strategy::Ppg),
            "ppg+aug" => Ok(Strategy::PpgAug),
            _ => match s.strip_prefix("ppg+file:") {
                Some(name) if !name.is_empty() => Ok(Strategy::PpgFile(name.to_string())),
                _ => Err(format!("unknown strategy `{s}` (expected ppg, ppg+aug or ppg+file:NAME)")),
            },
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Ppg => f.write_str("ppg"),
            Strategy::PpgAug => f.write_str("ppg+aug"),
            Strategy::PpgFile(name) => write!(f, "ppg+file:{name}"),
        }
    }
}

impl Strategy {
    pub fn variant(&self) -> Variant {
        match self {
            Strategy::Ppg => Variant::Single,
            _ => Variant::Dual,
        }
    }

    /// Channel names in stream order.
    pub fn channels(&self) -> Vec<&str> {
        match self {
            Strategy::Ppg => vec![PPG_CHANNEL],
            Strategy::PpgAug => vec![PPG_CHANNEL, AUG_CHANNEL],
            Strategy::PpgFile(name) => vec![PPG_CHANNEL, name.as_str()],
        }
    }

    /// Makes sure `rec` carries every channel this strategy reads. An
    /// absent augmented channel is generated; anything else must exist.
    pub fn attach_aux(&self, rec: &mut Recording, aug: &AugmentParams) -> Result<(), ExperimentError> {
        if *self == Strategy::PpgAug && rec.channel(AUG_CHANNEL).is_none() {
            augment_recording(rec, aug)?;
        }
        for name in self.channels() {
            if rec.channel(name).is_none() {
                return Err(ExperimentError::Config(format!(
                    "strategy {self} needs channel `{name}`, missing in recording `{}`",
                    rec.subject_id
                )));
            }
        }
        Ok(())
    }
}

/// Per-recording augmentation seed: FNV-1a of the subject id mixed into the
/// base seed, so it does not depend on dataset order.
pub fn augment_seed(base: u64, subject_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in subject_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ base
}

/// Writes the `aug` channel from the recording's `ppg`.
pub fn augment_recording(rec: &mut Recording, params: &AugmentParams) -> Result<(), ExperimentError> {
    let ppg = rec.channel(PPG_CHANNEL).ok_or_else(|| {
        ExperimentError::Config(format!("recording `{}` has no `{PPG_CHANNEL}` channel", rec.subject_id))
    })?;
    let seeded = params.with_seed(augment_seed(params.seed, &rec.subject_id));
    let aug = augment_ppg(ppg, &seeded)?;
    rec.set_channel(AUG_CHANNEL, aug)?;
    Ok(())
}

/// Everything one strategy run produces.
pub struct RunOutput {
    pub model: Model,
    pub outcome: TrainOutcome,
    /// CSV training log.
    pub log: String,
    pub test: Option<EvalReport>,
}

pub struct RunSpec<'a> {
    pub strategy: &'a Strategy,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub augment: &'a AugmentParams,
    pub model_seed: u64,
}

fn prepare_all(recs: &[Recording], spec: &RunSpec<'_>, model: &Model) -> Result<Vec<Prepared>, ExperimentError> {
    recs.iter()
        .map(|r| {
            let mut r = r.clone();
            spec.strategy.attach_aux(&mut r, spec.augment)?;
            Ok(prepare(&r, &spec.strategy.channels(), model)?)
        })
        .collect()
}

/// Builds, trains with early stopping, and (when `test` is non-empty)
/// scores the best checkpoint on the test recordings.
pub fn run(
    spec: &RunSpec<'_>,
    train: &[Recording],
    val: &[Recording],
    test: &[Recording],
) -> Result<RunOutput, ExperimentError> {
    if spec.model.variant != spec.strategy.variant() {
        return Err(ExperimentError::Config(format!(
            "strategy {} needs a {} model, config is {}",
            spec.strategy,
            spec.strategy.variant(),
            spec.model.variant
        )));
    }
    let model = build_model(spec.model, spec.model_seed)?;
    let (tr, va) = (prepare_all(train, spec, &model)?, prepare_all(val, spec, &model)?);
    let mut log = Vec::new();
    let outcome = train_loop(&model, &tr, &va, spec.train, &mut log)?;
    let test = if test.is_empty() {
        None
    } else {
        let te = prepare_all(test, spec, &model)?;
        Some(EvalReport::from_confusion(crate::train::evaluate_pooled(&model, &te)?)?)
    };
    Ok(RunOutput { model, outcome, log: String::from_utf8(log).expect("log is UTF-8"), test })
}
