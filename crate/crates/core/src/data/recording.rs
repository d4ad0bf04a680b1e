use crate::autodiff::Tensor;
use crate::sigproc::{Rate, SampledSignal};

use super::{DataError, Stage};

/// Seconds per scored epoch.
pub const EPOCH_SECS: u32 = 30;
/// Samples per epoch at [`Rate::MODEL`].
pub const EPOCH_SAMPLES: usize = 1024;

pub const PPG_CHANNEL: &str = "ppg";
pub const AUG_CHANNEL: &str = "aug";
pub const ECG_CHANNEL: &str = "ecg";

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub name: String,
    pub signal: SampledSignal,
}

/// One subject's night: named channels at a shared rate plus one stage per
/// 30-s epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub channels: Vec<Channel>,
    pub labels: Vec<Stage>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        channels: Vec<Channel>,
        labels: Vec<Stage>,
    ) -> Result<Self, DataError> {
        let rec = Recording { subject_id: subject_id.into(), channels, labels };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let invalid = |m: String| Err(DataError::Invalid(m));
        if self.labels.is_empty() {
            return invalid("recording has no labelled epochs".into());
        }
        let Some(first) = self.channels.first() else {
            return invalid("recording has no channels".into());
        };
        if self.channels.len() > u8::MAX as usize {
            return invalid(format!("{} channels exceed 255", self.channels.len()));
        }
        let rate = first.signal.rate;
        let Some(per_epoch) = rate.samples_in(EPOCH_SECS) else {
            return invalid(format!("rate {rate} gives a fractional number of samples per epoch"));
        };
        let expected = per_epoch * self.labels.len();
        for (i, c) in self.channels.iter().enumerate() {
            if c.name.is_empty() || c.name.len() > u8::MAX as usize {
                return invalid(format!("channel name `{}` must be 1..=255 bytes", c.name));
            }
            if self.channels[..i].iter().any(|o| o.name == c.name) {
                return invalid(format!("duplicate channel `{}`", c.name));
            }
            if c.signal.rate != rate {
                return invalid(format!("channel `{}` at {} but `{}` at {rate}", c.name, c.signal.rate, first.name));
            }
            if c.signal.len() != expected {
                return invalid(format!(
                    "channel `{}` has {} samples, expected {expected} ({} epochs x {per_epoch})",
                    c.name,
                    c.signal.len(),
                    self.labels.len()
                ));
            }
            if let Some(idx) = c.signal.samples.iter().position(|x| !x.is_finite()) {
                return invalid(format!("channel `{}` sample {idx} is not finite", c.name));
            }
        }
        Ok(())
    }

    pub fn n_epochs(&self) -> usize {
        self.labels.len()
    }

    pub fn rate(&self) -> Rate {
        self.channels[0].signal.rate
    }

    pub fn channel(&self, name: &str) -> Option<&SampledSignal> {
        self.channels.iter().find(|c| c.name == name).map(|c| &c.signal)
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    /// Adds or replaces a channel, keeping the invariants.
    pub fn set_channel(&mut self, name: &str, signal: SampledSignal) -> Result<(), DataError> {
        let mut next = self.clone();
        match next.channels.iter_mut().find(|c| c.name == name) {
            Some(c) => c.signal = signal,
            None => next.channels.push(Channel { name: name.to_string(), signal }),
        }
        next.validate()?;
        *self = next;
        Ok(())
    }
}

/// Cuts a model-rate recording into `([channels, 1024], stage)` pairs in
/// time order.
pub fn epoch_split(rec: &Recording) -> Result<Vec<(Tensor, Stage)>, DataError> {
    let n = rec.channels.first().map_or(0, |c| c.signal.len());
    if n % EPOCH_SAMPLES != 0 || n / EPOCH_SAMPLES != rec.labels.len() {
        return Err(DataError::Shape(format!(
            "{n} samples do not split into {} epochs of {EPOCH_SAMPLES}",
            rec.labels.len()
        )));
    }
    let c = rec.channels.len();
    Ok(rec
        .labels
        .iter()
        .enumerate()
        .map(|(e, &stage)| {
            let mut data = Vec::with_capacity(c * EPOCH_SAMPLES);
            for ch in &rec.channels {
                data.extend_from_slice(&ch.signal.samples[e * EPOCH_SAMPLES..(e + 1) * EPOCH_SAMPLES]);
            }
            (Tensor::new(data, &[c, EPOCH_SAMPLES]).expect("epoch shape"), stage)
        })
        .collect())
}
