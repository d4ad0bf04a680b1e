//! Synthetic PPG whose stages differ mainly in heart rate, beat-to-beat
//! amplitude variability and breathing rate.

use std::f64::consts::TAU;

use super::recording::{EPOCH_SAMPLES, PPG_CHANNEL};
use super::{Channel, DataError, Recording, Stage};
use crate::rng::SeededRng;
use crate::sigproc::{zscore, Rate, SampledSignal};

/// Relative per-beat heart-rate jitter.
const HR_JITTER: f64 = 0.05;
/// Relative spread of a subject's baseline heart rate.
const SUBJECT_HR_SPREAD: f64 = 0.06;
/// Depth of the respiratory amplitude envelope.
const RESP_DEPTH: f64 = 0.25;
/// Smallest per-beat amplitude.
const MIN_BEAT_AMP: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_epochs: usize,
    /// Row = current stage, column = next stage.
    pub transition: [[f64; 4]; 4],
    pub stage_hr_hz: [f64; 4],
    pub stage_amp_var: [f64; 4],
    pub stage_resp_hz: [f64; 4],
    pub noise_floor: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_epochs: 60,
            transition: [
                [0.85, 0.13, 0.00, 0.02],
                [0.04, 0.86, 0.06, 0.04],
                [0.02, 0.10, 0.88, 0.00],
                [0.03, 0.07, 0.00, 0.90],
            ],
            stage_hr_hz: [1.15, 1.00, 0.92, 1.08],
            stage_amp_var: [0.25, 0.15, 0.08, 0.20],
            stage_resp_hz: [0.30, 0.25, 0.22, 0.30],
            noise_floor: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Config(m));
        if self.n_epochs == 0 {
            return bad("n_epochs must be positive".into());
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return bad(format!("transition row {i} has a negative or non-finite entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return bad(format!("transition row {i} sums to {s}"));
            }
        }
        let nyq = Rate::MODEL.nyquist();
        for (name, f) in [("stage_hr_hz", &self.stage_hr_hz), ("stage_resp_hz", &self.stage_resp_hz)] {
            if let Some(v) = f.iter().find(|v| !(v.is_finite() && **v > 0.0 && **v < nyq)) {
                return bad(format!("{name} value {v} outside (0, {nyq:.3}) Hz"));
            }
        }
        if self.stage_amp_var.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("stage_amp_var must be finite and non-negative".into());
        }
        if !self.noise_floor.is_finite() || self.noise_floor < 0.0 {
            return bad(format!("noise_floor {} must be finite and non-negative", self.noise_floor));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn next_stage(rng: &mut SeededRng, row: &[f64; 4]) -> Stage {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return Stage::ALL[i];
        }
    }
    // Rounding in the cumulative sum: take the last reachable stage.
    Stage::ALL[row.iter().rposition(|p| *p > 0.0).unwrap_or(0)]
}

/// One model-rate `ppg` channel, z-scored and rounded to `f32` precision so
/// it survives a save/load round trip bitwise.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Recording, DataError> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let mut labels = Vec::with_capacity(config.n_epochs);
    labels.push(Stage::Wake);
    for i in 1..config.n_epochs {
        labels.push(next_stage(&mut rng, &config.transition[labels[i - 1].index()]));
    }

    let subject_hr = (1.0 + SUBJECT_HR_SPREAD * rng.normal()).max(0.5);
    let dt = 1.0 / Rate::MODEL.as_f64();
    let mut resp_phase: f64 = rng.uniform() * TAU;
    let mut phase: f64 = 0.0;
    let mut beat_amp = 1.0;
    let mut beat_hz = config.stage_hr_hz[labels[0].index()] * subject_hr;
    let mut samples = Vec::with_capacity(config.n_epochs * EPOCH_SAMPLES);
    for &stage in &labels {
        let s = stage.index();
        for _ in 0..EPOCH_SAMPLES {
            let envelope = 1.0 + RESP_DEPTH * resp_phase.sin();
            let pulse = phase.sin() + 0.4 * (2.0 * phase - 0.5).sin();
            samples.push(beat_amp * envelope * pulse + config.noise_floor * rng.normal());

            resp_phase = (resp_phase + TAU * config.stage_resp_hz[s] * dt) % TAU;
            phase += TAU * beat_hz * dt;
            if phase >= TAU {
                phase -= TAU;
                beat_hz = config.stage_hr_hz[s] * subject_hr * (1.0 + HR_JITTER * rng.normal());
                beat_amp = (1.0 + config.stage_amp_var[s] * rng.normal()).max(MIN_BEAT_AMP);
            }
        }
    }
    let z = zscore(&SampledSignal::new(samples, Rate::MODEL))
        .map_err(|e| DataError::Config(format!("synthetic signal: {e}")))?;
    let rounded = z.samples.iter().map(|&v| f64::from(v as f32)).collect();
    Recording::new(
        format!("synth-{}", config.seed),
        vec![Channel { name: PPG_CHANNEL.into(), signal: SampledSignal::new(rounded, Rate::MODEL) }],
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigproc::mean_std;

    #[test]
    fn full_night_length() {
        let rec = generate_synthetic(&SynthConfig { n_epochs: 1200, ..Default::default() }).unwrap();
        assert_eq!(rec.channels[0].signal.len(), 1_228_800);
        assert_eq!(rec.labels.len(), 1200);
        assert_eq!(rec.labels[0], Stage::Wake);
    }

    #[test]
    fn identity_chain_stays_awake() {
        let mut id = [[0.0; 4]; 4];
        (0..4).for_each(|i| id[i][i] = 1.0);
        let rec = generate_synthetic(&SynthConfig { n_epochs: 50, transition: id, ..Default::default() }).unwrap();
        assert!(rec.labels.iter().all(|&s| s == Stage::Wake));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cfg = SynthConfig { n_epochs: 20, seed: 9, ..Default::default() };
        let a = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, generate_synthetic(&cfg).unwrap());
        assert_ne!(a, generate_synthetic(&cfg.clone().with_seed(10)).unwrap());
    }

    #[test]
    fn output_is_standardised_f32() {
        let rec = generate_synthetic(&SynthConfig { n_epochs: 10, ..Default::default() }).unwrap();
        let x = &rec.channels[0].signal.samples;
        let (m, s) = mean_std(x);
        assert!(m.abs() < 1e-6 && (s - 1.0).abs() < 1e-6);
        assert!(x.iter().all(|&v| f64::from(v as f32) == v));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = SynthConfig::default();
        c.transition[1][1] += 1e-9;
        assert!(matches!(c.validate(), Err(DataError::Config(_))));
        let mut c = SynthConfig::default();
        c.stage_hr_hz[2] = 20.0;
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.transition[0] = [1.5, -0.5, 0.0, 0.0];
        assert!(c.validate().is_err());
        assert!(SynthConfig { n_epochs: 0, ..Default::default() }.validate().is_err());
    }

    /// Empirical transition frequencies over 2*10^4 epochs.
    #[test]
    fn transitions_converge() {
        let cfg = SynthConfig { n_epochs: 20_000, seed: 3, ..Default::default() };
        let rec = generate_synthetic(&cfg).unwrap();
        let mut counts = [[0usize; 4]; 4];
        for w in rec.labels.windows(2) {
            counts[w[0].index()][w[1].index()] += 1;
        }
        let (mut chi2, mut dof) = (0.0, 0usize);
        for (i, row) in counts.iter().enumerate() {
            let n: usize = row.iter().sum();
            assert!(n > 500, "stage {i} visited {n} times");
            for (j, &c) in row.iter().enumerate() {
                let p = cfg.transition[i][j];
                let freq = c as f64 / n as f64;
                assert!((freq - p).abs() <= 0.05 * p.max(0.01) + 0.01, "[{i}][{j}] {freq} vs {p}");
                if p > 0.0 {
                    let e = n as f64 * p;
                    chi2 += (c as f64 - e).powi(2) / e;
                    dof += 1;
                } else {
                    assert_eq!(c, 0);
                }
            }
            dof -= 1;
        }
        // Far above the 99.9% quantile only if the sampler is biased.
        let limit = dof as f64 + 5.0 * (2.0 * dof as f64).sqrt();
        assert!(chi2 < limit, "chi2 {chi2} with {dof} dof");
    }
}
