use super::{
    clip_outliers, design_filter, filter_apply, resample, zscore, IirFilterSpec, Rate,
    SampledSignal, SigprocError,
};

/// Outlier clip factor in standard deviations.
pub const PPG_CLIP_K: f64 = 3.0;

/// Chebyshev-II lowpass, resample to the model rate, clip, z-score.
pub fn preprocess_ppg(raw: &SampledSignal) -> Result<SampledSignal, SigprocError> {
    let IirFilterSpec::Chebyshev2Lowpass { stopband_edge_hz, .. } = IirFilterSpec::PPG_LOWPASS
    else {
        unreachable!()
    };
    if raw.rate.as_f64() < 3.0 * stopband_edge_hz {
        return Err(SigprocError::InvalidSpec(format!(
            "PPG rate {} below 3x the {stopband_edge_hz} Hz lowpass edge",
            raw.rate
        )));
    }
    let sections = design_filter(&IirFilterSpec::PPG_LOWPASS, raw.rate)?;
    let filtered = filter_apply(raw, &sections)?;
    let resampled = resample(&filtered, Rate::MODEL)?;
    let clipped = clip_outliers(&resampled, PPG_CLIP_K)?;
    zscore(&clipped)
}

/// Butterworth band-pass, resample to the model rate, z-score.
pub fn preprocess_ecg(raw: &SampledSignal) -> Result<SampledSignal, SigprocError> {
    let sections = design_filter(&IirFilterSpec::ECG_BANDPASS, raw.rate)?;
    let filtered = filter_apply(raw, &sections)?;
    let resampled = resample(&filtered, Rate::MODEL)?;
    zscore(&resampled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigproc::mean_std;

    #[test]
    fn zero_ppg_stays_zero() {
        let raw = SampledSignal::new(vec![0.0; 600 * 256], Rate::hz(256).unwrap());
        let out = preprocess_ppg(&raw).unwrap();
        assert_eq!(out.len(), 20 * 1024);
        assert!(out.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_ecg_stays_zero() {
        let raw = SampledSignal::new(vec![0.0; 90 * 256], Rate::hz(256).unwrap());
        let out = preprocess_ecg(&raw).unwrap();
        assert_eq!(out.len(), 3 * 1024);
        assert!(out.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn low_rate_rejected() {
        let raw = SampledSignal::new(vec![0.0; 100], Rate::hz(20).unwrap());
        assert!(preprocess_ppg(&raw).is_err());
    }

    #[test]
    fn ppg_output_standardised() {
        let fs = 256.0;
        let raw = SampledSignal::new(
            (0..120 * 256)
                .map(|i| {
                    let t = i as f64 / fs;
                    (2.0 * std::f64::consts::PI * 1.1 * t).sin() + 0.3 * (0.7 * t).cos() + 2.0
                })
                .collect(),
            Rate::hz(256).unwrap(),
        );
        let out = preprocess_ppg(&raw).unwrap();
        assert_eq!(out.len(), 4 * 1024);
        let (m, s) = mean_std(&out.samples);
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
    }
}
