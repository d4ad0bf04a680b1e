use super::{SampledSignal, SigprocError};

/// Population standard deviations below this are treated as zero.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Mean and population standard deviation, two-pass.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Clamps every sample to `mean ± k·std` of the input. Statistics are
/// computed once, before clipping.
pub fn clip_outliers(signal: &SampledSignal, k: f64) -> Result<SampledSignal, SigprocError> {
    signal.check_non_empty()?;
    signal.check_finite()?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(SigprocError::InvalidParameter(format!("clip factor k = {k}")));
    }
    let (mean, std) = mean_std(&signal.samples);
    let (lo, hi) = (mean - k * std, mean + k * std);
    Ok(signal.with_samples(signal.samples.iter().map(|x| x.clamp(lo, hi)).collect()))
}

/// Zero mean, unit population variance. Near-constant input maps to zeros.
pub fn zscore(signal: &SampledSignal) -> Result<SampledSignal, SigprocError> {
    signal.check_non_empty()?;
    signal.check_finite()?;
    let (mean, std) = mean_std(&signal.samples);
    if std < DEGENERATE_STD {
        return Ok(signal.with_samples(vec![0.0; signal.len()]));
    }
    let centered: Vec<f64> = signal.samples.iter().map(|x| (x - mean) / std).collect();
    // A second centring pass removes the O(eps) residual mean of long signals.
    let (m2, s2) = mean_std(&centered);
    Ok(signal.with_samples(centered.iter().map(|x| (x - m2) / s2).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigproc::Rate;
    use proptest::prelude::*;

    fn sig(v: Vec<f64>) -> SampledSignal {
        SampledSignal::new(v, Rate::MODEL)
    }

    #[test]
    fn zscore_hand_example() {
        let out = zscore(&sig(vec![1.0, 2.0, 3.0])).unwrap();
        let r = (1.5f64).sqrt();
        let expected = [-r, 0.0, r];
        for (a, b) in out.samples.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zscore_constant_is_zero() {
        let out = zscore(&sig(vec![4.2; 50])).unwrap();
        assert!(out.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn clip_spike() {
        let mut v = vec![0.0; 999];
        v.push(100.0);
        // Brute force: mean = 0.1, var = (999 * 0.01 + 99.9^2) / 1000.
        let mean = 0.1;
        let var = (999.0 * 0.1 * 0.1 + 99.9 * 99.9) / 1000.0;
        let hi = mean + 3.0 * f64::sqrt(var);
        let out = clip_outliers(&sig(v.clone()), 3.0).unwrap();
        assert!((out.samples[999] - hi).abs() < 1e-9);
        assert_eq!(&out.samples[..999], &v[..999]);
    }

    #[test]
    fn clip_constant_unchanged() {
        let s = sig(vec![-7.0; 20]);
        assert_eq!(clip_outliers(&s, 3.0).unwrap(), s);
    }

    #[test]
    fn clip_within_bounds_identity() {
        let s = sig(vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(clip_outliers(&s, 3.0).unwrap(), s);
    }

    #[test]
    fn clip_rejects_bad_k() {
        assert!(clip_outliers(&sig(vec![1.0]), 0.0).is_err());
        assert!(clip_outliers(&sig(vec![1.0]), f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn zscore_moments_and_idempotence(v in prop::collection::vec(-1e3f64..1e3, 2..400)) {
            let once = zscore(&sig(v)).unwrap();
            let (m, s) = mean_std(&once.samples);
            if s > 0.0 {
                prop_assert!(m.abs() < 1e-9);
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
            let twice = zscore(&once).unwrap();
            for (a, b) in once.samples.iter().zip(&twice.samples) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn clip_range_and_monotone_in_k(
            v in prop::collection::vec(-50.0f64..50.0, 1..300),
            k1 in 0.2f64..4.0,
            dk in 0.0f64..3.0,
        ) {
            let s = sig(v.clone());
            let (mean, std) = mean_std(&v);
            let small = clip_outliers(&s, k1).unwrap();
            let large = clip_outliers(&s, k1 + dk).unwrap();
            for (i, &y) in small.samples.iter().enumerate() {
                prop_assert!(y >= mean - k1 * std - 1e-12 && y <= mean + k1 * std + 1e-12);
                if y == v[i] {
                    prop_assert_eq!(large.samples[i], v[i]);
                }
            }
        }
    }
}
