//! Rational-ratio resampling with a Kaiser-windowed sinc kernel.
//!
//! Output sample `j` sits at input position `j * down / up`. The kernel is
//! centred there (zero group delay), its cutoff is the lower of the two
//! Nyquist rates, and it spans `KERNEL_LOBES` cutoff periods on each side.
//! Taps are renormalised per output phase, and input indices are clamped at
//! the edges, so constants pass through exactly.

use std::f64::consts::PI;

use super::{Rate, SampledSignal, SigprocError};

const KAISER_BETA: f64 = 8.0;
const KERNEL_LOBES: i64 = 16;

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Polyphase tables: for output phase `p` (= `(j * down) % up`), the input
/// offsets relative to `floor(j * down / up)` and their weights.
struct Polyphase {
    up: i64,
    down: i64,
    phases: Vec<(Vec<i64>, Vec<f64>)>,
}

impl Polyphase {
    fn new(up: u64, down: u64) -> Self {
        let (up, down) = (up as i64, down as i64);
        // Distances below are measured at the upsampled rate.
        let stretch = up.max(down);
        let half_width = KERNEL_LOBES * stretch;
        let i0_beta = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let mut offsets = Vec::new();
                let mut weights = Vec::new();
                // Input sample base+k sits at upsampled distance k*up - p.
                let k_lo = (-half_width + p).div_euclid(up);
                let k_hi = (half_width + p).div_euclid(up);
                for k in k_lo..=k_hi {
                    let d = (k * up - p) as f64;
                    let r = d / half_width as f64;
                    if r.abs() > 1.0 {
                        continue;
                    }
                    let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
                    offsets.push(k);
                    weights.push(sinc(d / stretch as f64) * window);
                }
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                (offsets, weights)
            })
            .collect();
        Polyphase { up, down, phases }
    }

    fn run(&self, input: &[f64]) -> Vec<f64> {
        let n_in = input.len() as i64;
        let n_out = (input.len() as u128 * self.up as u128 / self.down as u128) as usize;
        let last = n_in - 1;
        (0..n_out as i64)
            .map(|j| {
                let pos = j * self.down;
                let base = pos.div_euclid(self.up);
                let (offsets, weights) = &self.phases[pos.rem_euclid(self.up) as usize];
                let interior = base + offsets[0] >= 0 && base + offsets[offsets.len() - 1] <= last;
                if interior {
                    let start = (base + offsets[0]) as usize;
                    input[start..start + weights.len()]
                        .iter()
                        .zip(weights)
                        .map(|(x, w)| x * w)
                        .sum()
                } else {
                    offsets
                        .iter()
                        .zip(weights)
                        .map(|(&k, w)| input[(base + k).clamp(0, last) as usize] * w)
                        .sum()
                }
            })
            .collect()
    }
}

/// Resamples to `target`; output length is `floor(n * target / rate)`.
pub fn resample(signal: &SampledSignal, target: Rate) -> Result<SampledSignal, SigprocError> {
    signal.check_non_empty()?;
    signal.check_finite()?;
    let (up, down) = signal.rate.ratio_to(target);
    if up == 1 && down == 1 {
        return Ok(signal.clone());
    }
    let samples = Polyphase::new(up, down).run(&signal.samples);
    Ok(SampledSignal::new(samples, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_7).abs() < 1e-9);
    }

    #[test]
    fn full_night_length() {
        let sig = SampledSignal::new(vec![0.0; 9_216_000], Rate::hz(256).unwrap());
        let out = resample(&sig, Rate::MODEL).unwrap();
        assert_eq!(out.len(), 1_228_800);
        assert_eq!(out.rate, Rate::MODEL);
    }

    #[test]
    fn empty_rejected() {
        let sig = SampledSignal::new(vec![], Rate::hz(256).unwrap());
        assert!(matches!(resample(&sig, Rate::MODEL), Err(SigprocError::Empty)));
    }

    #[test]
    fn same_rate_is_identity() {
        let sig = SampledSignal::new(vec![1.0, -2.0, 3.5], Rate::MODEL);
        assert_eq!(resample(&sig, Rate::new(1024, 30).unwrap()).unwrap(), sig);
    }

    #[test]
    fn constant_preserved() {
        let sig = SampledSignal::new(vec![3.25; 10_000], Rate::hz(256).unwrap());
        let out = resample(&sig, Rate::MODEL).unwrap();
        assert!(out.samples.iter().all(|&x| (x - 3.25).abs() < 1e-6));
    }

    #[test]
    fn upsampling_sine_follows_analytic_samples() {
        let src = Rate::hz(10).unwrap();
        let n = 600;
        let sig = SampledSignal::new(
            (0..n).map(|i| (2.0 * PI * 0.5 * i as f64 / 10.0).sin()).collect(),
            src,
        );
        let target = Rate::new(25, 1).unwrap();
        let out = resample(&sig, target).unwrap();
        assert_eq!(out.len(), 1500);
        for (j, y) in out.samples.iter().enumerate().skip(200).take(1100) {
            let t = j as f64 / 25.0;
            assert!((y - (2.0 * PI * 0.5 * t).sin()).abs() < 1e-3, "j = {j}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn length_formula_and_dc(n in 1usize..3000, up in 1u32..40, down in 1u32..40, c in -5.0f64..5.0) {
            let src = Rate::new(down * 8, 1).unwrap();
            let target = Rate::new(up * 8, 1).unwrap();
            let sig = SampledSignal::new(vec![c; n], src);
            let out = resample(&sig, target).unwrap();
            let (u, d) = src.ratio_to(target);
            prop_assert_eq!(out.len() as u64, n as u64 * u / d);
            for y in &out.samples {
                prop_assert!((y - c).abs() < 1e-6);
            }
        }
    }
}
