//! Benchmark inputs shared by the criterion targets.

use somno::autodiff::Tensor;
use somno::rng::SeededRng;
use somno::sigproc::{Rate, SampledSignal};

/// Standard-normal tensor of `shape`.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = SeededRng::new(seed);
    let n: usize = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.normal()).collect(), shape).expect("shape matches data")
}

/// `seconds` of a noisy 1.2 Hz pulse-like wave at `rate`.
pub fn pulse_signal(seconds: usize, rate: Rate, seed: u64) -> SampledSignal {
    let mut rng = SeededRng::new(seed);
    let n = (seconds as f64 * rate.as_f64()).round() as usize;
    let dt = 1.0 / rate.as_f64();
    let samples = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * 1.2 * i as f64 * dt).sin() + 0.1 * rng.normal())
        .collect();
    SampledSignal::new(samples, rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_have_requested_size() {
        assert_eq!(random_tensor(&[2, 3], 0).numel(), 6);
        assert_eq!(pulse_signal(30, Rate::hz(256).unwrap(), 0).len(), 7680);
    }
}
