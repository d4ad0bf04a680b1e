use std::fmt;

use serde::{Deserialize, Serialize};

use super::SigprocError;

/// Exact rational sample rate in Hz, always stored in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rate {
    num: u32,
    den: u32,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rate {
    /// Model input rate, 1024 samples per 30-s epoch.
    pub const MODEL: Rate = Rate { num: 512, den: 15 };

    pub fn new(num: u32, den: u32) -> Result<Self, SigprocError> {
        if num == 0 || den == 0 {
            return Err(SigprocError::InvalidRate { num, den });
        }
        let g = gcd(num as u64, den as u64) as u32;
        Ok(Rate { num: num / g, den: den / g })
    }

    pub fn hz(hz: u32) -> Result<Self, SigprocError> {
        Rate::new(hz, 1)
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.as_f64() / 2.0
    }

    /// `target / self` as a reduced fraction `(up, down)`.
    pub fn ratio_to(&self, target: Rate) -> (u64, u64) {
        let up = target.num as u64 * self.den as u64;
        let down = target.den as u64 * self.num as u64;
        let g = gcd(up, down);
        (up / g, down / g)
    }

    /// Number of samples spanning `seconds`, if it is a whole number.
    pub fn samples_in(&self, seconds: u32) -> Option<usize> {
        let n = seconds as u64 * self.num as u64;
        (n % self.den as u64 == 0).then(|| (n / self.den as u64) as usize)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{} Hz", self.num)
        } else {
            write!(f, "{}/{} Hz", self.num, self.den)
        }
    }
}

/// A uniformly sampled real-valued signal.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    pub samples: Vec<f64>,
    pub rate: Rate,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, rate: Rate) -> Self {
        SampledSignal { samples, rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.rate.as_f64()
    }

    pub(crate) fn check_finite(&self) -> Result<(), SigprocError> {
        match self.samples.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(SigprocError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_non_empty(&self) -> Result<(), SigprocError> {
        if self.samples.is_empty() {
            Err(SigprocError::Empty)
        } else {
            Ok(())
        }
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        SampledSignal { samples, rate: self.rate }
    }
}
