//! IIR design by analog prototype, frequency pre-warping and the bilinear
//! transform, realised as a cascade of second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Rate, SampledSignal, SigprocError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IirFilterSpec {
    /// Chebyshev type II lowpass. The edge is the stopband edge, where the
    /// response first reaches `attenuation_db`.
    Chebyshev2Lowpass { order: usize, stopband_edge_hz: f64, attenuation_db: f64 },
    /// Butterworth bandpass; `order` is the prototype order, so the digital
    /// filter has `2 * order` poles. Edges are the -3 dB points.
    ButterworthBandpass { order: usize, low_hz: f64, high_hz: f64 },
}

impl IirFilterSpec {
    /// PPG anti-alias lowpass: order 8, 8 Hz stopband edge, 40 dB.
    pub const PPG_LOWPASS: IirFilterSpec =
        IirFilterSpec::Chebyshev2Lowpass { order: 8, stopband_edge_hz: 8.0, attenuation_db: 40.0 };

    /// ECG band-pass: 4th-order Butterworth, 0.5 to 40 Hz.
    pub const ECG_BANDPASS: IirFilterSpec =
        IirFilterSpec::ButterworthBandpass { order: 4, low_hz: 0.5, high_hz: 40.0 };

    pub fn validate(&self, rate: Rate) -> Result<(), SigprocError> {
        let nyq = rate.nyquist();
        let invalid = |msg: String| Err(SigprocError::InvalidSpec(msg));
        match *self {
            IirFilterSpec::Chebyshev2Lowpass { order, stopband_edge_hz, attenuation_db } => {
                if order == 0 {
                    return invalid("order must be at least 1".into());
                }
                if !(stopband_edge_hz > 0.0 && stopband_edge_hz < nyq) {
                    return invalid(format!(
                        "edge {stopband_edge_hz} Hz outside (0, {nyq}) for rate {rate}"
                    ));
                }
                if !(attenuation_db > 0.0 && attenuation_db.is_finite()) {
                    return invalid(format!("stopband attenuation {attenuation_db} dB"));
                }
            }
            IirFilterSpec::ButterworthBandpass { order, low_hz, high_hz } => {
                if order == 0 {
                    return invalid("order must be at least 1".into());
                }
                if !(low_hz > 0.0 && low_hz < high_hz) {
                    return invalid(format!("band edges ({low_hz}, {high_hz}) not increasing"));
                }
                if high_hz >= nyq {
                    return invalid(format!("edge {high_hz} Hz at or above Nyquist {nyq} Hz"));
                }
            }
        }
        Ok(())
    }
}

/// One biquad, `a[0]` normalised to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z2;
        let den = self.a[0] + self.a[1] * z_inv + self.a[2] * z2;
        num / den
    }
}

/// Zeros, poles and gain of a transfer function.
#[derive(Clone, Debug)]
struct Zpk {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

fn chebyshev2_prototype(order: usize, attenuation_db: f64) -> Zpk {
    let n = order as i64;
    let de = 1.0 / (10f64.powf(0.1 * attenuation_db) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / order as f64;

    // Zeros on the imaginary axis; the m = 0 term of an odd order sits at infinity.
    let zeros: Vec<Complex64> = (-n + 1..n)
        .step_by(2)
        .filter(|&m| m != 0)
        .map(|m| Complex64::new(0.0, 1.0 / (m as f64 * PI / (2.0 * order as f64)).sin()))
        .collect();
    let poles: Vec<Complex64> = (-n + 1..n)
        .step_by(2)
        .map(|m| {
            let p = -Complex64::from_polar(1.0, PI * m as f64 / (2.0 * order as f64));
            let p = Complex64::new(mu.sinh() * p.re, mu.cosh() * p.im);
            1.0 / p
        })
        .collect();
    let num: Complex64 = poles.iter().map(|p| -p).product();
    let den: Complex64 = zeros.iter().map(|z| -z).product();
    Zpk { zeros, poles, gain: (num / den).re }
}

fn butterworth_prototype(order: usize) -> Zpk {
    let n = order as i64;
    let poles = (-n + 1..n)
        .step_by(2)
        .map(|m| -Complex64::from_polar(1.0, PI * m as f64 / (2.0 * order as f64)))
        .collect();
    Zpk { zeros: Vec::new(), poles, gain: 1.0 }
}

fn lowpass_to_lowpass(proto: Zpk, wo: f64) -> Zpk {
    let degree = proto.poles.len() as i32 - proto.zeros.len() as i32;
    Zpk {
        zeros: proto.zeros.iter().map(|z| z * wo).collect(),
        poles: proto.poles.iter().map(|p| p * wo).collect(),
        gain: proto.gain * wo.powi(degree),
    }
}

fn lowpass_to_bandpass(proto: Zpk, wo: f64, bw: f64) -> Zpk {
    let degree = proto.poles.len() - proto.zeros.len();
    let split = |roots: &[Complex64]| -> Vec<Complex64> {
        let scaled: Vec<Complex64> = roots.iter().map(|r| r * (bw / 2.0)).collect();
        let disc: Vec<Complex64> = scaled.iter().map(|r| (r * r - wo * wo).sqrt()).collect();
        let mut out: Vec<Complex64> = scaled.iter().zip(&disc).map(|(r, d)| r + d).collect();
        out.extend(scaled.iter().zip(&disc).map(|(r, d)| r - d));
        out
    };
    let mut zeros = split(&proto.zeros);
    zeros.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    Zpk { zeros, poles: split(&proto.poles), gain: proto.gain * bw.powi(degree as i32) }
}

fn bilinear(analog: Zpk, fs: f64) -> Zpk {
    let fs2 = 2.0 * fs;
    let degree = analog.poles.len() - analog.zeros.len();
    let mut zeros: Vec<Complex64> =
        analog.zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
    zeros.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), degree));
    let poles = analog.poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let num: Complex64 = analog.zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = analog.poles.iter().map(|p| fs2 - p).product();
    Zpk { zeros, poles, gain: analog.gain * (num / den).re }
}

const IMAG_TOL: f64 = 1e-10;

/// Groups roots into conjugate pairs and pairs of reals. Reals are paired
/// smallest-with-largest so `+1`/`-1` band-pass zeros share a section.
fn root_pairs(roots: &[Complex64]) -> Vec<(Complex64, Option<Complex64>)> {
    let mut complex: Vec<Complex64> =
        roots.iter().copied().filter(|r| r.im > IMAG_TOL).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut reals: Vec<f64> =
        roots.iter().filter(|r| r.im.abs() <= IMAG_TOL).map(|r| r.re).collect();
    reals.sort_by(f64::total_cmp);

    let mut pairs: Vec<_> = complex.into_iter().map(|c| (c, Some(c.conj()))).collect();
    let (mut lo, mut hi) = (0usize, reals.len());
    while hi > lo {
        if hi - lo >= 2 {
            pairs.push((Complex64::new(reals[lo], 0.0), Some(Complex64::new(reals[hi - 1], 0.0))));
            lo += 1;
            hi -= 1;
        } else {
            pairs.push((Complex64::new(reals[lo], 0.0), None));
            lo += 1;
        }
    }
    pairs
}

fn pair_poly(pair: &(Complex64, Option<Complex64>)) -> [f64; 3] {
    match pair {
        (r0, Some(r1)) => [1.0, -(r0 + r1).re, (r0 * r1).re],
        (r0, None) => [1.0, -r0.re, 0.0],
    }
}

fn zpk_to_sos(zpk: &Zpk) -> Vec<Sos> {
    let mut pole_pairs = root_pairs(&zpk.poles);
    // Poles nearest the unit circle are matched to zeros first.
    pole_pairs.sort_by(|a, b| (1.0 - a.0.norm()).abs().total_cmp(&(1.0 - b.0.norm()).abs()));
    let mut zero_pairs = root_pairs(&zpk.zeros);

    let mut sections = Vec::with_capacity(pole_pairs.len());
    for pp in &pole_pairs {
        let b = if zero_pairs.is_empty() {
            [1.0, 0.0, 0.0]
        } else {
            let (idx, _) = zero_pairs
                .iter()
                .enumerate()
                .map(|(i, zp)| (i, (zp.0 - pp.0).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            pair_poly(&zero_pairs.remove(idx))
        };
        sections.push(Sos { b, a: pair_poly(pp) });
    }
    // Leftover zeros only occur for improper input, which design never produces.
    debug_assert!(zero_pairs.is_empty());
    if let Some(first) = sections.first_mut() {
        for c in &mut first.b {
            *c *= zpk.gain;
        }
    }
    sections
}

/// Designs the digital filter for signals sampled at `rate`.
pub fn design_filter(spec: &IirFilterSpec, rate: Rate) -> Result<Vec<Sos>, SigprocError> {
    spec.validate(rate)?;
    let fs = rate.as_f64();
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let analog = match *spec {
        IirFilterSpec::Chebyshev2Lowpass { order, stopband_edge_hz, attenuation_db } => {
            lowpass_to_lowpass(chebyshev2_prototype(order, attenuation_db), warp(stopband_edge_hz))
        }
        IirFilterSpec::ButterworthBandpass { order, low_hz, high_hz } => {
            let (wl, wh) = (warp(low_hz), warp(high_hz));
            lowpass_to_bandpass(butterworth_prototype(order), (wl * wh).sqrt(), wh - wl)
        }
    };
    Ok(zpk_to_sos(&bilinear(analog, fs)))
}

/// Complex response of the cascade at `freq_hz`.
pub fn frequency_response(sections: &[Sos], freq_hz: f64, rate: Rate) -> Complex64 {
    let w = 2.0 * PI * freq_hz / rate.as_f64();
    let z_inv = Complex64::from_polar(1.0, -w);
    sections.iter().map(|s| s.response(z_inv)).product()
}

pub fn magnitude_db(sections: &[Sos], freq_hz: f64, rate: Rate) -> f64 {
    20.0 * frequency_response(sections, freq_hz, rate).norm().log10()
}

/// Causal single-pass filtering, direct form II transposed per section.
pub fn filter_apply(signal: &SampledSignal, sections: &[Sos]) -> Result<SampledSignal, SigprocError> {
    signal.check_non_empty()?;
    signal.check_finite()?;
    let mut out = signal.samples.clone();
    for s in sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for x in out.iter_mut() {
            let input = *x;
            let y = s.b[0] * input + z1;
            z1 = s.b[1] * input - s.a[1] * y + z2;
            z2 = s.b[2] * input - s.a[2] * y;
            *x = y;
        }
    }
    Ok(signal.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs256() -> Rate {
        Rate::hz(256).unwrap()
    }

    /// Least-squares amplitude of a known-frequency sinusoid over `x`.
    fn fitted_amplitude(x: &[f64], start: usize, freq: f64, fs: f64) -> f64 {
        let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &v) in x.iter().enumerate().skip(start) {
            let ph = 2.0 * PI * freq * i as f64 / fs;
            let (s, c) = ph.sin_cos();
            ss += s * s;
            cc += c * c;
            sc += s * c;
            xs += v * s;
            xc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (xs * cc - xc * sc) / det;
        let b = (xc * ss - xs * sc) / det;
        a.hypot(b)
    }

    fn sine(freq: f64, secs: f64, rate: Rate) -> SampledSignal {
        let n = (secs * rate.as_f64()) as usize;
        let fs = rate.as_f64();
        SampledSignal::new((0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect(), rate)
    }

    #[test]
    fn cheby2_stopband_edge_at_attenuation() {
        let sos = design_filter(&IirFilterSpec::PPG_LOWPASS, fs256()).unwrap();
        assert_eq!(sos.len(), 4);
        let db = magnitude_db(&sos, 8.0, fs256());
        assert!(db <= -40.0 + 1e-9, "{db}");
        assert!(db > -40.1);
        assert!((frequency_response(&sos, 0.0, fs256()).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cheby2_stopband_everywhere_beyond_edge() {
        let sos = design_filter(&IirFilterSpec::PPG_LOWPASS, fs256()).unwrap();
        for k in 0..=1200 {
            let f = 8.0 + k as f64 * 0.1;
            assert!(magnitude_db(&sos, f, fs256()) <= -40.0 + 1e-9, "f = {f}");
        }
    }

    #[test]
    fn butterworth_band_edges_minus_3db() {
        let sos = design_filter(&IirFilterSpec::ECG_BANDPASS, fs256()).unwrap();
        assert_eq!(sos.len(), 4);
        for f in [0.5, 40.0] {
            let db = magnitude_db(&sos, f, fs256());
            assert!((db + 3.0).abs() <= 0.3, "{f} Hz: {db} dB");
        }
        let center = (0.5f64 * 40.0).sqrt();
        assert!(magnitude_db(&sos, center, fs256()).abs() < 0.01);
    }

    #[test]
    fn invalid_specs_rejected() {
        let above = IirFilterSpec::Chebyshev2Lowpass {
            order: 8,
            stopband_edge_hz: 200.0,
            attenuation_db: 40.0,
        };
        assert!(matches!(design_filter(&above, fs256()), Err(SigprocError::InvalidSpec(_))));
        let zero = IirFilterSpec::Chebyshev2Lowpass {
            order: 0,
            stopband_edge_hz: 8.0,
            attenuation_db: 40.0,
        };
        assert!(design_filter(&zero, fs256()).is_err());
        let flipped = IirFilterSpec::ButterworthBandpass { order: 4, low_hz: 40.0, high_hz: 0.5 };
        assert!(design_filter(&flipped, fs256()).is_err());
        let nyq = IirFilterSpec::ButterworthBandpass { order: 4, low_hz: 0.5, high_hz: 128.0 };
        assert!(design_filter(&nyq, fs256()).is_err());
    }

    #[test]
    fn odd_order_design_is_proper() {
        let spec = IirFilterSpec::Chebyshev2Lowpass {
            order: 5,
            stopband_edge_hz: 10.0,
            attenuation_db: 30.0,
        };
        let sos = design_filter(&spec, fs256()).unwrap();
        assert_eq!(sos.len(), 3);
        assert!((frequency_response(&sos, 0.0, fs256()).norm() - 1.0).abs() < 1e-9);
        assert!(magnitude_db(&sos, 10.0, fs256()) <= -30.0 + 1e-9);
    }

    #[test]
    fn zero_in_zero_out() {
        let sos = design_filter(&IirFilterSpec::PPG_LOWPASS, fs256()).unwrap();
        let out = filter_apply(&SampledSignal::new(vec![0.0; 777], fs256()), &sos).unwrap();
        assert!(out.samples.iter().all(|&x| x == 0.0));
        assert_eq!(out.len(), 777);
    }

    #[test]
    fn passband_sine_matches_analytic_gain() {
        let sos = design_filter(&IirFilterSpec::PPG_LOWPASS, fs256()).unwrap();
        let out = filter_apply(&sine(2.0, 60.0, fs256()), &sos).unwrap();
        let measured = fitted_amplitude(&out.samples, 256 * 20, 2.0, 256.0);
        let expected = frequency_response(&sos, 2.0, fs256()).norm();
        assert!((measured / expected - 1.0).abs() <= 0.02, "{measured} vs {expected}");
    }

    #[test]
    fn stopband_sine_attenuated() {
        let sos = design_filter(&IirFilterSpec::PPG_LOWPASS, fs256()).unwrap();
        let out = filter_apply(&sine(20.0, 60.0, fs256()), &sos).unwrap();
        let measured = fitted_amplitude(&out.samples, 256 * 20, 20.0, 256.0);
        assert!(measured <= 0.01, "{measured}");
    }

    #[test]
    fn non_finite_rejected() {
        let sos = design_filter(&IirFilterSpec::PPG_LOWPASS, fs256()).unwrap();
        let sig = SampledSignal::new(vec![0.0, f64::NAN, 1.0], fs256());
        assert!(matches!(filter_apply(&sig, &sos), Err(SigprocError::NonFinite { index: 1 })));
    }
}
