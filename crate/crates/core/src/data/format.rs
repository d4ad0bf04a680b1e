//! Binary recording file, little-endian:
//!
//! ```text
//! "PSG1" | version u16 | n_channels u8 | rate_num u32 | rate_den u32 | n_epochs u32
//! per channel: name_len u8 | UTF-8 name | n_epochs * samples_per_epoch f32
//! n_epochs u8 stage codes
//! ```
//!
//! Samples are stored as `f32`; round trips are bitwise for samples that
//! are exactly representable in `f32`.

use std::fs;
use std::path::Path;

use super::recording::EPOCH_SECS;
use super::{Channel, DataError, Recording, Stage};
use crate::sigproc::{Rate, SampledSignal};

pub const MAGIC: &[u8; 4] = b"PSG1";
pub const FORMAT_VERSION: u16 = 1;

pub fn encode_recording(rec: &Recording) -> Result<Vec<u8>, DataError> {
    rec.validate()?;
    let rate = rec.rate();
    let n_epochs = u32::try_from(rec.n_epochs())
        .map_err(|_| DataError::Invalid(format!("{} epochs exceed u32", rec.n_epochs())))?;
    let per_channel = rec.channels[0].signal.len();
    let mut out = Vec::with_capacity(19 + rec.channels.len() * (256 + 4 * per_channel) + rec.n_epochs());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(rec.channels.len() as u8);
    out.extend_from_slice(&rate.num().to_le_bytes());
    out.extend_from_slice(&rate.den().to_le_bytes());
    out.extend_from_slice(&n_epochs.to_le_bytes());
    for c in &rec.channels {
        out.push(c.name.len() as u8);
        out.extend_from_slice(c.name.as_bytes());
        for &x in &c.signal.samples {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out.extend(rec.labels.iter().map(|s| s.index() as u8));
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, at: usize, msg: impl Into<String>) -> Result<T, DataError> {
        Err(DataError::Format { offset: at, msg: msg.into() })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.buf.len() - self.pos < n {
            return self.fail(
                self.buf.len(),
                format!("truncated {what}: need {n} bytes at {}, file ends at {}", self.pos, self.buf.len()),
            );
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, DataError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, DataError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_recording(bytes: &[u8], subject_id: &str) -> Result<Recording, DataError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return r.fail(0, "bad magic, expected \"PSG1\"");
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return r.fail(4, format!("unsupported version {version}"));
    }
    let n_channels = r.u8("channel count")?;
    if n_channels == 0 {
        return r.fail(6, "zero channels");
    }
    let (num, den) = (r.u32("rate numerator")?, r.u32("rate denominator")?);
    let rate = Rate::new(num, den)
        .map_err(|_| DataError::Format { offset: 7, msg: format!("invalid rate {num}/{den}") })?;
    let n_epochs = r.u32("epoch count")? as usize;
    if n_epochs == 0 {
        return r.fail(15, "zero epochs");
    }
    let Some(per_epoch) = rate.samples_in(EPOCH_SECS) else {
        return r.fail(7, format!("rate {rate} gives a fractional number of samples per epoch"));
    };
    let n_samples = per_epoch
        .checked_mul(n_epochs)
        .ok_or_else(|| DataError::Format { offset: 15, msg: "sample count overflows".into() })?;

    let mut channels = Vec::with_capacity(n_channels as usize);
    for _ in 0..n_channels {
        let len_at = r.pos;
        let len = r.u8("channel name length")? as usize;
        if len == 0 {
            return r.fail(len_at, "empty channel name");
        }
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(len, "channel name")?)
            .map_err(|_| DataError::Format { offset: name_at, msg: "channel name is not UTF-8".into() })?
            .to_string();
        if channels.iter().any(|c: &Channel| c.name == name) {
            return r.fail(name_at, format!("duplicate channel `{name}`"));
        }
        let byte_len = n_samples
            .checked_mul(4)
            .ok_or_else(|| DataError::Format { offset: r.pos, msg: "sample block overflows".into() })?;
        let start = r.pos;
        let block = r.take(byte_len, "samples")?;
        let mut samples = Vec::with_capacity(n_samples);
        for (i, b) in block.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(b.try_into().unwrap());
            if !v.is_finite() {
                return r.fail(start + 4 * i, format!("non-finite sample in `{name}`"));
            }
            samples.push(f64::from(v));
        }
        channels.push(Channel { name, signal: SampledSignal::new(samples, rate) });
    }
    let labels_at = r.pos;
    let codes = r.take(n_epochs, "stage codes")?;
    let mut labels = Vec::with_capacity(n_epochs);
    for (i, &c) in codes.iter().enumerate() {
        match Stage::from_index(c as usize) {
            Some(s) => labels.push(s),
            None => return r.fail(labels_at + i, format!("stage code {c} outside 0..=3")),
        }
    }
    if r.pos != bytes.len() {
        return r.fail(r.pos, format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Recording::new(subject_id, channels, labels)
}

pub fn save_recording(rec: &Recording, path: &Path) -> Result<(), DataError> {
    let bytes = encode_recording(rec)?;
    fs::write(path, bytes).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Loads a recording; the subject id is the file stem.
pub fn load_recording(path: &Path) -> Result<Recording, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode_recording(&bytes, &id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EPOCH_SAMPLES;

    fn sample_rec() -> Recording {
        let ppg: Vec<f64> = (0..2 * EPOCH_SAMPLES).map(|i| f64::from((i as f32 * 0.37).sin())).collect();
        Recording::new(
            "s01",
            vec![Channel { name: "ppg".into(), signal: SampledSignal::new(ppg, Rate::MODEL) }],
            vec![Stage::Rem, Stage::Deep],
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_recording(&sample_rec()).unwrap();
        assert_eq!(&bytes[..4], b"PSG1");
        assert_eq!(bytes[4..6], [1, 0]);
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7..11], 512u32.to_le_bytes());
        assert_eq!(bytes[11..15], 15u32.to_le_bytes());
        assert_eq!(bytes[15..19], 2u32.to_le_bytes());
        assert_eq!(bytes[19], 3);
        assert_eq!(&bytes[20..23], b"ppg");
        assert_eq!(bytes.len(), 23 + 4 * 2048 + 2);
        assert_eq!(bytes[bytes.len() - 2..], [3, 2]);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let rec = sample_rec();
        let back = decode_recording(&encode_recording(&rec).unwrap(), "s01").unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn file_round_trip_uses_stem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("night7.psg");
        save_recording(&sample_rec(), &path).unwrap();
        let back = load_recording(&path).unwrap();
        assert_eq!(back.subject_id, "night7");
        assert_eq!(back.labels, sample_rec().labels);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_recording(&sample_rec()).unwrap();
        let cut = &bytes[..1000];
        match decode_recording(cut, "x") {
            Err(DataError::Format { offset, .. }) => assert_eq!(offset, 1000),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupt_headers_rejected() {
        let good = encode_recording(&sample_rec()).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_recording(&bad, "x"), Err(DataError::Format { offset: 0, .. })));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(decode_recording(&bad, "x"), Err(DataError::Format { offset: 4, .. })));
        let mut bad = good.clone();
        let n = bad.len();
        bad[n - 1] = 7;
        assert!(matches!(decode_recording(&bad, "x"), Err(DataError::Format { .. })));
        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode_recording(&bad, "x"), Err(DataError::Format { .. })));
        let mut bad = good;
        bad[23..27].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_recording(&bad, "x"), Err(DataError::Format { offset: 23, .. })));
    }

    #[test]
    fn empty_labels_rejected_on_save() {
        let rec = Recording {
            subject_id: "e".into(),
            channels: vec![Channel { name: "ppg".into(), signal: SampledSignal::new(vec![], Rate::MODEL) }],
            labels: vec![],
        };
        assert!(matches!(encode_recording(&rec), Err(DataError::Invalid(_))));
    }

    #[test]
    fn raw_rate_file() {
        let raw = Rate::hz(256).unwrap();
        let rec = Recording::new(
            "raw",
            vec![Channel { name: "ppg".into(), signal: SampledSignal::new(vec![0.5; 7680], raw) }],
            vec![Stage::Wake],
        )
        .unwrap();
        let back = decode_recording(&encode_recording(&rec).unwrap(), "raw").unwrap();
        assert_eq!(back.rate(), raw);
        assert_eq!(back, rec);
    }
}
