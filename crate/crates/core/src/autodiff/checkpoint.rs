//! Named-tensor container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "SNTC" | version u16 | count u32
//! count x ( name_len u16 | name utf-8 | rank u8 | dims u32 x rank | f64 x prod(dims) )
//! ```

use std::fs;
use std::io;
use std::path::Path;

use super::Parameter;

const MAGIC: &[u8; 4] = b"SNTC";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("checkpoint mismatch: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn encode(tensors: &[NamedTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Format {
                offset: self.pos,
                msg: format!("truncated {what}: need {n} bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<NamedTensor>, CheckpointError> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::Format { offset: 0, msg: "bad magic".into() });
    }
    let version = c.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Format { offset: 4, msg: format!("unsupported version {version}") });
    }
    let count = c.u32("tensor count")?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name_len = c.u16("name length")? as usize;
        let at = c.pos;
        let name = std::str::from_utf8(c.take(name_len, "name")?)
            .map_err(|_| CheckpointError::Format { offset: at, msg: "name is not utf-8".into() })?
            .to_string();
        let rank = c.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32("dimension")? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = c.take(n.saturating_mul(8), "tensor data")?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        tensors.push(NamedTensor { name, shape, data });
    }
    if c.pos != buf.len() {
        return Err(CheckpointError::Format { offset: c.pos, msg: "trailing bytes".into() });
    }
    Ok(tensors)
}

pub fn snapshot(params: &[Parameter]) -> Vec<NamedTensor> {
    params
        .iter()
        .map(|p| NamedTensor {
            name: p.name.clone(),
            shape: p.tensor.shape().to_vec(),
            data: p.tensor.to_vec(),
        })
        .collect()
}

/// Copies values into `params`, matching by name and shape. Every parameter
/// must be present exactly once.
pub fn restore(params: &[Parameter], tensors: &[NamedTensor]) -> Result<(), CheckpointError> {
    if params.len() != tensors.len() {
        return Err(CheckpointError::Mismatch(format!(
            "model has {} parameters, checkpoint {}",
            params.len(),
            tensors.len()
        )));
    }
    for p in params {
        let t = tensors
            .iter()
            .find(|t| t.name == p.name)
            .ok_or_else(|| CheckpointError::Mismatch(format!("missing parameter {}", p.name)))?;
        if t.shape != p.tensor.shape() {
            return Err(CheckpointError::Mismatch(format!(
                "{}: checkpoint shape {:?}, model {:?}",
                p.name,
                t.shape,
                p.tensor.shape()
            )));
        }
        p.tensor.set_data(&t.data);
    }
    Ok(())
}

pub fn save(path: impl AsRef<Path>, params: &[Parameter]) -> Result<(), CheckpointError> {
    fs::write(path, encode(&snapshot(params)))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<NamedTensor>, CheckpointError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_bytes() {
        let t = NamedTensor { name: "w".into(), shape: vec![1], data: vec![1.0] };
        let bytes = encode(&[t]);
        assert_eq!(
            bytes,
            [
                b'S', b'N', b'T', b'C', 1, 0, 1, 0, 0, 0, 1, 0, b'w', 1, 1, 0, 0, 0, 0, 0, 0, 0, 0,
                0, 0xf0, 0x3f
            ]
        );
    }

    #[test]
    fn truncation_reports_offset() {
        let t = NamedTensor { name: "abc".into(), shape: vec![2, 2], data: vec![0.5; 4] };
        let bytes = encode(&[t]);
        let err = decode(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            CheckpointError::Format { offset, .. } => assert_eq!(offset, 4 + 2 + 4 + 2 + 3 + 1 + 8),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode(b"XXXX"), Err(CheckpointError::Format { offset: 0, .. })));
    }

    #[test]
    fn restore_checks_names_and_shapes() {
        let p = Parameter::new("a", vec![0.0; 2], &[2]);
        let wrong_shape = NamedTensor { name: "a".into(), shape: vec![1, 2], data: vec![1.0, 2.0] };
        assert!(restore(std::slice::from_ref(&p), &[wrong_shape]).is_err());
        let wrong_name = NamedTensor { name: "b".into(), shape: vec![2], data: vec![1.0, 2.0] };
        assert!(restore(std::slice::from_ref(&p), &[wrong_name]).is_err());
        let ok = NamedTensor { name: "a".into(), shape: vec![2], data: vec![1.0, 2.0] };
        restore(std::slice::from_ref(&p), &[ok]).unwrap();
        assert_eq!(p.tensor.to_vec(), vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn round_trip(
            entries in prop::collection::vec(
                ("[a-z._0-9]{1,20}", prop::collection::vec(1usize..4, 0..3), any::<u64>()),
                0..5,
            )
        ) {
            let tensors: Vec<NamedTensor> = entries
                .into_iter()
                .map(|(name, shape, bits)| {
                    let n = shape.iter().product();
                    let data = (0..n).map(|i| f64::from_bits(bits.rotate_left(i as u32))).collect();
                    NamedTensor { name, shape, data }
                })
                .collect();
            let back = decode(&encode(&tensors)).unwrap();
            prop_assert_eq!(back.len(), tensors.len());
            for (a, b) in back.iter().zip(&tensors) {
                prop_assert_eq!(&a.name, &b.name);
                prop_assert_eq!(&a.shape, &b.shape);
                let same = a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits());
                prop_assert!(same);
            }
        }
    }
}
