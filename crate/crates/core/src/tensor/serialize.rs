//! Flat binary container for named tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"NTSR"
//! version u32
//! count   u32
//! entry*  name_len u32, name utf-8, ndim u32, dims u64 * ndim,
//!         values f64 * prod(dims)
//! ```
//!
//! Values round-trip bit-exactly. Readers reject bad magic, unsupported
//! versions, and truncated files with explicit errors.

use crate::tensor::Tensor;
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NTSR";
pub const FORMAT_VERSION: u32 = 1;

// Guards against nonsense sizes coming from corrupt files.
const MAX_NAME_LEN: usize = 1 << 12;
const MAX_NDIM: usize = 8;
const MAX_TENSOR_LEN: usize = 1 << 28;

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes: not a tensor container")]
    BadMagic,
    #[error("unsupported container version {found} (supported: {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("corrupt container: {0}")]
    Corrupt(String),
}

pub fn write_named_tensors<W: Write>(
    writer: &mut W,
    entries: &[(String, &Tensor)],
) -> io::Result<()> {
    writer.write_all(MAGIC)?;
    writer.write_all(&FORMAT_VERSION.to_le_bytes())?;
    writer.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, tensor) in entries {
        writer.write_all(&(name.len() as u32).to_le_bytes())?;
        writer.write_all(name.as_bytes())?;
        writer.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            writer.write_all(&(dim as u64).to_le_bytes())?;
        }
        for &value in tensor.data() {
            writer.write_all(&value.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_named_tensors<R: Read>(reader: &mut R) -> Result<Vec<(String, Tensor)>, SerializeError> {
    let mut magic = [0u8; 4];
    read_exact(reader, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(SerializeError::BadMagic);
    }
    let version = read_u32(reader, "version")?;
    if version != FORMAT_VERSION {
        return Err(SerializeError::UnsupportedVersion { found: version });
    }
    let count = read_u32(reader, "entry count")? as usize;

    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = read_u32(reader, "name length")? as usize;
        if name_len > MAX_NAME_LEN {
            return Err(SerializeError::Corrupt(format!(
                "entry {i}: name length {name_len} exceeds limit"
            )));
        }
        let mut name_bytes = vec![0u8; name_len];
        read_exact(reader, &mut name_bytes, "name")?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| SerializeError::Corrupt(format!("entry {i}: name is not utf-8")))?;

        let ndim = read_u32(reader, "ndim")? as usize;
        if ndim > MAX_NDIM {
            return Err(SerializeError::Corrupt(format!(
                "entry {name}: rank {ndim} exceeds limit"
            )));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut buf = [0u8; 8];
            read_exact(reader, &mut buf, "dimension")?;
            shape.push(u64::from_le_bytes(buf) as usize);
        }
        let len: usize = shape.iter().product();
        if len > MAX_TENSOR_LEN {
            return Err(SerializeError::Corrupt(format!(
                "entry {name}: {len} values exceeds limit"
            )));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let mut buf = [0u8; 8];
            read_exact(reader, &mut buf, "tensor values")?;
            data.push(f64::from_le_bytes(buf));
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| SerializeError::Corrupt(format!("entry {name}: {e}")))?;
        entries.push((name, tensor));
    }
    Ok(entries)
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8], what: &str) -> Result<(), SerializeError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            SerializeError::Corrupt(format!("file truncated while reading {what}"))
        } else {
            SerializeError::Io(e)
        }
    })
}

fn read_u32<R: Read>(reader: &mut R, what: &str) -> Result<u32, SerializeError> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_entries() -> Vec<(String, Tensor)> {
        vec![
            (
                "layer.weight".to_string(),
                Tensor::matrix(2, 3, vec![1.0, -2.5, 3.125, 0.1, f64::MIN_POSITIVE, 1e300])
                    .unwrap(),
            ),
            ("layer.bias".to_string(), Tensor::vector(vec![0.25, -0.75, 0.5])),
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let entries = sample_entries();
        let refs: Vec<(String, &Tensor)> =
            entries.iter().map(|(n, t)| (n.clone(), t)).collect();
        let mut buf = Vec::new();
        write_named_tensors(&mut buf, &refs).unwrap();
        let loaded = read_named_tensors(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded.len(), entries.len());
        for ((name_a, t_a), (name_b, t_b)) in entries.iter().zip(&loaded) {
            assert_eq!(name_a, name_b);
            assert_eq!(t_a.shape(), t_b.shape());
            for (x, y) in t_a.data().iter().zip(t_b.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_is_an_error_not_a_crash() {
        let entries = sample_entries();
        let refs: Vec<(String, &Tensor)> =
            entries.iter().map(|(n, t)| (n.clone(), t)).collect();
        let mut buf = Vec::new();
        write_named_tensors(&mut buf, &refs).unwrap();
        for cut in [3, 9, 13, buf.len() / 2, buf.len() - 1] {
            let err = read_named_tensors(&mut &buf[..cut]).unwrap_err();
            assert!(
                matches!(err, SerializeError::Corrupt(_) | SerializeError::BadMagic),
                "cut at {cut} gave {err:?}"
            );
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"XXXX\x01\x00\x00\x00\x00\x00\x00\x00";
        assert!(matches!(
            read_named_tensors(&mut &buf[..]),
            Err(SerializeError::BadMagic)
        ));
    }

    #[test]
    fn future_version_rejected() {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&99u32.to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            read_named_tensors(&mut buf.as_slice()),
            Err(SerializeError::UnsupportedVersion { found: 99 })
        ));
    }
}
