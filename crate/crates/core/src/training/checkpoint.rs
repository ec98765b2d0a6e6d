//! Checkpoint files: a metadata header plus the named-tensor container.

use crate::net::NetworkParameters;
use crate::tensor::{read_named_tensors, write_named_tensors, SerializeError, Tensor};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const CHECKPOINT_MAGIC: &[u8; 4] = b"CKPT";
const CHECKPOINT_VERSION: u32 = 1;
const MAX_META_LEN: usize = 1 << 20;

/// What kind of parameters a checkpoint stores.
pub const KIND_Q_NETWORK: &str = "q-network";
pub const KIND_PREDICTOR: &str = "crowd-predictor";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub kind: String,
    /// Episodes of training behind these parameters.
    pub episodes: u64,
    /// Resolved configuration echo (TOML text) for provenance.
    pub config: String,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: not a checkpoint file")]
    BadMagic { path: String },
    #[error("{path}: unsupported checkpoint version {found}")]
    UnsupportedVersion { path: String, found: u32 },
    #[error("{path}: corrupt metadata: {reason}")]
    CorruptMeta { path: String, reason: String },
    #[error("{path}: {source}")]
    Tensors {
        path: String,
        source: SerializeError,
    },
    #[error("{path}: parameter mismatch: {source}")]
    Shape {
        path: String,
        source: crate::tensor::TensorError,
    },
    #[error("{path}: checkpoint holds `{found}` parameters, expected `{expected}`")]
    WrongKind {
        path: String,
        found: String,
        expected: String,
    },
}

pub fn save_checkpoint(
    path: &Path,
    entries: &[(String, &Tensor)],
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    let display = path.display().to_string();
    let meta_text = toml::to_string(meta).map_err(|e| CheckpointError::CorruptMeta {
        path: display.clone(),
        reason: e.to_string(),
    })?;

    let write = || -> std::io::Result<()> {
        let file = File::create(path)?;
        let mut writer = BufWriter::new(file);
        writer.write_all(CHECKPOINT_MAGIC)?;
        writer.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        writer.write_all(&(meta_text.len() as u32).to_le_bytes())?;
        writer.write_all(meta_text.as_bytes())?;
        write_named_tensors(&mut writer, entries)?;
        writer.flush()
    };
    write().map_err(|source| CheckpointError::Io {
        path: display,
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, Vec<(String, Tensor)>), CheckpointError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CheckpointError::Io {
        path: display.clone(),
        source,
    })?;
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_all(&mut reader, &mut magic, &display, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic { path: display });
    }
    let mut version = [0u8; 4];
    read_all(&mut reader, &mut version, &display, "version")?;
    let version = u32::from_le_bytes(version);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            path: display,
            found: version,
        });
    }
    let mut meta_len = [0u8; 4];
    read_all(&mut reader, &mut meta_len, &display, "metadata length")?;
    let meta_len = u32::from_le_bytes(meta_len) as usize;
    if meta_len > MAX_META_LEN {
        return Err(CheckpointError::CorruptMeta {
            path: display,
            reason: format!("metadata length {meta_len} exceeds limit"),
        });
    }
    let mut meta_bytes = vec![0u8; meta_len];
    read_all(&mut reader, &mut meta_bytes, &display, "metadata")?;
    let meta_text = String::from_utf8(meta_bytes).map_err(|_| CheckpointError::CorruptMeta {
        path: display.clone(),
        reason: "metadata is not utf-8".to_string(),
    })?;
    let meta: CheckpointMeta = toml::from_str(&meta_text).map_err(|e| CheckpointError::CorruptMeta {
        path: display.clone(),
        reason: e.to_string(),
    })?;

    let entries = read_named_tensors(&mut reader).map_err(|source| CheckpointError::Tensors {
        path: display,
        source,
    })?;
    Ok((meta, entries))
}

/// Load a checkpoint that must hold Q-network parameters.
pub fn load_q_network(path: &Path) -> Result<(CheckpointMeta, NetworkParameters), CheckpointError> {
    let display = path.display().to_string();
    let (meta, entries) = load_checkpoint(path)?;
    if meta.kind != KIND_Q_NETWORK {
        return Err(CheckpointError::WrongKind {
            path: display,
            found: meta.kind,
            expected: KIND_Q_NETWORK.to_string(),
        });
    }
    let params = NetworkParameters::from_entries(entries).map_err(|source| CheckpointError::Shape {
        path: display,
        source,
    })?;
    Ok((meta, params))
}

fn read_all<R: Read>(
    reader: &mut R,
    buf: &mut [u8],
    path: &str,
    what: &str,
) -> Result<(), CheckpointError> {
    reader.read_exact(buf).map_err(|source| {
        if source.kind() == std::io::ErrorKind::UnexpectedEof {
            CheckpointError::CorruptMeta {
                path: path.to_string(),
                reason: format!("file truncated while reading {what}"),
            }
        } else {
            CheckpointError::Io {
                path: path.to_string(),
                source,
            }
        }
    })
}
