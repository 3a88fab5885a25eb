//! Binary parameter checkpoints.
//!
//! A checkpoint is a single little-endian binary file:
//!
//! ```text
//! magic      8 bytes  b"SMXCKPT1"
//! version    u32      currently 1
//! meta count u32      then per entry: key_len u32, key (UTF-8),
//!                     value_len u32, value (UTF-8)
//! tensors    u32      then per tensor: name_len u32, name (UTF-8),
//!                     rows u64, cols u64, rows·cols f64 (row-major)
//! ```
//!
//! Entries are written in name order, and values are written bit-for-bit,
//! so save → load → save reproduces the file byte-identically. The typed
//! helpers pair the raw container with model configuration stored in the
//! metadata map.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::gnn::{Backbone, GnnConfig, GnnError, GnnParams, Readout};
use crate::matcher::{MatcherConfig, MatcherError, MatcherParams, Normalizer};
use crate::Matrix;

const MAGIC: &[u8; 8] = b"SMXCKPT1";
const VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {got} (expected {VERSION})")]
    UnsupportedVersion { got: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint is a `{got}` checkpoint, expected `{expected}`")]
    WrongKind { expected: &'static str, got: String },
    #[error("checkpoint metadata is missing `{0}`")]
    MissingMeta(&'static str),
    #[error("checkpoint metadata `{key}`: {msg}")]
    BadMeta { key: &'static str, msg: String },
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Matcher(#[from] MatcherError),
}

/// Raw checkpoint container: a string metadata map plus named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Matrix>,
}

fn corrupt<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> CheckpointError + '_ {
    move |e| CheckpointError::Corrupt(format!("{what}: {e}"))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(corrupt(what))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64, CheckpointError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(corrupt(what))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R, what: &str) -> Result<String, CheckpointError> {
    let len = read_u32(r, what)? as usize;
    if len > 1 << 20 {
        return Err(CheckpointError::Corrupt(format!(
            "{what}: implausible string length {len}"
        )));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(corrupt(what))?;
    String::from_utf8(buf).map_err(|e| CheckpointError::Corrupt(format!("{what}: {e}")))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        let io = |e| CheckpointError::Corrupt(format!("write: {e}"));
        (|| -> std::io::Result<()> {
            w.write_all(MAGIC)?;
            w.write_all(&VERSION.to_le_bytes())?;
            w.write_all(&(self.metadata.len() as u32).to_le_bytes())?;
            for (k, v) in &self.metadata {
                write_str(&mut w, k)?;
                write_str(&mut w, v)?;
            }
            w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
            for (name, t) in &self.tensors {
                write_str(&mut w, name)?;
                let (rows, cols) = t.dim();
                w.write_all(&(rows as u64).to_le_bytes())?;
                w.write_all(&(cols as u64).to_le_bytes())?;
                for v in t.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            w.flush()
        })()
        .map_err(io)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(corrupt("magic"))?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r, "version")?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion { got: version });
        }
        let mut metadata = BTreeMap::new();
        let n_meta = read_u32(&mut r, "metadata count")?;
        for _ in 0..n_meta {
            let k = read_str(&mut r, "metadata key")?;
            let v = read_str(&mut r, "metadata value")?;
            metadata.insert(k, v);
        }
        let mut tensors = BTreeMap::new();
        let n_tensors = read_u32(&mut r, "tensor count")?;
        for _ in 0..n_tensors {
            let name = read_str(&mut r, "tensor name")?;
            let rows = read_u64(&mut r, "tensor rows")? as usize;
            let cols = read_u64(&mut r, "tensor cols")? as usize;
            let len = rows.checked_mul(cols).ok_or_else(|| {
                CheckpointError::Corrupt(format!("tensor `{name}`: {rows}×{cols} overflows"))
            })?;
            if len > 1 << 28 {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor `{name}`: implausible size {rows}×{cols}"
                )));
            }
            let mut data = vec![0.0f64; len];
            for v in data.iter_mut() {
                let mut buf = [0u8; 8];
                r.read_exact(&mut buf).map_err(corrupt("tensor data"))?;
                *v = f64::from_le_bytes(buf);
            }
            let t = Matrix::from_shape_vec((rows, cols), data)
                .map_err(|e| CheckpointError::Corrupt(format!("tensor `{name}`: {e}")))?;
            tensors.insert(name, t);
        }
        let mut rest = [0u8; 1];
        match r.read(&mut rest) {
            Ok(0) => {}
            Ok(_) => {
                return Err(CheckpointError::Corrupt(
                    "trailing bytes after the last tensor".into(),
                ))
            }
            Err(e) => return Err(CheckpointError::Corrupt(format!("trailing read: {e}"))),
        }
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let f = File::create(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let f = File::open(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_from(BufReader::new(f))
    }

    fn meta(&self, key: &'static str) -> Result<&str, CheckpointError> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or(CheckpointError::MissingMeta(key))
    }

    fn meta_parsed<T>(&self, key: &'static str) -> Result<T, CheckpointError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        self.meta(key)?.parse().map_err(|e: T::Err| {
            CheckpointError::BadMeta {
                key,
                msg: e.to_string(),
            }
        })
    }

    fn expect_kind(&self, expected: &'static str) -> Result<(), CheckpointError> {
        let got = self.meta("kind")?;
        if got != expected {
            return Err(CheckpointError::WrongKind {
                expected,
                got: got.to_string(),
            });
        }
        Ok(())
    }
}

/// Saves matcher parameters with their architecture in the metadata.
pub fn save_matcher(
    path: &Path,
    params: &MatcherParams,
    cfg: &MatcherConfig,
) -> Result<(), CheckpointError> {
    let mut ckpt = Checkpoint::default();
    ckpt.metadata.insert("kind".into(), "matcher".into());
    ckpt.metadata
        .insert("num_layers".into(), cfg.num_layers.to_string());
    ckpt.metadata.insert("hidden".into(), cfg.hidden.to_string());
    ckpt.metadata
        .insert("feature_dim".into(), cfg.feature_dim.to_string());
    ckpt.metadata.insert("metric".into(), cfg.metric.to_string());
    ckpt.metadata
        .insert("normalizer".into(), cfg.normalizer.to_string());
    ckpt.tensors = params.to_named();
    ckpt.save(path)
}

/// Loads matcher parameters and the architecture they were saved with.
pub fn load_matcher(path: &Path) -> Result<(MatcherParams, MatcherConfig), CheckpointError> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.expect_kind("matcher")?;
    let cfg = MatcherConfig {
        num_layers: ckpt.meta_parsed("num_layers")?,
        hidden: ckpt.meta_parsed("hidden")?,
        feature_dim: ckpt.meta_parsed("feature_dim")?,
        metric: ckpt.meta_parsed("metric")?,
        normalizer: ckpt.meta_parsed::<Normalizer>("normalizer")?,
    };
    let params = MatcherParams::from_named(&cfg, &ckpt.tensors)?;
    Ok((params, cfg))
}

/// Saves classifier parameters with their architecture in the metadata.
pub fn save_gnn(path: &Path, params: &GnnParams, cfg: &GnnConfig) -> Result<(), CheckpointError> {
    let mut ckpt = Checkpoint::default();
    ckpt.metadata.insert("kind".into(), "gnn".into());
    ckpt.metadata
        .insert("backbone".into(), cfg.backbone.to_string());
    ckpt.metadata
        .insert("num_layers".into(), cfg.num_layers.to_string());
    ckpt.metadata.insert("hidden".into(), cfg.hidden.to_string());
    ckpt.metadata
        .insert("readout".into(), cfg.readout.to_string());
    ckpt.metadata
        .insert("num_classes".into(), cfg.num_classes.to_string());
    ckpt.metadata
        .insert("feature_dim".into(), cfg.feature_dim.to_string());
    ckpt.tensors = params.to_named();
    ckpt.save(path)
}

/// Loads classifier parameters and the architecture they were saved with.
pub fn load_gnn(path: &Path) -> Result<(GnnParams, GnnConfig), CheckpointError> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.expect_kind("gnn")?;
    let cfg = GnnConfig {
        backbone: ckpt.meta_parsed::<Backbone>("backbone")?,
        num_layers: ckpt.meta_parsed("num_layers")?,
        hidden: ckpt.meta_parsed("hidden")?,
        readout: ckpt.meta_parsed::<Readout>("readout")?,
        num_classes: ckpt.meta_parsed("num_classes")?,
        feature_dim: ckpt.meta_parsed("feature_dim")?,
    };
    let params = GnnParams::from_named(&cfg, &ckpt.tensors)?;
    Ok((params, cfg))
}
