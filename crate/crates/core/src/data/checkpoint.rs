use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector};
use crate::scalar::Scalar;
use std::sync::Arc;

pub const MAGIC: &[u8; 8] = b"SAMLAB01";
pub const VERSION: u32 = 1;

/// Decoded checkpoint file.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Model descriptor, e.g. `mlp 784-100-100-10 relu`.
    pub descriptor: String,
    pub seed: u64,
    /// Hex digest of the configuration that produced the run.
    pub config_digest: String,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn new<S: Scalar>(descriptor: &str, seed: u64, config_digest: &str, params: &ParamVector<S>) -> Self {
        Checkpoint {
            descriptor: descriptor.to_owned(),
            seed,
            config_digest: config_digest.to_owned(),
            values: params.as_slice().iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// Rebuilds parameters for a model; the descriptor and count must match.
    pub fn into_params<S: Scalar>(self, descriptor: &str, layout: Arc<Layout>) -> Result<ParamVector<S>> {
        if self.descriptor != descriptor {
            return Err(Error::Checkpoint {
                field: "descriptor",
                msg: format!("checkpoint holds '{}' but target model is '{descriptor}'", self.descriptor),
            });
        }
        if self.values.len() != layout.total() {
            return Err(Error::Checkpoint {
                field: "count",
                msg: format!("{} values for a layout of {}", self.values.len(), layout.total()),
            });
        }
        ParamVector::from_vec(layout, self.values.into_iter().map(S::c).collect())
    }

    fn header_text(&self) -> String {
        format!("{}\nseed={}\nconfig_digest={}", self.descriptor, self.seed, self.config_digest)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let text = self.header_text();
        let mut out = Vec::with_capacity(24 + text.len() + 8 * self.values.len());
        out.extend(MAGIC);
        out.extend(VERSION.to_le_bytes());
        out.extend((text.len() as u32).to_le_bytes());
        out.extend(text.as_bytes());
        out.extend((self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend(v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(Error::Checkpoint { field: "magic", msg: "bad magic".into() });
        }
        let version = u32::from_le_bytes(r.array("version")?);
        if version != VERSION {
            return Err(Error::Checkpoint {
                field: "version",
                msg: format!("unsupported version {version}, expected {VERSION}"),
            });
        }
        let len = u32::from_le_bytes(r.array("descriptor")?) as usize;
        let text = std::str::from_utf8(r.take(len, "descriptor")?).map_err(|e| Error::Checkpoint {
            field: "descriptor",
            msg: e.to_string(),
        })?;
        let mut lines = text.split('\n');
        let descriptor = lines.next().unwrap_or_default().to_owned();
        let (mut seed, mut config_digest) = (0, String::new());
        for line in lines {
            if let Some(v) = line.strip_prefix("seed=") {
                seed = v.parse().map_err(|_| Error::Checkpoint { field: "seed", msg: format!("bad seed '{v}'") })?;
            } else if let Some(v) = line.strip_prefix("config_digest=") {
                config_digest = v.to_owned();
            }
        }
        let count = u64::from_le_bytes(r.array("count")?) as usize;
        let rest = bytes.len() - r.pos;
        if rest != count.saturating_mul(8) {
            return Err(Error::Checkpoint {
                field: "count",
                msg: format!("declared {count} values but {rest} bytes follow"),
            });
        }
        let values = bytes[r.pos..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Checkpoint { descriptor, seed, config_digest, values })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Checkpoint {
            field,
            msg: format!("truncated at byte {}", self.bytes.len()),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, field: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, field)?.try_into().unwrap())
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
