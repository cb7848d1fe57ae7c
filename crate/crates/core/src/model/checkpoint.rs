//! Single-file checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "MITASCKP"
//! version    u32
//! manifest   u64 length + UTF-8 JSON (config, scheme, seed, step)
//! count      u32
//! tensor*    u32 name length + UTF-8 canonical key
//!            u8 dtype (0 = f32, 1 = f64)
//!            u32 rank + u64 extent per axis
//!            raw values
//! ```
//!
//! Parameter tensors are named by canonical key, so a checkpoint written by
//! a shared model can be loaded into a copied-weight model and vice versa.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Separator;
use crate::error::{Error, Result};
use crate::numeric::{DType, Scalar, Tensor};
use crate::sharing::{ParamKey, ParameterStore, SharingConfig};

const MAGIC: &[u8; 8] = b"MITASCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub scheme: String,
    pub seed: u64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    bytes: Vec<u8>,
}

impl NamedTensor {
    pub fn from_tensor<T: Scalar>(name: impl Into<String>, tensor: &Tensor<T>) -> Self {
        let mut bytes = Vec::with_capacity(tensor.numel() * T::DTYPE.size_of());
        for &v in tensor.data() {
            v.write_le(&mut bytes);
        }
        Self {
            name: name.into(),
            dtype: T::DTYPE,
            shape: tensor.shape().to_vec(),
            bytes,
        }
    }

    /// Values converted to `T` regardless of the stored dtype.
    pub fn to_tensor<T: Scalar>(&self) -> Result<Tensor<T>> {
        let size = self.dtype.size_of();
        let data = self
            .bytes
            .chunks_exact(size)
            .map(|c| match self.dtype {
                DType::F32 => T::from_f64(f32::read_le(c) as f64),
                DType::F64 => T::from_f64(f64::read_le(c)),
            })
            .collect();
        Tensor::new(&self.shape, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub tensors: Vec<NamedTensor>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

impl Checkpoint {
    /// Snapshot of a model's parameters plus any extra named tensors.
    pub fn from_separator<T: Scalar>(
        model: &Separator<T>,
        seed: u64,
        step: usize,
        extra: Vec<NamedTensor>,
    ) -> Self {
        let config = model.config().clone();
        let mut tensors: Vec<NamedTensor> = model
            .store()
            .iter()
            .map(|(k, t)| NamedTensor::from_tensor(k.to_string(), t))
            .collect();
        tensors.extend(extra);
        Self {
            manifest: CheckpointManifest {
                format_version: FORMAT_VERSION,
                scheme: config.sharing.to_string(),
                config,
                seed,
                step,
            },
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let manifest = serde_json::to_vec(&self.manifest)?;
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dtype.tag());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&t.bytes);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let manifest_len = r.u64()? as usize;
        let manifest: CheckpointManifest = serde_json::from_slice(r.take(manifest_len)?)?;
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = r.string(name_len)?;
            let tag = r.u8()?;
            let dtype =
                DType::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("tensor {name}: dtype tag {tag}")))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let bytes = r.take(numel * dtype.size_of())?.to_vec();
            tensors.push(NamedTensor {
                name,
                dtype,
                shape,
                bytes,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { manifest, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // Write-then-rename keeps the previous checkpoint intact on failure.
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn named(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Tensors whose names are parameter keys.
    pub fn parameters<T: Scalar>(&self) -> Result<BTreeMap<ParamKey, Tensor<T>>> {
        self.tensors
            .iter()
            .filter(|t| !t.name.contains(':'))
            .map(|t| Ok((t.name.parse::<ParamKey>()?, t.to_tensor()?)))
            .collect()
    }

    pub fn separator<T: Scalar>(&self) -> Result<Separator<T>> {
        self.separator_for(self.manifest.config.clone())
    }

    /// Loads into `config`, which may use a different sharing scheme than the
    /// writer; each target tensor takes the values of its first covered site.
    pub fn separator_for<T: Scalar>(&self, config: ModelConfig) -> Result<Separator<T>> {
        let source_sharing: SharingConfig = self.manifest.config.sharing;
        let params = self.parameters::<T>()?;
        let store = ParameterStore::from_keyed(&config, &source_sharing, &params)?;
        Separator::from_store(config, store)
    }
}
