//! Named tensor storage and the `BSRW` weights container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes            | content                                            |
//! |------------------|----------------------------------------------------|
//! | 0..4             | magic `BSRW`                                       |
//! | 4..8             | format version, `u32` (currently 1)                |
//! | 8..16            | manifest length `M` in bytes, `u64`                |
//! | 16..16+M         | UTF-8 JSON manifest                                |
//! | ..P              | zero padding up to the next multiple of 64         |
//! | P..              | payload of `f32` tensors                           |
//!
//! The manifest is `{"tensors": {name: {"shape": [..], "dtype": "f32",
//! "offset": o}}}` with `o` counted from the payload start `P`. Tensors are
//! laid out in name order, each starting on a 64-byte boundary.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BSRW";
pub const VERSION: u32 = 1;
pub const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Weights(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Tensors by name, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    tensors: BTreeMap<String, Tensor>,
}

impl TensorStore {
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    /// Fetches a tensor and checks its shape.
    pub fn take(&self, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
        let t = self
            .get(name)
            .ok_or_else(|| Error::Weights(format!("missing tensor {name}")))?;
        if t.shape != shape {
            return Err(Error::Weights(format!(
                "tensor {name} has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        Ok(t.data.clone())
    }

    /// Sets every bias and normalization shift to zero.
    pub fn zero_biases(&mut self) {
        for (name, t) in self.tensors.iter_mut() {
            if name.ends_with(".bias") || name.ends_with(".beta") {
                t.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Checks that exactly the tensors `config` needs are present.
    pub fn check_against(&self, config: &ModelConfig) -> Result<()> {
        let expected = expected_tensors(config);
        for (name, shape) in &expected {
            match self.get(name) {
                None => return Err(Error::Weights(format!("missing tensor {name}"))),
                Some(t) if &t.shape != shape => {
                    return Err(Error::Weights(format!(
                        "tensor {name} has shape {:?}, expected {shape:?}",
                        t.shape
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.tensors.keys().find(|k| !expected.contains_key(*k)) {
            return Err(Error::Weights(format!("unexpected tensor {extra}")));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut manifest = Manifest::default();
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            manifest.tensors.insert(
                name.clone(),
                ManifestEntry {
                    shape: t.shape.clone(),
                    dtype: "f32".into(),
                    offset,
                },
            );
            offset = (offset + 4 * t.data.len()).next_multiple_of(ALIGN);
        }
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        let header = 16 + json.len();
        out.write_all(&vec![0u8; header.next_multiple_of(ALIGN) - header])?;
        let mut written = 0usize;
        for (name, t) in &self.tensors {
            let start = manifest.tensors[name].offset;
            out.write_all(&vec![0u8; start - written])?;
            let mut bytes = Vec::with_capacity(4 * t.data.len());
            for v in &t.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&bytes)?;
            written = start + bytes.len();
        }
        out.write_all(&vec![0u8; offset - written])?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Weights(msg);
        if bytes.len() < 16 || &bytes[0..4] != MAGIC {
            return Err(bad("not a BSRW weights file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported weights version {version}")));
        }
        let m_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_end = 16usize
            .checked_add(m_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("manifest length exceeds file size".into()))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| bad(format!("manifest json: {e}")))?;
        let payload_start = header_end.next_multiple_of(ALIGN);
        let payload = bytes.get(payload_start..).unwrap_or(&[]);
        let mut store = TensorStore::default();
        for (name, entry) in manifest.tensors {
            if entry.dtype != "f32" {
                return Err(bad(format!(
                    "tensor {name}: dtype {} is not f32",
                    entry.dtype
                )));
            }
            if entry.offset % ALIGN != 0 {
                return Err(bad(format!(
                    "tensor {name}: offset {} not 64-byte aligned",
                    entry.offset
                )));
            }
            let n: usize = entry.shape.iter().product();
            let end = entry.offset + 4 * n;
            if end > payload.len() {
                return Err(bad(format!("tensor {name}: payload truncated")));
            }
            let data = payload[entry.offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            store.insert(
                name,
                Tensor {
                    shape: entry.shape,
                    data,
                },
            );
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    tensors: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
}

fn push_norm(out: &mut BTreeMap<String, Vec<usize>>, prefix: &str, dim: usize) {
    out.insert(format!("{prefix}.norm.gamma"), vec![dim]);
    out.insert(format!("{prefix}.norm.beta"), vec![dim]);
}

fn push_dense(out: &mut BTreeMap<String, Vec<usize>>, prefix: &str, in_dim: usize, out_dim: usize) {
    out.insert(format!("{prefix}.weight"), vec![out_dim, in_dim]);
    out.insert(format!("{prefix}.bias"), vec![out_dim]);
}

pub(crate) fn lstm_prefix(layer: usize, kind: &str, group: usize, dir: &str) -> String {
    format!("layers.{layer}.{kind}.groups.{group}.{dir}")
}

/// Every tensor name and shape a model with `config` requires.
pub fn expected_tensors(config: &ModelConfig) -> BTreeMap<String, Vec<usize>> {
    let mut out = BTreeMap::new();
    let n = config.feature_dim;
    let h = config.hidden_dim;
    let g = config.group_size.max(1);
    for k in 0..config.band_count() {
        let w2 = 2 * config.bands.width(k);
        push_norm(&mut out, &format!("band_split.{k}"), w2);
        push_dense(&mut out, &format!("band_split.{k}.proj"), w2, n);
    }
    for layer in 0..config.num_layers {
        for (kind, dirs) in [
            ("band_rnn", config.band_rnn_directions()),
            ("time_rnn", config.time_rnn_directions()),
        ] {
            let prefix = format!("layers.{layer}.{kind}");
            push_norm(&mut out, &prefix, n);
            for group in 0..g {
                for dir in ["fwd", "bwd"].into_iter().take(dirs) {
                    let p = lstm_prefix(layer, kind, group, dir);
                    out.insert(format!("{p}.w_ih"), vec![4 * h / g, n / g]);
                    out.insert(format!("{p}.w_hh"), vec![4 * h / g, h / g]);
                    out.insert(format!("{p}.bias"), vec![4 * h / g]);
                }
            }
            push_dense(&mut out, &format!("{prefix}.proj"), dirs * h, n);
        }
    }
    let m = config.mask_hidden();
    for k in 0..config.band_count() {
        let w2 = 2 * config.bands.width(k);
        push_norm(&mut out, &format!("mask.{k}"), n);
        push_dense(&mut out, &format!("mask.{k}.hidden"), n, m);
        push_dense(&mut out, &format!("mask.{k}.out"), m, w2);
    }
    out
}

/// SplitMix64: `state += 0x9E3779B97F4A7C15`, then the output is mixed by
/// xor-shifts 30, 27, 31 with multipliers `0xBF58476D1CE4E5B9` and
/// `0x94D049BB133111EB`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`, rounded to `f32`.
    pub fn uniform_f32(&mut self, lo: f64, hi: f64) -> f32 {
        (lo + (hi - lo) * self.next_unit()) as f32
    }
}

/// Fills every expected tensor, in name order, with uniform(-0.1, 0.1)
/// values drawn from one SplitMix64 stream seeded with `seed`.
pub fn generate(config: &ModelConfig, seed: u64) -> TensorStore {
    let mut rng = SplitMix64::new(seed);
    let mut store = TensorStore::default();
    for (name, shape) in expected_tensors(config) {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.uniform_f32(-0.1, 0.1)).collect();
        store.insert(name, Tensor { shape, data });
    }
    store
}
