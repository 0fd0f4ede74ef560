//! Checkpoint files.
//!
//! Layout, all integers little-endian:
//! * magic `NHMC`, `u32` version
//! * `u32` length + UTF-8 header of `key = value` lines: model settings, then
//!   `init_tau`, `update`, `vocab`, then run settings prefixed with `run.`
//! * normalization: `u32` D, then D `f64` means and D `f64` standard deviations
//! * `u32` tensor count, then tensors as `u32` name length, name, `u32` rank,
//!   `u32` per dim, `f32` data
//! * `u8` Adam flag; when set, `u64` step followed by `2·count` tensors named
//!   `adam.m.<param>` and `adam.v.<param>` in parameter order

use std::fs;
use std::path::Path;

use super::{Model, ModelConfig};
use crate::data::{NormStats, Vocabulary};
use crate::error::{Error, Result};
use crate::kv;
use crate::numerics::{AdamConfig, AdamState, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NHMC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub norm: NormStats,
    pub vocab: Vocabulary,
    /// Transition probability the output layer was flat-started with.
    pub init_tau: f64,
    /// Number of optimizer updates applied so far.
    pub update: u64,
    /// Run configuration as `key = value` text; stored verbatim.
    pub run_config: String,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let cfg = self.model.config();
        if self.norm.dim() != cfg.acoustic_dim {
            return Err(Error::Contract(format!(
                "normalization has {} dims, model emits {}",
                self.norm.dim(),
                cfg.acoustic_dim
            )));
        }
        if self.vocab.len() != cfg.vocab_size {
            return Err(Error::Contract(format!(
                "vocabulary has {} symbols, model expects {}",
                self.vocab.len(),
                cfg.vocab_size
            )));
        }
        let mut header = String::new();
        for (k, v) in cfg.to_pairs() {
            header.push_str(&format!("{k} = {v}\n"));
        }
        header.push_str(&format!("init_tau = {:?}\nupdate = {}\n", self.init_tau, self.update));
        let symbols: Vec<&str> = (0..self.vocab.len())
            .map(|i| self.vocab.symbol(i).unwrap_or(""))
            .collect();
        header.push_str(&format!("vocab = {}\n", symbols.join(" ")));
        for (k, v) in kv::parse(&self.run_config)? {
            header.push_str(&format!("run.{k} = {v}\n"));
        }

        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_u32(&mut out, header.len() as u32);
        out.extend_from_slice(header.as_bytes());
        put_u32(&mut out, self.norm.dim() as u32);
        for v in self.norm.mean.iter().chain(&self.norm.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let params = self.model.params();
        put_u32(&mut out, params.len() as u32);
        for (_, p) in params.iter() {
            put_tensor(&mut out, &p.name, &p.value);
        }
        match &self.adam {
            None => out.push(0),
            Some(a) => {
                if a.m.len() != params.len() || a.v.len() != params.len() {
                    return Err(Error::Contract("optimizer state does not match parameters".into()));
                }
                out.push(1);
                out.extend_from_slice(&a.step.to_le_bytes());
                for ((_, p), m) in params.iter().zip(&a.m) {
                    put_tensor(&mut out, &format!("adam.m.{}", p.name), m);
                }
                for ((_, p), v) in params.iter().zip(&a.v) {
                    put_tensor(&mut out, &format!("adam.v.{}", p.name), v);
                }
            }
        }
        Ok(out)
    }

    /// Parses a checkpoint. Restored optimizer state uses `adam` as its
    /// settings (the file stores only moments and step count).
    pub fn decode(bytes: &[u8], adam: AdamConfig) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format(0, "bad checkpoint magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
        }
        let header_len = r.u32()? as usize;
        let header_at = r.pos as u64;
        let header = std::str::from_utf8(r.take(header_len)?)
            .map_err(|_| Error::format(header_at, "checkpoint header is not UTF-8"))?;
        let bad_header = |e: Error| Error::format(header_at, format!("checkpoint header: {e}"));

        let mut config = ModelConfig::default();
        let (mut init_tau, mut update, mut vocab) = (None, None, None);
        let mut run_config = String::new();
        for (k, v) in kv::parse(header).map_err(bad_header)? {
            if let Some(rk) = k.strip_prefix("run.") {
                run_config.push_str(&format!("{rk} = {v}\n"));
                continue;
            }
            match k.as_str() {
                "init_tau" => init_tau = Some(kv::value::<f64>(&k, &v).map_err(bad_header)?),
                "update" => update = Some(kv::value::<u64>(&k, &v).map_err(bad_header)?),
                "vocab" => vocab = Some(Vocabulary::new(v.split_whitespace().map(String::from).collect())),
                _ => {
                    if !config.set(&k, &v).map_err(bad_header)? {
                        return Err(Error::format(header_at, format!("unknown checkpoint key {k}")));
                    }
                }
            }
        }
        config.validate().map_err(bad_header)?;
        let missing = |k: &str| Error::format(header_at, format!("checkpoint header lacks {k}"));
        let vocab = vocab.ok_or_else(|| missing("vocab"))?.map_err(bad_header)?;
        let init_tau = init_tau.ok_or_else(|| missing("init_tau"))?;
        let update = update.ok_or_else(|| missing("update"))?;

        let dim_at = r.pos as u64;
        let dim = r.u32()? as usize;
        if dim != config.acoustic_dim {
            return Err(Error::format(
                dim_at,
                "normalization dimension does not match acoustic_dim",
            ));
        }
        let mut stats = Vec::with_capacity(2 * dim);
        for _ in 0..2 * dim {
            stats.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
        }
        let std = stats.split_off(dim);
        let norm = NormStats { mean: stats, std };

        let count_at = r.pos as u64;
        let count = r.u32()? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let (name, t) = r.tensor()?;
            if store.id(&name).is_some() {
                return Err(Error::format(count_at, format!("duplicate tensor {name}")));
            }
            store.add(name, t);
        }
        let model = Model::from_params(config, &store).map_err(|e| Error::format(count_at, e.to_string()))?;

        let flag_at = r.pos as u64;
        let adam = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                let mut state = AdamState::new(adam, model.params());
                for prefix in ["adam.m.", "adam.v."] {
                    for (i, (_, p)) in model.params().iter().enumerate() {
                        let at = r.pos as u64;
                        let (name, t) = r.tensor()?;
                        if name != format!("{prefix}{}", p.name) || t.shape() != p.value.shape() {
                            return Err(Error::format(at, format!("unexpected optimizer tensor {name}")));
                        }
                        if prefix == "adam.m." {
                            state.m[i] = t;
                        } else {
                            state.v[i] = t;
                        }
                    }
                }
                state.step = step;
                Some(state)
            }
            f => return Err(Error::format(flag_at, format!("bad optimizer flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::format(r.pos as u64, "trailing bytes after checkpoint"));
        }
        Ok(Checkpoint {
            model,
            norm,
            vocab,
            init_tau,
            update,
            run_config,
            adam,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let bytes = self.encode()?;
        fs::write(path, &bytes)?;
        Ok(kv::short_hash(&bytes))
    }

    /// Loads a checkpoint and returns it with the hash of its bytes.
    pub fn load(path: impl AsRef<Path>, adam: AdamConfig) -> Result<(Self, String)> {
        let bytes = fs::read(path)?;
        Ok((Self::decode(&bytes, adam)?, kv::short_hash(&bytes)))
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, 2);
    put_u32(out, t.rows() as u32);
    put_u32(out, t.cols() as u32);
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
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
            .ok_or_else(|| Error::format(self.bytes.len() as u64, "truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let at = self.pos as u64;
        let len = self.u32()? as usize;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| Error::format(at, "tensor name is not UTF-8"))?
            .to_string();
        let rank = self.u32()? as usize;
        let dims: Vec<usize> = (0..rank)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<_>>()?;
        let (rows, cols) = match dims[..] {
            [c] => (1, c),
            [r, c] => (r, c),
            _ => return Err(Error::format(at, format!("tensor {name} has unsupported rank {rank}"))),
        };
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format(at, "tensor size overflows"))?;
        let data = self
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        Ok((name, Tensor::new(rows, cols, data)))
    }
}
