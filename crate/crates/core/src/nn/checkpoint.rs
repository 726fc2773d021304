//! Binary model checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `MCKP` |
//! | 4 | 2 | format version, currently 1 |
//! | 6 | 1 | pool policy: 0 enhanced, 1 legacy |
//! | 7 | 1 | reserved, 0 |
//! | 8 | 8 | config hash |
//! | 16 | 4 | input channel count |
//! | 20 | 4 | layer count `L` |
//! | 24 | 17 L | layers: tag `u8`, then two `u64` arguments (unused ones are 0) |
//! | | 4 | parameter block count `P` |
//! | | | per block: rows `u32`, cols `u32`, `rows * cols` `f64` row-major |
//! | | | input stats: channel count `u32`, then means, then standard deviations |
//! | | 1 | 1 if target stats follow, else 0 |
//! | | | target stats, same layout as input stats |
//! | | 8 | config text length in bytes |
//! | | | config text, UTF-8 |
//!
//! Layer tags: 1 mesh-conv `(cin, cout)`, 2 instance-norm `(channels, 0)`, 3 relu, 4 pool
//! `(target, 0)`, 5 unpool, 6 global-average-pool, 7 dense `(cin, cout)`.
//!
//! Decoding rejects trailing bytes, so `encode(decode(b)) == b` for every accepted `b`.

use super::model::{LayerSpec, ModelGraph};
use super::NnError;
use crate::features::ChannelStats;
use crate::ops::PoolPolicy;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MCKP";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelGraph,
    pub input_stats: ChannelStats,
    pub target_stats: Option<ChannelStats>,
    pub config_hash: [u8; 8],
    pub config_text: String,
}

fn layer_code(layer: &LayerSpec) -> (u8, u64, u64) {
    match *layer {
        LayerSpec::MeshConv { cin, cout } => (1, cin as u64, cout as u64),
        LayerSpec::InstanceNorm { channels } => (2, channels as u64, 0),
        LayerSpec::Relu => (3, 0, 0),
        LayerSpec::Pool { target } => (4, target as u64, 0),
        LayerSpec::Unpool => (5, 0, 0),
        LayerSpec::GlobalAveragePool => (6, 0, 0),
        LayerSpec::Dense { cin, cout } => (7, cin as u64, cout as u64),
    }
}

fn put_stats(out: &mut Vec<u8>, stats: &ChannelStats) {
    out.extend_from_slice(&(stats.mean.len() as u32).to_le_bytes());
    for v in stats.mean.iter().chain(&stats.std) {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let model = &ckpt.model;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match model.policy() {
        PoolPolicy::Enhanced => 0,
        PoolPolicy::Legacy => 1,
    });
    out.push(0);
    out.extend_from_slice(&ckpt.config_hash);
    out.extend_from_slice(&(model.input_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        let (tag, a, b) = layer_code(layer);
        out.push(tag);
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
    }
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&(p.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.cols() as u32).to_le_bytes());
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    put_stats(&mut out, &ckpt.input_stats);
    match &ckpt.target_stats {
        Some(s) => {
            out.push(1);
            put_stats(&mut out, s);
        }
        None => out.push(0),
    }
    out.extend_from_slice(&(ckpt.config_text.len() as u64).to_le_bytes());
    out.extend_from_slice(ckpt.config_text.as_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated while reading {what} at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, NnError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<usize, NnError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>, NnError> {
        let len = n.checked_mul(8).ok_or_else(|| corrupt(format!("{what} size overflows")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn stats(&mut self, what: &str) -> Result<ChannelStats, NnError> {
        let c = self.u32(what)?;
        let mean = self.f64s(c, what)?;
        let std = self.f64s(c, what)?;
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(corrupt(format!("{what} holds invalid values")));
        }
        Ok(ChannelStats { mean, std })
    }
}

fn small(v: u64, what: &str) -> Result<usize, NnError> {
    usize::try_from(v)
        .ok()
        .filter(|&v| v <= u32::MAX as usize)
        .ok_or_else(|| corrupt(format!("{what} {v} is out of range")))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, NnError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let policy = match r.u8("pool policy")? {
        0 => PoolPolicy::Enhanced,
        1 => PoolPolicy::Legacy,
        other => return Err(corrupt(format!("unknown pool policy code {other}"))),
    };
    if r.u8("reserved byte")? != 0 {
        return Err(corrupt("reserved byte is not zero"));
    }
    let config_hash: [u8; 8] = r.take(8, "config hash")?.try_into().expect("8 bytes");
    let input_channels = r.u32("input channels")?;
    let layer_count = r.u32("layer count")?;
    let mut layers = Vec::new();
    for _ in 0..layer_count {
        let tag = r.u8("layer tag")?;
        let (a, b) = (r.u64("layer argument")?, r.u64("layer argument")?);
        let (x, y) = (small(a, "layer argument")?, small(b, "layer argument")?);
        let unused = |n: u64| if n == 0 { Ok(()) } else { Err(corrupt(format!("layer tag {tag} has a non-zero unused argument"))) };
        layers.push(match tag {
            1 => LayerSpec::MeshConv { cin: x, cout: y },
            2 => {
                unused(b)?;
                LayerSpec::InstanceNorm { channels: x }
            }
            3 | 5 | 6 => {
                unused(a)?;
                unused(b)?;
                match tag {
                    3 => LayerSpec::Relu,
                    5 => LayerSpec::Unpool,
                    _ => LayerSpec::GlobalAveragePool,
                }
            }
            4 => {
                unused(b)?;
                LayerSpec::Pool { target: x }
            }
            7 => LayerSpec::Dense { cin: x, cout: y },
            other => return Err(corrupt(format!("unknown layer tag {other}"))),
        });
    }
    let block_count = r.u32("parameter count")?;
    let mut params = Vec::new();
    for i in 0..block_count {
        let (rows, cols) = (r.u32("parameter rows")?, r.u32("parameter cols")?);
        let n = rows.checked_mul(cols).ok_or_else(|| corrupt(format!("parameter {i} size overflows")))?;
        params.push(Tensor::from_vec(rows, cols, r.f64s(n, "parameter values")?));
    }
    let input_stats = r.stats("input stats")?;
    let target_stats = match r.u8("target stats flag")? {
        0 => None,
        1 => Some(r.stats("target stats")?),
        other => return Err(corrupt(format!("bad target stats flag {other}"))),
    };
    let text_len = small(r.u64("config length")?, "config length")?;
    let config_text = std::str::from_utf8(r.take(text_len, "config text")?)
        .map_err(|_| corrupt("config text is not UTF-8"))?
        .to_owned();
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let model = ModelGraph::from_parts(input_channels, layers, params, policy)
        .map_err(|e| corrupt(format!("invalid model: {e}")))?;
    if input_stats.mean.len() != model.input_channels() {
        return Err(corrupt("input stats do not match the model's input channels"));
    }
    Ok(Checkpoint {
        model,
        input_stats,
        target_stats,
        config_hash,
        config_text,
    })
}
