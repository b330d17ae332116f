//! Binary checkpoint.
//!
//! Little-endian layout: magic `ACRN`, `u32` version, `u32` tensor count,
//! then per tensor a `u16`-prefixed UTF-8 name, `u8` rank, `u32` dims and
//! the `f32` data. Learnable tensors come first, batch-norm running
//! statistics next, and finally `meta.*` (network configuration, epoch) and
//! `norm.*` (input statistics) entries, all as ordinary tensors.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::bytes::{put_f32s, put_string16, ByteReader};
use super::cache::atomic_write;
use crate::autodiff::Tensor;
use crate::dsp::{NormStats, CHANNELS};
use crate::error::{Error, Result};
use crate::model::{param_layout, ACRNNConfig, ModelParams, ParamKind, Placement, RnnAttentionForm};
use crate::train::Checkpoint;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ACRN";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Largest rank accepted when reading.
pub const MAX_RANK: usize = 8;
/// Largest element count of a single tensor accepted when reading.
pub const MAX_ELEMENTS: usize = 1 << 28;

/// Largest integer an `f32` holds exactly.
const F32_EXACT: usize = 1 << 24;

fn int_tensor(values: &[usize], what: &str) -> Result<Tensor<f32>> {
    if let Some(v) = values.iter().find(|&&v| v > F32_EXACT) {
        return Err(Error::contract(format!("{what} value {v} is too large to store")));
    }
    Tensor::new(&[values.len()], values.iter().map(|&v| v as f32).collect())
}

/// An `f64` as four exact 16-bit pieces, most significant first.
fn f64_tensor(v: f64) -> Tensor<f32> {
    let bits = v.to_bits();
    Tensor::from_fn(&[4], |i| ((bits >> (48 - 16 * i)) & 0xFFFF) as f32)
}

fn named_tensors(ckpt: &Checkpoint) -> Result<Vec<(String, Tensor<f32>)>> {
    let cfg = &ckpt.config;
    let mut out: Vec<(String, Tensor<f32>)> = Vec::new();
    let running = |k: ParamKind| matches!(k, ParamKind::BnRunningMean | ParamKind::BnRunningVar);
    for (name, p) in ckpt.params.iter().filter(|(_, p)| !running(p.kind)) {
        out.push((name.to_string(), p.value.clone()));
    }
    for (name, p) in ckpt.params.iter().filter(|(_, p)| running(p.kind)) {
        out.push((name.to_string(), p.value.clone()));
    }
    let placement = Placement::ALL
        .iter()
        .position(|&p| p == cfg.attention_placement)
        .expect("placement is one of ALL");
    let form = match cfg.rnn_attention_form {
        RnnAttentionForm::Linear => 0,
        RnnAttentionForm::Mlp => 1,
    };
    out.push(("meta.num_classes".into(), int_tensor(&[cfg.num_classes], "num_classes")?));
    out.push(("meta.input".into(), int_tensor(&[cfg.input.0, cfg.input.1, cfg.input.2], "input")?));
    out.push(("meta.conv_widths".into(), int_tensor(&cfg.conv_widths, "conv width")?));
    out.push(("meta.gru_hidden".into(), int_tensor(&[cfg.gru_hidden], "gru_hidden")?));
    out.push(("meta.placement".into(), int_tensor(&[placement], "placement")?));
    out.push(("meta.rnn_attention_form".into(), int_tensor(&[form], "form")?));
    out.push(("meta.dropout_p".into(), f64_tensor(cfg.dropout_p)));
    out.push(("meta.l2_coeff".into(), f64_tensor(cfg.l2_coeff)));
    out.push(("meta.epoch".into(), int_tensor(&[ckpt.epoch], "epoch")?));
    out.push(("norm.mean".into(), Tensor::new(&[CHANNELS], ckpt.norm.mean.to_vec())?));
    out.push(("norm.std".into(), Tensor::new(&[CHANNELS], ckpt.norm.std.to_vec())?));
    Ok(out)
}

pub fn write_checkpoint<W: Write>(mut out: W, ckpt: &Checkpoint) -> Result<()> {
    let tensors = named_tensors(ckpt)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        put_string16(&mut buf, name, "tensor name")?;
        let rank = u8::try_from(t.rank()).map_err(|_| Error::contract(format!("{name} has rank {}", t.rank())))?;
        buf.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::contract(format!("{name} dimension {d} too large")))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        put_f32s(&mut buf, t.data());
        out.write_all(&buf)?;
        buf.clear();
    }
    out.flush()?;
    Ok(())
}

/// Raw named tensors of a checkpoint stream, in file order.
pub fn read_tensors<R: Read>(input: R) -> Result<IndexMap<String, Tensor<f32>>> {
    let mut r = ByteReader::new(input);
    if &r.array::<4>("magic")? != CHECKPOINT_MAGIC {
        return Err(Error::decode(0, "not a checkpoint (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::decode(4, format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32("tensor count")?;
    let mut out = IndexMap::new();
    for _ in 0..count {
        let at = r.offset();
        let name = r.string16("tensor name")?;
        let rank = usize::from(r.u8("rank")?);
        if rank > MAX_RANK {
            return Err(Error::decode(r.offset() - 1, format!("{name}: rank {rank} exceeds {MAX_RANK}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= MAX_ELEMENTS)
            .ok_or_else(|| Error::decode(r.offset(), format!("{name}: shape {shape:?} is too large")))?;
        // grow as data arrives so a lying header cannot force a huge allocation
        let mut data = Vec::new();
        let mut chunk = [0f32; 1024];
        while data.len() < len {
            let n = (len - data.len()).min(chunk.len());
            r.f32s(&mut chunk[..n], &name)?;
            data.extend_from_slice(&chunk[..n]);
        }
        let tensor = Tensor::new(&shape, data)?;
        if out.insert(name.clone(), tensor).is_some() {
            return Err(Error::decode(at, format!("duplicate tensor {name}")));
        }
    }
    r.expect_end()?;
    Ok(out)
}

fn take(t: &mut IndexMap<String, Tensor<f32>>, name: &str) -> Result<Tensor<f32>> {
    t.shift_remove(name)
        .ok_or_else(|| Error::decode(0, format!("checkpoint lacks {name}")))
}

fn ints(t: &mut IndexMap<String, Tensor<f32>>, name: &str, len: usize) -> Result<Vec<usize>> {
    let v = take(t, name)?;
    if v.len() != len {
        return Err(Error::decode(0, format!("{name} has {} entries, expected {len}", v.len())));
    }
    v.data()
        .iter()
        .map(|&x| {
            if x >= 0.0 && x.fract() == 0.0 && (x as usize) <= F32_EXACT {
                Ok(x as usize)
            } else {
                Err(Error::decode(0, format!("{name} holds {x}, not a count")))
            }
        })
        .collect()
}

fn float64(t: &mut IndexMap<String, Tensor<f32>>, name: &str) -> Result<f64> {
    let parts = ints(t, name, 4)?;
    if parts.iter().any(|&p| p > 0xFFFF) {
        return Err(Error::decode(0, format!("{name} is not a packed 64-bit float")));
    }
    Ok(f64::from_bits(parts.iter().fold(0u64, |acc, &p| (acc << 16) | p as u64)))
}

fn channels(t: &mut IndexMap<String, Tensor<f32>>, name: &str) -> Result<[f32; CHANNELS]> {
    let v = take(t, name)?;
    v.data()
        .try_into()
        .map_err(|_| Error::decode(0, format!("{name} must have {CHANNELS} entries")))
}

/// Rebuilds a checkpoint from its named tensors.
pub fn checkpoint_from_tensors(mut t: IndexMap<String, Tensor<f32>>) -> Result<Checkpoint> {
    let input = ints(&mut t, "meta.input", 3)?;
    let placement = ints(&mut t, "meta.placement", 1)?[0];
    let form = ints(&mut t, "meta.rnn_attention_form", 1)?[0];
    let config = ACRNNConfig {
        num_classes: ints(&mut t, "meta.num_classes", 1)?[0],
        attention_placement: *Placement::ALL
            .get(placement)
            .ok_or_else(|| Error::decode(0, format!("unknown placement index {placement}")))?,
        conv_widths: ints(&mut t, "meta.conv_widths", 8)?.try_into().expect("length checked"),
        gru_hidden: ints(&mut t, "meta.gru_hidden", 1)?[0],
        dropout_p: float64(&mut t, "meta.dropout_p")?,
        l2_coeff: float64(&mut t, "meta.l2_coeff")?,
        rnn_attention_form: match form {
            0 => RnnAttentionForm::Linear,
            1 => RnnAttentionForm::Mlp,
            _ => return Err(Error::decode(0, format!("unknown attention form index {form}"))),
        },
        input: (input[0], input[1], input[2]),
    };
    let epoch = ints(&mut t, "meta.epoch", 1)?[0];
    let norm = NormStats {
        mean: channels(&mut t, "norm.mean")?,
        std: channels(&mut t, "norm.std")?,
    };
    if !(norm.mean.iter().all(|m| m.is_finite()) && norm.std.iter().all(|s| s.is_finite() && *s > 0.0)) {
        return Err(Error::decode(0, "normalization statistics must be finite with positive deviations"));
    }
    config
        .validate()
        .map_err(|e| Error::decode(0, format!("stored configuration is invalid: {e}")))?;
    let layout = param_layout(&config).map_err(|e| Error::decode(0, format!("stored configuration is invalid: {e}")))?;
    if layout.len() != t.len() {
        return Err(Error::decode(
            0,
            format!("checkpoint has {} parameter tensors, the configuration needs {}", t.len(), layout.len()),
        ));
    }
    let mut params = ModelParams::new();
    for spec in layout {
        let value = t
            .shift_remove(&spec.name)
            .ok_or_else(|| Error::decode(0, format!("checkpoint lacks {}", spec.name)))?;
        if value.shape() != spec.shape.as_slice() {
            return Err(Error::decode(
                0,
                format!("{} has shape {:?}, expected {:?}", spec.name, value.shape(), spec.shape),
            ));
        }
        params.insert(spec.name, spec.kind, value)?;
    }
    Ok(Checkpoint {
        config,
        params,
        norm,
        epoch,
    })
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Checkpoint> {
    checkpoint_from_tensors(read_tensors(input)?)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    atomic_write(path.as_ref(), |w| write_checkpoint(w, ckpt))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_checkpoint(BufReader::new(file)).map_err(|e| e.in_file(path))
}
