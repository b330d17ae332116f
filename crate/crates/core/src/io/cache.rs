//! Binary feature cache.
//!
//! Little-endian layout: magic `LGT1`, `u32` version, `u32` segment count,
//! then per segment a `u16`-prefixed UTF-8 clip id, `u32` segment index,
//! `u32` label, `u32` fold, (version 2 only) a `u8` augmentation copy
//! number, and 128·128·2 `f32` values in (band, frame, channel) order.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::bytes::{put_f32s, put_string16, ByteReader};
use crate::dsp::{LogGTSegment, SEGMENT_LEN};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"LGT1";
/// Version written by [`write_cache`]; version 1 (no augmentation byte) is
/// still read.
pub const CACHE_VERSION: u32 = 2;

pub fn encode_segment(out: &mut Vec<u8>, s: &LogGTSegment) -> Result<()> {
    if s.values.len() != SEGMENT_LEN {
        return Err(Error::dim(format!(
            "segment {}#{} has {} values, expected {SEGMENT_LEN}",
            s.clip_id,
            s.index,
            s.values.len()
        )));
    }
    put_string16(out, &s.clip_id, "clip id")?;
    out.extend_from_slice(&s.index.to_le_bytes());
    out.extend_from_slice(&s.label.to_le_bytes());
    out.extend_from_slice(&u32::from(s.fold).to_le_bytes());
    out.push(s.augmented);
    put_f32s(out, &s.values);
    Ok(())
}

/// Streams a version-2 cache to `out`.
pub fn write_cache<W: Write>(mut out: W, segments: &[LogGTSegment]) -> Result<()> {
    let count = u32::try_from(segments.len()).map_err(|_| Error::contract("more than u32::MAX segments"))?;
    let mut buf = Vec::with_capacity(12);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
    out.write_all(&buf)?;
    for s in segments {
        buf.clear();
        encode_segment(&mut buf, s)?;
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a whole cache, rejecting unknown magic or version and trailing
/// bytes.
pub fn read_cache<R: Read>(input: R) -> Result<Vec<LogGTSegment>> {
    let mut r = ByteReader::new(input);
    if &r.array::<4>("magic")? != CACHE_MAGIC {
        return Err(Error::decode(0, "not a feature cache (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != 1 && version != 2 {
        return Err(Error::decode(4, format!("unsupported cache version {version}")));
    }
    let count = r.u32("segment count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let clip_id = r.string16("clip id")?;
        let index = r.u32("segment index")?;
        let label = r.u32("label")?;
        let at = r.offset();
        let fold = u8::try_from(r.u32("fold")?).map_err(|_| Error::decode(at, "fold does not fit in a byte"))?;
        let augmented = if version >= 2 { r.u8("augmentation flag")? } else { 0 };
        let mut values = vec![0f32; SEGMENT_LEN];
        r.f32s(&mut values, "segment values")?;
        out.push(LogGTSegment {
            clip_id,
            index,
            label,
            fold,
            augmented,
            values,
        });
    }
    r.expect_end()?;
    Ok(out)
}

/// Writes to a sibling temporary file and renames it into place, so a
/// failure never leaves a partial cache at `path`.
pub fn save_cache(path: impl AsRef<Path>, segments: &[LogGTSegment]) -> Result<()> {
    let path = path.as_ref();
    atomic_write(path, |w| write_cache(w, segments))
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<Vec<LogGTSegment>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_cache(BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub(crate) fn atomic_write(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e: Error| e.in_file(path))
}
