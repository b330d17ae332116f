//! RIFF/WAVE reading (16-bit PCM and 32-bit float, including the
//! extensible header) and 16-bit PCM writing.

use std::fs;
use std::path::Path;

use crate::dsp::{resample_rate, WaveClip, SAMPLE_RATE};
use crate::error::{Error, Result};

const TAG_PCM: u16 = 1;
const TAG_FLOAT: u16 = 3;
const TAG_EXTENSIBLE: u16 = 0xFFFE;
/// Bytes 2..16 of every `KSDATAFORMAT_SUBTYPE_*` GUID.
const SUBTYPE_SUFFIX: [u8; 14] = [0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71];

/// Accepted sample-rate range in Hz.
pub const RATE_RANGE: (u32, u32) = (1_000, 384_000);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

/// A decoded file, downmixed to mono at its native rate.
#[derive(Clone, Debug, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: u16,
    pub format: SampleFormat,
    pub samples: Vec<f32>,
}

struct Fmt {
    channels: u16,
    rate: u32,
    format: SampleFormat,
    block_align: usize,
}

fn le16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8], at: u64) -> Result<Fmt> {
    if body.len() < 16 {
        return Err(Error::decode(at, format!("fmt chunk of {} bytes is shorter than 16", body.len())));
    }
    let mut tag = le16(body, 0);
    let channels = le16(body, 2);
    let rate = le32(body, 4);
    let block_align = usize::from(le16(body, 12));
    let bits = le16(body, 14);
    if tag == TAG_EXTENSIBLE {
        if body.len() < 40 {
            return Err(Error::decode(at, "extensible fmt chunk shorter than 40 bytes"));
        }
        if body[26..40] != SUBTYPE_SUFFIX {
            return Err(Error::decode(at + 24, "unknown extensible sub-format GUID"));
        }
        tag = le16(body, 24);
    }
    let format = match (tag, bits) {
        (TAG_PCM, 16) => SampleFormat::Pcm16,
        (TAG_FLOAT, 32) => SampleFormat::Float32,
        _ => {
            return Err(Error::decode(
                at,
                format!("unsupported codec: format tag {tag:#06x} with {bits} bits per sample"),
            ))
        }
    };
    if !(1..=2).contains(&channels) {
        return Err(Error::decode(at + 2, format!("{channels} channels; only mono and stereo are supported")));
    }
    if !(RATE_RANGE.0..=RATE_RANGE.1).contains(&rate) {
        return Err(Error::decode(at + 4, format!("sample rate {rate} Hz outside the supported range")));
    }
    if block_align != usize::from(channels) * usize::from(bits / 8) {
        return Err(Error::decode(at + 12, format!("block align {block_align} does not match {channels}×{bits} bits")));
    }
    Ok(Fmt {
        channels,
        rate,
        format,
        block_align,
    })
}

/// Decodes an in-memory WAV file. Channels are averaged; a trailing
/// partial frame is ignored.
pub fn decode_wav(bytes: &[u8]) -> Result<WavData> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(Error::decode(0, "missing RIFF header"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::decode(8, "RIFF form type is not WAVE"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<Fmt> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le32(bytes, pos + 4) as usize;
        let start = pos + 8;
        let Some(end) = start.checked_add(size).filter(|&e| e <= bytes.len()) else {
            return Err(Error::decode(
                pos as u64 + 4,
                format!("chunk declares {size} bytes but only {} remain", bytes.len() - start),
            ));
        };
        let body = &bytes[start..end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body, start as u64)?),
            b"data" => {
                let f = fmt.ok_or_else(|| Error::decode(pos as u64, "data chunk before fmt chunk"))?;
                return decode_samples(body, start as u64, &f);
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(Error::decode(bytes.len() as u64, "no data chunk"))
}

fn decode_samples(body: &[u8], at: u64, f: &Fmt) -> Result<WavData> {
    let channels = usize::from(f.channels);
    let width = f.block_align / channels;
    let frames = body.len() / f.block_align;
    let mut samples = Vec::with_capacity(frames);
    for (i, frame) in body.chunks_exact(f.block_align).enumerate() {
        let mut sum = 0f32;
        for c in 0..channels {
            let b = &frame[c * width..(c + 1) * width];
            sum += match f.format {
                SampleFormat::Pcm16 => f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0,
                SampleFormat::Float32 => {
                    let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                    if !v.is_finite() {
                        let offset = at + (i * f.block_align + c * width) as u64;
                        return Err(Error::decode(offset, "non-finite float sample"));
                    }
                    v
                }
            };
        }
        samples.push(sum / channels as f32);
    }
    Ok(WavData {
        sample_rate: f.rate,
        channels: f.channels,
        format: f.format,
        samples,
    })
}

/// Reads a WAV file as a mono 44.1 kHz clip. Other rates are linearly
/// resampled with a warning. The clip id is the file stem; label and fold
/// are left at 0 for the caller to fill in.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    let wav = decode_wav(&bytes).map_err(|e| e.in_file(path))?;
    let samples = if wav.sample_rate == SAMPLE_RATE {
        wav.samples
    } else {
        log::warn!(
            "{}: resampling {} Hz to {SAMPLE_RATE} Hz with linear interpolation",
            path.display(),
            wav.sample_rate
        );
        resample_rate(&wav.samples, wav.sample_rate, SAMPLE_RATE)
    };
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(WaveClip::new(id, samples, SAMPLE_RATE, 0, 0))
}

fn header(channels: u16, rate: u32, tag: u16, bits: u16, data_len: usize) -> Result<Vec<u8>> {
    let data_len = u32::try_from(data_len).map_err(|_| Error::contract("WAV data larger than 4 GiB"))?;
    let block = channels * bits / 8;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * u32::from(block)).to_le_bytes());
    out.extend_from_slice(&block.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    Ok(out)
}

/// 16-bit PCM WAV bytes for interleaved samples in `[-1, 1]` (values
/// outside are clipped).
pub fn encode_pcm16(interleaved: &[f32], channels: u16, rate: u32) -> Result<Vec<u8>> {
    let mut out = header(channels, rate, TAG_PCM, 16, interleaved.len() * 2)?;
    for &s in interleaved {
        let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// 32-bit float WAV bytes for interleaved samples.
pub fn encode_f32(interleaved: &[f32], channels: u16, rate: u32) -> Result<Vec<u8>> {
    let mut out = header(channels, rate, TAG_FLOAT, 32, interleaved.len() * 4)?;
    for &s in interleaved {
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

/// Writes a mono 16-bit PCM file.
pub fn write_pcm16(path: impl AsRef<Path>, samples: &[f32], rate: u32) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pcm16(samples, 1, rate)?).map_err(|e| Error::from(e).in_file(path))
}
