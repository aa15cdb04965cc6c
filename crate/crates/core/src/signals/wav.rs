//! 16-bit PCM RIFF/WAVE reader and writer.
//!
//! Samples are scaled to [-1, 1) by dividing by 32768. The writer quantizes
//! with round-half-away-from-zero and clamps to the i16 range, emitting only
//! `fmt ` and `data` chunks.

use std::path::Path;

use super::AudioSignal;
use crate::{Error, Result};

const PCM: u16 = 1;
const FULL_SCALE: f64 = 32768.0;

/// Interleaved PCM decoded into per-channel sample vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a complete WAV file image.
pub fn decode(bytes: &[u8]) -> Result<WavData> {
    if bytes.len() < 12 {
        return Err(Error::format("RIFF", "truncated header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::format("RIFF", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::format("RIFF", "form type is not WAVE"));
    }

    let mut fmt: Option<(u16, u32, u16)> = None;
    let mut pos = 12;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Err(Error::format("chunk header", "truncated chunk header"));
        }
        let id = &bytes[pos..pos + 4];
        let name = String::from_utf8_lossy(id).into_owned();
        let size = read_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || bytes.len() < body + 16 {
                return Err(Error::format("fmt ", "truncated fmt chunk"));
            }
            let format = read_u16(bytes, body);
            let channels = read_u16(bytes, body + 2);
            let rate = read_u32(bytes, body + 4);
            let bits = read_u16(bytes, body + 14);
            if format != PCM {
                return Err(Error::format(
                    "fmt ",
                    format!("audio format {format} is not PCM (1)"),
                ));
            }
            if bits != 16 {
                return Err(Error::format("fmt ", format!("{bits}-bit samples, need 16")));
            }
            if channels == 0 {
                return Err(Error::format("fmt ", "zero channels"));
            }
            if rate == 0 {
                return Err(Error::format("fmt ", "zero sample rate"));
            }
            fmt = Some((channels, rate, bits));
        } else if id == b"data" {
            let (channels, sample_rate, _) =
                fmt.ok_or_else(|| Error::format("data", "data chunk precedes fmt chunk"))?;
            if size == 0 {
                return Err(Error::format("data", "zero-length data"));
            }
            if bytes.len() < body + size {
                return Err(Error::format(
                    "data",
                    format!("declares {size} bytes, {} present", bytes.len() - body),
                ));
            }
            let frame_bytes = 2 * channels as usize;
            if !size.is_multiple_of(frame_bytes) {
                return Err(Error::format(
                    "data",
                    format!("{size} bytes is not a whole number of {channels}-channel frames"),
                ));
            }
            let frames = size / frame_bytes;
            let mut out = vec![Vec::with_capacity(frames); channels as usize];
            for f in 0..frames {
                for (c, ch) in out.iter_mut().enumerate() {
                    let at = body + f * frame_bytes + 2 * c;
                    let v = i16::from_le_bytes([bytes[at], bytes[at + 1]]);
                    ch.push(v as f64 / FULL_SCALE);
                }
            }
            return Ok(WavData {
                sample_rate,
                channels: out,
            });
        }
        if bytes.len() < body + size {
            return Err(Error::format(name, "chunk runs past end of file"));
        }
        pos = body + size + (size & 1);
    }
    match fmt {
        None => Err(Error::format("fmt ", "no fmt chunk")),
        Some(_) => Err(Error::format("data", "no data chunk")),
    }
}

fn quantize(s: f64) -> i16 {
    (s * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes equal-length channels as interleaved 16-bit PCM.
pub fn encode(channels: &[&[f64]], sample_rate: u32) -> Result<Vec<u8>> {
    let n_ch = channels.len();
    if n_ch == 0 || n_ch > u16::MAX as usize {
        return Err(Error::range("channels", format!("{n_ch} channels")));
    }
    let frames = channels[0].len();
    if channels.iter().any(|c| c.len() != frames) {
        return Err(Error::Size("channels differ in length".into()));
    }
    let data_len = frames * n_ch * 2;
    if data_len + 36 > u32::MAX as usize {
        return Err(Error::Size("too many samples for a RIFF file".into()));
    }
    let block_align = (n_ch * 2) as u16;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for f in 0..frames {
        for ch in channels {
            out.extend_from_slice(&quantize(ch[f]).to_le_bytes());
        }
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads a mono or stereo file; stereo is averaged down to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let data = decode(&read_file(path.as_ref())?)?;
    let samples = match data.channels.len() {
        1 => data.channels.into_iter().next().unwrap_or_default(),
        2 => data.channels[0]
            .iter()
            .zip(&data.channels[1])
            .map(|(l, r)| (l + r) / 2.0)
            .collect(),
        n => {
            return Err(Error::format(
                "fmt ",
                format!("{n} channels; mono loader accepts 1 or 2"),
            ))
        }
    };
    AudioSignal::new(samples, data.sample_rate)
}

/// Loads every channel of a file as a separate signal.
pub fn load_multichannel(path: impl AsRef<Path>) -> Result<Vec<AudioSignal>> {
    let data = decode(&read_file(path.as_ref())?)?;
    data.channels
        .into_iter()
        .map(|c| AudioSignal::new(c, data.sample_rate))
        .collect()
}

pub fn save_wav(signal: &AudioSignal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(&[signal.samples()], signal.sample_rate())?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes equal-length, equal-rate signals as one interleaved file.
pub fn save_multichannel(channels: &[AudioSignal], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rate = channels
        .first()
        .map(|c| c.sample_rate())
        .ok_or_else(|| Error::range("channels", "no channels"))?;
    if channels.iter().any(|c| c.sample_rate() != rate) {
        return Err(Error::range("sample_rate", "channels differ in sample rate"));
    }
    let slices: Vec<&[f64]> = channels.iter().map(|c| c.samples()).collect();
    let bytes = encode(&slices, rate)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
