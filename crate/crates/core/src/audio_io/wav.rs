//! RIFF/WAVE parsing and encoding. Accepts format codes 1 (integer PCM,
//! 16-bit) and 3 (IEEE float, 32-bit), 1-2 channels; unknown chunks such as
//! LIST and fact are skipped. Writes the canonical 44-byte header.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioClip, AudioError, WavEncoding, WavInfo};

const I16_SCALE: f64 = 32768.0;

/// Reads a WAV file into a normalized clip. Integer PCM is divided by 32768;
/// multi-channel data stays interleaved.
pub fn read_wav(path: &Path) -> Result<(AudioClip, WavInfo), AudioError> {
    let bytes = fs::read(path)?;
    parse_wav(&bytes)
}

fn parse_wav(bytes: &[u8]) -> Result<(AudioClip, WavInfo), AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotRiffWave);
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| AudioError::MalformedChunks(format!(
                "chunk {:?} of size {size} overruns the file",
                String::from_utf8_lossy(id)
            )))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(FmtChunk::parse(body)?),
            b"data" => {
                if data.is_none() {
                    data = Some(body);
                }
            }
            _ => {} // LIST, fact, bext, ... skipped, not rejected
        }
        // chunks are word-aligned; odd sizes carry a pad byte
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedChunks("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedChunks("missing data chunk".into()))?;

    let bytes_per_sample = (fmt.bits_per_sample / 8) as usize;
    let block = bytes_per_sample * fmt.channels as usize;
    if block == 0 || data.len() % block != 0 {
        return Err(AudioError::MalformedChunks(format!(
            "data size {} is not a multiple of the {}-byte frame",
            data.len(),
            block
        )));
    }

    let samples: Vec<f64> = match fmt.encoding {
        WavEncoding::IntegerPcm => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / I16_SCALE)
            .collect(),
        WavEncoding::FloatPcm => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
    };

    let clip = AudioClip::new(samples, fmt.sample_rate, fmt.channels)?;
    let info = WavInfo {
        bits_per_sample: fmt.bits_per_sample,
        encoding: fmt.encoding,
        duration_s: clip.duration_s(),
    };
    Ok((clip, info))
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
    encoding: WavEncoding,
}

impl FmtChunk {
    fn parse(body: &[u8]) -> Result<Self, AudioError> {
        if body.len() < 16 {
            return Err(AudioError::MalformedChunks("fmt chunk shorter than 16 bytes".into()));
        }
        let format_code = u16::from_le_bytes([body[0], body[1]]);
        let channels = u16::from_le_bytes([body[2], body[3]]);
        let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
        let bits_per_sample = u16::from_le_bytes([body[14], body[15]]);

        let encoding = match (format_code, bits_per_sample) {
            (1, 16) => WavEncoding::IntegerPcm,
            (3, 32) => WavEncoding::FloatPcm,
            _ => return Err(AudioError::UnsupportedEncoding { format_code, bits: bits_per_sample }),
        };
        if channels == 0 || channels > 2 {
            return Err(AudioError::UnsupportedChannels(channels));
        }
        Ok(Self { channels, sample_rate, bits_per_sample, encoding })
    }
}

/// Writes a clip as 16-bit integer PCM or 32-bit float PCM. The 16-bit path
/// clamps to [-1, 1 - 2^-15] and rounds half away from zero.
pub fn write_wav(clip: &AudioClip, path: &Path, bits: u16) -> Result<(), AudioError> {
    let mut file = fs::File::create(path)?;
    write_wav_to(clip, &mut file, bits)
}

/// Same as [`write_wav`] but to any writer; used for in-memory encoding.
pub fn write_wav_to<W: Write>(clip: &AudioClip, writer: &mut W, bits: u16) -> Result<(), AudioError> {
    let (format_code, bytes_per_sample) = match bits {
        16 => (1u16, 2usize),
        32 => (3u16, 4usize),
        other => return Err(AudioError::InvalidBits(other)),
    };
    let channels = clip.channel_count;
    let block_align = channels as usize * bytes_per_sample;
    let data_len = clip.samples.len() * bytes_per_sample;

    writer.write_all(b"RIFF")?;
    writer.write_all(&(36 + data_len as u32).to_le_bytes())?;
    writer.write_all(b"WAVE")?;
    writer.write_all(b"fmt ")?;
    writer.write_all(&16u32.to_le_bytes())?;
    writer.write_all(&format_code.to_le_bytes())?;
    writer.write_all(&channels.to_le_bytes())?;
    writer.write_all(&clip.sample_rate_hz.to_le_bytes())?;
    writer.write_all(&((clip.sample_rate_hz as usize * block_align) as u32).to_le_bytes())?;
    writer.write_all(&(block_align as u16).to_le_bytes())?;
    writer.write_all(&bits.to_le_bytes())?;
    writer.write_all(b"data")?;
    writer.write_all(&(data_len as u32).to_le_bytes())?;

    match bits {
        16 => {
            let mut buf = Vec::with_capacity(data_len);
            for &s in &clip.samples {
                buf.extend_from_slice(&encode_i16(s).to_le_bytes());
            }
            writer.write_all(&buf)?;
        }
        _ => {
            let mut buf = Vec::with_capacity(data_len);
            for &s in &clip.samples {
                buf.extend_from_slice(&(s as f32).to_le_bytes());
            }
            writer.write_all(&buf)?;
        }
    }
    Ok(())
}

fn encode_i16(s: f64) -> i16 {
    let clamped = s.clamp(-1.0, (I16_SCALE - 1.0) / I16_SCALE);
    (clamped * I16_SCALE).round() as i16
}
