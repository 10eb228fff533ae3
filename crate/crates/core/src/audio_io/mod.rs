//! WAV reading/writing, channel downmix, and band-limited resampling shared
//! by every other module. All in-memory processing is 64-bit; 16/32-bit is a
//! storage concern only.

mod resample;
mod wav;

pub use resample::resample;
pub(crate) use resample::resample_by_step;
pub use wav::{read_wav, write_wav, write_wav_to};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a RIFF/WAVE file")]
    NotRiffWave,
    #[error("malformed RIFF chunks: {0}")]
    MalformedChunks(String),
    #[error("unsupported encoding (format code {format_code}, {bits} bits per sample)")]
    UnsupportedEncoding { format_code: u16, bits: u16 },
    #[error("unsupported channel count {0}")]
    UnsupportedChannels(u16),
    #[error("sample rate {0} Hz is below the 8000 Hz minimum")]
    InvalidSampleRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("invalid bit depth {0} (expected 16 or 32)")]
    InvalidBits(u16),
    #[error("operation requires a mono clip")]
    NotMono,
    #[error("sample count {0} is not a multiple of channel count {1}")]
    RaggedFrames(usize, u16),
}

/// Normalized PCM audio. Samples are interleaved when `channel_count > 1`
/// and nominally lie in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub channel_count: u16,
}

impl AudioClip {
    /// Builds a clip and checks the type invariants: finite samples, frame
    /// alignment, and a sample rate of at least 8 kHz.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, channel_count: u16) -> Result<Self, AudioError> {
        if sample_rate_hz < 8000 {
            return Err(AudioError::InvalidSampleRate(sample_rate_hz));
        }
        if channel_count == 0 || channel_count > 2 {
            return Err(AudioError::UnsupportedChannels(channel_count));
        }
        if samples.len() % channel_count as usize != 0 {
            return Err(AudioError::RaggedFrames(samples.len(), channel_count));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSample(i));
        }
        Ok(Self { samples, sample_rate_hz, channel_count })
    }

    pub fn mono(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        Self::new(samples, sample_rate_hz, 1)
    }

    pub fn is_mono(&self) -> bool {
        self.channel_count == 1
    }

    pub fn frame_count(&self) -> usize {
        self.samples.len() / self.channel_count as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count() as f64 / self.sample_rate_hz as f64
    }
}

/// Storage-level facts about a WAV file, as read from its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    IntegerPcm,
    FloatPcm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavInfo {
    pub bits_per_sample: u16,
    pub encoding: WavEncoding,
    pub duration_s: f64,
}

/// Averages stereo frames to mono (0.5 * (L + R)); mono clips pass through
/// unchanged.
pub fn downmix_mono(clip: &AudioClip) -> Result<AudioClip, AudioError> {
    match clip.channel_count {
        1 => Ok(clip.clone()),
        2 => {
            let samples: Vec<f64> = clip
                .samples
                .chunks_exact(2)
                .map(|frame| 0.5 * (frame[0] + frame[1]))
                .collect();
            AudioClip::mono(samples, clip.sample_rate_hz)
        }
        n => Err(AudioError::UnsupportedChannels(n)),
    }
}
