//! Remote multimodal-LLM attacker client: a transport abstraction with a
//! deterministic mock for offline tests and a rate-limited HTTP transport
//! for live runs. The core builds a generic single-turn request (prompt +
//! base64 WAV); vendor payload shapes live in the transport adapter.

use std::collections::VecDeque;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attacker_cnn::{AttackVerdict, EmotionLabel};
use crate::audio_io::{write_wav_to, AudioClip};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("environment variable {0} is not set")]
    MissingEnvVar(String),
    #[error("remote call failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: TransportError },
    #[error("remote service error: {0}")]
    Transport(TransportError),
    #[error("clip of {0:.1} s exceeds the 60 s remote limit")]
    ClipTooLong(f64),
    #[error("audio encoding failed: {0}")]
    Audio(#[from] crate::audio_io::AudioError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("response missing text content: {0}")]
    BadPayload(String),
}

impl TransportError {
    /// Timeouts, connection drops, 429s and 5xx responses are retried;
    /// other HTTP statuses and malformed payloads are not.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Connection(_) => true,
            TransportError::Http { status, .. } => *status == 429 || *status >= 500,
            TransportError::BadPayload(_) => false,
        }
    }
}

/// Client configuration. Only the *name* of the API-key environment variable
/// is ever persisted; the key itself stays in the environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmAttackerConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub prompt_template: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub api_key_env_var: String,
}

impl Default for LlmAttackerConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            model_name: String::new(),
            prompt_template: "Listen to this audio clip and answer with exactly one word from: {labels}."
                .to_string(),
            timeout_s: 30.0,
            max_retries: 3,
            api_key_env_var: "LLM_API_KEY".to_string(),
        }
    }
}

/// Generic single-turn request; the transport owns the vendor wire shape.
#[derive(Debug, Clone)]
pub struct LlmRequest {
    pub model_name: String,
    pub prompt: String,
    pub wav_base64: String,
}

/// Audit record of one remote inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmTranscript {
    pub request_digest: String,
    pub raw_response_text: String,
    pub parsed_label: Option<EmotionLabel>,
    pub latency_ms: f64,
    pub attempts: u32,
}

/// Outcome of one remote inference; `verdict` is `None` when the response
/// text named no known emotion (the "unparseable" outcome).
#[derive(Debug, Clone)]
pub struct LlmInference {
    pub verdict: Option<AttackVerdict>,
    pub transcript: LlmTranscript,
}

pub trait Transport: Send + Sync {
    /// Sends one request and returns the model's text reply.
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError>;

    /// Backoff hook; the mock overrides this to record rather than wait.
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Scripted transport for offline tests: pops one scripted result per call.
#[derive(Default)]
pub struct MockTransport {
    script: Mutex<VecDeque<Result<String, TransportError>>>,
    calls: AtomicU32,
    sleeps: Mutex<Vec<Duration>>,
}

impl MockTransport {
    pub fn new(script: Vec<Result<String, TransportError>>) -> Self {
        Self { script: Mutex::new(script.into()), calls: AtomicU32::new(0), sleeps: Mutex::new(Vec::new()) }
    }

    pub fn answering(text: &str) -> Self {
        Self::new(vec![Ok(text.to_string())])
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn recorded_sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().unwrap().clone()
    }
}

impl Transport for MockTransport {
    fn send(&self, _request: &LlmRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.script
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Connection("mock script exhausted".into())))
    }

    fn sleep(&self, d: Duration) {
        self.sleeps.lock().unwrap().push(d);
    }
}

/// Token bucket: `rate_per_s` requests per second, burst of `capacity`.
pub struct TokenBucket {
    capacity: f64,
    tokens: f64,
    rate_per_s: f64,
    last: Instant,
}

impl TokenBucket {
    pub fn new(rate_per_s: f64, capacity: f64) -> Self {
        Self { capacity, tokens: capacity, rate_per_s, last: Instant::now() }
    }

    /// Consumes one token, returning how long the caller must wait first.
    pub fn acquire(&mut self, now: Instant) -> Duration {
        let elapsed = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        self.tokens = (self.tokens + elapsed * self.rate_per_s).min(self.capacity);
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Duration::ZERO
        } else {
            let wait = (1.0 - self.tokens) / self.rate_per_s;
            self.tokens = 0.0;
            Duration::from_secs_f64(wait)
        }
    }
}

/// Live JSON-over-HTTPS transport (OpenAI-style audio chat payload), with
/// the API key read from the environment at construction and calls
/// serialized through a 1 req/s token bucket.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    api_key: String,
    limiter: Mutex<TokenBucket>,
}

impl HttpTransport {
    pub fn from_config(cfg: &LlmAttackerConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&cfg.api_key_env_var)
            .map_err(|_| LlmError::MissingEnvVar(cfg.api_key_env_var.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| LlmError::Transport(TransportError::Connection(e.to_string())))?;
        Ok(Self {
            client,
            endpoint_url: cfg.endpoint_url.clone(),
            api_key,
            limiter: Mutex::new(TokenBucket::new(1.0, 1.0)),
        })
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError> {
        let wait = self.limiter.lock().unwrap().acquire(Instant::now());
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }

        let payload = serde_json::json!({
            "model": request.model_name,
            "modalities": ["text"],
            "messages": [{
                "role": "user",
                "content": [
                    { "type": "text", "text": request.prompt },
                    { "type": "input_audio",
                      "input_audio": { "data": request.wav_base64, "format": "wav" } }
                ]
            }]
        });
        let response = self
            .client
            .post(&self.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(&payload)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout
                } else {
                    TransportError::Connection(e.to_string())
                }
            })?;

        let status = response.status().as_u16();
        let body = response.text().map_err(|e| TransportError::Connection(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Http { status, body: truncate(&body, 300) });
        }
        let json: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| TransportError::BadPayload(e.to_string()))?;
        json["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| TransportError::BadPayload(truncate(&body, 300)))
    }
}

fn truncate(s: &str, n: usize) -> String {
    if s.len() <= n {
        s.to_string()
    } else {
        format!("{}...", &s[..n])
    }
}

/// Backoff schedule for `attempts` retries: base 1 s, doubling, jitter +-20%
/// drawn deterministically from `seed`.
pub fn backoff_delays(attempts: u32, seed: u64) -> Vec<Duration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..attempts)
        .map(|i| {
            let base = 2.0f64.powi(i as i32);
            let jitter = 1.0 + rng.gen_range(-0.2..0.2);
            Duration::from_secs_f64(base * jitter)
        })
        .collect()
}

/// Scans `text` (case-insensitive, word boundaries) for canonical labels and
/// their synonyms; the earliest match in reading order wins; `None` when no
/// emotion is named.
pub fn parse_emotion_label(text: &str, labels: &[EmotionLabel]) -> Option<EmotionLabel> {
    let synonyms: &[(&str, EmotionLabel)] = &[
        ("neutral", EmotionLabel::Neutral),
        ("calm", EmotionLabel::Calm),
        ("happy", EmotionLabel::Happy),
        ("happiness", EmotionLabel::Happy),
        ("sad", EmotionLabel::Sad),
        ("sadness", EmotionLabel::Sad),
        ("angry", EmotionLabel::Angry),
        ("anger", EmotionLabel::Angry),
        ("fear", EmotionLabel::Fear),
        ("fearful", EmotionLabel::Fear),
        ("disgust", EmotionLabel::Disgust),
        ("disgusted", EmotionLabel::Disgust),
        ("surprise", EmotionLabel::Surprise),
        ("surprised", EmotionLabel::Surprise),
        ("pleasant surprise", EmotionLabel::Surprise),
    ];
    let lower = text.to_lowercase();
    let bytes = lower.as_bytes();
    let standalone = |start: usize, len: usize| -> bool {
        let before_ok = start == 0 || !bytes[start - 1].is_ascii_alphabetic();
        let end = start + len;
        let after_ok = end >= bytes.len() || !bytes[end].is_ascii_alphabetic();
        before_ok && after_ok
    };

    let mut best: Option<(usize, usize, EmotionLabel)> = None; // (start, len, label)
    for (pattern, label) in synonyms {
        if !labels.contains(label) {
            continue;
        }
        let mut from = 0usize;
        while let Some(rel) = lower[from..].find(pattern) {
            let start = from + rel;
            if standalone(start, pattern.len()) {
                let better = match best {
                    None => true,
                    Some((bs, bl, _)) => start < bs || (start == bs && pattern.len() > bl),
                };
                if better {
                    best = Some((start, pattern.len(), *label));
                }
                break;
            }
            from = start + 1;
        }
    }
    best.map(|(_, _, label)| label)
}

fn render_prompt(template: &str, labels: &[EmotionLabel]) -> String {
    let list = labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ");
    template.replace("{labels}", &list)
}

fn request_digest(request: &LlmRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.model_name.as_bytes());
    hasher.update([0]);
    hasher.update(request.prompt.as_bytes());
    hasher.update([0]);
    hasher.update(request.wav_base64.as_bytes());
    hex::encode(hasher.finalize())
}

/// Queries the remote attacker: encodes the clip as 16-bit WAV, builds the
/// prompt from the template, retries transient failures with exponential
/// backoff up to `cfg.max_retries` total attempts. Verdict confidence is
/// fixed at 1.0; the remote service returns no calibrated probabilities.
pub fn infer_emotion_remote(
    clip: &AudioClip,
    cfg: &LlmAttackerConfig,
    transport: &dyn Transport,
    labels: &[EmotionLabel],
) -> Result<LlmInference, LlmError> {
    if clip.duration_s() > 60.0 {
        return Err(LlmError::ClipTooLong(clip.duration_s()));
    }
    let mut wav = Vec::new();
    write_wav_to(clip, &mut wav, 16)?;
    let request = LlmRequest {
        model_name: cfg.model_name.clone(),
        prompt: render_prompt(&cfg.prompt_template, labels),
        wav_base64: base64::engine::general_purpose::STANDARD.encode(&wav),
    };
    let digest = request_digest(&request);

    let max_attempts = cfg.max_retries.max(1);
    let delays = backoff_delays(max_attempts, u64::from_le_bytes(
        hex::decode(&digest[..16]).unwrap().try_into().unwrap(),
    ));
    let started = Instant::now();
    let mut last_err: Option<TransportError> = None;
    for attempt in 1..=max_attempts {
        match transport.send(&request) {
            Ok(text) => {
                let parsed = parse_emotion_label(&text, labels);
                let transcript = LlmTranscript {
                    request_digest: digest,
                    raw_response_text: text,
                    parsed_label: parsed,
                    latency_ms: started.elapsed().as_secs_f64() * 1000.0,
                    attempts: attempt,
                };
                let verdict = parsed.map(|label| AttackVerdict {
                    label,
                    confidence: 1.0,
                    probabilities: labels.iter().map(|l| if l == &label { 1.0 } else { 0.0 }).collect(),
                });
                return Ok(LlmInference { verdict, transcript });
            }
            Err(e) if e.is_transient() && attempt < max_attempts => {
                transport.sleep(delays[(attempt - 1) as usize]);
                last_err = Some(e);
            }
            Err(e) if e.is_transient() => {
                return Err(LlmError::RetriesExhausted { attempts: attempt, last: e });
            }
            Err(e) => return Err(LlmError::Transport(e)),
        }
    }
    Err(LlmError::RetriesExhausted { attempts: max_attempts, last: last_err.unwrap() })
}

/// Appends one transcript to a JSON-lines audit file.
pub fn append_transcript(path: &Path, transcript: &LlmTranscript) -> Result<(), LlmError> {
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(transcript).expect("transcript serializes");
    writeln!(file, "{line}")?;
    Ok(())
}
