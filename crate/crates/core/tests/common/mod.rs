#![allow(dead_code)] // each test binary uses a different subset of this module

//! Support code for the integration suites: a deterministic TESS-shaped
//! synthetic corpus (each emotion carries a distinct harmonic signature so
//! the attacker has something real to learn), official-format filename
//! universes, and an independent direct-DFT frequency oracle.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use emomask::audio_io::{write_wav, AudioClip};

pub const TESS_TOKENS: [&str; 7] = ["angry", "disgust", "fear", "happy", "neutral", "ps", "sad"];
pub const TESS_ACTORS: [&str; 2] = ["OAF", "YAF"];
pub const TESS_WORDS: usize = 200;
pub const SYNTH_RATE: u32 = 22050;

/// Deterministic synthetic clip for (actor, word, emotion): a three-harmonic
/// tone whose fundamental encodes the emotion (5 semitones between classes,
/// +-1 semitone per-word jitter), with actor-specific harmonic balance, a
/// half-sine envelope, and light noise.
pub fn synth_tess_clip(actor: &str, word: usize, emo_idx: usize) -> AudioClip {
    let actor_code: u64 = actor.bytes().map(u64::from).sum();
    let seed = (emo_idx as u64) << 40 | (word as u64) << 16 | actor_code;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let base = 180.0 * (5.0 * emo_idx as f64 / 12.0).exp2();
    let f0 = base * (rng.gen_range(-1.0..1.0) / 12.0f64).exp2();
    let duration = rng.gen_range(0.55..0.70);
    let n = (duration * SYNTH_RATE as f64).round() as usize;
    let (h2, h3) = if actor == "OAF" { (0.45, 0.30) } else { (0.60, 0.18) };
    let (p2, p3) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / SYNTH_RATE as f64;
        let w = 2.0 * PI * f0 * t;
        let tone = w.sin() + h2 * (2.0 * w + p2).sin() + h3 * (3.0 * w + p3).sin();
        let envelope = (PI * i as f64 / n as f64).sin();
        let noise = 0.01 * rng.gen_range(-1.0f64..1.0);
        samples.push(0.35 * envelope * tone + noise);
    }
    AudioClip::mono(samples, SYNTH_RATE).unwrap()
}

/// Writes the full 2 actors x 200 words x 7 emotions = 2800-clip corpus in
/// the official TESS layout (one directory per actor/emotion).
pub fn generate_tess_corpus(root: &Path) {
    let jobs: Vec<(usize, usize, usize)> = (0..TESS_ACTORS.len())
        .flat_map(|a| (0..TESS_TOKENS.len()).flat_map(move |e| (0..TESS_WORDS).map(move |w| (a, e, w))))
        .collect();
    for (a, e, _) in jobs.iter().filter(|&&(_, _, w)| w == 0) {
        std::fs::create_dir_all(root.join(format!("{}_{}", TESS_ACTORS[*a], TESS_TOKENS[*e]))).unwrap();
    }
    jobs.par_iter().for_each(|&(a, e, w)| {
        let actor = TESS_ACTORS[a];
        let token = TESS_TOKENS[e];
        let clip = synth_tess_clip(actor, w, e);
        let path = root.join(format!("{actor}_{token}/{actor}_w{w:03}_{token}.wav"));
        write_wav(&clip, &path, 16).unwrap();
    });
}

/// The complete official RAVDESS speech-filename universe: 24 actors x
/// ((neutral x 1 intensity) + 7 emotions x 2 intensities) x 2 statements x
/// 2 repetitions = 1440 names.
pub fn ravdess_speech_names() -> Vec<String> {
    let mut names = Vec::with_capacity(1440);
    for actor in 1..=24u32 {
        for emotion in 1..=8u32 {
            let intensities: &[u32] = if emotion == 1 { &[1] } else { &[1, 2] };
            for &intensity in intensities {
                for statement in 1..=2u32 {
                    for repetition in 1..=2u32 {
                        names.push(format!(
                            "03-01-{emotion:02}-{intensity:02}-{statement:02}-{repetition:02}-{actor:02}.wav"
                        ));
                    }
                }
            }
        }
    }
    names
}

/// Direct-DFT peak frequency over [f_lo, f_hi] with a Hann window; the
/// independent oracle for pitch measurements.
pub fn dft_peak_frequency(samples: &[f64], rate: u32, f_lo: f64, f_hi: f64) -> f64 {
    let n = samples.len();
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let steps = 800;
    let mut best = (f_lo, f64::MIN);
    for s in 0..=steps {
        let f = f_lo + (f_hi - f_lo) * s as f64 / steps as f64;
        let w = 2.0 * PI * f / rate as f64;
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for i in 0..n {
            let v = samples[i] * window[i];
            let ang = w * i as f64;
            re += v * ang.cos();
            im -= v * ang.sin();
        }
        let mag = re * re + im * im;
        if mag > best.1 {
            best = (f, mag);
        }
    }
    best.0
}
