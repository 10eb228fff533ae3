//! Evaluation engine: structured and randomized pitch/tempo sweeps over a
//! manifest, reversibility trials, and report generation (clean vs
//! transformed accuracy, flip rates, confusion matrices, gender and
//! per-spec breakdowns).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacker_cnn::{predict, AttackVerdict, EmotionLabel, ModelParams, CANONICAL_LABELS};
use crate::audio_io::{downmix_mono, read_wav, AudioClip};
use crate::datasets::{ClipMetadata, Manifest};
use crate::dsp_transform::{apply_transform, dominant_frequency, invert_spec, TransformSpec, WsolaConfig};
use crate::features::{mfcc, MfccConfig};
use crate::llm_attacker::{infer_emotion_remote, LlmAttackerConfig, Transport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("pitch/tempo lists must be non-empty")]
    EmptyGrid,
    #[error("invalid randomized-spec arguments: {0}")]
    BadRandomSpec(String),
    #[error("no attackers configured")]
    NoAttackers,
    #[error("model fingerprint {model} does not match feature config {config}")]
    FingerprintMismatch { model: String, config: String },
    #[error("reversibility trials need a non-identity spec")]
    IdentitySpec,
    #[error("every trial failed; nothing to report")]
    NoSuccessfulTrials,
    #[error("no records to summarize")]
    NoRecords,
    #[error("spec constructed out of range: {0}")]
    Dsp(#[from] crate::dsp_transform::DspError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed results row: {0}")]
    BadRow(String),
}

/// Declarative sweep description; `build_specs` turns it into the concrete
/// transform list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SweepSpec {
    Structured { pitches: Vec<f64>, tempos: Vec<f64>, include_identity: bool },
    Randomized {
        random_count: usize,
        pitch_range: (f64, f64),
        tempo_range: (f64, f64),
        zero_pitch_fraction: f64,
        seed: u64,
        include_identity: bool,
    },
}

impl SweepSpec {
    pub fn include_identity(&self) -> bool {
        match self {
            SweepSpec::Structured { include_identity, .. } => *include_identity,
            SweepSpec::Randomized { include_identity, .. } => *include_identity,
        }
    }

    pub fn build_specs(&self) -> Result<Vec<TransformSpec>, ExperimentError> {
        match self {
            SweepSpec::Structured { pitches, tempos, .. } => structured_grid(pitches, tempos),
            SweepSpec::Randomized { random_count, pitch_range, tempo_range, zero_pitch_fraction, seed, .. } => {
                randomized_specs(*random_count, *seed, *pitch_range, *tempo_range, *zero_pitch_fraction)
            }
        }
    }
}

/// The paper's default 5 x 5 grid.
pub fn default_grid_pitches() -> Vec<f64> {
    vec![-8.0, -4.0, 0.0, 4.0, 8.0]
}

pub fn default_grid_tempos() -> Vec<f64> {
    vec![60.0, 80.0, 100.0, 120.0, 140.0]
}

/// Cartesian product in pitch-major, tempo-minor order.
pub fn structured_grid(pitches: &[f64], tempos: &[f64]) -> Result<Vec<TransformSpec>, ExperimentError> {
    if pitches.is_empty() || tempos.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let mut specs = Vec::with_capacity(pitches.len() * tempos.len());
    for &p in pitches {
        for &t in tempos {
            specs.push(TransformSpec::new(p, t)?);
        }
    }
    Ok(specs)
}

/// Seeded uniform draws: pitch rounded to 0.1 semitone, tempo to integer
/// percent. Exactly round(zero_pitch_fraction * n) rows get pitch pinned to
/// 0.0 (positions chosen by the same rng); other rows redraw if they would
/// round to pitch 0.0, and any row redraws if it would equal the identity
/// spec, so the pinned-zero count and the attack-only property hold exactly.
pub fn randomized_specs(
    n: usize,
    seed: u64,
    pitch_range: (f64, f64),
    tempo_range: (f64, f64),
    zero_pitch_fraction: f64,
) -> Result<Vec<TransformSpec>, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::BadRandomSpec("need at least one spec".into()));
    }
    if !(pitch_range.0 < pitch_range.1) || !(tempo_range.0 < tempo_range.1) {
        return Err(ExperimentError::BadRandomSpec("ranges must be non-empty".into()));
    }
    if !(0.0..=1.0).contains(&zero_pitch_fraction) {
        return Err(ExperimentError::BadRandomSpec("zero_pitch_fraction outside [0, 1]".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_zero = (zero_pitch_fraction * n as f64).round() as usize;
    // choose which rows are pinned to pitch 0.0
    let mut positions: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        positions.swap(i, j);
    }
    let pinned: Vec<bool> = {
        let mut mask = vec![false; n];
        for &p in positions.iter().take(n_zero) {
            mask[p] = true;
        }
        mask
    };

    let mut specs = Vec::with_capacity(n);
    for is_pinned in pinned {
        loop {
            let pitch = if is_pinned {
                0.0
            } else {
                (rng.gen_range(pitch_range.0..pitch_range.1) * 10.0).round() / 10.0
            };
            let tempo = rng.gen_range(tempo_range.0..tempo_range.1).round();
            if !is_pinned && pitch == 0.0 {
                continue; // keep the pinned-zero count exact
            }
            if pitch == 0.0 && tempo == 100.0 {
                continue; // (0, 100) is a baseline, never an attack row
            }
            specs.push(TransformSpec::new(pitch, tempo)?);
            break;
        }
    }
    Ok(specs)
}

/// CNN attacker handle: model plus the feature config it was trained with.
pub struct CnnAttacker<'a> {
    pub params: &'a ModelParams,
    pub mfcc_cfg: MfccConfig,
}

/// LLM attacker handle: config, transport, and the transcript audit file.
pub struct LlmAttackerHandle<'a> {
    pub cfg: &'a LlmAttackerConfig,
    pub transport: &'a dyn Transport,
    pub audit_path: Option<PathBuf>,
}

pub struct Attackers<'a> {
    pub cnn: Option<CnnAttacker<'a>>,
    pub llm: Option<LlmAttackerHandle<'a>>,
}

/// One (clip, spec) evaluation row.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub clip: ClipMetadata,
    pub spec: TransformSpec,
    pub original_emotion: EmotionLabel,
    pub cnn_verdict: Option<AttackVerdict>,
    pub llm_verdict: Option<AttackVerdict>,
    pub flipped_cnn: Option<bool>,
    pub flipped_llm: Option<bool>,
    pub cnn_error: Option<String>,
    pub llm_error: Option<String>,
}

impl TrialRecord {
    pub fn is_identity(&self) -> bool {
        self.spec.is_identity()
    }
}

/// Results-file schema, one row per (clip, spec, attacker).
pub const RESULTS_HEADER: [&str; 12] = [
    "dataset", "actor", "gender", "file", "original_emotion", "pitch", "tempo", "attacker",
    "predicted", "confidence", "flipped", "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub actor: String,
    pub gender: String,
    pub file: String,
    pub original_emotion: EmotionLabel,
    pub pitch: f64,
    pub tempo: f64,
    pub attacker: String,
    pub predicted: Option<EmotionLabel>,
    pub confidence: Option<f64>,
    pub flipped: Option<bool>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_identity(&self) -> bool {
        self.pitch == 0.0 && self.tempo == 100.0
    }
}

fn verdict_to_columns(
    record: &TrialRecord,
    attacker: &str,
    verdict: &Option<AttackVerdict>,
    flipped: Option<bool>,
    error: &Option<String>,
) -> Vec<String> {
    vec![
        record.clip.dataset.to_string(),
        record.clip.actor_id.clone(),
        record.clip.gender.as_str().to_string(),
        record.clip.rel_path.clone(),
        record.original_emotion.to_string(),
        format_num(record.spec.pitch_semitones),
        format_num(record.spec.tempo_percent),
        attacker.to_string(),
        verdict.as_ref().map(|v| v.label.to_string()).unwrap_or_default(),
        verdict.as_ref().map(|v| format_num(v.confidence)).unwrap_or_default(),
        flipped.map(|f| f.to_string()).unwrap_or_default(),
        error.clone().unwrap_or_default(),
    ]
}

/// Shortest-roundtrip decimal keeps replays byte-identical.
fn format_num(v: f64) -> String {
    format!("{v}")
}

/// Writes results rows (after a `#`-prefixed timestamp comment line, the one
/// non-deterministic line in the file).
pub fn write_results_csv(path: &Path, records: &[TrialRecord], attackers_present: (bool, bool)) -> Result<(), ExperimentError> {
    let mut file = std::fs::File::create(path)?;
    let epoch = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(file, "# emomask results v1 generated_at_epoch_s={epoch}")?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(RESULTS_HEADER)?;
    for record in records {
        if attackers_present.0 {
            writer.write_record(verdict_to_columns(record, "cnn", &record.cnn_verdict, record.flipped_cnn, &record.cnn_error))?;
        }
        if attackers_present.1 {
            writer.write_record(verdict_to_columns(record, "llm", &record.llm_verdict, record.flipped_llm, &record.llm_error))?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads a results file back, skipping `#` comment lines.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let text = std::fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(ExperimentError::BadRow(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let get = |i: usize| r.get(i).unwrap_or("").to_string();
        let opt = |s: String| if s.is_empty() { None } else { Some(s) };
        let parse_label = |s: &str| {
            EmotionLabel::parse(s).ok_or_else(|| ExperimentError::BadRow(format!("bad label {s:?}")))
        };
        rows.push(ResultRow {
            dataset: get(0),
            actor: get(1),
            gender: get(2),
            file: get(3),
            original_emotion: parse_label(&get(4))?,
            pitch: get(5).parse().map_err(|_| ExperimentError::BadRow("bad pitch".into()))?,
            tempo: get(6).parse().map_err(|_| ExperimentError::BadRow("bad tempo".into()))?,
            attacker: get(7),
            predicted: opt(get(8)).map(|s| parse_label(&s)).transpose()?,
            confidence: opt(get(9)).map(|s| s.parse().map_err(|_| ExperimentError::BadRow("bad confidence".into()))).transpose()?,
            flipped: opt(get(10)).map(|s| s == "true"),
            error: opt(get(11)),
        });
    }
    Ok(rows)
}

fn cnn_verdict_for(
    clip: &AudioClip,
    cnn: &CnnAttacker,
) -> Result<AttackVerdict, String> {
    let features = mfcc(clip, &cnn.mfcc_cfg).map_err(|e| format!("feature: {e}"))?;
    predict(cnn.params, &features).map_err(|e| format!("predict: {e}"))
}

/// Runs the full sweep: for every clip, an optional identity baseline plus
/// every spec, querying each configured attacker. Per-trial failures become
/// error markers rather than aborting the sweep; results stream to `out_path`
/// in deterministic (clip, spec) order.
pub fn run_sweep(
    manifest: &Manifest,
    specs: &[TransformSpec],
    attackers: &Attackers,
    wsola: &WsolaConfig,
    include_identity: bool,
    out_path: &Path,
) -> Result<Vec<TrialRecord>, ExperimentError> {
    if attackers.cnn.is_none() && attackers.llm.is_none() {
        return Err(ExperimentError::NoAttackers);
    }
    if let Some(cnn) = &attackers.cnn {
        let config_fp = cnn.mfcc_cfg.fingerprint();
        if cnn.params.feature_fingerprint != config_fp {
            return Err(ExperimentError::FingerprintMismatch {
                model: cnn.params.feature_fingerprint.clone(),
                config: config_fp,
            });
        }
    }

    let mut all_specs: Vec<TransformSpec> = Vec::new();
    if include_identity {
        all_specs.push(TransformSpec::identity());
    }
    all_specs.extend_from_slice(specs);

    let trials: Vec<(usize, usize)> = (0..manifest.entries.len())
        .flat_map(|c| (0..all_specs.len()).map(move |s| (c, s)))
        .collect();

    let llm_active = attackers.llm.is_some();
    let run_one = |&(ci, si): &(usize, usize)| -> TrialRecord {
        let meta = &manifest.entries[ci];
        let spec = all_specs[si];
        let mut record = TrialRecord {
            clip: meta.clone(),
            spec,
            original_emotion: meta.emotion,
            cnn_verdict: None,
            llm_verdict: None,
            flipped_cnn: None,
            flipped_llm: None,
            cnn_error: None,
            llm_error: None,
        };
        let audio = read_wav(&manifest.root.join(&meta.rel_path))
            .map_err(|e| format!("io: {e}"))
            .and_then(|(clip, _)| downmix_mono(&clip).map_err(|e| format!("downmix: {e}")))
            .and_then(|clip| apply_transform(&clip, &spec, wsola).map_err(|e| format!("transform: {e}")));
        match audio {
            Ok(transformed) => {
                if let Some(cnn) = &attackers.cnn {
                    match cnn_verdict_for(&transformed, cnn) {
                        Ok(verdict) => {
                            record.flipped_cnn = Some(verdict.label != meta.emotion);
                            record.cnn_verdict = Some(verdict);
                        }
                        Err(e) => record.cnn_error = Some(e),
                    }
                }
                if let Some(llm) = &attackers.llm {
                    let labels = attackers
                        .cnn
                        .as_ref()
                        .map(|c| c.params.label_list.clone())
                        .unwrap_or_else(|| CANONICAL_LABELS.to_vec());
                    match infer_emotion_remote(&transformed, llm.cfg, llm.transport, &labels) {
                        Ok(inference) => {
                            if let Some(path) = &llm.audit_path {
                                let _ = crate::llm_attacker::append_transcript(path, &inference.transcript);
                            }
                            match inference.verdict {
                                Some(verdict) => {
                                    record.flipped_llm = Some(verdict.label != meta.emotion);
                                    record.llm_verdict = Some(verdict);
                                }
                                None => record.llm_error = Some("unparseable".into()),
                            }
                        }
                        Err(e) => record.llm_error = Some(format!("remote: {e}")),
                    }
                }
            }
            Err(e) => {
                if attackers.cnn.is_some() {
                    record.cnn_error = Some(e.clone());
                }
                if llm_active {
                    record.llm_error = Some(e);
                }
            }
        }
        record
    };

    // The LLM transport is rate-limited and ordered; run serial when active.
    let records: Vec<TrialRecord> = if llm_active {
        trials.iter().map(run_one).collect()
    } else {
        trials.par_iter().map(run_one).collect()
    };

    let succeeded = records.iter().any(|r| r.cnn_verdict.is_some() || r.llm_verdict.is_some());
    if !succeeded {
        return Err(ExperimentError::NoSuccessfulTrials);
    }
    write_results_csv(out_path, &records, (attackers.cnn.is_some(), llm_active))?;
    Ok(records)
}

/// Flattens in-memory trial records to result rows for one attacker kind
/// ("cnn" or "llm").
pub fn records_to_rows(records: &[TrialRecord], attacker: &str) -> Vec<ResultRow> {
    records
        .iter()
        .map(|r| {
            let (verdict, flipped, error) = match attacker {
                "llm" => (&r.llm_verdict, r.flipped_llm, &r.llm_error),
                _ => (&r.cnn_verdict, r.flipped_cnn, &r.cnn_error),
            };
            ResultRow {
                dataset: r.clip.dataset.to_string(),
                actor: r.clip.actor_id.clone(),
                gender: r.clip.gender.as_str().to_string(),
                file: r.clip.rel_path.clone(),
                original_emotion: r.original_emotion,
                pitch: r.spec.pitch_semitones,
                tempo: r.spec.tempo_percent,
                attacker: attacker.to_string(),
                predicted: verdict.as_ref().map(|v| v.label),
                confidence: verdict.as_ref().map(|v| v.confidence),
                flipped,
                error: error.clone(),
            }
        })
        .collect()
}

/// One reversibility trial: verdicts on the original, the transformed, and
/// the inverse-recovered audio, plus recovery duration/frequency errors.
#[derive(Debug, Clone)]
pub struct RecoveryTrial {
    pub spec: TransformSpec,
    pub verdict_original: AttackVerdict,
    pub verdict_transformed: AttackVerdict,
    pub verdict_recovered: AttackVerdict,
    pub duration_error: f64,
    pub freq_error: f64,
}

/// Applies `spec`, then its inverse, and measures how well the attacker and
/// the signal recover. The identity spec is rejected.
pub fn reversibility_trial(
    clip: &AudioClip,
    spec: &TransformSpec,
    cnn: &CnnAttacker,
    wsola: &WsolaConfig,
) -> Result<RecoveryTrial, ExperimentError> {
    if spec.is_identity() {
        return Err(ExperimentError::IdentitySpec);
    }
    let transformed = apply_transform(clip, spec, wsola)?;
    let recovered = apply_transform(&transformed, &invert_spec(spec), wsola)?;

    let verdict = |c: &AudioClip| -> Result<AttackVerdict, ExperimentError> {
        cnn_verdict_for(c, cnn).map_err(ExperimentError::BadRow)
    };
    let duration_error = (recovered.duration_s() / clip.duration_s() - 1.0).abs();
    let freq_error = {
        let f0 = dominant_frequency(clip)?;
        let f1 = dominant_frequency(&recovered)?;
        if f0 == 0.0 {
            0.0
        } else {
            (f1 / f0 - 1.0).abs()
        }
    };
    Ok(RecoveryTrial {
        spec: *spec,
        verdict_original: verdict(clip)?,
        verdict_transformed: verdict(&transformed)?,
        verdict_recovered: verdict(&recovered)?,
        duration_error,
        freq_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GenderStats {
    pub flip_rate: f64,
    pub count: usize,
}

/// Aggregate report over one attacker's result rows.
#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub clean_accuracy: Option<f64>,
    pub transformed_accuracy: Option<f64>,
    pub flip_rate: Option<f64>,
    pub clean_trials: usize,
    pub transformed_trials: usize,
    pub error_trials: usize,
    pub confusion_labels: Vec<EmotionLabel>,
    /// rows = original emotion, cols = predicted, non-identity trials only
    pub confusion: Vec<Vec<u64>>,
    pub per_gender: BTreeMap<String, GenderStats>,
    pub per_spec: BTreeMap<String, f64>,
}

/// Tallies one attacker's rows: clean accuracy over identity rows,
/// transformed accuracy / flip rate / confusion over non-identity rows,
/// error rows counted separately and excluded from every rate.
pub fn summarize(rows: &[ResultRow]) -> Result<ReportSummary, ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::NoRecords);
    }
    let error_trials = rows.iter().filter(|r| r.predicted.is_none()).count();
    let valid: Vec<&ResultRow> = rows.iter().filter(|r| r.predicted.is_some()).collect();
    if valid.is_empty() {
        return Err(ExperimentError::NoSuccessfulTrials);
    }

    let mut clean_hits = 0usize;
    let mut clean_total = 0usize;
    let mut transformed_hits = 0usize;
    let mut transformed_total = 0usize;
    let n = CANONICAL_LABELS.len();
    let mut confusion = vec![vec![0u64; n]; n];
    let mut gender_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut spec_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    for row in &valid {
        let predicted = row.predicted.unwrap();
        let hit = predicted == row.original_emotion;
        if row.is_identity() {
            clean_total += 1;
            clean_hits += hit as usize;
            continue;
        }
        transformed_total += 1;
        transformed_hits += hit as usize;
        confusion[row.original_emotion.canonical_index()][predicted.canonical_index()] += 1;
        if row.gender == "male" || row.gender == "female" {
            let slot = gender_counts.entry(row.gender.clone()).or_default();
            slot.0 += (!hit) as usize;
            slot.1 += 1;
        }
        let key = format!("{}/{}", format_num(row.pitch), format_num(row.tempo));
        let slot = spec_counts.entry(key).or_default();
        slot.0 += (!hit) as usize;
        slot.1 += 1;
    }

    let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
    Ok(ReportSummary {
        clean_accuracy: ratio(clean_hits, clean_total),
        transformed_accuracy: ratio(transformed_hits, transformed_total),
        flip_rate: ratio(transformed_total - transformed_hits, transformed_total),
        clean_trials: clean_total,
        transformed_trials: transformed_total,
        error_trials,
        confusion_labels: CANONICAL_LABELS.to_vec(),
        confusion,
        per_gender: gender_counts
            .into_iter()
            .map(|(g, (flips, count))| (g, GenderStats { flip_rate: flips as f64 / count as f64, count }))
            .collect(),
        per_spec: spec_counts
            .into_iter()
            .map(|(k, (flips, count))| (k, flips as f64 / count as f64))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacker_cnn::init_model_with;
    use crate::attacker_cnn::Architecture;
    use crate::audio_io::write_wav;
    use crate::datasets::{parse_tess_path, DatasetKind};
    use crate::test_util::sine_clip;

    #[test]
    fn grid_is_pitch_major_25() {
        let specs = structured_grid(&default_grid_pitches(), &default_grid_tempos()).unwrap();
        assert_eq!(specs.len(), 25);
        assert_eq!(specs[0], TransformSpec::new(-8.0, 60.0).unwrap());
        assert_eq!(specs[24], TransformSpec::new(8.0, 140.0).unwrap());
        assert_eq!(specs[1], TransformSpec::new(-8.0, 80.0).unwrap()); // tempo-minor
        assert_eq!(specs.iter().filter(|s| s.is_identity()).count(), 1);
    }

    #[test]
    fn grid_singleton_identity() {
        let specs = structured_grid(&[0.0], &[100.0]).unwrap();
        assert_eq!(specs, vec![TransformSpec::identity()]);
        assert!(matches!(structured_grid(&[], &[100.0]), Err(ExperimentError::EmptyGrid)));
    }

    #[test]
    fn randomized_specs_deterministic_in_range() {
        let a = randomized_specs(40, 7, (-11.0, 11.0), (60.0, 145.0), 0.3).unwrap();
        let b = randomized_specs(40, 7, (-11.0, 11.0), (60.0, 145.0), 0.3).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!((-11.0..=11.0).contains(&s.pitch_semitones));
            assert!((60.0..=145.0).contains(&s.tempo_percent));
            assert_eq!(s.tempo_percent, s.tempo_percent.round());
            assert_eq!(s.pitch_semitones, (s.pitch_semitones * 10.0).round() / 10.0);
            assert!(!s.is_identity());
        }
        let c = randomized_specs(40, 8, (-11.0, 11.0), (60.0, 145.0), 0.3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn randomized_zero_pitch_count_is_exact() {
        for seed in 0..10u64 {
            let specs = randomized_specs(13, seed, (-11.0, 11.0), (60.0, 145.0), 0.3).unwrap();
            let zeros = specs.iter().filter(|s| s.pitch_semitones == 0.0).count();
            assert_eq!(zeros, 4, "seed {seed}"); // round(0.3 * 13)
        }
    }

    #[test]
    fn sweep_spec_builds_both_modes() {
        let structured = SweepSpec::Structured {
            pitches: default_grid_pitches(),
            tempos: default_grid_tempos(),
            include_identity: true,
        };
        assert_eq!(structured.build_specs().unwrap().len(), 25);
        assert!(structured.include_identity());

        let randomized = SweepSpec::Randomized {
            random_count: 10,
            pitch_range: (-11.0, 11.0),
            tempo_range: (60.0, 145.0),
            zero_pitch_fraction: 0.3,
            seed: 5,
            include_identity: false,
        };
        assert_eq!(randomized.build_specs().unwrap().len(), 10);
        assert!(!randomized.include_identity());
    }

    #[test]
    fn sweep_requires_an_attacker() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tess_fixture(dir.path(), 1);
        let err = run_sweep(
            &manifest,
            &[TransformSpec::new(4.0, 120.0).unwrap()],
            &Attackers { cnn: None, llm: None },
            &WsolaConfig::default(),
            false,
            &dir.path().join("r.csv"),
        )
        .unwrap_err();
        assert!(matches!(err, ExperimentError::NoAttackers));
    }

    #[test]
    fn randomized_rejects_bad_args() {
        assert!(randomized_specs(0, 1, (-1.0, 1.0), (60.0, 100.0), 0.3).is_err());
        assert!(randomized_specs(5, 1, (1.0, -1.0), (60.0, 100.0), 0.3).is_err());
        assert!(randomized_specs(5, 1, (-1.0, 1.0), (60.0, 100.0), 1.5).is_err());
    }

    fn tess_fixture(dir: &Path, n_clips: usize) -> Manifest {
        let emotions = ["angry", "happy", "sad"];
        let mut entries = Vec::new();
        for i in 0..n_clips {
            let e = emotions[i % emotions.len()];
            let name = format!("OAF_w{i:02}_{e}.wav");
            let freq = 250.0 + 150.0 * (i % emotions.len()) as f64;
            write_wav(&sine_clip(freq, 22050, 0.4, 0.6), &dir.join(&name), 16).unwrap();
            entries.push(parse_tess_path(&name).unwrap());
        }
        Manifest::new(dir.to_path_buf(), DatasetKind::Tess, entries).unwrap()
    }

    fn small_model_and_cfg() -> (ModelParams, MfccConfig) {
        let cfg = MfccConfig { frame_len: 512, hop: 256, n_mels: 20, n_mfcc: 13, fixed_frames: 32, ..Default::default() };
        let arch = Architecture {
            input_rows: 13,
            input_cols: 32,
            conv_channels: [8, 8, 8],
            kernels: [5, 5, 3],
            dense_hidden: 8,
        };
        let params = init_model_with(
            &arch,
            &cfg.fingerprint(),
            3,
            &[EmotionLabel::Happy, EmotionLabel::Sad, EmotionLabel::Angry],
        )
        .unwrap();
        (params, cfg)
    }

    #[test]
    fn sweep_counts_order_and_identity_bypass() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tess_fixture(dir.path(), 2);
        let (params, cfg) = small_model_and_cfg();
        let specs = structured_grid(&default_grid_pitches(), &default_grid_tempos()).unwrap();
        let out = dir.path().join("results.csv");
        let attackers = Attackers {
            cnn: Some(CnnAttacker { params: &params, mfcc_cfg: cfg.clone() }),
            llm: None,
        };
        let records = run_sweep(&manifest, &specs, &attackers, &WsolaConfig::default(), true, &out).unwrap();
        assert_eq!(records.len(), 2 * 26); // identity + 25 per clip

        // deterministic (clip, spec) order: identity row first per clip
        assert!(records[0].is_identity());
        assert!(records[26].is_identity());

        // identity verdict equals direct prediction on the untransformed clip
        let meta = &manifest.entries[0];
        let (clip, _) = read_wav(&manifest.root.join(&meta.rel_path)).unwrap();
        let direct = predict(&params, &mfcc(&clip, &cfg).unwrap()).unwrap();
        assert_eq!(records[0].cnn_verdict.as_ref().unwrap(), &direct);

        // csv came out with the pinned header
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert_eq!(lines.next().unwrap(), RESULTS_HEADER.join(","));
        assert_eq!(text.lines().count(), 2 + 52);
    }

    #[test]
    fn sweep_replay_is_byte_identical_after_header() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tess_fixture(dir.path(), 1);
        let (params, cfg) = small_model_and_cfg();
        let specs = vec![TransformSpec::new(4.0, 120.0).unwrap()];
        let attackers = Attackers { cnn: Some(CnnAttacker { params: &params, mfcc_cfg: cfg }), llm: None };
        let out1 = dir.path().join("r1.csv");
        let out2 = dir.path().join("r2.csv");
        run_sweep(&manifest, &specs, &attackers, &WsolaConfig::default(), true, &out1).unwrap();
        run_sweep(&manifest, &specs, &attackers, &WsolaConfig::default(), true, &out2).unwrap();
        let strip = |p: &Path| {
            std::fs::read_to_string(p)
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with('#'))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&out1), strip(&out2));
    }

    #[test]
    fn sweep_records_errors_without_aborting() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tess_fixture(dir.path(), 2);
        // delete one file to force an io error marker
        std::fs::remove_file(dir.path().join(&manifest.entries[0].rel_path)).unwrap();
        let (params, cfg) = small_model_and_cfg();
        let attackers = Attackers { cnn: Some(CnnAttacker { params: &params, mfcc_cfg: cfg }), llm: None };
        let out = dir.path().join("results.csv");
        let records = run_sweep(
            &manifest,
            &[TransformSpec::new(4.0, 120.0).unwrap()],
            &attackers,
            &WsolaConfig::default(),
            false,
            &out,
        )
        .unwrap();
        assert_eq!(records.len(), 2);
        let errored: Vec<_> = records.iter().filter(|r| r.cnn_error.is_some()).collect();
        assert_eq!(errored.len(), 1);
        assert!(errored[0].cnn_error.as_ref().unwrap().starts_with("io:"));
    }

    #[test]
    fn sweep_fingerprint_mismatch_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tess_fixture(dir.path(), 1);
        let (params, _) = small_model_and_cfg();
        let other_cfg = MfccConfig::default(); // fingerprint differs from model's
        let attackers = Attackers { cnn: Some(CnnAttacker { params: &params, mfcc_cfg: other_cfg }), llm: None };
        let err = run_sweep(
            &manifest,
            &[TransformSpec::new(4.0, 120.0).unwrap()],
            &attackers,
            &WsolaConfig::default(),
            false,
            &dir.path().join("r.csv"),
        )
        .unwrap_err();
        assert!(matches!(err, ExperimentError::FingerprintMismatch { .. }));
    }

    #[test]
    fn sweep_with_mock_llm_writes_audit_lines() {
        use crate::llm_attacker::MockTransport;
        let dir = tempfile::tempdir().unwrap();
        let manifest = tess_fixture(dir.path(), 1);
        let (params, cfg) = small_model_and_cfg();
        let transport = MockTransport::new(vec![Ok("sad".into()), Ok("angry".into())]);
        let llm_cfg = LlmAttackerConfig::default();
        let audit = dir.path().join("audit.jsonl");
        let attackers = Attackers {
            cnn: Some(CnnAttacker { params: &params, mfcc_cfg: cfg }),
            llm: Some(LlmAttackerHandle { cfg: &llm_cfg, transport: &transport, audit_path: Some(audit.clone()) }),
        };
        let out = dir.path().join("results.csv");
        let records = run_sweep(
            &manifest,
            &[TransformSpec::new(4.0, 120.0).unwrap()],
            &attackers,
            &WsolaConfig::default(),
            true,
            &out,
        )
        .unwrap();
        assert_eq!(records.len(), 2);
        assert!(records.iter().all(|r| r.llm_verdict.is_some()));
        // exactly one transcript per remote call
        let lines = std::fs::read_to_string(&audit).unwrap().lines().count();
        assert_eq!(lines, 2);
        // llm rows landed in the csv as well
        let rows = read_results_csv(&out).unwrap();
        assert_eq!(rows.iter().filter(|r| r.attacker == "llm").count(), 2);
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn reversibility_rejects_identity_and_recovers() {
        let (params, cfg) = small_model_and_cfg();
        let cnn = CnnAttacker { params: &params, mfcc_cfg: cfg };
        let clip = sine_clip(400.0, 22050, 0.5, 0.7);
        let wsola = WsolaConfig::default();

        assert!(matches!(
            reversibility_trial(&clip, &TransformSpec::identity(), &cnn, &wsola),
            Err(ExperimentError::IdentitySpec)
        ));

        let spec = TransformSpec::new(4.0, 120.0).unwrap();
        let trial = reversibility_trial(&clip, &spec, &cnn, &wsola).unwrap();
        assert!(trial.duration_error < 0.04, "duration error {}", trial.duration_error);
        assert!(trial.freq_error < 0.04, "freq error {}", trial.freq_error);
    }

    #[test]
    fn inverse_tempo_factors_cancel() {
        use crate::dsp_transform::tempo_to_speed;
        let spec = TransformSpec::new(4.0, 120.0).unwrap();
        let inv = invert_spec(&spec);
        let product = tempo_to_speed(spec.tempo_percent).unwrap() * tempo_to_speed(inv.tempo_percent).unwrap();
        assert!((product - 1.0).abs() < 1e-9);
    }

    fn hand_row(pitch: f64, tempo: f64, original: EmotionLabel, predicted: EmotionLabel, gender: &str) -> ResultRow {
        ResultRow {
            dataset: "tess".into(),
            actor: "OAF".into(),
            gender: gender.into(),
            file: "x.wav".into(),
            original_emotion: original,
            pitch,
            tempo,
            attacker: "cnn".into(),
            predicted: Some(predicted),
            confidence: Some(1.0),
            flipped: Some(original != predicted),
            error: None,
        }
    }

    #[test]
    fn summarize_hand_built_four_records() {
        use EmotionLabel::*;
        let rows = vec![
            hand_row(4.0, 120.0, Sad, Sad, "female"),
            hand_row(4.0, 120.0, Sad, Angry, "female"),
            hand_row(-4.0, 80.0, Happy, Happy, "male"),
            hand_row(-4.0, 80.0, Happy, Fear, "male"),
        ];
        let summary = summarize(&rows).unwrap();
        assert_eq!(summary.flip_rate, Some(0.5));
        assert_eq!(summary.transformed_accuracy, Some(0.5));
        assert_eq!(summary.clean_accuracy, None);
        assert_eq!(summary.transformed_trials, 4);
        let c = &summary.confusion;
        assert_eq!(c[Sad.canonical_index()][Sad.canonical_index()], 1);
        assert_eq!(c[Sad.canonical_index()][Angry.canonical_index()], 1);
        assert_eq!(c[Happy.canonical_index()][Happy.canonical_index()], 1);
        assert_eq!(c[Happy.canonical_index()][Fear.canonical_index()], 1);
        let total: u64 = c.iter().flatten().sum();
        assert_eq!(total, 4);
        assert_eq!(summary.per_gender["female"].flip_rate, 0.5);
        assert_eq!(summary.per_gender["male"].count, 2);
        assert_eq!(summary.per_spec["4/120"], 0.5);
    }

    #[test]
    fn summarize_extremes_and_errors() {
        use EmotionLabel::*;
        let all_right = vec![hand_row(4.0, 120.0, Sad, Sad, "female"); 3];
        assert_eq!(summarize(&all_right).unwrap().flip_rate, Some(0.0));

        let all_wrong = vec![hand_row(4.0, 120.0, Sad, Happy, "female"); 3];
        assert_eq!(summarize(&all_wrong).unwrap().flip_rate, Some(1.0));

        let mut with_error = all_right.clone();
        with_error.push(ResultRow { predicted: None, confidence: None, flipped: None, error: Some("io".into()), ..all_right[0].clone() });
        let summary = summarize(&with_error).unwrap();
        assert_eq!(summary.error_trials, 1);
        assert_eq!(summary.transformed_trials, 3);

        assert!(matches!(summarize(&[]), Err(ExperimentError::NoRecords)));
        let only_errors = vec![ResultRow { predicted: None, confidence: None, flipped: None, error: Some("io".into()), ..all_right[0].clone() }];
        assert!(matches!(summarize(&only_errors), Err(ExperimentError::NoSuccessfulTrials)));
    }

    #[test]
    fn gender_partition_counts() {
        use EmotionLabel::*;
        let rows = vec![
            hand_row(4.0, 120.0, Sad, Sad, "female"),
            hand_row(4.0, 120.0, Sad, Angry, "male"),
            hand_row(4.0, 120.0, Sad, Angry, "unknown"),
        ];
        let summary = summarize(&rows).unwrap();
        let gender_total: usize = summary.per_gender.values().map(|g| g.count).sum();
        assert_eq!(gender_total, 2); // unknown excluded
    }

    #[test]
    fn results_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_dir = dir.path().join("clips");
        std::fs::create_dir(&manifest_dir).unwrap();
        let manifest = tess_fixture(&manifest_dir, 2);
        let (params, cfg) = small_model_and_cfg();
        let attackers = Attackers { cnn: Some(CnnAttacker { params: &params, mfcc_cfg: cfg }), llm: None };
        let out = dir.path().join("results.csv");
        let records = run_sweep(
            &manifest,
            &[TransformSpec::new(-4.0, 80.0).unwrap()],
            &attackers,
            &WsolaConfig::default(),
            true,
            &out,
        )
        .unwrap();
        let rows = read_results_csv(&out).unwrap();
        assert_eq!(rows.len(), records.len());
        assert_eq!(records_to_rows(&records, "cnn"), rows);
    }
}
