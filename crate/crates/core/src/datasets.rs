//! Corpus ingestion: filename-convention parsers for RAVDESS, CREMA-D and
//! TESS, recursive manifest scans with a skipped-file report, label
//! canonicalization, and seeded stratified splits.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::attacker_cnn::{EmotionLabel, CANONICAL_LABELS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed filename {0:?}: {1}")]
    MalformedName(String, String),
    #[error("unknown emotion code {code:?} in {name:?}")]
    UnknownEmotionCode { name: String, code: String },
    #[error("unknown intensity code {code:?} in {name:?}")]
    UnknownIntensityCode { name: String, code: String },
    #[error("unknown speaker {speaker:?} in {name:?}")]
    UnknownSpeaker { name: String, speaker: String },
    #[error("file {0:?} is not speech audio (RAVDESS modality/channel prefix must be 03-01)")]
    NotSpeechAudio(String),
    #[error("cannot read dataset root {0:?}: {1}")]
    UnreadableRoot(PathBuf, String),
    #[error("no parseable .wav files under {0:?}")]
    NoFiles(PathBuf),
    #[error("test fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("class {label} has {size} entries; need at least 2 to put one on each side")]
    ClassTooSmall { label: EmotionLabel, size: usize },
    #[error("manifest mixes datasets ({0} and {1})")]
    MixedDatasets(DatasetKind, DatasetKind),
    #[error("duplicate manifest path {0:?}")]
    DuplicatePath(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Ravdess,
    CremaD,
    Tess,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Ravdess => "ravdess",
            DatasetKind::CremaD => "crema_d",
            DatasetKind::Tess => "tess",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ravdess" => Some(DatasetKind::Ravdess),
            "crema_d" => Some(DatasetKind::CremaD),
            "tess" => Some(DatasetKind::Tess),
            _ => None,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Normal,
    Strong,
    Low,
    Unspecified,
}

/// One clip's canonicalized metadata; dataset-specific raw codes never leak
/// past this module.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipMetadata {
    pub dataset: DatasetKind,
    pub actor_id: String,
    pub gender: Gender,
    pub emotion: EmotionLabel,
    pub intensity: Option<Intensity>,
    pub rel_path: String,
}

/// Homogeneous clip index rooted at `root`, entries sorted by path.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub dataset: DatasetKind,
    pub entries: Vec<ClipMetadata>,
    pub dataset_counts: BTreeMap<DatasetKind, usize>,
}

impl Manifest {
    pub fn new(root: PathBuf, dataset: DatasetKind, mut entries: Vec<ClipMetadata>) -> Result<Self, DatasetError> {
        for e in &entries {
            if e.dataset != dataset {
                return Err(DatasetError::MixedDatasets(dataset, e.dataset));
            }
        }
        entries.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
        for pair in entries.windows(2) {
            if pair[0].rel_path == pair[1].rel_path {
                return Err(DatasetError::DuplicatePath(pair[0].rel_path.clone()));
            }
        }
        let mut dataset_counts = BTreeMap::new();
        dataset_counts.insert(dataset, entries.len());
        Ok(Self { root, dataset, entries, dataset_counts })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Labels present, in canonical order.
    pub fn active_labels(&self) -> Vec<EmotionLabel> {
        CANONICAL_LABELS
            .iter()
            .copied()
            .filter(|l| self.entries.iter().any(|e| e.emotion == *l))
            .collect()
    }

    /// Keeps only entries whose actor id is in `actors`.
    pub fn filter_actors(&self, actors: &[String]) -> Result<Manifest, DatasetError> {
        let entries: Vec<ClipMetadata> =
            self.entries.iter().filter(|e| actors.contains(&e.actor_id)).cloned().collect();
        Manifest::new(self.root.clone(), self.dataset, entries)
    }
}

/// A walked file the scanner could not parse, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

/// Scan result: the manifest plus the skipped-file report.
#[derive(Debug)]
pub struct ScanOutcome {
    pub manifest: Manifest,
    pub skipped: Vec<SkippedFile>,
}

/// RAVDESS speech filenames: seven dash-separated two-digit fields,
/// modality-channel-emotion-intensity-statement-repetition-actor. Only
/// audio-only speech files (03-01-...) are accepted; odd actors are male,
/// even are female.
pub fn parse_ravdess_filename(name: &str) -> Result<ClipMetadata, DatasetError> {
    let stem = name
        .strip_suffix(".wav")
        .ok_or_else(|| DatasetError::MalformedName(name.into(), "missing .wav suffix".into()))?;
    let fields: Vec<&str> = stem.split('-').collect();
    if fields.len() != 7 || fields.iter().any(|f| f.len() != 2 || !f.bytes().all(|b| b.is_ascii_digit())) {
        return Err(DatasetError::MalformedName(
            name.into(),
            "expected 7 dash-separated two-digit fields".into(),
        ));
    }
    if fields[0] != "03" || fields[1] != "01" {
        return Err(DatasetError::NotSpeechAudio(name.into()));
    }
    let emotion = match fields[2] {
        "01" => EmotionLabel::Neutral,
        "02" => EmotionLabel::Calm,
        "03" => EmotionLabel::Happy,
        "04" => EmotionLabel::Sad,
        "05" => EmotionLabel::Angry,
        "06" => EmotionLabel::Fear,
        "07" => EmotionLabel::Disgust,
        "08" => EmotionLabel::Surprise,
        code => return Err(DatasetError::UnknownEmotionCode { name: name.into(), code: code.into() }),
    };
    let intensity = match fields[3] {
        "01" => Intensity::Normal,
        "02" => Intensity::Strong,
        code => return Err(DatasetError::UnknownIntensityCode { name: name.into(), code: code.into() }),
    };
    let actor: u32 = fields[6].parse().unwrap();
    let gender = if actor % 2 == 1 { Gender::Male } else { Gender::Female };
    Ok(ClipMetadata {
        dataset: DatasetKind::Ravdess,
        actor_id: fields[6].to_string(),
        gender,
        emotion,
        intensity: Some(intensity),
        rel_path: name.to_string(),
    })
}

/// Optional CREMA-D demographics sidecar (ActorID,...,Sex,...).
#[derive(Debug, Default, Clone)]
pub struct Demographics {
    by_actor: BTreeMap<String, Gender>,
}

impl Demographics {
    /// Parses the corpus's VideoDemographics.csv (columns ActorID and Sex).
    pub fn from_csv(path: &Path) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| {
            DatasetError::UnreadableRoot(path.to_path_buf(), e.to_string())
        })?;
        let headers = reader.headers().map_err(|e| DatasetError::UnreadableRoot(path.to_path_buf(), e.to_string()))?.clone();
        let actor_col = headers.iter().position(|h| h.trim().eq_ignore_ascii_case("actorid")).unwrap_or(0);
        let sex_col = headers.iter().position(|h| h.trim().eq_ignore_ascii_case("sex")).unwrap_or(2);
        let mut by_actor = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| DatasetError::UnreadableRoot(path.to_path_buf(), e.to_string()))?;
            let (Some(actor), Some(sex)) = (record.get(actor_col), record.get(sex_col)) else {
                continue;
            };
            let gender = match sex.trim().to_ascii_lowercase().as_str() {
                "male" => Gender::Male,
                "female" => Gender::Female,
                _ => Gender::Unknown,
            };
            by_actor.insert(actor.trim().to_string(), gender);
        }
        Ok(Self { by_actor })
    }

    fn lookup(&self, actor: &str) -> Option<Gender> {
        self.by_actor.get(actor).copied()
    }
}

/// CREMA-D filenames: ACTORID_SENTENCE_EMO_LEVEL.wav. Gender comes from the
/// demographics sidecar when available; without it only the two actors with
/// documented gender get defaults (1001 male, 1002 female) and everyone else
/// is unknown. Gender is never guessed from id parity here.
pub fn parse_cremad_filename(name: &str) -> Result<ClipMetadata, DatasetError> {
    parse_cremad_filename_with(name, None)
}

pub fn parse_cremad_filename_with(
    name: &str,
    demographics: Option<&Demographics>,
) -> Result<ClipMetadata, DatasetError> {
    let stem = name
        .strip_suffix(".wav")
        .ok_or_else(|| DatasetError::MalformedName(name.into(), "missing .wav suffix".into()))?;
    let fields: Vec<&str> = stem.split('_').collect();
    if fields.len() != 4 {
        return Err(DatasetError::MalformedName(
            name.into(),
            "expected ACTORID_SENTENCE_EMO_LEVEL".into(),
        ));
    }
    let emotion = match fields[2] {
        "ANG" => EmotionLabel::Angry,
        "DIS" => EmotionLabel::Disgust,
        "FEA" => EmotionLabel::Fear,
        "HAP" => EmotionLabel::Happy,
        "NEU" => EmotionLabel::Neutral,
        "SAD" => EmotionLabel::Sad,
        code => return Err(DatasetError::UnknownEmotionCode { name: name.into(), code: code.into() }),
    };
    let intensity = match fields[3] {
        "LO" => Intensity::Low,
        "MD" => Intensity::Normal,
        "HI" => Intensity::Strong,
        "XX" => Intensity::Unspecified,
        code => return Err(DatasetError::UnknownIntensityCode { name: name.into(), code: code.into() }),
    };
    let actor = fields[0].to_string();
    let gender = demographics
        .and_then(|d| d.lookup(&actor))
        .unwrap_or(match actor.as_str() {
            "1001" => Gender::Male,
            "1002" => Gender::Female,
            _ => Gender::Unknown,
        });
    Ok(ClipMetadata {
        dataset: DatasetKind::CremaD,
        actor_id: actor,
        gender,
        emotion,
        intensity: Some(intensity),
        rel_path: name.to_string(),
    })
}

/// TESS paths: SPEAKER_word_emotion.wav with SPEAKER in {OAF, YAF}; both
/// actresses are female.
pub fn parse_tess_path(path: &str) -> Result<ClipMetadata, DatasetError> {
    let name = path.rsplit(['/', '\\']).next().unwrap_or(path);
    let stem = name
        .strip_suffix(".wav")
        .ok_or_else(|| DatasetError::MalformedName(name.into(), "missing .wav suffix".into()))?;
    let first = stem
        .find('_')
        .ok_or_else(|| DatasetError::MalformedName(name.into(), "expected SPEAKER_word_emotion".into()))?;
    let last = stem.rfind('_').unwrap();
    if first == last {
        return Err(DatasetError::MalformedName(name.into(), "expected SPEAKER_word_emotion".into()));
    }
    let speaker = &stem[..first];
    if speaker != "OAF" && speaker != "YAF" {
        return Err(DatasetError::UnknownSpeaker { name: name.into(), speaker: speaker.into() });
    }
    let emotion = match stem[last + 1..].to_ascii_lowercase().as_str() {
        "angry" => EmotionLabel::Angry,
        "disgust" => EmotionLabel::Disgust,
        "fear" => EmotionLabel::Fear,
        "happy" => EmotionLabel::Happy,
        "ps" => EmotionLabel::Surprise,
        "sad" => EmotionLabel::Sad,
        "neutral" => EmotionLabel::Neutral,
        code => return Err(DatasetError::UnknownEmotionCode { name: name.into(), code: code.into() }),
    };
    Ok(ClipMetadata {
        dataset: DatasetKind::Tess,
        actor_id: speaker.to_string(),
        gender: Gender::Female,
        emotion,
        intensity: None,
        rel_path: name.to_string(),
    })
}

/// Recursively walks `root`, parsing every .wav with the dataset's parser.
/// Unparseable files land in the skipped report; the scan fails only on an
/// unreadable root or zero parseable files. For CREMA-D a
/// VideoDemographics.csv directly under the root is used when present.
pub fn scan_dataset(root: &Path, kind: DatasetKind) -> Result<ScanOutcome, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::UnreadableRoot(root.to_path_buf(), "not a readable directory".into()));
    }
    let demographics = if kind == DatasetKind::CremaD {
        let sidecar = root.join("VideoDemographics.csv");
        if sidecar.is_file() {
            Some(Demographics::from_csv(&sidecar)?)
        } else {
            None
        }
    } else {
        None
    };

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
        let entry = entry.map_err(|e| DatasetError::UnreadableRoot(root.to_path_buf(), e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if !name.to_ascii_lowercase().ends_with(".wav") {
            continue;
        }
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        let parsed = match kind {
            DatasetKind::Ravdess => parse_ravdess_filename(name),
            DatasetKind::CremaD => parse_cremad_filename_with(name, demographics.as_ref()),
            DatasetKind::Tess => parse_tess_path(name),
        };
        match parsed {
            Ok(mut meta) => {
                meta.rel_path = rel;
                entries.push(meta);
            }
            Err(e) => skipped.push(SkippedFile { path: rel, reason: e.to_string() }),
        }
    }
    if entries.is_empty() {
        return Err(DatasetError::NoFiles(root.to_path_buf()));
    }
    let manifest = Manifest::new(root.to_path_buf(), kind, entries)?;
    Ok(ScanOutcome { manifest, skipped })
}

/// Stratified-by-emotion split with a seeded shuffle. Per-class test counts
/// are round(fraction * class_size), clamped so both sides keep at least one
/// entry; classes smaller than 2 are an error.
pub fn split_manifest(
    manifest: &Manifest,
    test_fraction: f64,
    seed: u64,
) -> Result<(Manifest, Manifest), DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::BadFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in CANONICAL_LABELS {
        let mut class: Vec<&ClipMetadata> =
            manifest.entries.iter().filter(|e| e.emotion == label).collect();
        if class.is_empty() {
            continue;
        }
        if class.len() < 2 {
            return Err(DatasetError::ClassTooSmall { label, size: class.len() });
        }
        for i in (1..class.len()).rev() {
            let j = rng.gen_range(0..=i);
            class.swap(i, j);
        }
        let n_test = ((test_fraction * class.len() as f64).round() as usize).clamp(1, class.len() - 1);
        for (i, e) in class.into_iter().enumerate() {
            if i < n_test {
                test.push(e.clone());
            } else {
                train.push(e.clone());
            }
        }
    }
    Ok((
        Manifest::new(manifest.root.clone(), manifest.dataset, train)?,
        Manifest::new(manifest.root.clone(), manifest.dataset, test)?,
    ))
}

// --- persistence (wire formats) ---

#[derive(Serialize, Deserialize)]
struct ManifestEntryFile {
    path: String,
    actor: String,
    gender: Gender,
    emotion: EmotionLabel,
    intensity: Option<Intensity>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    root: String,
    dataset: DatasetKind,
    entries: Vec<ManifestEntryFile>,
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), DatasetError> {
    let file = ManifestFile {
        root: manifest.root.to_string_lossy().into_owned(),
        dataset: manifest.dataset,
        entries: manifest
            .entries
            .iter()
            .map(|e| ManifestEntryFile {
                path: e.rel_path.clone(),
                actor: e.actor_id.clone(),
                gender: e.gender,
                emotion: e.emotion,
                intensity: e.intensity,
            })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let file: ManifestFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let entries = file
        .entries
        .into_iter()
        .map(|e| ClipMetadata {
            dataset: file.dataset,
            actor_id: e.actor,
            gender: e.gender,
            emotion: e.emotion,
            intensity: e.intensity,
            rel_path: e.path,
        })
        .collect();
    Manifest::new(PathBuf::from(file.root), file.dataset, entries)
}

/// Writes the scan's skipped-file report as JSON lines.
pub fn save_skipped(skipped: &[SkippedFile], path: &Path) -> Result<(), DatasetError> {
    use std::io::Write;
    let mut out = std::fs::File::create(path)?;
    for s in skipped {
        writeln!(out, "{}", serde_json::to_string(s)?)?;
    }
    Ok(())
}
