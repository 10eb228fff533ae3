//! Command-line entry point wiring the whole pipeline: transform files,
//! scan datasets, split manifests, train and run the attacker, sweep, and
//! summarize results. Exit codes: 0 success, 2 usage, 3 i/o, 4 format,
//! 5 remote-service.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attacker_cnn::{self, load_model, predict, save_model, TrainConfig};
use crate::audio_io::{downmix_mono, read_wav, write_wav, AudioError};
use crate::datasets::{self, DatasetKind, Manifest};
use crate::dsp_transform::{apply_transform, invert_spec, DspError, TransformSpec, WsolaConfig};
use crate::experiments::{
    self, default_grid_pitches, default_grid_tempos, read_results_csv, Attackers, CnnAttacker,
    LlmAttackerHandle,
};
use crate::features::{mfcc, FeatureError, MfccConfig};
use crate::llm_attacker::{infer_emotion_remote, HttpTransport, LlmAttackerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;
pub const EXIT_REMOTE: i32 = 5;

#[derive(Parser)]
#[command(name = "emomask", version, about = "Obfuscate emotional speech content and evaluate attackers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a pitch/tempo transform to one WAV file
    Transform(TransformArgs),
    /// Undo a transform: applies the inverse of the given forward spec
    Reverse(ReverseArgs),
    /// Scan a dataset tree into a manifest JSON
    Scan(ScanArgs),
    /// Stratified train/test split of a manifest
    Split(SplitArgs),
    /// Train the CNN attacker from manifests
    Train(TrainArgs),
    /// Classify one WAV file with a trained model (optionally a live LLM)
    Attack(AttackArgs),
    /// Run a structured or randomized transform sweep against attackers
    Sweep(SweepArgs),
    /// Summarize a results CSV into a report JSON
    Report(ReportArgs),
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pitch: f64,
    #[arg(long)]
    tempo: f64,
    #[arg(long, default_value_t = 16)]
    bits: u16,
}

#[derive(Args)]
struct ReverseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// pitch of the FORWARD spec being undone
    #[arg(long, allow_hyphen_values = true)]
    pitch: f64,
    /// tempo of the FORWARD spec being undone
    #[arg(long)]
    tempo: f64,
    #[arg(long, default_value_t = 16)]
    bits: u16,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    #[value(name = "ravdess")]
    Ravdess,
    #[value(name = "crema_d")]
    CremaD,
    #[value(name = "tess")]
    Tess,
}

impl From<DatasetArg> for DatasetKind {
    fn from(value: DatasetArg) -> Self {
        match value {
            DatasetArg::Ravdess => DatasetKind::Ravdess,
            DatasetArg::CremaD => DatasetKind::CremaD,
            DatasetArg::Tess => DatasetKind::Tess,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "test-fraction")]
    test_fraction: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long = "out-train")]
    out_train: PathBuf,
    #[arg(long = "out-test")]
    out_test: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "train-manifest")]
    train_manifest: PathBuf,
    #[arg(long = "val-manifest")]
    val_manifest: PathBuf,
    /// audio root directory manifests are relative to
    #[arg(long)]
    root: PathBuf,
    /// TrainConfig JSON
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "out-model")]
    out_model: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "llm-config")]
    llm_config: Option<PathBuf>,
    /// required to let --llm-config reach the network
    #[arg(long = "live-llm", default_value_t = false)]
    live_llm: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "llm-config")]
    llm_config: Option<PathBuf>,
    #[arg(long = "live-llm", default_value_t = false)]
    live_llm: bool,
    #[arg(long, value_enum)]
    mode: SweepMode,
    /// comma-separated pitch list (structured mode)
    #[arg(long, allow_hyphen_values = true)]
    pitches: Option<String>,
    /// comma-separated tempo list (structured mode)
    #[arg(long)]
    tempos: Option<String>,
    /// number of random specs (random mode)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// comma-separated actor-id filter
    #[arg(long)]
    actors: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// worker threads for CNN trials (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "no-identity", default_value_t = false)]
    no_identity: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Structured,
    Random,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Error with a process exit code attached.
#[derive(Debug)]
struct AppError {
    code: i32,
    message: String,
}

impl AppError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn io(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_IO, message: message.to_string() }
    }

    fn format(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_FORMAT, message: message.to_string() }
    }

    fn remote(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_REMOTE, message: message.to_string() }
    }
}

impl From<AudioError> for AppError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::Io(_) => AppError::io(e),
            _ => AppError::format(e),
        }
    }
}

impl From<DspError> for AppError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::Audio(inner) => inner.into(),
            _ => AppError::format(e),
        }
    }
}

impl From<FeatureError> for AppError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Audio(inner) => inner.into(),
            _ => AppError::format(e),
        }
    }
}

impl From<attacker_cnn::ModelError> for AppError {
    fn from(e: attacker_cnn::ModelError) -> Self {
        match e {
            attacker_cnn::ModelError::Io(_) => AppError::io(e),
            _ => AppError::format(e),
        }
    }
}

impl From<datasets::DatasetError> for AppError {
    fn from(e: datasets::DatasetError) -> Self {
        match e {
            datasets::DatasetError::Io(_) | datasets::DatasetError::UnreadableRoot(..) => AppError::io(e),
            _ => AppError::format(e),
        }
    }
}

impl From<experiments::ExperimentError> for AppError {
    fn from(e: experiments::ExperimentError) -> Self {
        match e {
            experiments::ExperimentError::Io(_) => AppError::io(e),
            _ => AppError::format(e),
        }
    }
}

impl From<crate::llm_attacker::LlmError> for AppError {
    fn from(e: crate::llm_attacker::LlmError) -> Self {
        AppError::remote(e)
    }
}

/// Parses argv (including the program name) and runs one subcommand,
/// returning the process exit code.
pub fn run_cli<I>(argv: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version on stdout with code 0
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command) -> Result<(), AppError> {
    match command {
        Command::Transform(args) => {
            let spec = TransformSpec::new(args.pitch, args.tempo).map_err(|e| AppError::usage(e.to_string()))?;
            transform_file(&args.input, &args.out, &spec, args.bits)
        }
        Command::Reverse(args) => {
            let forward = TransformSpec::new(args.pitch, args.tempo).map_err(|e| AppError::usage(e.to_string()))?;
            transform_file(&args.input, &args.out, &invert_spec(&forward), args.bits)
        }
        Command::Scan(args) => {
            let outcome = datasets::scan_dataset(&args.root, args.dataset.into())?;
            datasets::save_manifest(&outcome.manifest, &args.out)?;
            let skipped_path = sibling_with_suffix(&args.out, ".skipped.jsonl");
            datasets::save_skipped(&outcome.skipped, &skipped_path)?;
            println!(
                "scanned {} clips ({} skipped) -> {}",
                outcome.manifest.len(),
                outcome.skipped.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::Split(args) => {
            let manifest = datasets::load_manifest(&args.manifest)?;
            let (train, test) = datasets::split_manifest(&manifest, args.test_fraction, args.seed)?;
            datasets::save_manifest(&train, &args.out_train)?;
            datasets::save_manifest(&test, &args.out_test)?;
            println!("split {} -> {} train / {} test", manifest.len(), train.len(), test.len());
            Ok(())
        }
        Command::Train(args) => run_train(args),
        Command::Attack(args) => run_attack(args),
        Command::Sweep(args) => run_sweep_cmd(args),
        Command::Report(args) => {
            let rows = read_results_csv(&args.results)?;
            let mut by_attacker: std::collections::BTreeMap<String, Vec<experiments::ResultRow>> =
                Default::default();
            for row in rows {
                by_attacker.entry(row.attacker.clone()).or_default().push(row);
            }
            if by_attacker.is_empty() {
                return Err(AppError::format("results file holds no rows"));
            }
            let mut summaries = std::collections::BTreeMap::new();
            for (attacker, rows) in by_attacker {
                summaries.insert(attacker, experiments::summarize(&rows)?);
            }
            let json = serde_json::to_string_pretty(&summaries).expect("summary serializes");
            std::fs::write(&args.out, json).map_err(AppError::io)?;
            println!("report -> {}", args.out.display());
            Ok(())
        }
    }
}

fn sibling_with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.push_str(suffix);
    path.with_file_name(name)
}

fn transform_file(input: &Path, out: &Path, spec: &TransformSpec, bits: u16) -> Result<(), AppError> {
    let (clip, _) = read_wav(input)?;
    let mono = downmix_mono(&clip)?;
    let transformed = apply_transform(&mono, spec, &WsolaConfig::default())?;
    write_wav(&transformed, out, bits)?;
    Ok(())
}

/// Reads every manifest entry and extracts features with the default MFCC
/// config; per-clip failures are fatal here (training needs the full set).
fn featurize_manifest(
    manifest: &Manifest,
    root: &Path,
    cfg: &MfccConfig,
) -> Result<Vec<(crate::features::FeatureMatrix, attacker_cnn::EmotionLabel)>, AppError> {
    let mut out = Vec::with_capacity(manifest.len());
    for entry in &manifest.entries {
        let (clip, _) = read_wav(&root.join(&entry.rel_path))?;
        let mono = downmix_mono(&clip)?;
        out.push((mfcc(&mono, cfg)?, entry.emotion));
    }
    Ok(out)
}

fn run_train(args: TrainArgs) -> Result<(), AppError> {
    let train_manifest = datasets::load_manifest(&args.train_manifest)?;
    let val_manifest = datasets::load_manifest(&args.val_manifest)?;
    let config_text = std::fs::read_to_string(&args.config).map_err(AppError::io)?;
    let train_cfg: TrainConfig =
        serde_json::from_str(&config_text).map_err(|e| AppError::format(format!("train config: {e}")))?;

    let mfcc_cfg = MfccConfig::default();
    eprintln!("extracting features for {} train / {} val clips", train_manifest.len(), val_manifest.len());
    let train_set = featurize_manifest(&train_manifest, &args.root, &mfcc_cfg)?;
    let val_set = featurize_manifest(&val_manifest, &args.root, &mfcc_cfg)?;

    let (params, history) = attacker_cnn::train(&train_set, &val_set, &train_cfg, &mfcc_cfg.fingerprint())?;
    for epoch in &history {
        println!(
            "epoch {:>3}: train_loss {:.4}  val_accuracy {:.4}",
            epoch.epoch, epoch.train_loss, epoch.val_accuracy
        );
    }
    save_model(&params, &args.out_model)?;
    println!("model -> {}", args.out_model.display());
    Ok(())
}

fn load_llm_config(path: &Path) -> Result<LlmAttackerConfig, AppError> {
    let text = std::fs::read_to_string(path).map_err(AppError::io)?;
    serde_json::from_str(&text).map_err(|e| AppError::format(format!("llm config: {e}")))
}

fn run_attack(args: AttackArgs) -> Result<(), AppError> {
    let params = load_model(&args.model)?;
    let (clip, _) = read_wav(&args.input)?;
    let mono = downmix_mono(&clip)?;
    let mfcc_cfg = MfccConfig::default();
    if mfcc_cfg.fingerprint() != params.feature_fingerprint {
        return Err(AppError::format("model was trained with a different feature config"));
    }
    let verdict = predict(&params, &mfcc(&mono, &mfcc_cfg)?)?;
    let mut output = serde_json::json!({ "cnn": verdict });

    if let Some(config_path) = &args.llm_config {
        if !args.live_llm {
            return Err(AppError::usage("--llm-config requires --live-llm to reach the network"));
        }
        let llm_cfg = load_llm_config(config_path)?;
        let transport = HttpTransport::from_config(&llm_cfg)?;
        let inference = infer_emotion_remote(&mono, &llm_cfg, &transport, &params.label_list)?;
        output["llm"] = serde_json::json!({
            "verdict": inference.verdict,
            "transcript": inference.transcript,
        });
    }
    println!("{}", serde_json::to_string_pretty(&output).expect("verdict serializes"));
    Ok(())
}

fn parse_float_list(text: &str, flag: &str) -> Result<Vec<f64>, AppError> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| AppError::usage(format!("bad {flag} value {t:?}"))))
        .collect()
}

fn run_sweep_cmd(args: SweepArgs) -> Result<(), AppError> {
    let manifest = datasets::load_manifest(&args.manifest)?;
    let manifest = Manifest::new(args.root.clone(), manifest.dataset, manifest.entries)?;
    let manifest = match &args.actors {
        Some(list) => {
            let actors: Vec<String> = list.split(',').map(|a| a.trim().to_string()).collect();
            manifest.filter_actors(&actors)?
        }
        None => manifest,
    };
    if manifest.is_empty() {
        return Err(AppError::usage("manifest selection is empty"));
    }

    let sweep_spec = match args.mode {
        SweepMode::Structured => experiments::SweepSpec::Structured {
            pitches: match &args.pitches {
                Some(p) => parse_float_list(p, "--pitches")?,
                None => default_grid_pitches(),
            },
            tempos: match &args.tempos {
                Some(t) => parse_float_list(t, "--tempos")?,
                None => default_grid_tempos(),
            },
            include_identity: !args.no_identity,
        },
        SweepMode::Random => experiments::SweepSpec::Randomized {
            random_count: args.n.ok_or_else(|| AppError::usage("random mode requires --n"))?,
            pitch_range: (-11.0, 11.0),
            tempo_range: (60.0, 145.0),
            zero_pitch_fraction: 0.3,
            seed: args.seed.ok_or_else(|| AppError::usage("random mode requires --seed"))?,
            include_identity: !args.no_identity,
        },
    };
    let specs = sweep_spec.build_specs()?;

    let params = load_model(&args.model)?;
    let mfcc_cfg = MfccConfig::default();
    let cnn = CnnAttacker { params: &params, mfcc_cfg };

    let llm_cfg = match &args.llm_config {
        Some(path) => {
            if !args.live_llm {
                return Err(AppError::usage("--llm-config requires --live-llm to reach the network"));
            }
            Some(load_llm_config(path)?)
        }
        None => None,
    };
    let transport = match &llm_cfg {
        Some(cfg) => Some(HttpTransport::from_config(cfg)?),
        None => None,
    };
    let llm = llm_cfg.as_ref().map(|cfg| LlmAttackerHandle {
        cfg,
        transport: transport.as_ref().unwrap() as &dyn crate::llm_attacker::Transport,
        audit_path: Some(sibling_with_suffix(&args.out, ".transcripts.jsonl")),
    });
    let attackers = Attackers { cnn: Some(cnn), llm };

    let sweep = || {
        experiments::run_sweep(
            &manifest,
            &specs,
            &attackers,
            &WsolaConfig::default(),
            sweep_spec.include_identity(),
            &args.out,
        )
    };
    let records = match args.workers {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| AppError::format(e.to_string()))?
            .install(sweep),
        None => sweep(),
    }?;
    println!("{} trial records -> {}", records.len(), args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        run_cli(args.iter().map(|s| s.to_string()))
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(&["emomask", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(&["emomask", "transform", "--bogus-flag", "1"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(&["emomask", "--help"]), EXIT_OK);
    }

    #[test]
    fn attack_missing_file_maps_to_io_exit() {
        let dir = tempfile::tempdir().unwrap();
        let model_path = dir.path().join("m.emoc");
        let params = attacker_cnn::init_model(
            1,
            &[attacker_cnn::EmotionLabel::Happy, attacker_cnn::EmotionLabel::Sad],
        )
        .unwrap();
        save_model(&params, &model_path).unwrap();
        let code = run(&[
            "emomask",
            "attack",
            "--model",
            model_path.to_str().unwrap(),
            "--in",
            "/nonexistent/missing.wav",
        ]);
        assert_eq!(code, EXIT_IO);
    }

    #[test]
    fn attack_bad_model_maps_to_format_exit() {
        let dir = tempfile::tempdir().unwrap();
        let model_path = dir.path().join("m.emoc");
        std::fs::write(&model_path, b"not a model").unwrap();
        let wav_path = dir.path().join("a.wav");
        write_wav(&crate::test_util::sine_clip(440.0, 22050, 0.3, 0.5), &wav_path, 16).unwrap();
        let code = run(&[
            "emomask",
            "attack",
            "--model",
            model_path.to_str().unwrap(),
            "--in",
            wav_path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_FORMAT);
    }

    #[test]
    fn llm_config_without_live_flag_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let model_path = dir.path().join("m.emoc");
        let params = attacker_cnn::init_model(
            1,
            &[attacker_cnn::EmotionLabel::Happy, attacker_cnn::EmotionLabel::Sad],
        )
        .unwrap();
        save_model(&params, &model_path).unwrap();
        let wav_path = dir.path().join("a.wav");
        write_wav(&crate::test_util::sine_clip(440.0, 22050, 0.3, 0.5), &wav_path, 16).unwrap();
        let llm_path = dir.path().join("llm.json");
        std::fs::write(&llm_path, "{}").unwrap();
        let code = run(&[
            "emomask",
            "attack",
            "--model",
            model_path.to_str().unwrap(),
            "--in",
            wav_path.to_str().unwrap(),
            "--llm-config",
            llm_path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_USAGE);
    }
}
