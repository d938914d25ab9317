//! Extraction, training and conversion over files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use prosovc_core::augment::{expand_manifest, time_stretch, SpeedFactor};
use prosovc_core::corpus::{Manifest, Split, Utterance};
use prosovc_core::dsp::{assemble_acoustic, track_pitch_with, AcousticFeatures, Analyzer, MelSpectrogram, PitchTrack};
use prosovc_core::models::{ConversionModel, ModelInputs, StepStats, Trainer, TrainingExample};
use prosovc_core::pitchstats::{convert_f0, estimate_stats, PitchStats, MIN_VOICED_FRAMES};
use prosovc_core::ppg::{train_classifier, ClassifierTrace, PhoneClassifier, PhoneLabels, Ppg};
use prosovc_core::toy::{synthesize as toy_synthesize, ToySpeaker};
use prosovc_core::vocoder::synthesize;
use prosovc_core::{Matrix, Waveform};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cache::{config_hash, load_external_ppg, matrix_to_pitch, pitch_to_matrix, FeatureCache, FeatureKind, FeatureRecord};
use crate::checkpoint::{load_checkpoint, load_checkpoint_expecting, load_classifier, save_trainer};
use crate::config::{PitchSource, PpgSource, RunConfig};
use crate::error::{Error, Result, WithPath};
use crate::stats::save_stats;
use crate::wav::{load_wav, save_wav};

/// A manifest plus the directory its relative audio paths resolve against.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: Manifest,
    pub base: PathBuf,
}

impl Corpus {
    /// Parses the manifest and checks every referenced file exists.
    pub fn load(path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing { what: "manifest", path: path.into() },
            _ => Error::io(path, e),
        })?;
        let manifest = Manifest::parse(&text, split).at(path)?;
        let corpus = Self { manifest, base: path.parent().unwrap_or(Path::new(".")).to_path_buf() };
        for u in &corpus.manifest.entries {
            let p = corpus.audio_path(u);
            if !p.is_file() {
                return Err(Error::Missing { what: "audio file", path: p });
            }
        }
        Ok(corpus)
    }

    pub fn audio_path(&self, u: &Utterance) -> PathBuf {
        let p = Path::new(&u.audio_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Reads the audio and applies the entry's speed factor.
    pub fn load_audio(&self, u: &Utterance) -> Result<Waveform> {
        let path = self.audio_path(u);
        let wave = load_wav(&path)?;
        if u.speed == 1.0 {
            return Ok(wave);
        }
        time_stretch(&wave, SpeedFactor::new(u.speed).at(&path)?).at(&path)
    }

    pub fn expanded(&self, factors: &[SpeedFactor]) -> Result<Corpus> {
        Ok(Corpus { manifest: expand_manifest(&self.manifest, factors)?, base: self.base.clone() })
    }

    /// Entries of `speaker`, or all entries when `None`.
    pub fn entries_of<'a>(&'a self, speaker: Option<&'a str>) -> impl Iterator<Item = &'a Utterance> + 'a {
        self.manifest.entries.iter().filter(move |u| speaker.is_none_or(|s| u.speaker == s))
    }
}

/// Mel, BFCC and pitch on the shared frame grid.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub mel: MelSpectrogram,
    pub bfcc: Matrix,
    pub pitch: PitchTrack,
}

impl Analysis {
    pub fn acoustic(&self) -> prosovc_core::Result<AcousticFeatures> {
        assemble_acoustic(&self.bfcc, &self.pitch)
    }
}

pub fn analyse(wave: &Waveform, cfg: &RunConfig) -> prosovc_core::Result<Analysis> {
    if wave.sample_rate != cfg.frame.sample_rate {
        return Err(prosovc_core::Error::InvalidConfig(format!(
            "audio is {} Hz, configuration expects {} Hz",
            wave.sample_rate, cfg.frame.sample_rate
        )));
    }
    let an = Analyzer::new(cfg.frame)?;
    let (mel, bfcc) = an.mel_and_bfcc(wave)?;
    let pitch = track_pitch_with(wave, &cfg.frame, &cfg.pitch)?;
    Ok(Analysis { mel, bfcc, pitch })
}

/// Where posteriorgrams come from.
#[derive(Debug, Clone)]
pub enum PpgProvider {
    Classifier { model: PhoneClassifier, digest: String },
    External { dir: PathBuf },
}

impl PpgProvider {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        match cfg.ppg.source {
            PpgSource::Toy => {
                let path = &cfg.ppg.classifier;
                let bytes = fs::read(path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => Error::Missing { what: "phone classifier", path: path.clone() },
                    _ => Error::io(path, e),
                })?;
                let digest = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
                Ok(PpgProvider::Classifier { model: load_classifier(path)?, digest })
            }
            PpgSource::External => Ok(PpgProvider::External { dir: cfg.ppg.external_dir.clone() }),
        }
    }

    /// Enters the cache hash, so a new classifier invalidates cached features.
    pub fn identity(&self) -> String {
        match self {
            PpgProvider::Classifier { digest, .. } => format!("classifier:{digest}"),
            PpgProvider::External { dir } => format!("external:{}", dir.display()),
        }
    }

    pub fn ppg(&self, id: &str, mel: &MelSpectrogram) -> Result<Ppg> {
        match self {
            PpgProvider::Classifier { model, .. } => Ok(model.extract(mel)?),
            PpgProvider::External { dir } => {
                let path = dir.join(format!("{id}.pvf"));
                if !path.is_file() {
                    return Err(Error::Missing { what: "external posteriorgram", path });
                }
                load_external_ppg(&path, Some(mel.frames()))
            }
        }
    }
}

#[derive(Serialize)]
struct ExtractionKey<'a> {
    frame: &'a prosovc_core::dsp::FrameSpec,
    pitch: &'a prosovc_core::dsp::PitchConfig,
    ppg: String,
}

pub fn open_cache(cfg: &RunConfig, provider: &PpgProvider) -> FeatureCache {
    let hash = config_hash(&ExtractionKey { frame: &cfg.frame, pitch: &cfg.pitch, ppg: provider.identity() });
    FeatureCache::new(&cfg.paths.cache, hash)
}

pub const EXTRACTED_KINDS: [FeatureKind; 4] =
    [FeatureKind::Mel, FeatureKind::BfccAcoustic, FeatureKind::F0Vuv, FeatureKind::Ppg];

#[derive(Debug, Default)]
pub struct ExtractSummary {
    pub computed: usize,
    pub skipped: usize,
    pub failures: Vec<(String, Error)>,
}

fn extract_one(cfg: &RunConfig, corpus: &Corpus, provider: &PpgProvider, cache: &FeatureCache, u: &Utterance) -> Result<bool> {
    if EXTRACTED_KINDS.iter().all(|&k| cache.is_valid(&u.id, k)) {
        return Ok(false);
    }
    let wave = corpus.load_audio(u)?;
    let path = corpus.audio_path(u);
    let a = analyse(&wave, cfg).at(&path)?;
    let ppg = provider.ppg(&u.id, &a.mel)?;
    let acoustic = a.acoustic().at(&path)?;
    let records = [
        (FeatureKind::Mel, a.mel.values().clone()),
        (FeatureKind::BfccAcoustic, acoustic.into_matrix()),
        (FeatureKind::F0Vuv, pitch_to_matrix(&a.pitch)),
        (FeatureKind::Ppg, ppg.into_matrix()),
    ];
    for (kind, data) in records {
        cache.put(&FeatureRecord::new(u.id.clone(), kind, data)?)?;
    }
    Ok(true)
}

/// Fills the cache for every (entry, speed factor). Valid entries are
/// skipped; per-file failures are collected and the rest still processed.
pub fn extract(cfg: &RunConfig, corpus: &Corpus, provider: &PpgProvider) -> Result<ExtractSummary> {
    let expanded = corpus.expanded(&cfg.speed_factors()?)?;
    let cache = open_cache(cfg, provider);
    let entries = &expanded.manifest.entries;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(entries.len()).max(1);
    let results: Vec<(usize, Result<bool>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (expanded, cache) = (&expanded, &cache);
                s.spawn(move || {
                    (w..entries.len())
                        .step_by(workers)
                        .map(|i| (i, extract_one(cfg, expanded, provider, cache, &entries[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<_> = handles.into_iter().flat_map(|h| h.join().expect("extraction worker panicked")).collect();
        all.sort_by_key(|r| r.0);
        all
    });
    let mut summary = ExtractSummary::default();
    for (i, r) in results {
        match r {
            Ok(true) => summary.computed += 1,
            Ok(false) => summary.skipped += 1,
            Err(e) => summary.failures.push((entries[i].id.clone(), e)),
        }
    }
    Ok(summary)
}

pub fn load_example(cache: &FeatureCache, id: &str, sample_rate: u32) -> Result<TrainingExample> {
    let get = |k| cache.get(id, k).map(|r| r.data);
    let mel = MelSpectrogram::new(get(FeatureKind::Mel)?)?;
    let target = AcousticFeatures::new(get(FeatureKind::BfccAcoustic)?)?;
    let pitch = matrix_to_pitch(&get(FeatureKind::F0Vuv)?, sample_rate)?;
    let ppg = Ppg::new(get(FeatureKind::Ppg)?)?;
    Ok(TrainingExample::new(ppg, pitch, mel, target)?)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub losses: Vec<f32>,
    pub checkpoint: PathBuf,
    pub stats_path: PathBuf,
    pub stats: PitchStats,
    pub examples: usize,
}

pub const LOSS_LOG: &str = "loss.tsv";
pub const MODEL_FILE: &str = "model.pvck";

/// Trains on the cached features of the target speaker (all augmented
/// copies) and writes the loss log, periodic checkpoints, the final model,
/// the speaker's pitch statistics and the resolved config into the run dir.
/// With `resume`, continues from the run dir's `model.pvck`.
pub fn train(
    cfg: &RunConfig,
    corpus: &Corpus,
    provider: &PpgProvider,
    resume: bool,
    mut on_step: impl FnMut(&StepStats),
) -> Result<TrainOutcome> {
    let run_dir = &cfg.paths.run_dir;
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    cfg.write_resolved(run_dir)?;
    let speaker = cfg.target_speaker.as_deref();
    let expanded = corpus.expanded(&cfg.speed_factors()?)?;
    let cache = open_cache(cfg, provider);
    let ids: Vec<&Utterance> = expanded.entries_of(speaker).collect();
    if ids.is_empty() {
        return Err(prosovc_core::Error::Empty("training utterances for the target speaker").into());
    }
    let data = ids.iter().map(|u| load_example(&cache, &u.id, cfg.frame.sample_rate)).collect::<Result<Vec<_>>>()?;

    let originals: Vec<&TrainingExample> =
        ids.iter().zip(&data).filter(|(u, _)| u.speed == 1.0).map(|(_, ex)| ex).collect();
    let stats = estimate_stats(originals.iter().map(|ex| &ex.pitch), MIN_VOICED_FRAMES)?;
    let name = speaker.unwrap_or("target");
    let stats_path = run_dir.join(format!("{name}.stats"));
    save_stats(&stats_path, name, &stats)?;

    let model_path = run_dir.join(MODEL_FILE);
    let mut trainer = if resume && model_path.is_file() {
        let ck = load_checkpoint_expecting(&model_path, &cfg.model)?;
        ck.into_trainer(cfg.train)?
    } else {
        Trainer::new(ConversionModel::new(cfg.model.clone())?, cfg.train)?
    };
    let log_path = run_dir.join(LOSS_LOG);
    let mut log = fs::OpenOptions::new()
        .create(true)
        .append(resume)
        .write(true)
        .truncate(!resume)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    if trainer.step_count() == 0 {
        writeln!(log, "step\tloss\tgrad_norm").map_err(|e| Error::io(&log_path, e))?;
    }
    let ckpt_dir = run_dir.join("checkpoints");
    let mut losses = Vec::new();
    while trainer.step_count() < cfg.train.max_steps {
        let s = trainer.step(&data)?;
        writeln!(log, "{}\t{}\t{}", s.step, s.loss, s.grad_norm).map_err(|e| Error::io(&log_path, e))?;
        losses.push(s.loss);
        on_step(&s);
        let done = trainer.step_count();
        if cfg.train.checkpoint_every > 0 && done % cfg.train.checkpoint_every == 0 {
            save_trainer(ckpt_dir.join(format!("step_{done:06}.pvck")), &trainer)?;
        }
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    save_trainer(&model_path, &trainer)?;
    Ok(TrainOutcome { losses, checkpoint: model_path, stats_path, stats, examples: data.len() })
}

/// Reads `step, loss` pairs from a loss log.
pub fn read_loss_log(path: &Path) -> Result<Vec<(u64, f32)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let mut f = line.split('\t');
        let (Some(s), Some(l)) = (f.next(), f.next()) else { continue };
        let step = s.parse().map_err(|_| Error::corrupt(path, format!("bad step {s:?}")))?;
        let loss = l.parse().map_err(|_| Error::corrupt(path, format!("bad loss {l:?}")))?;
        out.push((step, loss));
    }
    Ok(out)
}

/// Voiced log-f0 statistics of one speaker's original-speed utterances.
pub fn speaker_stats(cfg: &RunConfig, corpus: &Corpus, speaker: &str) -> Result<PitchStats> {
    let mut tracks = Vec::new();
    for u in corpus.entries_of(Some(speaker)) {
        let path = corpus.audio_path(u);
        let wave = load_wav(&path)?;
        tracks.push(track_pitch_with(&wave, &cfg.frame, &cfg.pitch).at(&path)?);
    }
    if tracks.is_empty() {
        return Err(prosovc_core::Error::Empty("utterances for the requested speaker").into());
    }
    Ok(estimate_stats(&tracks, MIN_VOICED_FRAMES)?)
}

/// Run-time conversion: source analysis, log-f0 mapping, model, vocoder.
#[derive(Debug, Clone)]
pub struct Converter {
    cfg: RunConfig,
    model: ConversionModel,
    provider: PpgProvider,
    src: PitchStats,
    tgt: PitchStats,
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub source_pitch: PitchTrack,
    pub mapped_pitch: PitchTrack,
    pub features: AcousticFeatures,
    pub wave: Waveform,
}

impl Converter {
    pub fn new(cfg: &RunConfig, checkpoint: &Path, src: PitchStats, tgt: PitchStats, provider: PpgProvider) -> Result<Self> {
        if !checkpoint.is_file() {
            return Err(Error::Missing { what: "checkpoint", path: checkpoint.into() });
        }
        let ck = load_checkpoint(checkpoint)?;
        ck.model
            .expect_mode(cfg.model.mode)
            .map_err(|e| Error::ConfigMismatch { path: checkpoint.into(), msg: e.to_string() })?;
        Ok(Self { cfg: cfg.clone(), model: ck.model, provider, src, tgt })
    }

    pub fn model(&self) -> &ConversionModel {
        &self.model
    }

    /// The output has exactly as many samples as `wave`.
    pub fn convert(&self, id: &str, wave: &Waveform) -> Result<Conversion> {
        let a = analyse(wave, &self.cfg)?;
        let ppg = self.provider.ppg(id, &a.mel)?;
        let mapped = convert_f0(&a.pitch, &self.src, &self.tgt)?;
        let inputs = ModelInputs { ppg: &ppg, pitch: &mapped, mel: Some(&a.mel) };
        let mut features = self.model.forward(&inputs)?;
        if self.cfg.convert.pitch_source == PitchSource::Mapped {
            let pitch_cols = assemble_acoustic(&a.bfcc, &mapped)?;
            let mut m = features.into_matrix();
            for t in 0..m.rows() {
                for c in prosovc_core::dsp::PERIOD_COL..prosovc_core::dsp::ACOUSTIC_DIM {
                    m.set(t, c, pitch_cols.values().get(t, c));
                }
            }
            features = AcousticFeatures::new(m)?;
        }
        let mut out = synthesize(&features, &self.cfg.frame, &self.cfg.vocoder)?;
        // T frames synthesise T * hop samples, up to one hop past the source.
        out.samples.truncate(wave.len());
        Ok(Conversion { source_pitch: a.pitch, mapped_pitch: mapped, features, wave: out })
    }

    pub fn convert_file(&self, input: &Path, output: &Path) -> Result<Conversion> {
        let wave = load_wav(input)?;
        let id = input.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let c = self.convert(&id, &wave).map_err(|e| match e {
            Error::Compute(source) => Error::Core { path: input.into(), source },
            other => other,
        })?;
        if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        save_wav(output, &c.wave)?;
        Ok(c)
    }
}

/// Trains the frame classifier on the original-speed entries, reading one
/// `<id>.lab` file per utterance from `labels_dir`.
pub fn train_ppg(cfg: &RunConfig, corpus: &Corpus, labels_dir: &Path) -> Result<(PhoneClassifier, ClassifierTrace)> {
    let an = Analyzer::new(cfg.frame)?;
    let mut data = Vec::new();
    for u in corpus.manifest.entries.iter().filter(|u| u.speed == 1.0) {
        let lab = labels_dir.join(format!("{}.lab", u.id));
        let text = fs::read_to_string(&lab).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing { what: "phone labels", path: lab.clone() },
            _ => Error::io(&lab, e),
        })?;
        let labels = PhoneLabels::parse(&text, cfg.ppg.toy.classes).at(&lab)?;
        let path = corpus.audio_path(u);
        let mel = an.mel(&load_wav(&path)?).at(&path)?;
        data.push((mel, labels));
    }
    Ok(train_classifier(&data, cfg.ppg.toy)?)
}

/// Writes `<dir>/wavs/<id>.wav`, `<dir>/labels/<id>.lab` and
/// `<dir>/manifest.txt` for `per_speaker` utterances of each preset speaker.
pub fn write_toy_corpus(
    dir: &Path,
    speakers: &[String],
    per_speaker: usize,
    duration_s: f64,
    first_seed: u64,
    sample_rate: u32,
) -> Result<PathBuf> {
    for sub in ["wavs", "labels"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut entries = Vec::new();
    for name in speakers {
        let spk = ToySpeaker::preset(name).ok_or_else(|| {
            prosovc_core::Error::InvalidConfig(format!("unknown toy speaker {name:?}; presets are A, B, C"))
        })?;
        for i in 0..per_speaker as u64 {
            let utt = toy_synthesize(&spk, first_seed + i, duration_s, sample_rate);
            let rel = format!("wavs/{}.wav", utt.id);
            save_wav(dir.join(&rel), &utt.wave)?;
            let labels = PhoneLabels::new(utt.labels, prosovc_core::ppg::TOY_PPG_DIM)?;
            crate::cache::write_atomic(&dir.join("labels").join(format!("{}.lab", utt.id)), labels.to_text().as_bytes())?;
            entries.push(Utterance::new(utt.id, utt.speaker, rel, utt.wave.duration_s()));
        }
    }
    let manifest = Manifest::new(entries, Split::Train)?;
    let path = dir.join("manifest.txt");
    crate::cache::write_atomic(&path, manifest.to_text().as_bytes())?;
    Ok(path)
}
