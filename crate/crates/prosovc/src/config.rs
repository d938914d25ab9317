//! Declarative run configuration (TOML). Unknown keys are rejected and the
//! resolved configuration is written next to every run's outputs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use prosovc_core::augment::{SpeedFactor, DEFAULT_FACTORS};
use prosovc_core::dsp::{FrameSpec, PitchConfig};
use prosovc_core::models::{ModelConfig, TrainConfig};
use prosovc_core::ppg::ClassifierConfig;
use prosovc_core::vocoder::VocoderConfig;
use serde::{Deserialize, Serialize};

use crate::cache::write_atomic;
use crate::error::{Error, Result};

pub const RESOLVED_NAME: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub factors: Vec<f32>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { factors: DEFAULT_FACTORS.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PpgSource {
    /// The built-in frame classifier at `ppg.classifier`.
    Toy,
    /// Posterior files `<ppg.external_dir>/<utterance id>.pvf`.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpgConfig {
    pub source: PpgSource,
    pub classifier: PathBuf,
    pub external_dir: PathBuf,
    pub toy: ClassifierConfig,
}

impl Default for PpgConfig {
    fn default() -> Self {
        Self {
            source: PpgSource::Toy,
            classifier: PathBuf::from("work/ppg.pvck"),
            external_dir: PathBuf::from("work/ppg"),
            toy: ClassifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub labels_dir: PathBuf,
    pub cache: PathBuf,
    pub run_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("corpus/manifest.txt"),
            labels_dir: PathBuf::from("corpus/labels"),
            cache: PathBuf::from("work/cache"),
            run_dir: PathBuf::from("work/run"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitchSource {
    /// The period and correlation columns predicted by the model.
    Model,
    /// The period of the mapped source f0 on frames the source marks voiced.
    Mapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertConfig {
    pub pitch_source: PitchSource,
}

impl Default for ConvertConfig {
    fn default() -> Self {
        Self { pitch_source: PitchSource::Model }
    }
}

/// Upper bounds checked by `eval --check`. MCD here is on natural-log
/// Bark-band cepstra, where copy synthesis of toy speech already scores
/// 35 to 56 dB, so the default MCD bound is a sanity ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalThresholds {
    pub mcd_max_db: f64,
    pub f0_rmse_max_hz: f64,
    pub vuv_error_max: f64,
}

impl Default for EvalThresholds {
    fn default() -> Self {
        Self { mcd_max_db: 60.0, f0_rmse_max_hz: 30.0, vuv_error_max: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Copied into every seeded component on resolve.
    pub seed: u64,
    /// Speaker whose utterances train the conversion model; all when absent.
    pub target_speaker: Option<String>,
    pub frame: FrameSpec,
    pub pitch: PitchConfig,
    pub augment: AugmentConfig,
    pub ppg: PpgConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub vocoder: VocoderConfig,
    pub convert: ConvertConfig,
    pub eval: EvalThresholds,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            target_speaker: None,
            frame: FrameSpec::default(),
            pitch: PitchConfig::default(),
            augment: AugmentConfig::default(),
            ppg: PpgConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            vocoder: VocoderConfig::default(),
            convert: ConvertConfig::default(),
            eval: EvalThresholds::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config { path: origin.into(), msg: e.to_string() })?;
        Ok(cfg.resolved())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text, path)?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    /// Propagates the top-level seed and the class count.
    pub fn resolved(mut self) -> Self {
        self.model.seed = self.seed;
        self.train.seed = self.seed;
        self.vocoder.seed = self.seed;
        self.ppg.toy.seed = self.seed;
        if self.ppg.source == PpgSource::Toy {
            self.model.ppg_dim = self.ppg.toy.classes;
        }
        self
    }

    pub fn speed_factors(&self) -> prosovc_core::Result<Vec<SpeedFactor>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &f in &self.augment.factors {
            if !seen.insert(f.to_bits()) {
                return Err(prosovc_core::Error::DuplicateFactor(f));
            }
            out.push(SpeedFactor::new(f)?);
        }
        Ok(out)
    }

    pub fn validate(&self, origin: &Path) -> Result<()> {
        let wrap = |e: prosovc_core::Error| Error::Config { path: origin.into(), msg: e.to_string() };
        self.frame.validate().map_err(wrap)?;
        self.speed_factors().map_err(wrap)?;
        self.ppg.toy.validate().map_err(wrap)?;
        self.model.validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    /// Writes `resolved_config.toml` into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RESOLVED_NAME);
        write_atomic(&path, self.to_toml().as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use prosovc_core::models::Mode;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::parse(&cfg.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["bogus = 1\n", "[train]\nlearning_rat = 0.1\n", "[model.cbhg]\nbank = 3\n"] {
            let e = RunConfig::parse(text, Path::new("run.toml")).unwrap_err();
            assert!(e.to_string().contains("run.toml") && e.to_string().contains("unknown field"), "{e}");
        }
    }

    #[test]
    fn seed_flows_everywhere() {
        let cfg = RunConfig::parse("seed = 17\n[model]\nmode = \"baseline\"\nseed = 3\n", Path::new("x")).unwrap();
        assert_eq!((cfg.model.seed, cfg.train.seed, cfg.vocoder.seed, cfg.ppg.toy.seed), (17, 17, 17, 17));
        assert_eq!(cfg.model.mode, Mode::Baseline);
    }

    #[test]
    fn factor_checks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "[augment]\nfactors = [1.0, 0.8, 1.0]\n").unwrap();
        assert!(RunConfig::load(&p).unwrap_err().to_string().contains("duplicate factor"));
        fs::write(&p, "[augment]\nfactors = [5.0]\n").unwrap();
        assert!(RunConfig::load(&p).is_err());
        fs::write(&p, "[augment]\nfactors = []\n").unwrap();
        assert!(RunConfig::load(&p).unwrap().speed_factors().unwrap().is_empty());
    }

    #[test]
    fn resolved_file_reproduces_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig { seed: 5, target_speaker: Some("A".into()), ..RunConfig::default() }.resolved();
        cfg.train.max_steps = 12;
        let p = cfg.write_resolved(dir.path()).unwrap();
        assert_eq!(RunConfig::load(p).unwrap(), cfg);
    }
}
