//! Run configuration: a flat `key = value` file.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | model keys (`vocab_size`, `states_per_symbol`, ...) | see `ModelConfig` | architecture |
//! | `lr`, `beta1`, `beta2`, `eps` | 1e-3, 0.9, 0.999, 1e-8 | Adam |
//! | `clip` | 1.0 | global gradient norm limit, `none` disables |
//! | `batch_size` | 4 | utterances per update |
//! | `max_updates` | 1000 | |
//! | `seed` | 0 | overridden by `NHMM_SEED` |
//! | `checkpoint_interval` | 100 | updates between checkpoints, 0 for none |
//! | `per_frame` | false | optimize NLL per frame instead of per utterance |
//! | `train_dropout` | true | pre-net dropout during training |
//! | `skip_infeasible` | false | skip batch items with too few frames |
//! | `init_tau` | auto | flat-start transition probability |
//! | `vocab`, `train_manifest`, `valid_manifest`, `out_dir` | `out_dir = run` | paths, relative to the config file |
//! | `synth_quantile`, `synth_acoustic`, `synth_duration`, `synth_dropout`, `synth_max_frames` | | synthesis defaults |

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv;
use crate::lattice::InfeasiblePolicy;
use crate::model::ModelConfig;
use crate::numerics::AdamConfig;
use crate::synthesis::{default_quantile, AcousticMode, DurationMode, SynthesisOptions};

pub const SEED_ENV: &str = "NHMM_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_updates: u64,
    pub seed: u64,
    pub checkpoint_interval: u64,
    pub per_frame: bool,
    pub train_dropout: bool,
    pub infeasible: InfeasiblePolicy,
    pub init_tau: Option<f64>,
    pub vocab: Option<PathBuf>,
    pub train_manifest: Option<PathBuf>,
    pub valid_manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub synth_quantile: Option<f64>,
    pub synth_acoustic: AcousticMode,
    pub synth_duration: DurationMode,
    pub synth_dropout: bool,
    pub synth_max_frames: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            adam: AdamConfig::default(),
            batch_size: 4,
            max_updates: 1000,
            seed: 0,
            checkpoint_interval: 100,
            per_frame: false,
            train_dropout: true,
            infeasible: InfeasiblePolicy::Abort,
            init_tau: None,
            vocab: None,
            train_manifest: None,
            valid_manifest: None,
            out_dir: PathBuf::from("run"),
            synth_quantile: None,
            synth_acoustic: AcousticMode::Mean,
            synth_duration: DurationMode::Quantile,
            synth_dropout: true,
            synth_max_frames: None,
        }
    }
}

fn parse_optional<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match raw {
        "" | "none" | "auto" => Ok(None),
        _ => kv::value(key, raw).map(Some),
    }
}

fn parse_acoustic(raw: &str) -> Result<AcousticMode> {
    match raw {
        "mean" => Ok(AcousticMode::Mean),
        "sampled" => Ok(AcousticMode::Sampled),
        _ => Err(Error::Config(format!(
            "acoustic mode must be mean or sampled, got {raw:?}"
        ))),
    }
}

fn parse_duration(raw: &str) -> Result<DurationMode> {
    match raw {
        "quantile" => Ok(DurationMode::Quantile),
        "sampled" => Ok(DurationMode::Sampled),
        _ => Err(Error::Config(format!(
            "duration mode must be quantile or sampled, got {raw:?}"
        ))),
    }
}

pub(crate) fn acoustic_name(m: AcousticMode) -> &'static str {
    match m {
        AcousticMode::Mean => "mean",
        AcousticMode::Sampled => "sampled",
    }
}

pub(crate) fn duration_name(m: DurationMode) -> &'static str {
    match m {
        DurationMode::Quantile => "quantile",
        DurationMode::Sampled => "sampled",
    }
}

impl RunConfig {
    /// Parses config text. Relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = RunConfig {
            out_dir: base.join("run"),
            ..RunConfig::default()
        };
        let path = |raw: &str| {
            let p = Path::new(raw);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        for (k, v) in kv::parse(text)? {
            let key = k.as_str();
            if c.model.set(key, &v)? {
                continue;
            }
            match key {
                "lr" => c.adam.lr = kv::value(key, &v)?,
                "beta1" => c.adam.beta1 = kv::value(key, &v)?,
                "beta2" => c.adam.beta2 = kv::value(key, &v)?,
                "eps" => c.adam.eps = kv::value(key, &v)?,
                "clip" => c.adam.clip = parse_optional(key, &v)?,
                "batch_size" => c.batch_size = kv::value(key, &v)?,
                "max_updates" => c.max_updates = kv::value(key, &v)?,
                "seed" => c.seed = kv::value(key, &v)?,
                "checkpoint_interval" => c.checkpoint_interval = kv::value(key, &v)?,
                "per_frame" => c.per_frame = kv::value(key, &v)?,
                "train_dropout" => c.train_dropout = kv::value(key, &v)?,
                "skip_infeasible" => {
                    c.infeasible = if kv::value(key, &v)? {
                        InfeasiblePolicy::Skip
                    } else {
                        InfeasiblePolicy::Abort
                    }
                }
                "init_tau" => c.init_tau = parse_optional(key, &v)?,
                "vocab" => c.vocab = (!v.is_empty()).then(|| path(&v)),
                "train_manifest" => c.train_manifest = (!v.is_empty()).then(|| path(&v)),
                "valid_manifest" => c.valid_manifest = (!v.is_empty()).then(|| path(&v)),
                "out_dir" => c.out_dir = path(&v),
                "synth_quantile" => c.synth_quantile = parse_optional(key, &v)?,
                "synth_acoustic" => c.synth_acoustic = parse_acoustic(&v)?,
                "synth_duration" => c.synth_duration = parse_duration(&v)?,
                "synth_dropout" => c.synth_dropout = kv::value(key, &v)?,
                "synth_max_frames" => c.synth_max_frames = parse_optional(key, &v)?,
                _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file and applies the `NHMM_SEED` override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut c = Self::parse(&text, path.parent().unwrap_or_else(|| Path::new(".")))?;
        c.apply_seed_env()?;
        Ok(c)
    }

    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = kv::value(SEED_ENV, raw.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if let Some(t) = self.init_tau {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("init_tau must lie in (0, 1), got {t}")));
            }
        }
        self.synthesis_options(0).validate(0)?;
        Ok(())
    }

    pub fn synthesis_options(&self, seed: u64) -> SynthesisOptions {
        SynthesisOptions {
            acoustic: self.synth_acoustic,
            duration: self.synth_duration,
            quantile: self
                .synth_quantile
                .unwrap_or_else(|| default_quantile(self.model.states_per_symbol)),
            state_quantiles: Default::default(),
            max_frames: self.synth_max_frames,
            seed,
            dropout: self.synth_dropout,
        }
    }

    /// Canonical text: every key, fixed order. Paths are written as resolved.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<(String, String)> = self
            .model
            .to_pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        lines.extend([
            ("lr".into(), format!("{:?}", self.adam.lr)),
            ("beta1".into(), format!("{:?}", self.adam.beta1)),
            ("beta2".into(), format!("{:?}", self.adam.beta2)),
            ("eps".into(), format!("{:?}", self.adam.eps)),
            ("clip".into(), opt(self.adam.clip.map(|c| format!("{c:?}")))),
            ("batch_size".into(), self.batch_size.to_string()),
            ("max_updates".into(), self.max_updates.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("checkpoint_interval".into(), self.checkpoint_interval.to_string()),
            ("per_frame".into(), self.per_frame.to_string()),
            ("train_dropout".into(), self.train_dropout.to_string()),
            (
                "skip_infeasible".into(),
                (self.infeasible == InfeasiblePolicy::Skip).to_string(),
            ),
            (
                "init_tau".into(),
                self.init_tau.map_or("auto".into(), |t| format!("{t:?}")),
            ),
            ("vocab".into(), p(&self.vocab)),
            ("train_manifest".into(), p(&self.train_manifest)),
            ("valid_manifest".into(), p(&self.valid_manifest)),
            ("out_dir".into(), self.out_dir.display().to_string()),
            (
                "synth_quantile".into(),
                opt(self.synth_quantile.map(|q| format!("{q:?}"))),
            ),
            ("synth_acoustic".into(), acoustic_name(self.synth_acoustic).into()),
            ("synth_duration".into(), duration_name(self.synth_duration).into()),
            ("synth_dropout".into(), self.synth_dropout.to_string()),
            (
                "synth_max_frames".into(),
                opt(self.synth_max_frames.map(|m| m.to_string())),
            ),
        ]);
        lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        kv::short_hash(self.to_text().as_bytes())
    }
}
