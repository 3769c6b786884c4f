//! Pipeline configuration: one JSON document shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use t2n_core::embed::NodeEmbeddingConfig;
use t2n_core::eval::{Protocol, ProtocolConfig, SplitSize, DEFAULT_K_VALUES};
use t2n_core::mapper::{Metric, PhraseEncoder, TrainConfig, WordEmbeddingConfig};
use t2n_core::nn::{Architecture, Readout, Variant};
use t2n_core::synth::SynthConfig;

use crate::UsageError;

/// Seed used when neither a flag, the config nor `T2N_SEED` provides one.
pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "T2N_SEED";

// Offsets that give each stage its own seed.
const NODE_SEED: u64 = 0;
const WORD_SEED: u64 = 1;
const MODEL_SEED: u64 = 2;
const SHUFFLE_SEED: u64 = 3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    /// Relation labels to keep when reading the taxonomy; all if absent.
    pub relations: Option<Vec<String>>,
    pub synth: SynthConfig,
    pub nodes: NodeEmbeddingConfig,
    pub words: WordEmbeddingConfig,
    pub mapper: MapperConfig,
    pub eval: EvalConfig,
}

/// Input files and the output directory. Unset artifact paths fall back to
/// the standard file names inside `output_dir`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub taxonomy: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            taxonomy: None,
            pairs: None,
            corpus: None,
            nodes: None,
            words: None,
            model: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperConfig {
    /// One of `linear`, `cnn`, `bilstm`.
    pub architecture: String,
    pub hidden: usize,
    pub readout: Readout,
    pub mask_padding: bool,
    pub windows: Vec<usize>,
    pub feature_maps: usize,
    pub max_len: usize,
    pub metric: Metric,
    /// Neighbours returned by `map`.
    pub k: usize,
    pub train: TrainConfig,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            architecture: "bilstm".into(),
            hidden: 200,
            readout: Readout::Final,
            mask_padding: false,
            windows: vec![1, 2, 3, 5],
            feature_maps: 128,
            max_len: PhraseEncoder::DEFAULT_MAX_LEN,
            metric: Metric::Cosine,
            k: 10,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub k_values: Vec<usize>,
    pub test_size: SplitSize,
    pub zero_shot_size: SplitSize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: Protocol::Intrinsic,
            k_values: DEFAULT_K_VALUES.to_vec(),
            test_size: SplitSize::Fraction(0.1),
            zero_shot_size: SplitSize::Fraction(0.1),
        }
    }
}

/// Apply `key.path=value` overrides to a JSON document. Values that parse
/// as JSON are used as such, anything else becomes a string.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| UsageError(format!("override `{item}` is not of the form key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
        let mut slot = &mut *doc;
        for part in key.split('.') {
            if part.is_empty() {
                return Err(UsageError(format!("override `{item}` has an empty key segment")).into());
            }
            if slot.is_null() {
                *slot = Value::Object(Default::default());
            }
            let Value::Object(map) = slot else {
                return Err(UsageError(format!("override `{item}`: `{part}` is not inside an object")).into());
            };
            slot = map.entry(part.to_owned()).or_insert(Value::Null);
        }
        *slot = value;
    }
    Ok(())
}

impl PipelineConfig {
    /// Read the optional config file, then apply overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("reading config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        apply_overrides(&mut doc, overrides)?;
        let cfg: PipelineConfig =
            serde_json::from_value(doc).map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }

    /// Flag, then config, then environment, then [`DEFAULT_SEED`].
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let env = match std::env::var(SEED_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| UsageError(format!("{SEED_ENV}=`{s}` is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        let seed = flag.or(self.seed).or(env).unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.nodes.skipgram.seed = seed.wrapping_add(NODE_SEED);
        self.words.skipgram.seed = seed.wrapping_add(WORD_SEED);
        self.mapper.train.seed = seed.wrapping_add(SHUFFLE_SEED);
        Ok(seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn model_seed(&self) -> u64 {
        self.seed().wrapping_add(MODEL_SEED)
    }

    pub fn variant(&self) -> Result<Variant> {
        let m = &self.mapper;
        Ok(match Variant::from_name(&m.architecture)? {
            Variant::Linear => Variant::Linear,
            Variant::Cnn { .. } => Variant::Cnn {
                windows: m.windows.clone(),
                feature_maps: m.feature_maps,
            },
            Variant::Bilstm { .. } => Variant::Bilstm {
                hidden: m.hidden,
                readout: m.readout,
                mask_padding: m.mask_padding,
            },
        })
    }

    pub fn architecture(&self, input_dim: usize, output_dim: usize) -> Result<Architecture> {
        let arch = Architecture {
            seq_len: self.mapper.max_len,
            input_dim,
            output_dim,
            variant: self.variant()?,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn protocol_config(&self, protocol: Protocol, input_dim: usize, output_dim: usize, parallel: bool) -> Result<ProtocolConfig> {
        let cfg = ProtocolConfig {
            protocol,
            architecture: self.architecture(input_dim, output_dim)?,
            train: self.mapper.train,
            metric: self.mapper.metric,
            k_values: self.eval.k_values.clone(),
            test_size: self.eval.test_size,
            zero_shot_size: self.eval.zero_shot_size,
            seed: self.model_seed(),
            parallel,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no input data.
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.nodes.walks.validate()?;
        self.nodes.skipgram.validate()?;
        self.words.skipgram.validate()?;
        if let Some(sub) = &self.words.subword {
            sub.validate()?;
        }
        self.variant()?;
        self.mapper.train.validate()?;
        if self.mapper.max_len == 0 || self.mapper.k == 0 {
            return Err(UsageError("mapper.max_len and mapper.k must be positive".into()).into());
        }
        let k = &self.eval.k_values;
        if k.is_empty() || k[0] == 0 || k.windows(2).any(|w| w[0] >= w[1]) {
            return Err(UsageError("eval.k_values must be non-empty, positive and strictly increasing".into()).into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self)?;
        Ok(hex::encode(Sha256::digest(json.as_bytes())))
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }

    pub fn nodes_path(&self) -> PathBuf {
        self.paths.nodes.clone().unwrap_or_else(|| self.out("nodes.vec"))
    }

    pub fn words_path(&self) -> PathBuf {
        self.paths.words.clone().unwrap_or_else(|| {
            self.out(if self.words.subword.is_some() { "words.subword" } else { "words.vec" })
        })
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths.model.clone().unwrap_or_else(|| self.out("mapper.ckpt"))
    }
}

/// Path of a required input, which must exist.
pub fn required(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    let p = path
        .clone()
        .ok_or_else(|| UsageError(format!("`paths.{key}` is not set")))?;
    existing(p)
}

pub fn existing(p: PathBuf) -> Result<PathBuf> {
    if p.exists() {
        Ok(p)
    } else {
        Err(UsageError(format!("input {} does not exist", p.display())).into())
    }
}
