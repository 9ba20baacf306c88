//! Run configuration: a TOML file with `[model]`, `[plan]`, `[train]`,
//! `[loss]` and `[data]` sections.
//!
//! ```toml
//! [model]
//! kind = "dcrnn"            # the model `train` fits; "mmoe" for the baseline
//! embedding_dim = 32
//! cell = "lstm"
//! direction = "bi"
//! hidden_dim = 32
//! ada = true
//! tower = [64, 32]
//! experts = 8               # MMoE settings, also used by `bench`
//! expert_hidden = [128, 64]
//!
//! [plan]
//! preset = "alicpp"         # or n_tasks / window_len / interval
//!
//! [train]
//! epochs = 3
//! batch_size = 1024
//! learning_rate = 1e-4
//! seed = 7
//!
//! [loss]
//! pos_weight = [1.0, 1.0]   # or preset = "alicpp"
//!
//! [data]
//! train = "train.tsv"       # relative to the config file
//! eval = "eval.tsv"
//! fields = [{ key = 3, vocab = 20 }, { key = 7, vocab = 5 }]
//! ```
//!
//! Instead of files, `[data.synthetic]` describes generated train and eval
//! splits. `DCRNN_SEED`, `DCRNN_TRAIN_DATA` and `DCRNN_EVAL_DATA` override
//! the seed and data paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{gen_synthetic, load_tsv, Dataset, FieldSpec, LoadStats, Schema, SynthSpec};
use crate::error::{Error, Result};
use crate::models::{DcrnnConfig, EmbeddingSpec, MmoeConfig, ModelSpec};
use crate::nn::{CellKind, Direction};
use crate::sequencing::SharingPlan;
use crate::training::{AdamMoments, LossConfig, OptimizerKind, TrainConfig};

pub const ENV_SEED: &str = "DCRNN_SEED";
pub const ENV_TRAIN_DATA: &str = "DCRNN_TRAIN_DATA";
pub const ENV_EVAL_DATA: &str = "DCRNN_EVAL_DATA";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dcrnn,
    Mmoe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Files {
        train: PathBuf,
        eval: PathBuf,
        schema: Schema,
        malformed_tolerance: usize,
    },
    Synthetic {
        train: SynthSpec,
        eval: SynthSpec,
    },
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub dcrnn: DcrnnConfig,
    pub mmoe: MmoeConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub data: DataSource,
}

impl RunConfig {
    /// The model `train` fits.
    pub fn model_spec(&self) -> ModelSpec {
        match self.model {
            ModelKind::Dcrnn => ModelSpec::Dcrnn(self.dcrnn.clone()),
            ModelKind::Mmoe => ModelSpec::Mmoe(self.mmoe.clone()),
        }
    }

    pub fn schema(&self) -> Schema {
        match &self.data {
            DataSource::Files { schema, .. } => schema.clone(),
            DataSource::Synthetic { train, .. } => train.schema(),
        }
    }

    /// Train and eval splits, plus load statistics for file sources.
    pub fn load_data(&self) -> Result<(Dataset, Dataset, Option<[LoadStats; 2]>)> {
        match &self.data {
            DataSource::Files {
                train,
                eval,
                schema,
                malformed_tolerance,
            } => {
                let (tr, s1) = load_tsv(train, schema, *malformed_tolerance)?;
                let (ev, s2) = load_tsv(eval, schema, *malformed_tolerance)?;
                Ok((tr, ev, Some([s1, s2])))
            }
            DataSource::Synthetic { train, eval } => Ok((gen_synthetic(train)?, gen_synthetic(eval)?, None)),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    plan: RawPlan,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    loss: RawLoss,
    data: Option<RawData>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Option<ModelKind>,
    embedding_dim: Option<usize>,
    cell: Option<CellKind>,
    direction: Option<Direction>,
    hidden_dim: Option<usize>,
    ada: Option<bool>,
    tower: Option<Vec<usize>>,
    experts: Option<usize>,
    expert_hidden: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    preset: Option<String>,
    n_tasks: Option<usize>,
    window_len: Option<usize>,
    interval: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    seed: Option<u64>,
    optimizer: Option<OptimizerKind>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoss {
    preset: Option<String>,
    pos_weight: Option<Vec<f64>>,
    task_weights: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    train: Option<PathBuf>,
    eval: Option<PathBuf>,
    fields: Option<Vec<FieldSpec>>,
    malformed_tolerance: Option<usize>,
    synthetic: Option<RawSynthetic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    seed: Option<u64>,
    n_train: usize,
    n_eval: usize,
    vocab_sizes: Vec<usize>,
    latent_dim: usize,
    click_noise: f64,
    rho: f64,
    signal: Option<f64>,
    click_bias: Option<f64>,
    conv_bias: Option<f64>,
}

/// Reads and validates a config file, applying environment overrides.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&src, base, |k| std::env::var(k).ok()).map_err(|e| match e {
        Error::Config { line, message, .. } => Error::Config {
            path: Some(path.to_path_buf()),
            line,
            message,
        },
        other => other,
    })
}

/// Parses config text. Relative data paths resolve against `base_dir`;
/// `env` supplies override variables.
pub fn parse_config(src: &str, base_dir: &Path, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| {
        let line = e.span().map(|s| line_of(src, s.start));
        Error::config(line, e.message().trim().to_string())
    })?;
    let at = |section: &str, key: &str| locate(src, section, key);
    let fail =
        |section: &str, key: &str, msg: String| Error::config(at(section, key), format!("[{section}] {key}: {msg}"));

    // Plan.
    let plan = {
        let p = &raw.plan;
        let explicit = p.n_tasks.is_some() || p.window_len.is_some() || p.interval.is_some();
        match (&p.preset, explicit) {
            (Some(_), true) => {
                return Err(fail(
                    "plan",
                    "preset",
                    "give either a preset or n_tasks/window_len/interval".into(),
                ));
            }
            (Some(name), false) => match name.as_str() {
                "xiaomi" => SharingPlan::xiaomi(),
                "alicpp" => SharingPlan::alicpp(),
                other => {
                    return Err(fail(
                        "plan",
                        "preset",
                        format!("unknown preset {other:?} (expected xiaomi or alicpp)"),
                    ))
                }
            },
            (None, true) => {
                let n = p.n_tasks.unwrap_or(2);
                let (Some(l), Some(i)) = (p.window_len, p.interval) else {
                    return Err(fail(
                        "plan",
                        "window_len",
                        "window_len and interval are both required".into(),
                    ));
                };
                SharingPlan::new(n, l, i).map_err(|e| {
                    let key = if n == 0 {
                        "n_tasks"
                    } else if l == 0 {
                        "window_len"
                    } else {
                        "interval"
                    };
                    fail("plan", key, strip_plan_prefix(&e))
                })?
            }
            (None, false) => SharingPlan::alicpp(),
        }
    };
    let n_tasks = plan.n_tasks();
    if n_tasks > Dataset::TASK_NAMES.len() {
        return Err(fail(
            "plan",
            "n_tasks",
            format!(
                "datasets carry {} tasks, plan asks for {n_tasks}",
                Dataset::TASK_NAMES.len()
            ),
        ));
    }

    // Train.
    let t = &raw.train;
    let defaults = TrainConfig::default();
    let seed = match env(ENV_SEED) {
        Some(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::config(None, format!("{ENV_SEED}={s:?} is not an unsigned integer")))?,
        None => t.seed.unwrap_or(defaults.seed),
    };
    let train = TrainConfig {
        epochs: t.epochs.unwrap_or(defaults.epochs),
        batch_size: t.batch_size.unwrap_or(defaults.batch_size),
        learning_rate: t.learning_rate.unwrap_or(defaults.learning_rate),
        seed,
        optimizer: t.optimizer.unwrap_or(defaults.optimizer),
        adam: AdamMoments {
            beta1: t.beta1.unwrap_or(defaults.adam.beta1),
            beta2: t.beta2.unwrap_or(defaults.adam.beta2),
            eps: t.eps.unwrap_or(defaults.adam.eps),
        },
    };
    if train.batch_size == 0 {
        return Err(fail("train", "batch_size", "must be at least 1".into()));
    }
    if !(train.learning_rate >= 0.0 && train.learning_rate.is_finite()) {
        return Err(fail("train", "learning_rate", "must be finite and non-negative".into()));
    }
    for (key, v) in [("beta1", train.adam.beta1), ("beta2", train.adam.beta2)] {
        if !(0.0..1.0).contains(&v) {
            return Err(fail("train", key, format!("{v} outside [0, 1)")));
        }
    }
    if train.adam.eps.is_nan() || train.adam.eps <= 0.0 {
        return Err(fail("train", "eps", "must be positive".into()));
    }

    // Loss.
    let l = &raw.loss;
    let mut loss = match l.preset.as_deref() {
        None | Some("unit") => LossConfig::uniform(n_tasks),
        Some("alicpp") if n_tasks == 2 => LossConfig::alicpp(),
        Some("alicpp") => {
            return Err(fail(
                "loss",
                "preset",
                "the alicpp weights cover exactly two tasks".into(),
            ))
        }
        Some(other) => {
            return Err(fail(
                "loss",
                "preset",
                format!("unknown preset {other:?} (expected unit or alicpp)"),
            ))
        }
    };
    if let Some(w) = &l.pos_weight {
        loss.pos_weight = w.clone();
    }
    if let Some(w) = &l.task_weights {
        loss.task_weights = w.clone();
    }
    for (key, v) in [("pos_weight", &loss.pos_weight), ("task_weights", &loss.task_weights)] {
        if v.len() != n_tasks {
            return Err(fail(
                "loss",
                key,
                format!("expected {n_tasks} entries, got {}", v.len()),
            ));
        }
        if let Some(w) = v.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(fail("loss", key, format!("weight {w} must be finite and non-negative")));
        }
    }

    // Data.
    let Some(d) = raw.data else {
        return Err(Error::config(None, "missing [data] section"));
    };
    let env_train = env(ENV_TRAIN_DATA).map(PathBuf::from);
    let env_eval = env(ENV_EVAL_DATA).map(PathBuf::from);
    let resolve = |p: &Path| {
        if p.is_relative() {
            base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    };
    let data = match d.synthetic {
        Some(s) => {
            if d.train.is_some() || d.eval.is_some() || d.fields.is_some() || env_train.is_some() || env_eval.is_some()
            {
                return Err(fail(
                    "data",
                    "synthetic",
                    "synthetic data excludes train/eval files and fields".into(),
                ));
            }
            let spec = SynthSpec {
                seed: s.seed.unwrap_or(seed),
                n_examples: s.n_train,
                first_index: 0,
                vocab_sizes: s.vocab_sizes,
                latent_dim: s.latent_dim,
                click_noise: s.click_noise,
                rho: s.rho,
                signal: s.signal.unwrap_or(2.0),
                click_bias: s.click_bias.unwrap_or(0.0),
                conv_bias: s.conv_bias.unwrap_or(0.0),
            };
            spec.validate()
                .map_err(|e| Error::config(at("data.synthetic", "n_train"), e.to_string()))?;
            let eval = SynthSpec {
                n_examples: s.n_eval,
                first_index: s.n_train as u64,
                ..spec.clone()
            };
            DataSource::Synthetic { train: spec, eval }
        }
        None => {
            let train = match (env_train, &d.train) {
                (Some(p), _) => p,
                (None, Some(p)) => resolve(p),
                (None, None) => return Err(fail("data", "train", "missing training data path".into())),
            };
            let eval = match (env_eval, &d.eval) {
                (Some(p), _) => p,
                (None, Some(p)) => resolve(p),
                (None, None) => return Err(fail("data", "eval", "missing evaluation data path".into())),
            };
            let Some(fields) = d.fields else {
                return Err(fail("data", "fields", "missing field schema".into()));
            };
            let schema = Schema::new(fields).map_err(|e| fail("data", "fields", e.to_string()))?;
            DataSource::Files {
                train,
                eval,
                schema,
                malformed_tolerance: d.malformed_tolerance.unwrap_or(0),
            }
        }
    };

    // Model.
    let m = &raw.model;
    let vocab_sizes = match &data {
        DataSource::Files { schema, .. } => schema.vocab_sizes(),
        DataSource::Synthetic { train, .. } => train.vocab_sizes.clone(),
    };
    let embedding = EmbeddingSpec {
        vocab_sizes,
        dim: m.embedding_dim.unwrap_or(32),
    };
    let positive = |key: &str, v: usize| {
        if v == 0 {
            Err(fail("model", key, "must be positive".into()))
        } else {
            Ok(v)
        }
    };
    positive("embedding_dim", embedding.dim)?;
    let widths = |key: &str, v: &Option<Vec<usize>>, default: &[usize]| -> Result<Vec<usize>> {
        let v = v.clone().unwrap_or_else(|| default.to_vec());
        if v.contains(&0) {
            return Err(fail("model", key, "widths must be positive".into()));
        }
        Ok(v)
    };
    let tower = widths("tower", &m.tower, &[64, 32])?;
    let expert_hidden = widths("expert_hidden", &m.expert_hidden, &[128, 64])?;
    if expert_hidden.is_empty() {
        return Err(fail("model", "expert_hidden", "needs at least one layer".into()));
    }
    let dcrnn = DcrnnConfig {
        embedding: embedding.clone(),
        plan,
        cell: m.cell.unwrap_or(CellKind::Lstm),
        direction: m.direction.unwrap_or(Direction::Bi),
        hidden_dim: positive("hidden_dim", m.hidden_dim.unwrap_or(32))?,
        ada: m.ada.unwrap_or(true),
        tower: tower.clone(),
    };
    let mmoe = MmoeConfig {
        embedding,
        n_tasks,
        experts: positive("experts", m.experts.unwrap_or(8))?,
        expert_hidden,
        tower,
    };

    Ok(RunConfig {
        model: m.kind.unwrap_or(ModelKind::Dcrnn),
        dcrnn,
        mmoe,
        train,
        loss,
        data,
    })
}

fn strip_plan_prefix(e: &Error) -> String {
    match e {
        Error::Plan(m) => m.clone(),
        other => other.to_string(),
    }
}

fn line_of(src: &str, byte: usize) -> usize {
    src[..byte.min(src.len())].matches('\n').count() + 1
}

/// 1-based line of `key` inside `[section]`, falling back to the section
/// header, or `None` when neither appears.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.split(']').next()) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}
