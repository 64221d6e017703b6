//! Experiment configuration: a TOML document with `experiment`, `dataset`,
//! `model`, `attack` and `defense` sections. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{AttackKind, Direction};
use crate::defenses::{Defense, DefenseKind};
use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub attack: AttackSection,
    pub defense: DefenseSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    /// N: total clients.
    pub clients: usize,
    /// K: clients selected per round.
    pub selected: usize,
    /// R: communication rounds.
    pub rounds: usize,
    /// Fraction of clients controlled by the adversary, in `[0, 0.5)`.
    pub attacker_fraction: f64,
    /// η for benign local SGD.
    pub lr: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    /// Evaluate the global model every this many rounds (and always on the last).
    pub eval_interval: usize,
    /// Write a checkpoint every this many rounds; 0 writes only the final one.
    pub checkpoint_interval: usize,
    /// Record wall-clock phase times; when false the time columns are 0 so
    /// that logs are byte-reproducible.
    pub record_timing: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            clients: 100,
            selected: 10,
            rounds: 150,
            attacker_fraction: 0.2,
            lr: 0.05,
            local_epochs: 1,
            batch_size: 16,
            seed: 1,
            eval_interval: 1,
            checkpoint_interval: 0,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    FashionMnist,
    Blobs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Directory with the four IDX files (IDX datasets only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Uniform subsample of the training split.
    pub train_fraction: f64,
    /// Uniform subsample of the test split used for evaluation.
    pub test_fraction: f64,
    /// Dirichlet concentration β; ignored when `iid` is set.
    pub beta: f64,
    pub iid: bool,
    pub blob_classes: usize,
    pub blob_per_class: usize,
    pub blob_side: usize,
    pub blob_noise: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            kind: DatasetKind::FashionMnist,
            path: None,
            train_fraction: 0.1,
            test_fraction: 1.0,
            beta: 0.5,
            iid: false,
            blob_classes: 10,
            blob_per_class: 100,
            blob_side: 8,
            blob_noise: crate::data::BLOB_NOISE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Hidden layer widths; empty means softmax regression.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub kind: AttackKind,
    /// |S|: synthetic images per round.
    pub synth_size: usize,
    /// E: optimization epochs of the filter layer or generator.
    pub synth_epochs: usize,
    /// Step size of the filter layer or generator optimization.
    pub synth_lr: f64,
    /// Epochs of malicious classifier training on the synthetic set.
    pub train_epochs: usize,
    /// Learning rate of malicious training; defaults to `experiment.lr`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_lr: Option<f64>,
    /// Weight on the distance regularizer.
    pub lambda_reg: f64,
    /// Skip synthesis optimization and use a fresh random filter/generator each round.
    pub static_mode: bool,
    pub filter_kernel: usize,
    pub filter_stride: usize,
    pub filter_padding: usize,
    pub generator_noise_dim: usize,
    pub generator_hidden: usize,
    pub generator_activation: Activation,
    /// Seed of the fixed generator noise batch; defaults to one derived from the master seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_seed: Option<u64>,
    /// LIE shift in standard deviations.
    pub lie_z: f64,
    /// Min-Max / Min-Sum perturbation direction.
    pub direction: Direction,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            synth_size: 50,
            synth_epochs: 5,
            synth_lr: 0.1,
            train_epochs: 1,
            train_lr: None,
            lambda_reg: 1.0,
            static_mode: false,
            filter_kernel: 3,
            filter_stride: 1,
            filter_padding: 0,
            generator_noise_dim: 32,
            generator_hidden: 64,
            generator_activation: Activation::Relu,
            z_seed: None,
            lie_z: 1.5,
            direction: Direction::Unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseSection {
    pub kind: DefenseKind,
    /// Attacker fraction the server assumes when deriving `f`; defaults to
    /// `experiment.attacker_fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumed_fraction: Option<f64>,
    /// Explicit assumed attacker count per round, overriding `assumed_fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
    /// mKrum admission count; defaults to `K − f`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Trimmed-mean trim count; defaults to `f`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trim: Option<usize>,
    /// RefD: number of lowest D-Scores rejected (X).
    pub reject: usize,
    /// RefD: weighting between balance and confidence (α).
    pub alpha: f64,
    /// RefD: size of the server's reference set.
    pub reference_size: usize,
}

impl Default for DefenseSection {
    fn default() -> Self {
        Self {
            kind: DefenseKind::Fedavg,
            assumed_fraction: None,
            f: None,
            m: None,
            trim: None,
            reject: 2,
            alpha: 1.0,
            reference_size: 1000,
        }
    }
}

fn field(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

fn unit_interval(path: &str, v: f64, open_low: bool) -> Result<()> {
    let ok = if open_low { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
    if ok {
        Ok(())
    } else {
        Err(field(path, format!("must lie in {}0, 1], got {v}", if open_low { "(" } else { "[" })))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Apply one `section.key=value` override to a parsed document. The value is
/// read as a TOML literal, falling back to a bare string.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| Error::Config(format!("override key `{path}` must be section.key")))?;
    let entry = doc
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let table = entry
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("`{section}` is not a section")))?;
    table.insert(key.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Parse a TOML document, apply overrides, and validate.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical serialization of every field, hex-encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn malicious_count(&self) -> usize {
        let exact = self.experiment.attacker_fraction * self.experiment.clients as f64;
        // Tolerate representation error such as 0.3 · 10 = 3.0000000000000004.
        (exact - 1e-9).ceil().max(0.0) as usize
    }

    /// Assumed attackers per round, before any rule-specific clamping.
    fn assumed_f(&self) -> usize {
        if let Some(f) = self.defense.f {
            return f;
        }
        let fraction = self.defense.assumed_fraction.unwrap_or(self.experiment.attacker_fraction);
        (fraction * self.experiment.selected as f64 + 1e-9).round() as usize
    }

    /// The aggregation rule for rounds of `K` updates.
    pub fn resolve_defense(&self) -> Result<Defense> {
        let k = self.experiment.selected;
        let f = self.assumed_f();
        let d = &self.defense;
        let defense = match d.kind {
            DefenseKind::Fedavg => Defense::FedAvg,
            DefenseKind::Median => Defense::Median,
            DefenseKind::Mkrum => Defense::MKrum {
                f,
                m: d.m.unwrap_or(k.saturating_sub(f)),
            },
            DefenseKind::Bulyan => {
                let feasible = k.saturating_sub(3) / 4;
                if d.f.is_some() || f <= feasible {
                    Defense::Bulyan { f }
                } else {
                    log::warn!("bulyan: assumed f = {f} infeasible for K = {k}; using f = {feasible}");
                    Defense::Bulyan { f: feasible }
                }
            }
            DefenseKind::Trmean => Defense::TrimmedMean { k: d.trim.unwrap_or(f) },
            DefenseKind::Refd => Defense::RefD {
                alpha: d.alpha,
                reject: d.reject,
            },
        };
        defense.validate(k).map_err(|e| match e {
            Error::Config(msg) => field("defense", msg),
            other => other,
        })?;
        Ok(defense)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.clients == 0 {
            return Err(field("experiment.clients", "must be positive"));
        }
        if e.selected == 0 || e.selected > e.clients {
            return Err(field(
                "experiment.selected",
                format!("must lie in [1, clients = {}], got {}", e.clients, e.selected),
            ));
        }
        if e.rounds == 0 {
            return Err(field("experiment.rounds", "must be positive"));
        }
        if !(0.0..0.5).contains(&e.attacker_fraction) {
            return Err(field(
                "experiment.attacker_fraction",
                format!("must lie in [0, 0.5), got {}", e.attacker_fraction),
            ));
        }
        if !(e.lr >= 0.0 && e.lr.is_finite()) {
            return Err(field("experiment.lr", format!("must be finite and non-negative, got {}", e.lr)));
        }
        if e.batch_size == 0 {
            return Err(field("experiment.batch_size", "must be positive"));
        }
        if e.eval_interval == 0 {
            return Err(field("experiment.eval_interval", "must be positive"));
        }
        let ds = &self.dataset;
        unit_interval("dataset.train_fraction", ds.train_fraction, true)?;
        unit_interval("dataset.test_fraction", ds.test_fraction, true)?;
        if !ds.iid && !(ds.beta > 0.0 && ds.beta.is_finite()) {
            return Err(field("dataset.beta", format!("must be positive and finite, got {}", ds.beta)));
        }
        if ds.kind == DatasetKind::Blobs {
            if ds.blob_classes < 2 {
                return Err(field("dataset.blob_classes", "must be at least 2"));
            }
            if ds.blob_per_class == 0 || ds.blob_side == 0 {
                return Err(field("dataset.blob_per_class", "blob sizes must be positive"));
            }
            if !(ds.blob_noise >= 0.0 && ds.blob_noise.is_finite()) {
                return Err(field("dataset.blob_noise", "must be finite and non-negative"));
            }
        }
        if self.model.hidden.contains(&0) {
            return Err(field("model.hidden", "hidden widths must be positive"));
        }
        let a = &self.attack;
        if a.kind.is_data_free() && a.synth_size == 0 {
            return Err(field("attack.synth_size", "must be positive"));
        }
        if !(a.synth_lr >= 0.0 && a.synth_lr.is_finite()) {
            return Err(field("attack.synth_lr", "must be finite and non-negative"));
        }
        if let Some(lr) = a.train_lr {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(field("attack.train_lr", "must be finite and non-negative"));
            }
        }
        if !(a.lambda_reg >= 0.0 && a.lambda_reg.is_finite()) {
            return Err(field("attack.lambda_reg", "must be finite and non-negative"));
        }
        if !a.lie_z.is_finite() {
            return Err(field("attack.lie_z", "must be finite"));
        }
        if a.kind == AttackKind::DfaG && (a.generator_noise_dim == 0 || a.generator_hidden == 0) {
            return Err(field("attack.generator_hidden", "generator sizes must be positive"));
        }
        if let Some(f) = self.defense.assumed_fraction {
            unit_interval("defense.assumed_fraction", f, false)?;
        }
        if self.defense.kind == DefenseKind::Refd && self.defense.reference_size == 0 {
            return Err(field("defense.reference_size", "must be positive"));
        }
        self.resolve_defense()?;
        Ok(())
    }
}
