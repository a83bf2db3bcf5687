//! Experiment configuration: TOML with fixed sections, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use samlab::grouping::{Granularity, ScaleRule, ScaleRuleKind};
use samlab::sam::{Implementation, NormOrder, OptimizerConfig, SamConfig};
use samlab::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("invalid `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub data: DataSection,
    pub optimizer: OptimizerSection,
    pub sam: SamSection,
    pub output: OutputSection,
    pub attack: AttackSection,
    pub spectrum: SpectrumSection,
    pub shift: ShiftSection,
    pub interp: InterpSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `mlp` or `rnn`.
    pub kind: String,
    /// MLP layer widths, input first.
    pub sizes: Vec<usize>,
    pub activation: String,
    pub embed: usize,
    pub hidden: usize,
    pub tied: bool,
    pub seed: u64,
    /// `f64` or `f32`.
    pub precision: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "mlp".into(),
            sizes: vec![784, 100, 100, 10],
            activation: "relu".into(),
            embed: 16,
            hidden: 64,
            tied: false,
            seed: 0,
            precision: "f64".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// `digits` (synthetic images), `mnist`, `gaussian` or `corpus`.
    pub source: String,
    /// MNIST directory or corpus file.
    pub path: Option<PathBuf>,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub brightness: f64,
    pub pattern_strength: f64,
    pub label_strength: f64,
    pub pixel_noise: f64,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    /// Mean shift of the gaussian test split; empty means none.
    pub shift: Vec<f64>,
    pub window: usize,
    pub test_fraction: f64,
    /// Fraction of the training set replaced by shifted instances.
    pub mix_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: "digits".into(),
            path: None,
            seed: 0,
            train_size: 2000,
            test_size: 2000,
            brightness: 0.1,
            pattern_strength: 0.3,
            label_strength: 0.2,
            pixel_noise: 0.05,
            classes: 2,
            dim: 10,
            per_class: 200,
            separation: 3.0,
            shift: Vec::new(),
            window: 32,
            test_fraction: 0.1,
            mix_fraction: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    /// `sgd` or `adam`.
    pub kind: String,
    pub lr: f64,
    pub clip: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the minibatch shuffles.
    pub seed: u64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            kind: "sgd".into(),
            lr: 0.1,
            clip: None,
            epochs: 5,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamSection {
    pub steps: usize,
    /// 0 trains without corruption.
    pub radius: f64,
    /// `2` or `inf`.
    pub norm: String,
    pub step_size: Option<f64>,
    pub implementation: String,
    pub rule: String,
    pub granularity: String,
    pub start_epoch: usize,
}

impl Default for SamSection {
    fn default() -> Self {
        SamSection {
            steps: 1,
            radius: 0.0,
            norm: "2".into(),
            step_size: None,
            implementation: "MULTI_STEP".into(),
            rule: "GA_SAM".into(),
            granularity: "layer".into(),
            start_epoch: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub run_id: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("runs"),
            run_id: "run".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub norm: String,
    pub radii: Vec<f64>,
    pub steps: usize,
    pub step_size: Option<f64>,
    /// `train` or `test`.
    pub split: String,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            norm: "2".into(),
            radii: vec![0.05, 0.1, 0.2],
            steps: 10,
            step_size: None,
            split: "test".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub k: usize,
    pub samples: usize,
    pub split: String,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            k: 50,
            samples: 512,
            split: "train".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftSection {
    /// `neural` or `quadratic`.
    pub mode: String,
    /// Explicit mix fractions; otherwise `grid_points` evenly spaced up to 1.
    pub grid: Option<Vec<f64>>,
    pub grid_points: usize,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    /// Unset means full-batch steps.
    pub finetune_batch: Option<usize>,
    pub grad_tol: f64,
    pub patience: usize,
    pub quad_instances: usize,
    pub quad_dim: usize,
    pub quad_shift_scale: f64,
    pub quad_shared: bool,
}

impl Default for ShiftSection {
    fn default() -> Self {
        ShiftSection {
            mode: "neural".into(),
            grid: None,
            grid_points: 100,
            finetune_epochs: 3,
            finetune_lr: 0.05,
            finetune_batch: None,
            grad_tol: 1e-4,
            patience: 2,
            quad_instances: 20,
            quad_dim: 5,
            quad_shift_scale: 0.5,
            quad_shared: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpSection {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub points: usize,
}

impl Default for InterpSection {
    fn default() -> Self {
        InterpSection {
            alpha_min: -0.25,
            alpha_max: 1.25,
            points: 41,
        }
    }
}

fn one_of(key: &'static str, value: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(invalid(key, format!("`{value}` is not one of {}", allowed.join(", "))))
    }
}

fn finite(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "must be finite"))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Canonical TOML rendering of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`Self::to_toml`], hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        one_of("model.kind", &m.kind, &["mlp", "rnn"])?;
        one_of("model.precision", &m.precision, &["f64", "f32"])?;
        if samlab::model::Activation::parse(&m.activation).is_none() {
            return Err(invalid("model.activation", format!("unknown activation `{}`", m.activation)));
        }
        if m.kind == "mlp" && (m.sizes.len() < 2 || m.sizes.contains(&0)) {
            return Err(invalid("model.sizes", "need at least two positive layer sizes"));
        }
        if m.kind == "rnn" && (m.embed == 0 || m.hidden == 0) {
            return Err(invalid("model.hidden", "embedding and hidden sizes must be positive"));
        }

        let d = &self.data;
        one_of("data.source", &d.source, &["digits", "mnist", "gaussian", "corpus"])?;
        if (d.source == "mnist" || d.source == "corpus") && d.path.is_none() {
            return Err(invalid("data.path", format!("source `{}` needs a path", d.source)));
        }
        if (m.kind == "rnn") != (d.source == "corpus") {
            return Err(invalid("model.kind", "rnn models train on the corpus source and only there"));
        }
        if !(0.0..=1.0).contains(&d.mix_fraction) {
            return Err(invalid("data.mix_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&d.test_fraction) {
            return Err(invalid("data.test_fraction", "must lie in [0, 1)"));
        }
        for (key, v) in [
            ("data.brightness", d.brightness),
            ("data.pattern_strength", d.pattern_strength),
            ("data.label_strength", d.label_strength),
            ("data.pixel_noise", d.pixel_noise),
            ("data.separation", d.separation),
        ] {
            finite(key, v)?;
        }
        if d.shift.iter().any(|v| !v.is_finite()) {
            return Err(invalid("data.shift", "entries must be finite"));
        }
        if d.window == 0 || d.train_size == 0 || d.test_size == 0 || d.per_class == 0 {
            return Err(invalid("data.window", "window and dataset sizes must be positive"));
        }

        let o = &self.optimizer;
        one_of("optimizer.kind", &o.kind, &["sgd", "adam"])?;
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return Err(invalid("optimizer.lr", "must be positive"));
        }
        if o.epochs == 0 || o.batch_size == 0 {
            return Err(invalid("optimizer.epochs", "epochs and batch size must be positive"));
        }
        self.optimizer_config::<f64>()?;
        self.sam_config::<f64>()?;

        if self.output.run_id.is_empty() || self.output.run_id.contains(['/', '\\']) {
            return Err(invalid("output.run_id", "must be a non-empty file-name component"));
        }

        let a = &self.attack;
        a.norm.parse::<NormOrder>().map_err(|e| invalid("attack.norm", e.to_string()))?;
        if a.radii.is_empty() || a.radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(invalid("attack.radii", "need non-negative finite radii"));
        }
        if a.steps == 0 {
            return Err(invalid("attack.steps", "must be at least 1"));
        }
        one_of("attack.split", &a.split, &["train", "test"])?;

        let s = &self.spectrum;
        if s.k == 0 || s.samples < s.k {
            return Err(invalid("spectrum.samples", "need k ≥ 1 and samples ≥ k"));
        }
        one_of("spectrum.split", &s.split, &["train", "test"])?;

        let sh = &self.shift;
        one_of("shift.mode", &sh.mode, &["neural", "quadratic"])?;
        match &sh.grid {
            Some(g) if g.len() < 2 || g.iter().any(|e| !(0.0..=1.0).contains(e)) => {
                return Err(invalid("shift.grid", "need at least two fractions in [0, 1]"));
            }
            None if sh.grid_points < 2 => return Err(invalid("shift.grid_points", "must be at least 2")),
            _ => {}
        }
        if !(sh.finetune_lr > 0.0 && sh.finetune_lr.is_finite()) {
            return Err(invalid("shift.finetune_lr", "must be positive"));
        }
        if sh.finetune_batch == Some(0) {
            return Err(invalid("shift.finetune_batch", "must be positive"));
        }
        if sh.quad_instances == 0 || sh.quad_dim == 0 {
            return Err(invalid("shift.quad_instances", "must be positive"));
        }
        finite("shift.quad_shift_scale", sh.quad_shift_scale)?;

        let i = &self.interp;
        if i.points < 2 || !(i.alpha_min < i.alpha_max) || !i.alpha_min.is_finite() || !i.alpha_max.is_finite() {
            return Err(invalid("interp.points", "need at least two points over a finite increasing range"));
        }
        Ok(())
    }

    pub fn optimizer_config<S: Scalar>(&self) -> Result<OptimizerConfig<S>, ConfigError> {
        let o = &self.optimizer;
        let cfg = match o.kind.as_str() {
            "sgd" => OptimizerConfig::Sgd {
                lr: S::c(o.lr),
                clip: o.clip.map(S::c),
            },
            _ => {
                if o.clip.is_some() {
                    return Err(invalid("optimizer.clip", "clipping is only supported with sgd"));
                }
                OptimizerConfig::adam(S::c(o.lr))
            }
        };
        cfg.validate().map_err(|e| invalid("optimizer", e.to_string()))?;
        Ok(cfg)
    }

    pub fn sam_config<S: Scalar>(&self) -> Result<SamConfig<S>, ConfigError> {
        let s = &self.sam;
        let norm = s.norm.parse::<NormOrder>().map_err(|e| invalid("sam.norm", e.to_string()))?;
        let implementation = s
            .implementation
            .parse::<Implementation>()
            .map_err(|e| invalid("sam.implementation", e.to_string()))?;
        let rule = s.rule.parse::<ScaleRuleKind>().map_err(|e| invalid("sam.rule", e.to_string()))?;
        let granularity = s.granularity.parse::<Granularity>().map_err(|e| invalid("sam.granularity", e.to_string()))?;
        if !(s.radius >= 0.0 && s.radius.is_finite()) {
            return Err(invalid("sam.radius", "must be finite and non-negative"));
        }
        let cfg = SamConfig {
            steps: s.steps,
            radius: S::c(s.radius),
            norm,
            step_size: s.step_size.map(S::c),
            implementation,
            rule: ScaleRule::new(rule),
            granularity,
            start_epoch: s.start_epoch,
        };
        cfg.validate().map_err(|e| invalid("sam", e.to_string()))?;
        Ok(cfg)
    }

    pub fn mix_grid(&self) -> Vec<f64> {
        self.shift.grid.clone().unwrap_or_else(|| samlab::shift::default_grid(self.shift.grid_points))
    }
}
