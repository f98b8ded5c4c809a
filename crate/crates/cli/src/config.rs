//! Run configuration: one JSON document covering every subcommand.
//! Unknown keys are rejected. The resolved form is what every sidecar
//! carries, so a sidecar can be fed back through `--config`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use fbsp::augment::AugmentConfig;
use fbsp::perturb::{default_cutoff_axis, default_snr_axis, SWEEP_FILTER_ORDER};
use fbsp::trainer::{BankMode, Frontend, TaskSpec, TrainConfig};
use fbsp::wav::WavFormat;
use fbsp::{Error, FbspParams, Generator, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bank_lr: Option<f64>,
    pub lr_decay: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lambda_fbsp: f64,
    pub freeze_epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            lr: d.lr,
            bank_lr: d.bank_lr,
            lr_decay: d.lr_decay,
            momentum: d.momentum,
            weight_decay: d.weight_decay,
            lambda_fbsp: d.lambda_fbsp,
            freeze_epochs: d.freeze_epochs,
            batch_size: d.batch_size,
        }
    }
}

/// A single generated signal for `gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub generator: Generator,
    pub duration: f64,
    pub sample_rate: u32,
    #[serde(default)]
    pub format: WavFormat,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbSettings {
    #[serde(
        skip_serializing_if = "Option::is_none",
        with = "extended_float::option"
    )]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

/// Empty axes mean the defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    /// `"inf"` marks the clean level.
    #[serde(with = "extended_float::vec")]
    pub snr_db: Vec<f64>,
    pub cutoff_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSettings {
    pub draws: usize,
    pub n_taps: usize,
    pub step: f64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self {
            draws: 100,
            n_taps: 32,
            step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: BankMode,
    pub frontend: Frontend,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<FbspParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    pub train: TrainSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalSpec>,
    pub perturb: PerturbSettings,
    pub sweep: SweepAxes,
    pub gradcheck: GradcheckSettings,
    /// Describes the artefact a sidecar belongs to; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<serde_json::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: BankMode::Fbsp,
            frontend: Frontend::default(),
            params: None,
            probes: None,
            train: TrainSettings::default(),
            augment: None,
            task: None,
            signal: None,
            perturb: PerturbSettings::default(),
            sweep: SweepAxes::default(),
            gradcheck: GradcheckSettings::default(),
            output: None,
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<BankMode>,
    pub params: Option<FbspParams>,
    pub n_fft: Option<usize>,
    pub snr_db: Option<f64>,
    pub cutoff_hz: Option<f64>,
    pub order: Option<usize>,
}

/// Default corpus size for the built-in task.
const DEFAULT_SAMPLES_PER_CLASS: usize = 40;

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    /// Apply overrides, fill defaults and validate.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        self.output = None;
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(n) = o.n_fft {
            self.frontend.n_fft = n;
        }
        if let Some(p) = &o.params {
            self.params = Some(p.clone());
        }
        if o.snr_db.is_some() {
            self.perturb.snr_db = o.snr_db;
        }
        if o.cutoff_hz.is_some() {
            self.perturb.cutoff_hz = o.cutoff_hz;
        }
        if o.order.is_some() {
            self.perturb.order = o.order;
        }
        let params = self
            .params
            .take()
            .unwrap_or_else(|| FbspParams::stft_init(self.frontend.n_fft));
        params.validate()?;
        self.params = Some(params);
        if self.task.is_none() {
            self.task = Some(TaskSpec::three_class(self.seed, DEFAULT_SAMPLES_PER_CLASS));
        }
        if let Some(0 | 1) = self.probes {
            return Err(Error::Validation("need at least 2 probes".into()));
        }
        if self.perturb.order == Some(0) {
            return Err(Error::Validation("filter order must be at least 1".into()));
        }
        if self.gradcheck.draws > 0 && self.gradcheck.n_taps < 4 {
            return Err(Error::Validation(
                "gradient check needs at least 4 taps".into(),
            ));
        }
        if !(self.gradcheck.step > 0.0) {
            return Err(Error::Validation(
                "gradient check step must be positive".into(),
            ));
        }
        self.train_config().validate()?;
        Ok(self)
    }

    pub fn params(&self) -> &FbspParams {
        self.params.as_ref().expect("resolved config has params")
    }

    pub fn task(&self) -> &TaskSpec {
        self.task.as_ref().expect("resolved config has a task")
    }

    pub fn filter_order(&self) -> usize {
        self.perturb.order.unwrap_or(SWEEP_FILTER_ORDER)
    }

    pub fn snr_axis(&self) -> Vec<f64> {
        if self.sweep.snr_db.is_empty() {
            default_snr_axis()
        } else {
            self.sweep.snr_db.clone()
        }
    }

    pub fn cutoff_axis(&self) -> Vec<f64> {
        if self.sweep.cutoff_hz.is_empty() {
            default_cutoff_axis(self.task().sample_rate)
        } else {
            self.sweep.cutoff_hz.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            lr: t.lr,
            lr_decay: t.lr_decay,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            lambda_fbsp: t.lambda_fbsp,
            freeze_epochs: t.freeze_epochs,
            seed: self.seed,
            batch_size: t.batch_size,
            bank_lr: t.bank_lr,
            frontend: self.frontend,
            augment: self.augment.clone(),
        }
    }

    /// Resolved config plus a description of one output file.
    pub fn sidecar(&self, output: serde_json::Value) -> Self {
        Self {
            output: Some(output),
            ..self.clone()
        }
    }
}

/// JSON has no infinities; they travel as the strings `"inf"` / `"-inf"`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_infinite() {
            Repr::Text(if v > 0.0 { "inf" } else { "-inf" }.into())
        } else {
            Repr::Num(v)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(to_repr).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .map(|x| to_repr(*x))
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(from_repr)
                .collect()
        }
    }
}
