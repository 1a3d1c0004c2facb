use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cnn::CnnConfig;
use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::hrm::{EvalStates, HrmConfig};
use crate::nn::NormPlacement;
use crate::optim::AdamWConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Hrm,
    Cnn,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hrm" => Ok(Self::Hrm),
            "cnn" => Ok(Self::Cnn),
            other => Err(Error::Config(format!("unknown model '{other}' (hrm|cnn)"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Hrm => "hrm",
            Self::Cnn => "cnn",
        })
    }
}

/// What one schedule step corresponds to for the HRM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleUnit {
    /// Every optimizer step (one per segment) advances the schedule.
    Segment,
    /// The schedule advances once per batch; all segments of a batch share a rate.
    Batch,
}

impl FromStr for ScheduleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segment" => Ok(Self::Segment),
            "batch" => Ok(Self::Batch),
            other => Err(Error::Config(format!("unknown schedule unit '{other}' (segment|batch)"))),
        }
    }
}

impl std::fmt::Display for ScheduleUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Segment => "segment",
            Self::Batch => "batch",
        })
    }
}

/// Everything a training run needs. Serialized as flat `key=value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub dataset: DatasetKind,
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip: f64,
    pub warmup_epochs: usize,
    pub lr_floor: f64,
    pub label_smoothing: f64,
    pub schedule_unit: ScheduleUnit,
    pub d_model: usize,
    pub n_heads: usize,
    pub low_layers: usize,
    pub high_layers: usize,
    pub mlp_mult: usize,
    pub patch_size: usize,
    pub norm: NormPlacement,
    pub n_cycles: usize,
    pub t_micro: usize,
    pub m_train: usize,
    pub m_eval: usize,
    pub state_seed: u64,
    pub eval_states: EvalStates,
    pub halt_threshold: Option<f64>,
    pub cnn_widths: Vec<usize>,
    pub convs_per_stage: usize,
    /// Use only the first `n` training examples.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub error_tiles: usize,
    pub smooth_window: usize,
    /// Print a progress line every this many batches (0 disables).
    pub log_every: usize,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// The published protocol for `model` on `dataset`.
    pub fn defaults(model: ModelKind, dataset: DatasetKind) -> Self {
        let hrm = match dataset {
            DatasetKind::Mnist => HrmConfig::mnist(),
            _ => HrmConfig::cifar(dataset.num_classes()),
        };
        let adam = AdamWConfig::default();
        Self {
            model,
            dataset,
            epochs: match dataset {
                DatasetKind::Mnist => 3,
                _ => 25,
            },
            seed: 0,
            batch_size: 128,
            lr: 3e-4,
            weight_decay: adam.weight_decay,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            clip: 1.0,
            warmup_epochs: 1,
            lr_floor: 0.2,
            label_smoothing: match dataset {
                DatasetKind::Mnist => 0.0,
                _ => 0.05,
            },
            schedule_unit: ScheduleUnit::Segment,
            d_model: hrm.d_model,
            n_heads: hrm.n_heads,
            low_layers: hrm.low_layers,
            high_layers: hrm.high_layers,
            mlp_mult: hrm.mlp_mult,
            patch_size: hrm.patch_size,
            norm: hrm.norm,
            n_cycles: hrm.n_cycles,
            t_micro: hrm.t_micro,
            m_train: hrm.m_train,
            m_eval: hrm.m_eval,
            state_seed: hrm.state_seed,
            eval_states: hrm.eval_states,
            halt_threshold: hrm.halt_threshold,
            cnn_widths: vec![64, 128],
            convs_per_stage: 2,
            train_limit: None,
            test_limit: None,
            error_tiles: 64,
            smooth_window: 100,
            log_every: 50,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from(format!("runs/{model}-{dataset}")),
        }
    }

    pub fn hrm_config(&self) -> HrmConfig {
        let (h, w, c) = self.dataset.image_shape();
        HrmConfig {
            image_height: h,
            image_width: w,
            in_channels: c,
            patch_size: self.patch_size,
            d_model: self.d_model,
            n_heads: self.n_heads,
            low_layers: self.low_layers,
            high_layers: self.high_layers,
            mlp_mult: self.mlp_mult,
            norm: self.norm,
            n_cycles: self.n_cycles,
            t_micro: self.t_micro,
            m_train: self.m_train,
            m_eval: self.m_eval,
            num_classes: self.dataset.num_classes(),
            init_seed: self.seed,
            state_seed: self.state_seed,
            eval_states: self.eval_states,
            halt_threshold: self.halt_threshold,
        }
    }

    pub fn cnn_config(&self) -> CnnConfig {
        CnnConfig {
            in_channels: self.dataset.image_shape().2,
            widths: self.cnn_widths.clone(),
            convs_per_stage: self.convs_per_stage,
            num_classes: self.dataset.num_classes(),
            init_seed: self.seed,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    /// Optimizer steps per batch.
    pub fn steps_per_batch(&self) -> usize {
        match self.model {
            ModelKind::Hrm => self.m_train,
            ModelKind::Cnn => 1,
        }
    }

    /// Schedule ticks per batch.
    pub fn ticks_per_batch(&self) -> usize {
        match (self.model, self.schedule_unit) {
            (ModelKind::Hrm, ScheduleUnit::Segment) => self.m_train,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.smooth_window == 0 {
            return Err(Error::Config("smooth_window must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label_smoothing {} outside [0, 1)",
                self.label_smoothing
            )));
        }
        match self.model {
            ModelKind::Hrm => self.hrm_config().validate(),
            ModelKind::Cnn => self.cnn_config().validate(),
        }
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("cannot parse '{v}' for '{key}'")))
        }
        fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
            match v {
                "none" | "all" | "" => Ok(None),
                v => p(key, v).map(Some),
            }
        }
        let v = value.trim();
        match key.trim() {
            "model" => self.model = v.parse()?,
            "dataset" => self.dataset = v.parse()?,
            "epochs" => self.epochs = p(key, v)?,
            "seed" => self.seed = p(key, v)?,
            "batch_size" => self.batch_size = p(key, v)?,
            "lr" => self.lr = p(key, v)?,
            "weight_decay" => self.weight_decay = p(key, v)?,
            "beta1" => self.beta1 = p(key, v)?,
            "beta2" => self.beta2 = p(key, v)?,
            "adam_eps" => self.adam_eps = p(key, v)?,
            "clip" => self.clip = p(key, v)?,
            "warmup_epochs" => self.warmup_epochs = p(key, v)?,
            "lr_floor" => self.lr_floor = p(key, v)?,
            "label_smoothing" => self.label_smoothing = p(key, v)?,
            "schedule_unit" => self.schedule_unit = v.parse()?,
            "d_model" => self.d_model = p(key, v)?,
            "n_heads" => self.n_heads = p(key, v)?,
            "low_layers" => self.low_layers = p(key, v)?,
            "high_layers" => self.high_layers = p(key, v)?,
            "mlp_mult" => self.mlp_mult = p(key, v)?,
            "patch_size" => self.patch_size = p(key, v)?,
            "norm" => self.norm = v.parse()?,
            "n_cycles" => self.n_cycles = p(key, v)?,
            "t_micro" => self.t_micro = p(key, v)?,
            "m_train" => self.m_train = p(key, v)?,
            "m_eval" => self.m_eval = p(key, v)?,
            "state_seed" => self.state_seed = p(key, v)?,
            "eval_states" => self.eval_states = v.parse()?,
            "halt_threshold" => self.halt_threshold = opt(key, v)?,
            "cnn_widths" => {
                self.cnn_widths = v
                    .split(',')
                    .map(|w| p(key, w.trim()))
                    .collect::<Result<_>>()?
            }
            "convs_per_stage" => self.convs_per_stage = p(key, v)?,
            "train_limit" => self.train_limit = opt(key, v)?,
            "test_limit" => self.test_limit = opt(key, v)?,
            "error_tiles" => self.error_tiles = p(key, v)?,
            "smooth_window" => self.smooth_window = p(key, v)?,
            "log_every" => self.log_every = p(key, v)?,
            "data_dir" => self.data_dir = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Settings as ordered `key → value` text.
    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        fn o<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or("none".into(), T::to_string)
        }
        let widths: Vec<String> = self.cnn_widths.iter().map(usize::to_string).collect();
        BTreeMap::from([
            ("model", self.model.to_string()),
            ("dataset", self.dataset.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("clip", self.clip.to_string()),
            ("warmup_epochs", self.warmup_epochs.to_string()),
            ("lr_floor", self.lr_floor.to_string()),
            ("label_smoothing", self.label_smoothing.to_string()),
            ("schedule_unit", self.schedule_unit.to_string()),
            ("d_model", self.d_model.to_string()),
            ("n_heads", self.n_heads.to_string()),
            ("low_layers", self.low_layers.to_string()),
            ("high_layers", self.high_layers.to_string()),
            ("mlp_mult", self.mlp_mult.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("norm", self.norm.to_string()),
            ("n_cycles", self.n_cycles.to_string()),
            ("t_micro", self.t_micro.to_string()),
            ("m_train", self.m_train.to_string()),
            ("m_eval", self.m_eval.to_string()),
            ("state_seed", self.state_seed.to_string()),
            ("eval_states", self.eval_states.to_string()),
            ("halt_threshold", o(&self.halt_threshold)),
            ("cnn_widths", widths.join(",")),
            ("convs_per_stage", self.convs_per_stage.to_string()),
            ("train_limit", o(&self.train_limit)),
            ("test_limit", o(&self.test_limit)),
            ("error_tiles", self.error_tiles.to_string()),
            ("smooth_window", self.smooth_window.to_string()),
            ("log_every", self.log_every.to_string()),
            ("data_dir", self.data_dir.display().to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ])
    }

    pub fn to_text(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses `key=value` lines; `#` starts a comment.
    ///
    /// `model` and `dataset` are read first so the remaining keys override
    /// the matching defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Later pairs win; `model` and `dataset` pick the defaults first.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let find = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let model = find("model").unwrap_or("hrm").parse()?;
        let dataset = find("dataset").unwrap_or("mnist").parse()?;
        let mut cfg = Self::defaults(model, dataset);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }
}

/// `key=value` lines with `#` comments and blank lines skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
