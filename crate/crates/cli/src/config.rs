//! Run configuration: one `key = value` structured-text file plus flag
//! overrides. The effective config (after overrides) has a canonical text
//! rendering whose hash is stamped into every output file.

use std::fs;
use std::path::{Path, PathBuf};

use advtext_core::error::{Error, Result};
use advtext_core::hash::fnv1a;
use advtext_core::linalg::NormOrder;
use advtext_core::optim::OptimizerKind;
use advtext_core::perturb::PerturbTrainConfig;
use advtext_core::text::TsvSchema;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train_tsv: PathBuf,
    pub test_tsv: Option<PathBuf>,
    pub text_cols: Vec<usize>,
    pub label_col: usize,
    pub has_header: bool,
    pub min_count: usize,
    pub eval_ratio: f64,

    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub classifier_lr: f64,
    pub classifier_epochs: usize,
    pub classifier_batch: usize,
    pub classifier_optimizer: String,
    pub classifier_momentum: f64,
    pub classifier_patience: usize,

    pub eps: f64,
    pub p: NormOrder,
    pub attack_lr: f64,
    pub attack_epochs: usize,
    pub attack_batch: usize,
    pub normalize_gradients: bool,
    pub attack_optimizer: String,
    pub attack_momentum: f64,
    pub attack_patience: usize,
    pub eps_grid: Vec<f64>,

    pub ni_k: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train_tsv: PathBuf::new(),
            test_tsv: None,
            text_cols: vec![0],
            label_col: 1,
            has_header: false,
            min_count: 1,
            eval_ratio: 0.1,
            embed_dim: 16,
            hidden_dim: 16,
            classifier_lr: 0.01,
            classifier_epochs: 30,
            classifier_batch: 32,
            classifier_optimizer: "adam".into(),
            classifier_momentum: 0.9,
            classifier_patience: 10,
            eps: 0.15,
            p: NormOrder::L2,
            attack_lr: 0.05,
            attack_epochs: 20,
            attack_batch: 32,
            normalize_gradients: true,
            attack_optimizer: "adam".into(),
            attack_momentum: 0.9,
            attack_patience: 5,
            eps_grid: vec![0.05, 0.1, 0.15, 0.2],
            ni_k: 5,
            seed: 42,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Parse {
            line,
            message: format!("expected true/false, got {value:?}"),
        }),
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, what: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what}: {value:?}"),
    })
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| parse_num(item.trim(), line, what))
        .collect()
}

fn optimizer_name(value: &str, line: usize) -> Result<String> {
    match value {
        "adam" | "sgd" | "plain" => Ok(value.to_string()),
        _ => Err(Error::Parse {
            line,
            message: format!("unknown optimizer {value:?} (adam, sgd, plain)"),
        }),
    }
}

impl RunConfig {
    /// Parses a config file. Unknown keys are errors so typos cannot be
    /// silently ignored.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        let mut saw_train = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or(Error::Parse {
                line,
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "train_tsv" => {
                    config.train_tsv = PathBuf::from(value);
                    saw_train = true;
                }
                "test_tsv" => config.test_tsv = Some(PathBuf::from(value)),
                "text_cols" => config.text_cols = parse_list(value, line, "column index")?,
                "label_col" => config.label_col = parse_num(value, line, "column index")?,
                "has_header" => config.has_header = parse_bool(value, line)?,
                "min_count" => config.min_count = parse_num(value, line, "count")?,
                "eval_ratio" => config.eval_ratio = parse_num(value, line, "ratio")?,
                "embed_dim" => config.embed_dim = parse_num(value, line, "dimension")?,
                "hidden_dim" => config.hidden_dim = parse_num(value, line, "dimension")?,
                "classifier_lr" => config.classifier_lr = parse_num(value, line, "rate")?,
                "classifier_epochs" => config.classifier_epochs = parse_num(value, line, "count")?,
                "classifier_batch" => config.classifier_batch = parse_num(value, line, "count")?,
                "classifier_optimizer" => {
                    config.classifier_optimizer = optimizer_name(value, line)?
                }
                "classifier_momentum" => {
                    config.classifier_momentum = parse_num(value, line, "momentum")?
                }
                "classifier_patience" => {
                    config.classifier_patience = parse_num(value, line, "count")?
                }
                "eps" => config.eps = parse_num(value, line, "eps")?,
                "p" => {
                    config.p = NormOrder::parse(value).ok_or(Error::Parse {
                        line,
                        message: format!("bad norm order {value:?} (2 or inf)"),
                    })?
                }
                "attack_lr" => config.attack_lr = parse_num(value, line, "rate")?,
                "attack_epochs" => config.attack_epochs = parse_num(value, line, "count")?,
                "attack_batch" => config.attack_batch = parse_num(value, line, "count")?,
                "normalize_gradients" => config.normalize_gradients = parse_bool(value, line)?,
                "attack_optimizer" => config.attack_optimizer = optimizer_name(value, line)?,
                "attack_momentum" => config.attack_momentum = parse_num(value, line, "momentum")?,
                "attack_patience" => config.attack_patience = parse_num(value, line, "count")?,
                "eps_grid" => config.eps_grid = parse_list(value, line, "eps")?,
                "ni_k" => config.ni_k = parse_num(value, line, "count")?,
                "seed" => config.seed = parse_num(value, line, "seed")?,
                "out_dir" => config.out_dir = PathBuf::from(value),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key {key:?}"),
                    })
                }
            }
        }
        if !saw_train {
            return Err(Error::Format(format!(
                "{}: missing required key train_tsv",
                path.display()
            )));
        }
        Ok(config)
    }

    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<PathBuf>) {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.out_dir = out;
        }
    }

    /// The effective configuration as deterministic text; its FNV hash is
    /// the provenance stamp carried by every output.
    pub fn canonical_text(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let cols = self
            .text_cols
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "train_tsv = {}\n\
             test_tsv = {}\n\
             text_cols = {}\n\
             label_col = {}\n\
             has_header = {}\n\
             min_count = {}\n\
             eval_ratio = {}\n\
             embed_dim = {}\n\
             hidden_dim = {}\n\
             classifier_lr = {}\n\
             classifier_epochs = {}\n\
             classifier_batch = {}\n\
             classifier_optimizer = {}\n\
             classifier_momentum = {}\n\
             classifier_patience = {}\n\
             eps = {}\n\
             p = {}\n\
             attack_lr = {}\n\
             attack_epochs = {}\n\
             attack_batch = {}\n\
             normalize_gradients = {}\n\
             attack_optimizer = {}\n\
             attack_momentum = {}\n\
             attack_patience = {}\n\
             eps_grid = {}\n\
             ni_k = {}\n\
             seed = {}\n\
             out_dir = {}\n",
            self.train_tsv.display(),
            self.test_tsv
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            cols,
            self.label_col,
            self.has_header,
            self.min_count,
            self.eval_ratio,
            self.embed_dim,
            self.hidden_dim,
            self.classifier_lr,
            self.classifier_epochs,
            self.classifier_batch,
            self.classifier_optimizer,
            self.classifier_momentum,
            self.classifier_patience,
            self.eps,
            self.p,
            self.attack_lr,
            self.attack_epochs,
            self.attack_batch,
            self.normalize_gradients,
            self.attack_optimizer,
            self.attack_momentum,
            self.attack_patience,
            join(&self.eps_grid),
            self.ni_k,
            self.seed,
            self.out_dir.display(),
        )
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a(self.canonical_text().as_bytes())
    }

    pub fn schema(&self) -> TsvSchema {
        TsvSchema {
            text_cols: self.text_cols.clone(),
            label_col: self.label_col,
            has_header: self.has_header,
        }
    }

    fn optimizer(name: &str, momentum: f64) -> OptimizerKind {
        match name {
            "sgd" => OptimizerKind::Sgd { momentum },
            "plain" => OptimizerKind::Plain,
            _ => OptimizerKind::adam_default(),
        }
    }

    pub fn classifier_optimizer_kind(&self) -> OptimizerKind {
        Self::optimizer(&self.classifier_optimizer, self.classifier_momentum)
    }

    pub fn attack_optimizer_kind(&self) -> OptimizerKind {
        Self::optimizer(&self.attack_optimizer, self.attack_momentum)
    }

    pub fn perturb_config(&self) -> PerturbTrainConfig {
        PerturbTrainConfig {
            eps: self.eps,
            p: self.p,
            learning_rate: self.attack_lr,
            epochs: self.attack_epochs,
            batch_size: self.attack_batch,
            normalize_gradients: self.normalize_gradients,
            optimizer: self.attack_optimizer_kind(),
            early_stop_patience: self.attack_patience,
            seed: self.seed,
        }
    }

    /// Checks everything a command relies on before any work starts.
    pub fn validate(&self, needs_test: bool) -> Result<()> {
        if !self.train_tsv.is_file() {
            return Err(Error::InvalidInput(format!(
                "train_tsv does not exist: {}",
                self.train_tsv.display()
            )));
        }
        match (&self.test_tsv, needs_test) {
            (Some(path), _) if !path.is_file() => {
                return Err(Error::InvalidInput(format!(
                    "test_tsv does not exist: {}",
                    path.display()
                )));
            }
            (None, true) => {
                return Err(Error::InvalidInput(
                    "this command needs test_tsv in the config".into(),
                ));
            }
            _ => {}
        }
        if self.eval_ratio.is_nan() || self.eval_ratio <= 0.0 || self.eval_ratio >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "eval_ratio must be in (0, 1), got {}",
                self.eval_ratio
            )));
        }
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|&e| e.is_nan() || e <= 0.0) {
            return Err(Error::InvalidInput(
                "eps_grid must be non-empty and positive".into(),
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.ni_k == 0 {
            return Err(Error::InvalidInput("ni_k must be at least 1".into()));
        }
        Ok(())
    }
}
