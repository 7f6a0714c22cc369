//! `key=value` run configuration shared by `train` and `sweep`.

use std::path::Path;
use std::str::FromStr;

use distill_core::experiment::ExperimentConfig;
use distill_core::toy::Method;

use crate::error::{CliError, CliResult};
use crate::formats::parse_config;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Method for `train`.
    pub method: String,
    pub lambda: f64,
    pub seed: u64,
    /// Grid for `sweep`.
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            method: "baseline".into(),
            lambda: 0.5,
            seed: 1,
            lambdas: (1..=9).map(|i| i as f64 / 10.0).collect(),
            seeds: vec![1, 2, 3],
            methods: vec!["lst".into(), "multitask".into()],
        }
    }
}

fn value<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
    let items: Vec<T> = v
        .split(',')
        .map(|s| value(s.trim()))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        let Some(path) = path else { return Ok(cfg) };
        for (line, key, v) in parse_config(path)? {
            cfg.set(&key, &v)
                .map_err(|msg| CliError::parse(path, line, format!("{key}: {msg}")))?;
        }
        cfg.experiment
            .validate()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let e = &mut self.experiment;
        match key {
            "num_classes" => e.num_classes = value(v)?,
            "coarse_classes" => e.coarse_classes = value(v)?,
            "input_dim" => e.input_dim = value(v)?,
            "hidden" => e.hidden = value(v)?,
            "group_scale" => e.group_scale = value(v)?,
            "within_scale" => e.within_scale = value(v)?,
            "noise_sigma" => e.noise_sigma = value(v)?,
            "test_noise_sigma" => e.test_noise_sigma = value(v)?,
            "n_train" => e.n_train = value(v)?,
            "n_test" => e.n_test = value(v)?,
            "teacher_width_factor" => e.teacher_width_factor = value(v)?,
            "teacher_data_factor" => e.teacher_data_factor = value(v)?,
            "teacher_epochs" => e.teacher_epochs = value(v)?,
            "teacher_view_sigma" => e.teacher_view_sigma = value(v)?,
            "epochs" => e.epochs = value(v)?,
            "learning_rate" => e.learning_rate = value(v)?,
            "batch_size" => e.batch_size = value(v)?,
            "lst_temperature" => e.lst_temperature = value(v)?,
            "multitask_temperature" => e.multitask_temperature = value(v)?,
            "epsilon" => e.epsilon = value(v)?,
            "bins" => e.bins = value(v)?,
            "hierarchical" => e.hierarchical = value(v)?,
            "method" => {
                self.method = v.to_string();
                self.method(0.0)?;
            }
            "lambda" => self.lambda = value(v)?,
            "seed" => self.seed = value(v)?,
            "lambdas" => self.lambdas = list(v)?,
            "seeds" => self.seeds = list(v)?,
            "methods" => {
                self.methods = list(v)?;
                for m in &self.methods.clone() {
                    if !matches!(m.as_str(), "lst" | "multitask") {
                        return Err(format!("`{m}` cannot be swept; use lst or multitask"));
                    }
                }
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// The configured method with interpolation weight `lambda`.
    pub fn method(&self, lambda: f64) -> Result<Method, String> {
        method_by_name(&self.experiment, &self.method, lambda)
    }
}

pub fn method_by_name(cfg: &ExperimentConfig, name: &str, lambda: f64) -> Result<Method, String> {
    Ok(match name {
        "baseline" => Method::Baseline,
        "label_smooth" => Method::LabelSmooth {
            epsilon: cfg.epsilon,
        },
        "lst" => cfg.lst(lambda),
        "multitask" => cfg.multitask(lambda),
        other => return Err(format!("unknown method `{other}`")),
    })
}
