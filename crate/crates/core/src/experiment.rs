//! End-to-end desk-scale experiments: synthetic task, wide teacher, student
//! training under each method, and the interpolation-weight sweep.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::math::fixed6;
use crate::toy::{
    derive_seed, evaluate, generate_data, heads_for, predict_logits, train, Dataset, Evaluation,
    Method, SyntheticTask, TeacherOutputs, ToyNetwork, TrainConfig, TrainOutcome,
};

/// Id of the teacher trained on the fine labels.
pub const FINE_TEACHER: &str = "fine";
/// Id of the teacher trained on coarse labels (hierarchical runs only).
pub const COARSE_TEACHER: &str = "coarse";

const STREAM_TASK: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_TEACHER_DATA: u64 = 3;
const STREAM_TEACHER_INIT: u64 = 4;
const STREAM_TEACHER_SHUFFLE: u64 = 5;
const STREAM_STUDENT_INIT: u64 = 6;
const STREAM_STUDENT_SHUFFLE: u64 = 7;
const STREAM_COARSE_INIT: u64 = 8;
const STREAM_COARSE_SHUFFLE: u64 = 9;
const STREAM_TEACHER_VIEW: u64 = 10;
const STREAM_TEACHER_QUERY: u64 = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_classes: usize,
    /// Size of the coarse inventory used by the hierarchical teacher.
    pub coarse_classes: usize,
    pub input_dim: usize,
    pub hidden: usize,
    /// Spread of coarse-group centres.
    pub group_scale: f64,
    /// Spread of fine-class means around their group centre.
    pub within_scale: f64,
    /// Input noise of the training (and teacher) data.
    pub noise_sigma: f64,
    /// Input noise of the evaluation data; larger than `noise_sigma` makes
    /// the test set harder than the training set.
    pub test_noise_sigma: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub teacher_width_factor: usize,
    pub teacher_data_factor: usize,
    pub teacher_epochs: usize,
    /// Extra input noise seen only by the teachers, so they observe each
    /// sample through a different channel than the student.
    pub teacher_view_sigma: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lst_temperature: f64,
    pub multitask_temperature: f64,
    pub epsilon: f64,
    pub bins: usize,
    /// Adds a coarse-label teacher and a matching head to multitask runs.
    pub hierarchical: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            coarse_classes: 3,
            input_dim: 16,
            hidden: 32,
            group_scale: 3.0,
            within_scale: 0.3,
            noise_sigma: 0.7,
            test_noise_sigma: 1.2,
            n_train: 2000,
            n_test: 10000,
            teacher_width_factor: 4,
            teacher_data_factor: 10,
            teacher_epochs: 10,
            teacher_view_sigma: 3.0,
            epochs: 40,
            learning_rate: 0.1,
            batch_size: 32,
            lst_temperature: 5.0,
            multitask_temperature: 1.0,
            epsilon: 0.2,
            bins: 15,
            hierarchical: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 3 {
            return Err(Error::Config(
                "at least 3 classes are needed for top-3 calibration".into(),
            ));
        }
        if !(2..self.num_classes).contains(&self.coarse_classes) {
            return Err(Error::Config(
                "coarse classes must lie in 2..num_classes".into(),
            ));
        }
        let sizes = [
            self.input_dim,
            self.hidden,
            self.n_train,
            self.n_test,
            self.teacher_width_factor,
            self.teacher_data_factor,
            self.teacher_epochs,
            self.epochs,
            self.batch_size,
            self.bins,
        ];
        if sizes.contains(&0) {
            return Err(Error::Config(
                "sizes, epochs and bins must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0
            && self.lst_temperature > 0.0
            && self.multitask_temperature > 0.0)
        {
            return Err(Error::Config(
                "learning rate and temperatures must be positive".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0
            && self.test_noise_sigma >= 0.0
            && self.teacher_view_sigma >= 0.0)
        {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(())
    }

    /// Training configuration for the student under `method`.
    pub fn train_config(&self, method: Method, seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: derive_seed(seed, STREAM_STUDENT_SHUFFLE),
        }
    }

    pub fn lst(&self, lambda: f64) -> Method {
        Method::Lst {
            lambda,
            temperature: self.lst_temperature,
        }
    }

    pub fn multitask(&self, lambda: f64) -> Method {
        Method::Multitask {
            lambda,
            temperature: self.multitask_temperature,
        }
    }
}

/// Everything shared by the students of one seed.
#[derive(Debug, Clone)]
pub struct SeedContext {
    pub seed: u64,
    pub task: SyntheticTask,
    pub train: Dataset,
    pub test: Dataset,
    /// Teacher logits on `train`; empty when built without teachers.
    pub teachers: Vec<TeacherOutputs>,
}

fn train_teacher(
    cfg: &ExperimentConfig,
    data: &Dataset,
    seed: u64,
    init_stream: u64,
    shuffle_stream: u64,
) -> Result<ToyNetwork> {
    let net = ToyNetwork::new(
        cfg.input_dim,
        cfg.hidden * cfg.teacher_width_factor,
        &[(crate::toy::SL_HEAD, data.num_classes)],
        derive_seed(seed, init_stream),
    )?;
    let tc = TrainConfig {
        method: Method::Baseline,
        epochs: cfg.teacher_epochs,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        seed: derive_seed(seed, shuffle_stream),
    };
    Ok(train(net, data, &[], &tc)?.network)
}

impl SeedContext {
    pub fn new(cfg: &ExperimentConfig, seed: u64, with_teachers: bool) -> Result<Self> {
        cfg.validate()?;
        let task = SyntheticTask::hierarchical(
            cfg.num_classes,
            cfg.coarse_classes,
            cfg.input_dim,
            cfg.group_scale,
            cfg.within_scale,
            cfg.noise_sigma,
            derive_seed(seed, STREAM_TASK),
        )?;
        let train = generate_data(&task, cfg.n_train, derive_seed(seed, STREAM_TRAIN))?;
        let test_task = SyntheticTask {
            noise_sigma: cfg.test_noise_sigma,
            ..task.clone()
        };
        let test = generate_data(&test_task, cfg.n_test, derive_seed(seed, STREAM_TEST))?;
        let mut teachers = Vec::new();
        if with_teachers {
            let teacher_data = generate_data(
                &task,
                cfg.n_train * cfg.teacher_data_factor,
                derive_seed(seed, STREAM_TEACHER_DATA),
            )?
            .with_extra_noise(
                cfg.teacher_view_sigma,
                derive_seed(seed, STREAM_TEACHER_VIEW),
            );
            let query = train.with_extra_noise(
                cfg.teacher_view_sigma,
                derive_seed(seed, STREAM_TEACHER_QUERY),
            );
            let fine = train_teacher(
                cfg,
                &teacher_data,
                seed,
                STREAM_TEACHER_INIT,
                STREAM_TEACHER_SHUFFLE,
            )?;
            teachers.push(TeacherOutputs {
                id: FINE_TEACHER.into(),
                logits: predict_logits(&fine, &query, 0)?,
            });
            if cfg.hierarchical {
                let map = task
                    .coarse_map
                    .as_deref()
                    .expect("hierarchical task carries a coarse map");
                let coarse = train_teacher(
                    cfg,
                    &teacher_data.relabel(map),
                    seed,
                    STREAM_COARSE_INIT,
                    STREAM_COARSE_SHUFFLE,
                )?;
                teachers.push(TeacherOutputs {
                    id: COARSE_TEACHER.into(),
                    logits: predict_logits(&coarse, &query, 0)?,
                });
            }
        }
        Ok(Self {
            seed,
            task,
            train,
            test,
            teachers,
        })
    }

    /// Builds, trains and evaluates (ranks 1–3) a student under `method`.
    pub fn run(
        &self,
        cfg: &ExperimentConfig,
        method: Method,
    ) -> Result<(TrainOutcome, Evaluation)> {
        let teacher_dims: Vec<(&str, usize)> = self
            .teachers
            .iter()
            .map(|t| (t.id.as_str(), t.logits.first().map_or(0, |l| l.len())))
            .collect();
        let heads = heads_for(method, cfg.num_classes, &teacher_dims);
        let head_refs: Vec<(&str, usize)> = heads.iter().map(|(n, k)| (n.as_str(), *k)).collect();
        let net = ToyNetwork::new(
            cfg.input_dim,
            cfg.hidden,
            &head_refs,
            derive_seed(self.seed, STREAM_STUDENT_INIT),
        )?;
        let teachers: &[TeacherOutputs] = match method {
            Method::Lst { .. } => &self.teachers[..self.teachers.len().min(1)],
            Method::Multitask { .. } => &self.teachers,
            _ => &[],
        };
        let outcome = train(
            net,
            &self.train,
            teachers,
            &cfg.train_config(method, self.seed),
        )?;
        let eval = evaluate(&outcome.network, &self.test, &[1, 2, 3], cfg.bins)?;
        Ok((outcome, eval))
    }
}

/// One cell of the interpolation-weight sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: &'static str,
    pub lambda: f64,
    pub seed: u64,
    pub accuracy: f64,
    /// ECE for ranks 1, 2 and 3.
    pub ece: [f64; 3],
}

/// Trains one student per (seed, method, λ) and records accuracy and top-3
/// ECE. Rows are ordered seed-major, then method, then λ.
pub fn sweep_lambda(
    cfg: &ExperimentConfig,
    lambdas: &[f64],
    methods: &[Method],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || methods.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidInput(
            "sweep needs at least one lambda, method and seed".into(),
        ));
    }
    if let Some(m) = methods.iter().find(|m| !m.needs_teacher()) {
        return Err(Error::InvalidInput(format!(
            "method `{}` has no lambda to sweep",
            m.name()
        )));
    }
    let mut rows = Vec::with_capacity(lambdas.len() * methods.len() * seeds.len());
    for &seed in seeds {
        let ctx = SeedContext::new(cfg, seed, true)?;
        for method in methods {
            for &lambda in lambdas {
                let (_, eval) = ctx.run(cfg, method.with_lambda(lambda))?;
                rows.push(SweepRow {
                    method: method.name(),
                    lambda,
                    seed,
                    accuracy: eval.accuracy,
                    ece: [
                        eval.reports[0].ece,
                        eval.reports[1].ece,
                        eval.reports[2].ece,
                    ],
                });
            }
        }
    }
    Ok(rows)
}

/// Results table with header `method,lambda,seed,acc,ece1,ece2,ece3`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("method,lambda,seed,acc,ece1,ece2,ece3\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            fixed6(r.lambda),
            r.seed,
            fixed6(r.accuracy),
            fixed6(r.ece[0]),
            fixed6(r.ece[1]),
            fixed6(r.ece[2])
        );
    }
    out
}
