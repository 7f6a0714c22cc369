//! Distillation losses with analytic gradients with respect to student logits.
//!
//! Every loss here is a cross-entropy against some target distribution, so
//! the gradient is always `softmax(u) − target` scaled by the term's weight.
//! The teacher side of knowledge distillation is softened by `T`; the student
//! side is not.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, LOG_FLOOR};
use crate::prob::{log_softmax_raw, softmax_raw, LogitVector, ProbVector};
use crate::targets::{interpolate_target, one_hot, soft_label, HardLabel, InterpolationConfig};

/// Loss value in nats and its gradient with respect to the student logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Distance between teacher and student distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    Kld,
    CrossEntropy,
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `−Σ target_i · log softmax(u)_i`, gradient `softmax(u) − target`.
pub fn cross_entropy(student: &LogitVector, target: &ProbVector) -> Result<LossResult> {
    check_dims(student.len(), target.len())?;
    Ok(cross_entropy_raw(student.as_slice(), target.as_slice()))
}

/// Unchecked form used by the training loop.
pub(crate) fn cross_entropy_raw(u: &[f64], target: &[f64]) -> LossResult {
    let log_p = log_softmax_raw(u, 1.0);
    let value = -target
        .iter()
        .zip(&log_p)
        .filter(|(&t, _)| t != 0.0)
        .map(|(&t, &lp)| t * lp.max(math::ln(LOG_FLOOR)))
        .sum::<f64>();
    let p = softmax_raw(u, 1.0);
    let grad = p.iter().zip(target).map(|(&p, &t)| p - t).collect();
    LossResult {
        value: value.max(0.0),
        grad,
    }
}

/// Knowledge-distillation loss between `softmax(v / T)` and `softmax(u)`.
///
/// The cross-entropy form is `CE(u, softmax(v/T))`; the KLD form subtracts the
/// (student-independent) entropy of the soft label, so both forms share one
/// gradient.
pub fn kd_loss(
    student: &LogitVector,
    teacher: &LogitVector,
    temperature: f64,
    distance: Distance,
) -> Result<LossResult> {
    check_dims(student.len(), teacher.len())?;
    let soft = soft_label(teacher, temperature)?;
    kd_loss_from_soft(student, &soft, distance)
}

/// [`kd_loss`] with the teacher distribution already softened.
pub fn kd_loss_from_soft(
    student: &LogitVector,
    soft: &ProbVector,
    distance: Distance,
) -> Result<LossResult> {
    let mut res = cross_entropy(student, soft)?;
    if distance == Distance::Kld {
        res.value = (res.value - soft.entropy()).max(0.0);
    }
    Ok(res)
}

/// Label-interpolation distillation: cross-entropy against
/// `λ · one_hot + (1 − λ) · softmax(v / T)`.
pub fn lst_loss(
    student: &LogitVector,
    hard: HardLabel,
    teacher: &LogitVector,
    cfg: InterpolationConfig,
) -> Result<LossResult> {
    check_dims(student.len(), teacher.len())?;
    let soft = soft_label(teacher, cfg.temperature())?;
    lst_loss_from_soft(student, hard, &soft, cfg.lambda())
}

pub fn lst_loss_from_soft(
    student: &LogitVector,
    hard: HardLabel,
    soft: &ProbVector,
    lambda: f64,
) -> Result<LossResult> {
    let target = interpolate_target(hard, soft, lambda)?;
    cross_entropy(student, &target)
}

/// The same objective written as `λ · CE(u, one_hot) + (1 − λ) · KD(u, v)`.
///
/// With [`Distance::CrossEntropy`] this equals [`lst_loss`]; with
/// [`Distance::Kld`] it is lower by `(1 − λ) · H(softmax(v / T))` and has the
/// same gradient.
pub fn lst_loss_weighted_sum(
    student: &LogitVector,
    hard: HardLabel,
    teacher: &LogitVector,
    cfg: InterpolationConfig,
    distance: Distance,
) -> Result<LossResult> {
    check_dims(student.len(), hard.num_classes())?;
    let lambda = cfg.lambda();
    let ce = cross_entropy(student, &one_hot(hard))?;
    let kd = kd_loss(student, teacher, cfg.temperature(), distance)?;
    let grad = ce
        .grad
        .iter()
        .zip(&kd.grad)
        .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Ok(LossResult {
        value: lambda * ce.value + (1.0 - lambda) * kd.value,
        grad,
    })
}

/// Student outputs of a multi-head network: one supervised head and one
/// distillation head per teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskLogits {
    pub sl_logits: LogitVector,
    pub kd_logits: Vec<(String, LogitVector)>,
}

/// A teacher's raw outputs and the temperature used to soften them.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherLogits {
    pub id: String,
    pub logits: LogitVector,
    pub temperature: f64,
}

/// Multi-task loss with per-head gradients. `kd_grads` follows the order of
/// `MultiTaskLogits::kd_logits`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskLoss {
    pub value: f64,
    pub sl_grad: Vec<f64>,
    pub kd_grads: Vec<(String, Vec<f64>)>,
}

impl MultiTaskLoss {
    /// SL gradient followed by each KD head's gradient.
    pub fn flat_grad(&self) -> Vec<f64> {
        let mut g = self.sl_grad.clone();
        for (_, kd) in &self.kd_grads {
            g.extend_from_slice(kd);
        }
        g
    }
}

/// `λ · CE(u_SL, one_hot) + (1 − λ) · mean_t CE(u_KD_t, softmax(v_t / T_t))`.
///
/// Each head only sees its own term: the SL gradient carries `λ`, each KD
/// gradient carries `(1 − λ) / #teachers`. With no teachers the KD term is
/// absent.
pub fn multitask_loss(
    logits: &MultiTaskLogits,
    hard: HardLabel,
    teachers: &[TeacherLogits],
    lambda: f64,
) -> Result<MultiTaskLoss> {
    let mut soft = Vec::with_capacity(teachers.len());
    for t in teachers {
        soft.push((t.id.clone(), soft_label(&t.logits, t.temperature)?));
    }
    multitask_loss_from_soft(logits, hard, &soft, lambda)
}

/// [`multitask_loss`] with teacher distributions already softened.
pub fn multitask_loss_from_soft(
    logits: &MultiTaskLogits,
    hard: HardLabel,
    soft: &[(String, ProbVector)],
    lambda: f64,
) -> Result<MultiTaskLoss> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    if logits.kd_logits.len() != soft.len() {
        return Err(Error::InvalidInput(format!(
            "{} distillation heads but {} teachers",
            logits.kd_logits.len(),
            soft.len()
        )));
    }
    let mut ordered = Vec::with_capacity(soft.len());
    for (id, _) in &logits.kd_logits {
        let mut hits = soft.iter().filter(|(tid, _)| tid == id);
        match (hits.next(), hits.next()) {
            (Some((_, p)), None) => ordered.push(p),
            (None, _) => return Err(Error::InvalidInput(format!("no teacher for head `{id}`"))),
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(format!("teacher `{id}` given twice")))
            }
        }
    }

    let sl = cross_entropy(&logits.sl_logits, &one_hot(hard))?;
    let mut value = lambda * sl.value;
    let sl_grad = sl.grad.iter().map(|&g| lambda * g).collect();

    let kd_weight = if soft.is_empty() {
        0.0
    } else {
        (1.0 - lambda) / soft.len() as f64
    };
    let mut kd_grads = Vec::with_capacity(soft.len());
    for ((id, head), target) in logits.kd_logits.iter().zip(ordered) {
        let kd = cross_entropy(head, target)?;
        value += kd_weight * kd.value;
        kd_grads.push((id.clone(), kd.grad.iter().map(|&g| kd_weight * g).collect()));
    }
    Ok(MultiTaskLoss {
        value,
        sl_grad,
        kd_grads,
    })
}

/// Largest per-coordinate relative error between the analytic gradient
/// returned by `loss` and central differences with step `h`.
///
/// Relative error is `|analytic − numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(loss: F, point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss(point);
    let mut x = point.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = loss(&x).0;
        x[i] = orig - h;
        let minus = loss(&x).0;
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
