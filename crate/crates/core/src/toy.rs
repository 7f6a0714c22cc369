//! A small shared-trunk, multi-head classifier trained with plain SGD.
//!
//! `input → tanh(W₀x + b₀) → {head_k(h) = W_k h + b_k}`. Gradients are
//! written out by hand; the per-head loss gradients come from
//! [`crate::losses`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calibration::{ece, PredictionRecord, ReliabilityReport};
use crate::error::{Error, Result};
use crate::losses::{cross_entropy, multitask_loss_from_soft, MultiTaskLogits};
use crate::math;
use crate::prob::{argmax, softmax_raw, LogitVector, ProbVector};
use crate::targets::{
    interpolate_target, one_hot, smooth_label, soft_label, HardLabel, SmoothingConfig,
};

/// Name of the supervised head.
pub const SL_HEAD: &str = "sl";

/// Seed mixer so that one user seed can drive several independent streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Affine layer with row-major `outputs × inputs` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `[−s, s]` with `s = 1/√inputs`, weights then bias.
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = 1.0 / math::sqrt(inputs as f64);
        let mut draw = || rng.random_range(-s..=s);
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            out.push(b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub name: String,
    pub layer: Dense,
}

/// Shared tanh trunk with named linear heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetwork {
    pub trunk: Dense,
    pub heads: Vec<Head>,
    pub seed: u64,
}

impl ToyNetwork {
    /// Random initialization from `seed`: trunk first, then heads in order,
    /// so networks that share a prefix of head specs share those weights.
    pub fn new(
        input_dim: usize,
        hidden: usize,
        heads: &[(&str, usize)],
        seed: u64,
    ) -> Result<Self> {
        Self::check_shapes(input_dim, hidden, heads)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = Dense::init(input_dim, hidden, &mut rng);
        let heads = heads
            .iter()
            .map(|&(name, k)| Head {
                name: name.into(),
                layer: Dense::init(hidden, k, &mut rng),
            })
            .collect();
        Ok(Self { trunk, heads, seed })
    }

    pub fn zeros(input_dim: usize, hidden: usize, heads: &[(&str, usize)]) -> Result<Self> {
        Self::check_shapes(input_dim, hidden, heads)?;
        Ok(Self {
            trunk: Dense::zeros(input_dim, hidden),
            heads: heads
                .iter()
                .map(|&(name, k)| Head {
                    name: name.into(),
                    layer: Dense::zeros(hidden, k),
                })
                .collect(),
            seed: 0,
        })
    }

    fn check_shapes(input_dim: usize, hidden: usize, heads: &[(&str, usize)]) -> Result<()> {
        if input_dim == 0 || hidden == 0 || heads.is_empty() {
            return Err(Error::InvalidParameter(
                "network needs positive input and hidden sizes and at least one head".into(),
            ));
        }
        for (i, (name, k)) in heads.iter().enumerate() {
            if *k < 2 {
                return Err(Error::InvalidParameter(format!(
                    "head `{name}` needs at least 2 classes"
                )));
            }
            if heads[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate head name `{name}`"
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.inputs
    }

    pub fn hidden(&self) -> usize {
        self.trunk.outputs
    }

    pub fn head_index(&self, name: &str) -> Option<usize> {
        self.heads.iter().position(|h| h.name == name)
    }

    /// The supervised head, falling back to the first head.
    pub fn sl_head_index(&self) -> usize {
        self.head_index(SL_HEAD).unwrap_or(0)
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.hidden());
        self.trunk.apply(x, &mut h);
        for v in &mut h {
            *v = math::tanh(*v);
        }
        h
    }

    fn forward_raw(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let h = self.hidden_activations(x);
        let outs = self
            .heads
            .iter()
            .map(|head| {
                let mut o = Vec::with_capacity(head.layer.outputs);
                head.layer.apply(&h, &mut o);
                o
            })
            .collect();
        (h, outs)
    }

    /// Logits of every head, in head order.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<LogitVector>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let (_, outs) = self.forward_raw(x);
        outs.into_iter().map(LogitVector::new).collect()
    }

    /// Logits of one head only.
    pub fn head_logits(&self, x: &[f64], head: usize) -> Vec<f64> {
        let h = self.hidden_activations(x);
        let mut o = Vec::new();
        self.heads[head].layer.apply(&h, &mut o);
        o
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count()
            + self
                .heads
                .iter()
                .map(|h| h.layer.param_count())
                .sum::<usize>()
    }

    /// Parameters in the order trunk weights, trunk bias, then each head's
    /// weights and bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for layer in self.layers() {
            p.extend_from_slice(&layer.weights);
            p.extend_from_slice(&layer.bias);
        }
        p
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let mut rest = params;
        for layer in self.layers_mut() {
            let (w, r) = rest.split_at(layer.weights.len());
            layer.weights.copy_from_slice(w);
            let (b, r) = r.split_at(layer.bias.len());
            layer.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        core::iter::once(&self.trunk).chain(self.heads.iter().map(|h| &h.layer))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        core::iter::once(&mut self.trunk).chain(self.heads.iter_mut().map(|h| &mut h.layer))
    }

    fn zero_like(&self) -> ToyNetwork {
        ToyNetwork {
            trunk: Dense::zeros(self.trunk.inputs, self.trunk.outputs),
            heads: self
                .heads
                .iter()
                .map(|h| Head {
                    name: h.name.clone(),
                    layer: Dense::zeros(h.layer.inputs, h.layer.outputs),
                })
                .collect(),
            seed: self.seed,
        }
    }

    /// Adds `d loss / d params` for one sample into `grad`, given the loss
    /// gradients with respect to each head's logits.
    fn backprop(&self, x: &[f64], hidden: &[f64], head_grads: &[Vec<f64>], grad: &mut ToyNetwork) {
        let mut d_hidden = vec![0.0; self.hidden()];
        for ((head, g_head), gl) in self.heads.iter().zip(&mut grad.heads).zip(head_grads) {
            let layer = &head.layer;
            for (o, &g) in gl.iter().enumerate() {
                g_head.layer.bias[o] += g;
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let g_row = &mut g_head.layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for j in 0..layer.inputs {
                    g_row[j] += g * hidden[j];
                    d_hidden[j] += g * row[j];
                }
            }
        }
        let d = self.trunk.inputs;
        for (j, (&a, &dh)) in hidden.iter().zip(&d_hidden).enumerate() {
            let dz = dh * (1.0 - a * a);
            grad.trunk.bias[j] += dz;
            let g_row = &mut grad.trunk.weights[j * d..(j + 1) * d];
            for (gw, &xv) in g_row.iter_mut().zip(x) {
                *gw += dz * xv;
            }
        }
    }

    fn sgd_step(&mut self, grad: &ToyNetwork, scale: f64) {
        for (layer, g) in self.layers_mut().zip(grad.layers()) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= scale * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= scale * gb;
            }
        }
    }
}

/// Gaussian clusters around per-class means, standing in for real features.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub num_classes: usize,
    pub input_dim: usize,
    pub cluster_means: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    /// Optional surjective map from classes onto a coarser inventory.
    pub coarse_map: Option<Vec<usize>>,
}

impl SyntheticTask {
    pub fn new(
        cluster_means: Vec<Vec<f64>>,
        noise_sigma: f64,
        coarse_map: Option<Vec<usize>>,
    ) -> Result<Self> {
        let num_classes = cluster_means.len();
        if num_classes < 2 {
            return Err(Error::InvalidParameter(
                "task needs at least 2 classes".into(),
            ));
        }
        let input_dim = cluster_means[0].len();
        if input_dim == 0 || cluster_means.iter().any(|m| m.len() != input_dim) {
            return Err(Error::InvalidParameter(
                "cluster means must share a positive dimension".into(),
            ));
        }
        for i in 0..num_classes {
            if cluster_means[..i].contains(&cluster_means[i]) {
                return Err(Error::InvalidParameter(format!(
                    "cluster mean {i} is duplicated"
                )));
            }
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be ≥ 0, got {noise_sigma}"
            )));
        }
        if let Some(map) = &coarse_map {
            if map.len() != num_classes {
                return Err(Error::InvalidParameter(
                    "coarse map must cover every class".into(),
                ));
            }
            let coarse = map.iter().max().map_or(0, |m| m + 1);
            if (0..coarse).any(|c| !map.contains(&c)) {
                return Err(Error::InvalidParameter(
                    "coarse map must be surjective".into(),
                ));
            }
        }
        Ok(Self {
            num_classes,
            input_dim,
            cluster_means,
            noise_sigma,
            coarse_map,
        })
    }

    /// Means drawn from `N(0, mean_scale²)` per coordinate; with
    /// `coarse_classes > 0`, class `c` maps to `c · coarse_classes / K`.
    pub fn random(
        num_classes: usize,
        input_dim: usize,
        mean_scale: f64,
        noise_sigma: f64,
        coarse_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let means = (0..num_classes)
            .map(|_| {
                (0..input_dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mean_scale * z
                    })
                    .collect()
            })
            .collect();
        let coarse_map = (coarse_classes > 0).then(|| {
            (0..num_classes)
                .map(|c| c * coarse_classes / num_classes)
                .collect()
        });
        Self::new(means, noise_sigma, coarse_map)
    }

    /// Fine class means scattered around their coarse group's centre:
    /// centres from `N(0, group_scale²)`, offsets from `N(0, within_scale²)`.
    /// Classes sharing a coarse label are then the likeliest confusions.
    pub fn hierarchical(
        num_classes: usize,
        coarse_classes: usize,
        input_dim: usize,
        group_scale: f64,
        within_scale: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(1..=num_classes).contains(&coarse_classes) {
            return Err(Error::InvalidParameter(format!(
                "coarse classes must lie in 1..={num_classes}, got {coarse_classes}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gaussian = |scale: f64| -> Vec<f64> {
            (0..input_dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect()
        };
        let centres: Vec<Vec<f64>> = (0..coarse_classes).map(|_| gaussian(group_scale)).collect();
        let coarse_map: Vec<usize> = (0..num_classes)
            .map(|c| c * coarse_classes / num_classes)
            .collect();
        let means = coarse_map
            .iter()
            .map(|&g| {
                gaussian(within_scale)
                    .into_iter()
                    .zip(&centres[g])
                    .map(|(o, c)| c + o)
                    .collect()
            })
            .collect();
        Self::new(means, noise_sigma, Some(coarse_map))
    }

    pub fn coarse_classes(&self) -> Option<usize> {
        self.coarse_map
            .as_ref()
            .map(|m| m.iter().max().map_or(0, |x| x + 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The same inputs labelled through `map`.
    pub fn relabel(&self, map: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.clone(),
            labels: self.labels.iter().map(|&y| map[y]).collect(),
            num_classes: map.iter().max().map_or(0, |m| m + 1),
        }
    }

    /// A copy whose inputs carry extra independent Gaussian noise.
    pub fn with_extra_noise(&self, sigma: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = self
            .inputs
            .iter()
            .map(|x| {
                x.iter()
                    .map(|&v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + sigma * z
                    })
                    .collect()
            })
            .collect();
        Dataset {
            inputs,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
        }
    }
}

/// `n` samples with labels assigned round-robin and inputs drawn around the
/// class means.
pub fn generate_data(task: &SyntheticTask, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "dataset size must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % task.num_classes;
        let x = task.cluster_means[y]
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + task.noise_sigma * z
            })
            .collect();
        inputs.push(x);
        labels.push(y);
    }
    Ok(Dataset {
        inputs,
        labels,
        num_classes: task.num_classes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Baseline,
    LabelSmooth { epsilon: f64 },
    Lst { lambda: f64, temperature: f64 },
    Multitask { lambda: f64, temperature: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::LabelSmooth { .. } => "label_smooth",
            Method::Lst { .. } => "lst",
            Method::Multitask { .. } => "multitask",
        }
    }

    pub fn needs_teacher(&self) -> bool {
        matches!(self, Method::Lst { .. } | Method::Multitask { .. })
    }

    /// The same method with its interpolation weight replaced; methods
    /// without one are returned unchanged.
    pub fn with_lambda(self, lambda: f64) -> Method {
        match self {
            Method::Lst { temperature, .. } => Method::Lst {
                lambda,
                temperature,
            },
            Method::Multitask { temperature, .. } => Method::Multitask {
                lambda,
                temperature,
            },
            m => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Drives mini-batch shuffling.
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.batch_size == 0
            || self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
        {
            return Err(Error::Config(
                "epochs, learning rate and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A teacher's raw outputs for every training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherOutputs {
    pub id: String,
    pub logits: Vec<LogitVector>,
}

/// Head layout a method expects: `sl` plus, for multitask, one head per
/// teacher named after it.
pub fn heads_for(
    method: Method,
    num_classes: usize,
    teachers: &[(&str, usize)],
) -> Vec<(String, usize)> {
    let mut heads = vec![(String::from(SL_HEAD), num_classes)];
    if let Method::Multitask { .. } = method {
        heads.extend(teachers.iter().map(|&(id, k)| (String::from(id), k)));
    }
    heads
}

enum SampleTarget {
    Single(ProbVector),
    Multi {
        hard: HardLabel,
        soft: Vec<(String, ProbVector)>,
    },
}

struct Prepared {
    targets: Vec<SampleTarget>,
    lambda: f64,
    /// Head index per `soft` entry, in `soft` order.
    kd_heads: Vec<usize>,
}

fn prepare(
    net: &ToyNetwork,
    data: &Dataset,
    teachers: &[TeacherOutputs],
    method: Method,
) -> Result<Prepared> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let sl = net.sl_head_index();
    if net.heads[sl].layer.outputs != data.num_classes {
        return Err(Error::DimensionMismatch {
            expected: data.num_classes,
            found: net.heads[sl].layer.outputs,
        });
    }
    if method.needs_teacher() && teachers.is_empty() {
        return Err(Error::Config(format!(
            "method `{}` needs teacher soft labels",
            method.name()
        )));
    }
    for t in teachers {
        if t.logits.len() != data.len() {
            return Err(Error::Config(format!(
                "teacher `{}` has {} outputs for {} samples",
                t.id,
                t.logits.len(),
                data.len()
            )));
        }
    }
    let labels = data
        .labels
        .iter()
        .map(|&y| HardLabel::new(y, data.num_classes))
        .collect::<Result<Vec<_>>>()?;

    let mut kd_heads = Vec::new();
    let (targets, lambda) = match method {
        Method::Baseline => (
            labels
                .iter()
                .map(|&l| SampleTarget::Single(one_hot(l)))
                .collect(),
            1.0,
        ),
        Method::LabelSmooth { epsilon } => {
            let cfg = SmoothingConfig::new(epsilon)?;
            (
                labels
                    .iter()
                    .map(|&l| SampleTarget::Single(smooth_label(l, cfg)))
                    .collect(),
                1.0,
            )
        }
        Method::Lst {
            lambda,
            temperature,
        } => {
            let teacher = &teachers[0];
            let mut out = Vec::with_capacity(labels.len());
            for (l, v) in labels.iter().zip(&teacher.logits) {
                let soft = soft_label(v, temperature)?;
                out.push(SampleTarget::Single(interpolate_target(*l, &soft, lambda)?));
            }
            (out, lambda)
        }
        Method::Multitask {
            lambda,
            temperature,
        } => {
            for t in teachers {
                let idx = net.head_index(&t.id).ok_or_else(|| {
                    Error::Config(format!("network has no head for teacher `{}`", t.id))
                })?;
                kd_heads.push(idx);
            }
            if net.heads.len() != teachers.len() + 1 {
                return Err(Error::Config(
                    "network heads do not match the teacher set".into(),
                ));
            }
            let mut out = Vec::with_capacity(labels.len());
            for (i, &hard) in labels.iter().enumerate() {
                let soft = teachers
                    .iter()
                    .map(|t| Ok((t.id.clone(), soft_label(&t.logits[i], temperature)?)))
                    .collect::<Result<Vec<_>>>()?;
                out.push(SampleTarget::Multi { hard, soft });
            }
            (out, lambda)
        }
    };
    Ok(Prepared {
        targets,
        lambda,
        kd_heads,
    })
}

/// Loss value and per-head logit gradients for one sample.
fn sample_loss(
    net: &ToyNetwork,
    prep: &Prepared,
    outs: Vec<Vec<f64>>,
    i: usize,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let sl = net.sl_head_index();
    let mut grads: Vec<Vec<f64>> = outs.iter().map(|o| vec![0.0; o.len()]).collect();
    let mut outs: Vec<Option<LogitVector>> = outs
        .into_iter()
        .map(|o| LogitVector::new(o).map(Some))
        .collect::<Result<_>>()?;
    match &prep.targets[i] {
        SampleTarget::Single(target) => {
            let r = cross_entropy(outs[sl].as_ref().unwrap(), target)?;
            grads[sl] = r.grad;
            Ok((r.value, grads))
        }
        SampleTarget::Multi { hard, soft } => {
            let logits = MultiTaskLogits {
                sl_logits: outs[sl].take().unwrap(),
                kd_logits: soft
                    .iter()
                    .zip(&prep.kd_heads)
                    .map(|((id, _), &h)| (id.clone(), outs[h].take().unwrap()))
                    .collect(),
            };
            let r = multitask_loss_from_soft(&logits, *hard, soft, prep.lambda)?;
            grads[sl] = r.sl_grad;
            for ((_, g), &h) in r.kd_grads.into_iter().zip(&prep.kd_heads) {
                grads[h] = g;
            }
            Ok((r.value, grads))
        }
    }
}

fn accumulate(
    net: &ToyNetwork,
    data: &Dataset,
    prep: &Prepared,
    idx: &[usize],
    grad: &mut ToyNetwork,
) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let x = &data.inputs[i];
        let (hidden, outs) = net.forward_raw(x);
        let (value, head_grads) = sample_loss(net, prep, outs, i)?;
        net.backprop(x, &hidden, &head_grads, grad);
        total += value;
    }
    Ok(total)
}

fn dataset_loss(net: &ToyNetwork, data: &Dataset, prep: &Prepared) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..data.len() {
        let (_, outs) = net.forward_raw(&data.inputs[i]);
        total += sample_loss(net, prep, outs, i)?.0;
    }
    Ok(total / data.len() as f64)
}

/// Mean training loss over `data` and its gradient with respect to
/// [`ToyNetwork::params_flat`].
pub fn objective(
    net: &ToyNetwork,
    data: &Dataset,
    teachers: &[TeacherOutputs],
    method: Method,
) -> Result<(f64, Vec<f64>)> {
    let prep = prepare(net, data, teachers, method)?;
    let mut grad = net.zero_like();
    let idx: Vec<usize> = (0..data.len()).collect();
    let total = accumulate(net, data, &prep, &idx, &mut grad)?;
    let n = data.len() as f64;
    Ok((
        total / n,
        grad.params_flat().into_iter().map(|g| g / n).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: ToyNetwork,
    /// Mean loss over the full training set after each epoch.
    pub loss_curve: Vec<f64>,
}

/// Mini-batch SGD on `net` with the objective selected by `cfg.method`.
pub fn train(
    mut net: ToyNetwork,
    data: &Dataset,
    teachers: &[TeacherOutputs],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prep = prepare(&net, data, teachers, cfg.method)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = net.zero_like();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            for layer in grad.layers_mut() {
                layer.weights.fill(0.0);
                layer.bias.fill(0.0);
            }
            accumulate(&net, data, &prep, batch, &mut grad)?;
            net.sgd_step(&grad, cfg.learning_rate / batch.len() as f64);
        }
        loss_curve.push(dataset_loss(&net, data, &prep)?);
    }
    Ok(TrainOutcome {
        network: net,
        loss_curve,
    })
}

/// Raw logits of head `head` for every sample.
pub fn predict_logits(net: &ToyNetwork, data: &Dataset, head: usize) -> Result<Vec<LogitVector>> {
    data.inputs
        .iter()
        .map(|x| LogitVector::new(net.head_logits(x, head)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub reports: Vec<ReliabilityReport>,
}

/// Rank-1 accuracy of the supervised head and one reliability report per
/// requested rank, from its plain softmax.
pub fn evaluate(
    net: &ToyNetwork,
    data: &Dataset,
    ranks: &[usize],
    bins: usize,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let head = net.sl_head_index();
    let mut correct = 0usize;
    let mut records = Vec::with_capacity(data.len());
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        if x.len() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim(),
                found: x.len(),
            });
        }
        let p = softmax_raw(&net.head_logits(x, head), 1.0);
        correct += usize::from(argmax(&p) == y);
        records.push(PredictionRecord::new(ProbVector::from_raw(p), y)?);
    }
    let reports = ranks
        .iter()
        .map(|&r| ece(&records, r, bins))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        reports,
    })
}
