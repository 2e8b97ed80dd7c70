//! Small classifiers trained with plain mini-batch SGD on softmax
//! cross-entropy.
//!
//! Parameters are stored flat, layer by layer, weights before biases:
//!
//! * logistic: `W[input × classes]`, `b[classes]`
//! * mlp: `W1[input × hidden]`, `b1[hidden]`, `W2[hidden × classes]`, `b2[classes]`
//!
//! Weight matrices are row-major with the input index as the row.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn logistic(input_dim: usize, n_classes: usize, init_seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::Logistic,
            input_dim,
            hidden_dim: 0,
            n_classes,
            init_seed,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, n_classes: usize, init_seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            input_dim,
            hidden_dim,
            n_classes,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("model.input_dim", "must be at least 1"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("model.n_classes", "must be at least 2"));
        }
        match self.kind {
            ModelKind::Mlp if self.hidden_dim == 0 => {
                Err(Error::invalid("model.hidden_dim", "an mlp needs at least one hidden unit"))
            }
            ModelKind::Logistic if self.hidden_dim != 0 => Err(Error::invalid(
                "model.hidden_dim",
                "must be 0 for a logistic model",
            )),
            _ => Ok(()),
        }
    }

    pub fn param_count(&self) -> usize {
        let (i, h, c) = (self.input_dim, self.hidden_dim, self.n_classes);
        match self.kind {
            ModelKind::Logistic => i * c + c,
            ModelKind::Mlp => i * h + h + h * c + c,
        }
    }

    /// `(weights_len, bias_len, fan_in)` per layer, in storage order.
    fn layers(&self) -> Vec<(usize, usize, usize)> {
        let (i, h, c) = (self.input_dim, self.hidden_dim, self.n_classes);
        match self.kind {
            ModelKind::Logistic => vec![(i * c, c, i)],
            ModelKind::Mlp => vec![(i * h, h, i), (h * c, c, h)],
        }
    }

    fn check(&self, params: &ParamVector) -> Result<()> {
        if params.dim() != self.param_count() {
            return Err(Error::DimensionMismatch {
                left: params.dim(),
                right: self.param_count(),
            });
        }
        Ok(())
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.input_dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                left: data.input_dim(),
                right: self.input_dim,
            });
        }
        if data.n_classes() > self.n_classes {
            return Err(Error::invalid(
                "dataset",
                format!(
                    "has {} classes but the model predicts {}",
                    data.n_classes(),
                    self.n_classes
                ),
            ));
        }
        Ok(())
    }
}

/// Draws a parameter vector from the initialization law: weights uniform in
/// `±1/√fan_in`, biases zero.
pub fn sample_init<R: Rng>(spec: &ModelSpec, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.param_count());
    for (w, b, fan_in) in spec.layers() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let law = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        out.extend((0..w).map(|_| rng.sample(law)));
        out.extend(std::iter::repeat_n(0.0, b));
    }
    out
}

pub fn init_params(spec: &ModelSpec) -> Result<ParamVector> {
    spec.validate()?;
    let mut rng = rng::stream(spec.init_seed, &[rng::tag::INIT]);
    ParamVector::new(sample_init(spec, &mut rng))
}

/// A view of selected rows of a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    data: &'a Dataset,
    rows: Option<&'a [usize]>,
}

impl<'a> Batch<'a> {
    pub fn full(data: &'a Dataset) -> Self {
        Batch { data, rows: None }
    }

    pub fn rows(data: &'a Dataset, rows: &'a [usize]) -> Self {
        Batch {
            data,
            rows: Some(rows),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.map_or(self.data.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn indices(&self) -> Box<dyn Iterator<Item = usize> + 'a> {
        match self.rows {
            Some(r) => Box::new(r.iter().copied()),
            None => Box::new(0..self.data.len()),
        }
    }
}

/// Scratch buffers for one forward/backward pass.
struct Workspace {
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    d_hidden: Vec<f64>,
}

impl Workspace {
    fn new(spec: &ModelSpec) -> Self {
        Workspace {
            hidden_pre: vec![0.0; spec.hidden_dim],
            hidden: vec![0.0; spec.hidden_dim],
            logits: vec![0.0; spec.n_classes],
            d_hidden: vec![0.0; spec.hidden_dim],
        }
    }
}

/// `out = bias + xᵀ W` for a row-major `W[x.len() × out.len()]`.
fn affine(x: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
    out.copy_from_slice(bias);
    let width = out.len();
    for (xi, row) in x.iter().zip(weights.chunks_exact(width)) {
        if *xi == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
}

fn forward(spec: &ModelSpec, p: &[f64], x: &[f64], ws: &mut Workspace) {
    let (i, h, c) = (spec.input_dim, spec.hidden_dim, spec.n_classes);
    match spec.kind {
        ModelKind::Logistic => affine(x, &p[..i * c], &p[i * c..], &mut ws.logits),
        ModelKind::Mlp => {
            let (w1, rest) = p.split_at(i * h);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(h * c);
            affine(x, w1, b1, &mut ws.hidden_pre);
            for (a, &z) in ws.hidden.iter_mut().zip(&ws.hidden_pre) {
                *a = z.max(0.0);
            }
            affine(&ws.hidden, w2, b2, &mut ws.logits);
        }
    }
}

/// Replaces logits with softmax probabilities; returns `-log p[label]`.
fn softmax_cross_entropy(logits: &mut [f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted_label = logits[label] - max;
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
    total.ln() - shifted_label
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Accumulates the summed loss and gradient over `rows` into `grad`.
fn accumulate(
    spec: &ModelSpec,
    p: &[f64],
    data: &Dataset,
    rows: impl Iterator<Item = usize>,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let (i, h, c) = (spec.input_dim, spec.hidden_dim, spec.n_classes);
    let mut loss = 0.0;
    for r in rows {
        let x = data.row(r);
        let y = data.label(r);
        forward(spec, p, x, ws);
        loss += softmax_cross_entropy(&mut ws.logits, y);
        // dL/dlogits = p - onehot(y)
        ws.logits[y] -= 1.0;
        let d_out = &ws.logits;
        match spec.kind {
            ModelKind::Logistic => {
                let (gw, gb) = grad.split_at_mut(i * c);
                outer_add(x, d_out, gw);
                add(gb, d_out);
            }
            ModelKind::Mlp => {
                let w2 = &p[i * h + h..i * h + h + h * c];
                let (gw1, rest) = grad.split_at_mut(i * h);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(h * c);
                outer_add(&ws.hidden, d_out, gw2);
                add(gb2, d_out);
                for (j, dh) in ws.d_hidden.iter_mut().enumerate() {
                    *dh = if ws.hidden_pre[j] > 0.0 {
                        w2[j * c..(j + 1) * c]
                            .iter()
                            .zip(d_out)
                            .map(|(w, d)| w * d)
                            .sum()
                    } else {
                        0.0
                    };
                }
                outer_add(x, &ws.d_hidden, gw1);
                add(gb1, &ws.d_hidden);
            }
        }
    }
    loss
}

/// `g[a × b] += u ⊗ v`
fn outer_add(u: &[f64], v: &[f64], g: &mut [f64]) {
    for (ui, row) in u.iter().zip(g.chunks_exact_mut(v.len())) {
        if *ui == 0.0 {
            continue;
        }
        for (gij, vj) in row.iter_mut().zip(v) {
            *gij += ui * vj;
        }
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

fn check_labels(spec: &ModelSpec, batch: &Batch<'_>) -> Result<()> {
    if let Some(r) = batch.indices().find(|&r| batch.data.label(r) >= spec.n_classes) {
        return Err(Error::invalid(
            "batch",
            format!("row {r} has label {} outside the model's classes", batch.data.label(r)),
        ));
    }
    Ok(())
}

/// Mean cross-entropy over the batch and its exact gradient.
pub fn loss_and_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    batch: Batch<'_>,
) -> Result<(f64, ParamVector)> {
    spec.validate()?;
    spec.check(params)?;
    spec.check_data(batch.data)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    check_labels(spec, &batch)?;
    let mut grad = vec![0.0; spec.param_count()];
    let mut ws = Workspace::new(spec);
    let total = accumulate(
        spec,
        params.as_slice(),
        batch.data,
        batch.indices(),
        &mut grad,
        &mut ws,
    );
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, ParamVector::new(grad)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs over the local shard per round.
    pub local_iterations: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "train.learning_rate",
                format!("must be a finite nonnegative number, got {}", self.learning_rate),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("train.batch_size", "must be at least 1"));
        }
        if self.local_iterations == 0 {
            return Err(Error::invalid("train.local_iterations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        TrainConfig { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub params: ParamVector,
    /// Accuracy on the training shard after the final step.
    pub train_accuracy: f64,
    /// Mean mini-batch loss of each epoch, measured before each step.
    pub epoch_losses: Vec<f64>,
}

/// Runs `local_iterations` epochs of mini-batch SGD starting from `start`.
///
/// Each epoch reshuffles the shard from `cfg.seed`. Within a mini-batch the
/// gradient is accumulated in ascending row order, so two clients holding the
/// same rows compute bit-identical steps regardless of shuffle.
pub fn train_local(
    spec: &ModelSpec,
    start: &ParamVector,
    shard: &Dataset,
    cfg: &TrainConfig,
) -> Result<LocalOutcome> {
    spec.validate()?;
    spec.check(start)?;
    spec.check_data(shard)?;
    cfg.validate()?;
    if shard.is_empty() {
        return Err(Error::Empty("training shard"));
    }
    check_labels(spec, &Batch::full(shard))?;

    let mut p = start.as_slice().to_vec();
    let mut grad = vec![0.0; p.len()];
    let mut ws = Workspace::new(spec);
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let mut batch_rows = Vec::with_capacity(cfg.batch_size);
    let mut epoch_losses = Vec::with_capacity(cfg.local_iterations);

    for epoch in 0..cfg.local_iterations {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, &[rng::tag::LOCAL_TRAIN, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch_rows.clear();
            batch_rows.extend_from_slice(chunk);
            batch_rows.sort_unstable();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = accumulate(spec, &p, shard, batch_rows.iter().copied(), &mut grad, &mut ws);
            let scale = cfg.learning_rate / chunk.len() as f64;
            for (w, g) in p.iter_mut().zip(&grad) {
                *w -= scale * g;
            }
            loss_sum += loss / chunk.len() as f64;
            n_batches += 1;
        }
        epoch_losses.push(loss_sum / n_batches as f64);
    }

    let params = ParamVector::new(p).map_err(|e| Error::invalid(
        "training",
        format!("parameters diverged during local training ({e}); lower the learning rate"),
    ))?;
    let train_accuracy = evaluate(spec, &params, shard)?;
    Ok(LocalOutcome {
        params,
        train_accuracy,
        epoch_losses,
    })
}

pub fn predict(spec: &ModelSpec, params: &ParamVector, x: &[f64]) -> Result<usize> {
    spec.check(params)?;
    if x.len() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: spec.input_dim,
        });
    }
    let mut ws = Workspace::new(spec);
    forward(spec, params.as_slice(), x, &mut ws);
    Ok(argmax(&ws.logits))
}

/// Number of argmax-correct predictions over the batch.
pub fn count_correct(spec: &ModelSpec, params: &ParamVector, batch: Batch<'_>) -> Result<usize> {
    spec.check(params)?;
    spec.check_data(batch.data)?;
    let mut ws = Workspace::new(spec);
    let p = params.as_slice();
    Ok(batch
        .indices()
        .filter(|&r| {
            forward(spec, p, batch.data.row(r), &mut ws);
            argmax(&ws.logits) == batch.data.label(r)
        })
        .count())
}

/// Fraction of samples whose argmax prediction matches the label.
pub fn evaluate(spec: &ModelSpec, params: &ParamVector, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    Ok(count_correct(spec, params, Batch::full(data))? as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SamplesPerClass, SyntheticSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blobs(n_classes: usize, per_class: usize, dim: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n_classes,
            input_dim: dim,
            samples_per_class: SamplesPerClass::Uniform(per_class),
            cluster_spread: 0.5,
            class_separation: 3.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(init_params(&ModelSpec::logistic(2, 3, 0)).unwrap().dim(), 9);
        assert_eq!(init_params(&ModelSpec::mlp(4, 5, 3, 0)).unwrap().dim(), 43);
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let spec = ModelSpec::mlp(4, 5, 3, 17);
        let a = init_params(&spec).unwrap();
        assert_eq!(a, init_params(&spec).unwrap());
        let p = a.as_slice();
        assert!(p[20..25].iter().all(|&b| b == 0.0));
        assert!(p[40..43].iter().all(|&b| b == 0.0));
        assert!(p[..20].iter().all(|w| w.abs() <= 0.5));
        assert!(p[25..40].iter().all(|w| w.abs() <= 1.0 / 5f64.sqrt()));
        assert_ne!(a, init_params(&ModelSpec::mlp(4, 5, 3, 18)).unwrap());
    }

    #[test]
    fn spec_validation() {
        assert!(init_params(&ModelSpec::mlp(4, 0, 3, 0)).is_err());
        assert!(init_params(&ModelSpec::logistic(4, 1, 0)).is_err());
        let mut s = ModelSpec::logistic(4, 3, 0);
        s.hidden_dim = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_params_give_log_k_loss() {
        let d = blobs(4, 5, 3, 1);
        for spec in [ModelSpec::logistic(3, 4, 0), ModelSpec::mlp(3, 6, 4, 0)] {
            let zero = ParamVector::zeros(spec.param_count());
            let (loss, _) = loss_and_grad(&spec, &zero, Batch::full(&d)).unwrap();
            assert!((loss - 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_batch_has_same_loss_and_grad() {
        let d = blobs(3, 4, 2, 2);
        let doubled = Dataset::concat("dd", [&d, &d]).unwrap();
        let spec = ModelSpec::mlp(2, 4, 3, 9);
        let p = init_params(&spec).unwrap();
        let (l1, g1) = loss_and_grad(&spec, &p, Batch::full(&d)).unwrap();
        let (l2, g2) = loss_and_grad(&spec, &p, Batch::full(&doubled)).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..20u64 {
            let spec = if case % 2 == 0 {
                ModelSpec::logistic(3, 4, case)
            } else {
                ModelSpec::mlp(3, 5, 4, case)
            };
            let d = blobs(4, 3, 3, case);
            let p = ParamVector::new(
                (0..spec.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let (_, g) = loss_and_grad(&spec, &p, Batch::full(&d)).unwrap();
            let h = 1e-5;
            let numeric: Vec<f64> = (0..p.dim())
                .map(|j| {
                    let mut plus = p.as_slice().to_vec();
                    let mut minus = plus.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    let lp = loss_and_grad(&spec, &ParamVector::new(plus).unwrap(), Batch::full(&d)).unwrap().0;
                    let lm = loss_and_grad(&spec, &ParamVector::new(minus).unwrap(), Batch::full(&d)).unwrap().0;
                    (lp - lm) / (2.0 * h)
                })
                .collect();
            let diff: f64 = g.as_slice().iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = g.as_slice().iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff <= 1e-4 * norm.max(1e-8), "case {case}: {diff} vs {norm}");
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let d = blobs(3, 10, 2, 3);
        let spec = ModelSpec::logistic(2, 3, 1);
        let start = init_params(&spec).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, batch_size: 4, local_iterations: 3, seed: 7 };
        assert_eq!(train_local(&spec, &start, &d, &cfg).unwrap().params, start);
    }

    #[test]
    fn full_batch_epoch_is_one_gradient_step() {
        let d = blobs(3, 10, 2, 4);
        let spec = ModelSpec::mlp(2, 4, 3, 2);
        let start = init_params(&spec).unwrap();
        let lr = 0.3;
        let cfg = TrainConfig { learning_rate: lr, batch_size: d.len(), local_iterations: 1, seed: 1 };
        let out = train_local(&spec, &start, &d, &cfg).unwrap();
        let (_, g) = loss_and_grad(&spec, &start, Batch::full(&d)).unwrap();
        for ((a, s), gi) in out.params.as_slice().iter().zip(start.as_slice()).zip(g.as_slice()) {
            assert!((a - (s - lr * gi)).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let d = generate_synthetic(&SyntheticSpec {
            n_classes: 2,
            input_dim: 2,
            samples_per_class: SamplesPerClass::Uniform(100),
            cluster_spread: 1.0,
            class_separation: 4.0,
            seed: 11,
        })
        .unwrap();
        let spec = ModelSpec::logistic(2, 2, 0);
        let cfg = TrainConfig { learning_rate: 0.05, batch_size: 16, local_iterations: 50, seed: 3 };
        let out = train_local(&spec, &init_params(&spec).unwrap(), &d, &cfg).unwrap();
        assert!(out.train_accuracy >= 0.95, "{}", out.train_accuracy);
        assert_eq!(out.train_accuracy, evaluate(&spec, &out.params, &d).unwrap());
        assert!(out.epoch_losses[1] < out.epoch_losses[0]);
        assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let d = blobs(3, 20, 4, 8);
        let spec = ModelSpec::mlp(4, 8, 3, 3);
        let start = init_params(&spec).unwrap();
        let cfg = TrainConfig { learning_rate: 0.1, batch_size: 7, local_iterations: 2, seed: 99 };
        let a = train_local(&spec, &start, &d, &cfg).unwrap();
        let b = train_local(&spec, &start, &d, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_local(&spec, &start, &d, &cfg.with_seed(100)).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn evaluate_examples() {
        let spec = ModelSpec::logistic(1, 3, 0);
        let d = Dataset::new("ones", 1, 3, vec![1.0, 2.0, 3.0], vec![2, 2, 2]).unwrap();
        // Bias toward class 2.
        let p = ParamVector::new(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(evaluate(&spec, &p, &d).unwrap(), 1.0);
        assert!(evaluate(&spec, &p, &Dataset::empty("e", 1, 3).unwrap()).is_err());
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let d = blobs(4, 25, 3, 12);
        let spec = ModelSpec::mlp(3, 6, 4, 5);
        let p = init_params(&spec).unwrap();
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        let shuffled = d.subset(&order);
        assert_eq!(evaluate(&spec, &p, &d).unwrap(), evaluate(&spec, &p, &shuffled).unwrap());
    }

    #[test]
    fn errors() {
        let d = blobs(3, 2, 2, 0);
        let spec = ModelSpec::logistic(2, 3, 0);
        assert!(loss_and_grad(&spec, &ParamVector::zeros(5), Batch::full(&d)).is_err());
        let empty = Dataset::empty("e", 2, 3).unwrap();
        let p = init_params(&spec).unwrap();
        let cfg = TrainConfig { learning_rate: 0.1, batch_size: 1, local_iterations: 1, seed: 0 };
        assert!(matches!(train_local(&spec, &p, &empty, &cfg), Err(Error::Empty(_))));
        assert!(loss_and_grad(&spec, &p, Batch::rows(&d, &[])).is_err());
        let bad = TrainConfig { batch_size: 0, ..cfg };
        assert!(train_local(&spec, &p, &d, &bad).is_err());
    }
}
