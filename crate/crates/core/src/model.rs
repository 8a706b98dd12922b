//! Small classifiers with hand-written backprop: multinomial logistic
//! regression and a one-hidden-layer tanh MLP with inverted dropout.
//!
//! Training is minibatch SGD on mean cross-entropy plus an L2 penalty on the
//! weight matrices. Every random draw comes from a stream derived from the
//! spec or train seed, so parameters and dynamics are reproducible.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logreg,
    Mlp,
}

/// Which representation a Core-Set selector measures distances in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentationSpace {
    Vision,
    Language,
    Fused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub vision_dims: usize,
    pub language_dims: usize,
    pub num_classes: usize,
    /// Weights start as `init_scale * N(0, 1) / sqrt(fan_in)`; biases at zero.
    pub init_scale: f64,
    pub rng_seed: u64,
}

impl ModelSpec {
    pub fn input_dims(&self) -> usize {
        self.vision_dims + self.language_dims
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        if self.kind == ModelKind::Mlp && self.hidden_dim == 0 {
            return Err(Error::config("MLP hidden_dim must be at least 1"));
        }
        if self.vision_dims == 0 || self.language_dims == 0 || self.num_classes == 0 {
            return Err(Error::config("input layout dimensions must be positive"));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::config("init_scale must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Dense affine layer; `weights` is `fan_in x fan_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    spec: ModelSpec,
    /// One layer for logistic regression; hidden then output for the MLP.
    layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    pub l2_penalty: f64,
    pub rng_seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults: 30 epochs, batch 32, L2 1e-4, learning rate 0.1
    /// for logistic regression and 0.05 for the MLP.
    pub fn default_for(kind: ModelKind) -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: match kind {
                ModelKind::Logreg => 0.1,
                ModelKind::Mlp => 0.05,
            },
            minibatch_size: 32,
            l2_penalty: 1e-4,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::config("minibatch_size must be at least 1"));
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return Err(Error::config("l2_penalty must be non-negative"));
        }
        Ok(())
    }
}

/// Per-example, per-epoch gold-label statistics of the end-of-epoch snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingDynamics {
    /// Dataset indices of the watched examples, one row each.
    pub indices: Vec<usize>,
    /// `|indices| x epochs` probability assigned to the gold label.
    pub gold_confidence: Array2<f64>,
    /// `|indices| x epochs` whether the argmax equals the gold label.
    pub correct: Array2<bool>,
}

impl TrainingDynamics {
    pub fn epochs(&self) -> usize {
        self.gold_confidence.ncols()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub dynamics: Option<TrainingDynamics>,
    /// Mean cross-entropy over the training subset after each epoch, dropout off.
    pub epoch_losses: Vec<f64>,
}

/// Gradient of the loss with respect to every layer.
struct Gradients {
    layers: Vec<Layer>,
}

/// Activations cached by a forward pass for backprop.
struct Forward {
    /// Post-tanh hidden activations before dropout (MLP only).
    hidden: Option<Array2<f64>>,
    /// Dropout multipliers (0 or 1/(1-p)) applied to `hidden`.
    mask: Option<Array2<f64>>,
    probs: Array2<f64>,
}

pub fn init_model(spec: &ModelSpec) -> Result<Model> {
    spec.validate()?;
    let mut rng = rng::rng(rng::derive_str(spec.rng_seed, "init"));
    let mut dense = |fan_in: usize, fan_out: usize| -> Layer {
        let scale = spec.init_scale / (fan_in as f64).sqrt();
        let weights = Array2::from_shape_fn((fan_in, fan_out), |_| scale * rng.sample::<f64, _>(StandardNormal));
        Layer {
            weights,
            bias: Array1::zeros(fan_out),
        }
    };
    let d = spec.input_dims();
    let layers = match spec.kind {
        ModelKind::Logreg => vec![dense(d, spec.num_classes)],
        ModelKind::Mlp => {
            let hidden = dense(d, spec.hidden_dim);
            let output = dense(spec.hidden_dim, spec.num_classes);
            vec![hidden, output]
        }
    };
    Ok(Model {
        spec: spec.clone(),
        layers,
    })
}

/// Row-wise softmax in place.
fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let mut m = logits.to_owned().insert_axis(Axis(0));
    softmax_rows(&mut m);
    m.index_axis_move(Axis(0), 0)
}

fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| -probs[[r, y]].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / labels.len() as f64
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_dims(&self, cols: usize) -> Result<()> {
        if cols != self.spec.input_dims() {
            return Err(Error::usage(format!(
                "input has {cols} features, model expects {}",
                self.spec.input_dims()
            )));
        }
        Ok(())
    }

    fn hidden_pre_dropout(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let layer = &self.layers[0];
        let mut h = x.dot(&layer.weights) + &layer.bias;
        h.mapv_inplace(f64::tanh);
        h
    }

    fn dropout_mask(&self, rows: usize, rng: &mut rng::Rng) -> Array2<f64> {
        let p = self.spec.dropout_rate;
        let keep = 1.0 / (1.0 - p);
        Array2::from_shape_fn((rows, self.spec.hidden_dim), |_| if rng.gen::<f64>() < p { 0.0 } else { keep })
    }

    /// Forward pass. `dropout_rng` enables train-time dropout.
    fn forward(&self, x: ArrayView2<f64>, dropout_rng: Option<&mut rng::Rng>) -> Forward {
        match self.spec.kind {
            ModelKind::Logreg => {
                let layer = &self.layers[0];
                let mut logits = x.dot(&layer.weights) + &layer.bias;
                softmax_rows(&mut logits);
                Forward {
                    hidden: None,
                    mask: None,
                    probs: logits,
                }
            }
            ModelKind::Mlp => {
                let hidden = self.hidden_pre_dropout(x);
                let mask = match dropout_rng {
                    Some(rng) if self.spec.dropout_rate > 0.0 => Some(self.dropout_mask(x.nrows(), rng)),
                    _ => None,
                };
                let out = &self.layers[1];
                let mut logits = match &mask {
                    Some(m) => (&hidden * m).dot(&out.weights),
                    None => hidden.dot(&out.weights),
                } + &out.bias;
                softmax_rows(&mut logits);
                Forward {
                    hidden: Some(hidden),
                    mask,
                    probs: logits,
                }
            }
        }
    }

    /// Gradient of mean cross-entropy (plus `l2/2 * |W|^2`) over the batch.
    fn backward(&self, x: ArrayView2<f64>, labels: &[usize], fwd: &Forward, l2: f64) -> Gradients {
        let n = labels.len() as f64;
        let mut dlogits = fwd.probs.clone();
        for (r, &y) in labels.iter().enumerate() {
            dlogits[[r, y]] -= 1.0;
        }
        dlogits /= n;
        match self.spec.kind {
            ModelKind::Logreg => {
                let w = &self.layers[0].weights;
                let dw = x.t().dot(&dlogits) + &(w * l2);
                let db = dlogits.sum_axis(Axis(0));
                Gradients {
                    layers: vec![Layer { weights: dw, bias: db }],
                }
            }
            ModelKind::Mlp => {
                let hidden = fwd.hidden.as_ref().expect("MLP forward caches hidden");
                let dropped = match &fwd.mask {
                    Some(m) => hidden * m,
                    None => hidden.clone(),
                };
                let (w1, w2) = (&self.layers[0].weights, &self.layers[1].weights);
                let dw2 = dropped.t().dot(&dlogits) + &(w2 * l2);
                let db2 = dlogits.sum_axis(Axis(0));
                let mut dh = dlogits.dot(&w2.t());
                if let Some(m) = &fwd.mask {
                    dh *= m;
                }
                let dz = dh * &hidden.mapv(|h| 1.0 - h * h);
                let dw1 = x.t().dot(&dz) + &(w1 * l2);
                let db1 = dz.sum_axis(Axis(0));
                Gradients {
                    layers: vec![
                        Layer { weights: dw1, bias: db1 },
                        Layer { weights: dw2, bias: db2 },
                    ],
                }
            }
        }
    }

    fn apply(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.bias.scaled_add(-lr, &g.bias);
        }
    }

    /// Class probabilities for every row of `x`, dropout disabled.
    pub fn predict_proba_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dims(x.ncols())?;
        Ok(self.forward(x, None).probs)
    }

    /// Mean cross-entropy over the given rows, dropout disabled.
    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        let probs = self.predict_proba_batch(x)?;
        Ok(cross_entropy(&probs, labels))
    }

    /// Fraction of `indices` whose argmax prediction equals the gold label.
    pub fn accuracy(&self, data: &Dataset, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Ok(0.0);
        }
        let x = data.features().select(Axis(0), indices);
        let probs = self.predict_proba_batch(x.view())?;
        let hits = indices
            .iter()
            .enumerate()
            .filter(|(r, &i)| argmax(probs.row(*r)) == data.labels()[i])
            .count();
        Ok(hits as f64 / indices.len() as f64)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&ckpt).expect("model serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::usage(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                ckpt.format,
                ckpt.version
            )));
        }
        ckpt.model.spec.validate()?;
        if !ckpt.model.is_finite() {
            return Err(Error::usage(format!("{}: non-finite parameters", path.display())));
        }
        Ok(ckpt.model)
    }
}

const CHECKPOINT_FORMAT: &str = "alcart-model";
const CHECKPOINT_VERSION: u32 = 1;

/// On-disk checkpoint: a format tag, a version, and the model (spec plus
/// per-layer `weights`/`bias` arrays in ndarray's `{v, dim, data}` form).
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: Model,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains `model` on `subset` with minibatch SGD.
///
/// The subset is treated as a set: it is sorted before the seeded per-epoch
/// shuffle, so the result does not depend on the order indices are supplied.
/// When `watch` is given, the gold-label confidence of every watched example
/// is recorded from the dropout-free snapshot at the end of each epoch.
pub fn train(
    model: Model,
    data: &Dataset,
    subset: &[usize],
    cfg: &TrainConfig,
    watch: Option<&[usize]>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if subset.is_empty() {
        return Err(Error::usage("training subset is empty"));
    }
    model.check_dims(data.num_features())?;
    let n = data.len();
    if let Some(bad) = subset.iter().chain(watch.unwrap_or(&[])).find(|&&i| i >= n) {
        return Err(Error::usage(format!("index {bad} out of range for {n} examples")));
    }
    let mut model = model;
    let mut order = subset.to_vec();
    order.sort_unstable();
    let subset_sorted = order.clone();

    let features = data.features();
    let labels = data.labels();
    let train_x = features.select(Axis(0), &subset_sorted);
    let train_y: Vec<usize> = subset_sorted.iter().map(|&i| labels[i]).collect();
    let watch_x = watch.map(|w| features.select(Axis(0), w));

    let epochs = cfg.epochs;
    let mut dynamics = watch.map(|w| TrainingDynamics {
        indices: w.to_vec(),
        gold_confidence: Array2::zeros((w.len(), epochs)),
        correct: Array2::from_elem((w.len(), epochs), false),
    });
    let mut dropout_rng = rng::rng(rng::derive_str(cfg.rng_seed, "dropout"));
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut batch_y = Vec::with_capacity(cfg.minibatch_size);

    for epoch in 0..epochs {
        order.shuffle(&mut rng::rng(rng::derive(rng::derive_str(cfg.rng_seed, "shuffle"), epoch as u64)));
        for batch in order.chunks(cfg.minibatch_size) {
            let x = features.select(Axis(0), batch);
            batch_y.clear();
            batch_y.extend(batch.iter().map(|&i| labels[i]));
            let fwd = model.forward(x.view(), Some(&mut dropout_rng));
            let grads = model.backward(x.view(), &batch_y, &fwd, cfg.l2_penalty);
            model.apply(&grads, cfg.learning_rate);
        }

        let loss = cross_entropy(&model.forward(train_x.view(), None).probs, &train_y);
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::Numeric { epoch: epoch + 1 });
        }
        epoch_losses.push(loss);

        if let (Some(dyn_), Some(wx), Some(w)) = (dynamics.as_mut(), watch_x.as_ref(), watch) {
            let probs = model.forward(wx.view(), None).probs;
            for (r, &i) in w.iter().enumerate() {
                let gold = labels[i];
                dyn_.gold_confidence[[r, epoch]] = probs[[r, gold]];
                dyn_.correct[[r, epoch]] = argmax(probs.row(r)) == gold;
            }
        }
    }
    Ok(TrainOutcome {
        model,
        dynamics,
        epoch_losses,
    })
}

/// Softmax output for one example, dropout disabled.
pub fn predict_proba(model: &Model, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let probs = model.predict_proba_batch(x.insert_axis(Axis(0)))?;
    Ok(probs.index_axis_move(Axis(0), 0))
}

/// `k` stochastic forward passes with independent dropout masks, one row per
/// pass. The masks come from a stream keyed by `seed` alone; callers scoring
/// a pool key it by example index.
pub fn mc_dropout_proba(model: &Model, x: ArrayView1<f64>, k: usize, seed: u64) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::usage("MC-dropout needs at least one pass"));
    }
    model.check_dims(x.len())?;
    let row = x.insert_axis(Axis(0));
    if model.spec.kind == ModelKind::Logreg || model.spec.dropout_rate == 0.0 {
        let p = model.forward(row, None).probs;
        return Ok(p.broadcast((k, p.ncols())).expect("single row broadcasts").to_owned());
    }
    let hidden = model.hidden_pre_dropout(row);
    let mut rng = rng::rng(seed);
    let masks = model.dropout_mask(k, &mut rng);
    let out = &model.layers[1];
    let mut logits = (&masks * &hidden).dot(&out.weights) + &out.bias;
    softmax_rows(&mut logits);
    Ok(logits)
}

/// Representation of one example in the requested space. `Fused` is the
/// penultimate activation: the hidden layer for the MLP, the concatenated
/// input for logistic regression.
pub fn hidden_representation(model: &Model, x: ArrayView1<f64>, space: RepresentationSpace) -> Result<Array1<f64>> {
    model.check_dims(x.len())?;
    let reps = representations(model, x.insert_axis(Axis(0)), space)?;
    Ok(reps.index_axis_move(Axis(0), 0))
}

/// Batch form of [`hidden_representation`].
pub fn representations(model: &Model, x: ArrayView2<f64>, space: RepresentationSpace) -> Result<Array2<f64>> {
    model.check_dims(x.ncols())?;
    let dv = model.spec.vision_dims;
    Ok(match space {
        RepresentationSpace::Vision => x.slice(ndarray::s![.., ..dv]).to_owned(),
        RepresentationSpace::Language => x.slice(ndarray::s![.., dv..]).to_owned(),
        RepresentationSpace::Fused => match model.spec.kind {
            ModelKind::Logreg => x.to_owned(),
            ModelKind::Mlp => model.hidden_pre_dropout(x),
        },
    })
}

/// Flat view over all parameters, in layer order (weights then bias).
fn param_mut(model: &mut Model, mut flat: usize) -> &mut f64 {
    for layer in &mut model.layers {
        let nw = layer.weights.len();
        if flat < nw {
            return layer.weights.as_slice_mut().expect("standard layout").get_mut(flat).unwrap();
        }
        flat -= nw;
        let nb = layer.bias.len();
        if flat < nb {
            return &mut layer.bias[flat];
        }
        flat -= nb;
    }
    panic!("parameter index out of range");
}

/// Absolute gradient magnitude below which the relative error is measured
/// against this floor instead; central differences carry ~1e-10 of
/// cancellation noise at eps=1e-5.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Largest parameter-wise relative error between the analytic gradient of
/// the single-example cross-entropy and central finite differences.
pub fn gradient_check(model: &Model, x: ArrayView1<f64>, label: usize, epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::usage("epsilon must be positive"));
    }
    model.check_dims(x.len())?;
    if label >= model.spec.num_classes {
        return Err(Error::usage(format!("label {label} outside [0, {})", model.spec.num_classes)));
    }
    let row = x.insert_axis(Axis(0));
    let labels = [label];
    let fwd = model.forward(row, None);
    let analytic: Vec<f64> = model
        .backward(row, &labels, &fwd, 0.0)
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
        .collect();

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (p, &a) in analytic.iter().enumerate() {
        let orig = *param_mut(&mut probe, p);
        *param_mut(&mut probe, p) = orig + epsilon;
        let up = cross_entropy(&probe.forward(row, None).probs, &labels);
        *param_mut(&mut probe, p) = orig - epsilon;
        let down = cross_entropy(&probe.forward(row, None).probs, &labels);
        *param_mut(&mut probe, p) = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Analytic gradient of the single-example cross-entropy, flattened.
pub fn loss_gradient(model: &Model, x: ArrayView1<f64>, label: usize) -> Result<Vec<f64>> {
    model.check_dims(x.len())?;
    let row = x.insert_axis(Axis(0));
    let fwd = model.forward(row, None);
    Ok(model
        .backward(row, &[label], &fwd, 0.0)
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, GeneratorConfig, Group};
    use ndarray::array;

    fn spec(kind: ModelKind, dropout: f64) -> ModelSpec {
        ModelSpec {
            kind,
            hidden_dim: 6,
            dropout_rate: dropout,
            vision_dims: 5,
            language_dims: 3,
            num_classes: 4,
            init_scale: 1.0,
            rng_seed: 11,
        }
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let a = init_model(&spec(ModelKind::Logreg, 0.0)).unwrap();
        let b = init_model(&spec(ModelKind::Logreg, 0.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers()[0].weights.dim(), (8, 4));
        assert_eq!(a.layers()[0].bias.len(), 4);
        let m = init_model(&spec(ModelKind::Mlp, 0.2)).unwrap();
        assert_eq!(m.layers()[0].weights.dim(), (8, 6));
        assert_eq!(m.layers()[1].weights.dim(), (6, 4));
    }

    #[test]
    fn zero_init_gives_uniform_output() {
        for kind in [ModelKind::Logreg, ModelKind::Mlp] {
            let mut s = spec(kind, 0.0);
            s.init_scale = 0.0;
            let m = init_model(&s).unwrap();
            assert!(m.layers().iter().all(|l| l.weights.iter().all(|&w| w == 0.0)));
            let p = predict_proba(&m, array![1.0, -2.0, 3.0, 0.5, 0.0, 1.0, 1.0, 2.0].view()).unwrap();
            for v in p.iter() {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(ModelKind::Mlp, 1.0);
        assert!(init_model(&s).is_err());
        s.dropout_rate = 0.1;
        s.hidden_dim = 0;
        assert!(init_model(&s).is_err());
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = softmax(array![1.0, 2.0, -0.5].view());
        let b = softmax(array![101.0, 102.0, 99.5].view());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predict_rejects_dim_mismatch() {
        let m = init_model(&spec(ModelKind::Mlp, 0.2)).unwrap();
        assert!(matches!(predict_proba(&m, array![1.0, 2.0].view()), Err(Error::Usage(_))));
        assert!(hidden_representation(&m, array![1.0].view(), RepresentationSpace::Vision).is_err());
    }

    #[test]
    fn mc_dropout_without_dropout_matches_predict() {
        let m = init_model(&spec(ModelKind::Mlp, 0.0)).unwrap();
        let x = array![0.3, -1.0, 2.0, 0.1, 0.0, 1.0, -0.2, 0.4];
        let p = predict_proba(&m, x.view()).unwrap();
        let passes = mc_dropout_proba(&m, x.view(), 10, 5).unwrap();
        assert_eq!(passes.nrows(), 10);
        for row in passes.rows() {
            assert_eq!(row, p);
        }
        assert!(mc_dropout_proba(&m, x.view(), 0, 5).is_err());
    }

    #[test]
    fn mc_dropout_passes_differ_and_are_seeded() {
        let m = init_model(&spec(ModelKind::Mlp, 0.5)).unwrap();
        let x = array![0.3, -1.0, 2.0, 0.1, 0.0, 1.0, -0.2, 0.4];
        let a = mc_dropout_proba(&m, x.view(), 10, 5).unwrap();
        assert_eq!(a, mc_dropout_proba(&m, x.view(), 10, 5).unwrap());
        assert!(a.rows().into_iter().any(|r| r != a.row(0)));
        let mean = a.mean_axis(Axis(0)).unwrap();
        assert!((mean.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn representations_have_expected_lengths() {
        let x = array![0.3, -1.0, 2.0, 0.1, 0.0, 1.0, -0.2, 0.4];
        let lr = init_model(&spec(ModelKind::Logreg, 0.0)).unwrap();
        assert_eq!(hidden_representation(&lr, x.view(), RepresentationSpace::Fused).unwrap(), x);
        assert_eq!(hidden_representation(&lr, x.view(), RepresentationSpace::Vision).unwrap().len(), 5);
        assert_eq!(
            hidden_representation(&lr, x.view(), RepresentationSpace::Language).unwrap(),
            array![1.0, -0.2, 0.4]
        );
        let mlp = init_model(&spec(ModelKind::Mlp, 0.2)).unwrap();
        assert_eq!(hidden_representation(&mlp, x.view(), RepresentationSpace::Fused).unwrap().len(), 6);
    }

    #[test]
    fn gradient_check_both_kinds() {
        let x = array![0.3, -1.0, 2.0, 0.1, 0.0, 1.0, -0.2, 0.4];
        for kind in [ModelKind::Logreg, ModelKind::Mlp] {
            let m = init_model(&spec(kind, 0.3)).unwrap();
            let err = gradient_check(&m, x.view(), 2, 1e-5).unwrap();
            assert!(err < 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn saturated_logits_give_small_finite_gradient() {
        let mut m = init_model(&spec(ModelKind::Logreg, 0.0)).unwrap();
        m.layers[0].weights.fill(0.0);
        m.layers[0].bias = array![30.0, 0.0, 0.0, 0.0];
        let x = Array1::zeros(8);
        let g = loss_gradient(&m, x.view(), 0).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm.is_finite() && norm > 0.0 && norm < 1e-10, "{norm}");
    }

    fn blobs() -> Dataset {
        let cfg = GeneratorConfig {
            num_examples: 400,
            num_classes: 2,
            vision_dims: 2,
            language_dims: 2,
            cluster_spread: 0.3,
            outlier_fraction_noise: 0.0,
            outlier_fraction_underspecified: 0.0,
            center_scale: 3.0,
            rng_seed: 4,
            ..GeneratorConfig::default()
        };
        generate_synthetic(&cfg).unwrap()
    }

    #[test]
    fn training_is_deterministic_and_logs_epochs() {
        let d = blobs();
        let mut s = spec(ModelKind::Mlp, 0.2);
        s.vision_dims = 2;
        s.language_dims = 2;
        s.num_classes = 2;
        let cfg = TrainConfig {
            epochs: 4,
            ..TrainConfig::default_for(ModelKind::Mlp)
        };
        let subset: Vec<usize> = (0..200).collect();
        let watch: Vec<usize> = (0..400).collect();
        let a = train(init_model(&s).unwrap(), &d, &subset, &cfg, Some(&watch)).unwrap();
        let mut reversed = subset.clone();
        reversed.reverse();
        let b = train(init_model(&s).unwrap(), &d, &reversed, &cfg, Some(&watch)).unwrap();
        assert_eq!(a.model, b.model);
        let dynamics = a.dynamics.unwrap();
        assert_eq!(dynamics.epochs(), 4);
        assert_eq!(dynamics.gold_confidence.nrows(), 400);
        assert!(dynamics.gold_confidence.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert_eq!(d.groups()[0], Group::Learnable);
    }

    #[test]
    fn training_rejects_empty_subset() {
        let d = blobs();
        let mut s = spec(ModelKind::Logreg, 0.0);
        s.vision_dims = 2;
        s.language_dims = 2;
        s.num_classes = 2;
        let m = init_model(&s).unwrap();
        let cfg = TrainConfig::default_for(ModelKind::Logreg);
        assert!(matches!(train(m.clone(), &d, &[], &cfg, None), Err(Error::Usage(_))));
        assert!(matches!(train(m, &d, &[9999], &cfg, None), Err(Error::Usage(_))));
    }

    #[test]
    fn diverging_training_reports_epoch() {
        let d = blobs();
        let mut s = spec(ModelKind::Logreg, 0.0);
        s.vision_dims = 2;
        s.language_dims = 2;
        s.num_classes = 2;
        let m = init_model(&s).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            ..TrainConfig::default_for(ModelKind::Logreg)
        };
        let subset: Vec<usize> = (0..100).collect();
        assert!(matches!(train(m, &d, &subset, &cfg, None), Err(Error::Numeric { epoch: 1 })));
    }

    #[test]
    fn checkpoint_round_trip_is_lossless() {
        let m = init_model(&spec(ModelKind::Mlp, 0.2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save_json(&path).unwrap();
        let back = Model::load_json(&path).unwrap();
        assert_eq!(m, back);
    }
}
