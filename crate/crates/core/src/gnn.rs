//! Dense graph convolutional classifier with analytic gradients.
//!
//! The stack is L linear graph convolutions with ReLU between them:
//! logits = A^ ... ReLU(A^ X W1 + b1) ... W_L + b_L, where A^ is the
//! symmetrically normalized adjacency with self-loops. Training is
//! full-batch gradient descent on confidence-weighted cross-entropy; the
//! backward pass is hand-derived, so a finite-difference check lives in the
//! tests.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GdaError, Result};
use crate::graph::Graph;

/// Weights and biases per layer; `weights[l]` maps that layer's input width
/// to its output width, the last layer emitting class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl GcnModel {
    /// Glorot-uniform initialization, biases zero, deterministic in the seed.
    pub fn init(feature_dim: usize, classes: usize, cfg: &TrainConfig) -> Result<GcnModel> {
        cfg.validate()?;
        if feature_dim == 0 || classes < 2 {
            return Err(GdaError::Invalid(format!(
                "need feature_dim >= 1 and classes >= 2, got {feature_dim} and {classes}"
            )));
        }
        let mut dims = vec![feature_dim];
        for _ in 0..cfg.layers - 1 {
            dims.push(cfg.hidden);
        }
        dims.push(classes);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut weights = Vec::with_capacity(cfg.layers);
        let mut biases = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt() * cfg.weight_init_scale;
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.gen_range(-s..=s)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(GcnModel { weights, biases })
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn classes(&self) -> usize {
        self.weights.last().map_or(0, |w| w.ncols())
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.nrows())
    }
}

/// Training hyperparameters. Defaults: 2 layers of 8 hidden units, learning
/// rate 5e-2, 1000 epochs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub weight_init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 8,
            layers: 2,
            learning_rate: 5e-2,
            epochs: 1000,
            seed: 0,
            weight_init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    /// The larger stack: 3 layers, 16 hidden units.
    pub fn three_layer_preset() -> Self {
        TrainConfig {
            hidden: 16,
            layers: 3,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 {
            return Err(GdaError::Invalid(format!(
                "layer stack needs positive sizes, got {} layers of {}",
                self.layers, self.hidden
            )));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("weight_init_scale", self.weight_init_scale),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(GdaError::Invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetrically normalized adjacency with self-loops:
/// D~^{-1/2} (A + I) D~^{-1/2}. Every node gains self-loop weight 1, so
/// degrees are strictly positive even for isolated nodes.
pub fn normalize_adjacency(adjacency: &Array2<f64>) -> Result<Array2<f64>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(GdaError::Dimension(format!(
            "adjacency is {}x{}",
            n,
            adjacency.ncols()
        )));
    }
    if adjacency.iter().any(|&a| a < 0.0 || !a.is_finite()) {
        return Err(GdaError::Invalid(
            "adjacency must be nonnegative and finite".into(),
        ));
    }
    let mut at = adjacency.clone();
    for i in 0..n {
        at[[i, i]] += 1.0;
    }
    let dinv: Array1<f64> = at.sum_axis(Axis(1)).mapv(|d| 1.0 / d.sqrt());
    for i in 0..n {
        for j in 0..n {
            at[[i, j]] *= dinv[i] * dinv[j];
        }
    }
    Ok(at)
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

fn forward_normalized(model: &GcnModel, ah: &Array2<f64>, features: &Array2<f64>) -> Array2<f64> {
    let mut h = features.clone();
    let last = model.layers() - 1;
    for l in 0..=last {
        let mut z = ah.dot(&h).dot(&model.weights[l]) + &model.biases[l];
        if l < last {
            z.mapv_inplace(|v| v.max(0.0));
        }
        h = z;
    }
    h
}

/// Class logits for every node.
pub fn forward(model: &GcnModel, graph: &Graph) -> Result<Array2<f64>> {
    if graph.feature_dim() != model.feature_dim() {
        return Err(GdaError::Dimension(format!(
            "model expects {} features, graph has {}",
            model.feature_dim(),
            graph.feature_dim()
        )));
    }
    let ah = normalize_adjacency(&graph.adjacency)?;
    Ok(forward_normalized(model, &ah, &graph.features))
}

/// Hard labels (argmax, lowest index on ties) and row-softmax probabilities.
pub fn predict(model: &GcnModel, graph: &Graph) -> Result<(Vec<usize>, Array2<f64>)> {
    let probs = softmax_rows(&forward(model, graph)?);
    let labels = probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok((labels, probs))
}

/// Entropy-based reliability score in [0, 1] per row.
///
/// Rows are min-max normalized by Shannon entropy (natural log, 0 ln 0 := 0):
/// the lowest-entropy row scores 1, the highest 0. When every row has the
/// same entropy there is nothing to rank and all scores are 1.
pub fn entropy_confidence(probabilities: &Array2<f64>) -> Result<Array1<f64>> {
    let n = probabilities.nrows();
    for row in probabilities.rows() {
        if (row.sum() - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
            return Err(GdaError::Invalid(
                "probability rows must be nonnegative and sum to 1".into(),
            ));
        }
    }
    let ent: Array1<f64> = probabilities
        .rows()
        .into_iter()
        .map(|row| -row.iter().map(|&p| p * p.max(1e-300).ln()).sum::<f64>())
        .collect();
    let lo = ent.fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = ent.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if hi - lo < 1e-15 {
        return Ok(Array1::ones(n));
    }
    Ok(ent.mapv(|e| (hi - e) / (hi - lo)))
}

/// Unnormalized weighted cross-entropy. Non-finite probabilities are
/// reported rather than masked: the log floor below would otherwise turn a
/// NaN softmax into an innocuous finite loss.
fn weighted_cross_entropy(
    probs: &Array2<f64>,
    labels: &[usize],
    sample_weights: &Array1<f64>,
) -> Result<f64> {
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let p = probs[[i, y]];
        if !p.is_finite() {
            return Err(GdaError::Numerical(format!(
                "predicted probability for node {i} is {p}; training diverged"
            )));
        }
        loss -= sample_weights[i] * p.max(1e-300).ln();
    }
    Ok(loss)
}

fn check_training_inputs(
    graph: &Graph,
    labels: &[usize],
    sample_weights: &Array1<f64>,
    classes: usize,
) -> Result<()> {
    let n = graph.n();
    if labels.len() != n || sample_weights.len() != n {
        return Err(GdaError::Dimension(format!(
            "{} labels and {} weights for {} nodes",
            labels.len(),
            sample_weights.len(),
            n
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(GdaError::Invalid(format!(
            "label {bad} outside {classes} classes"
        )));
    }
    if sample_weights
        .iter()
        .any(|&w| !w.is_finite() || !(0.0..=1.0).contains(&w))
    {
        return Err(GdaError::Invalid(
            "sample weights must lie in [0, 1]".into(),
        ));
    }
    Ok(())
}

/// Weighted cross-entropy of the model on a labeled graph.
#[cfg(test)]
pub(crate) fn training_loss(
    model: &GcnModel,
    graph: &Graph,
    labels: &[usize],
    sample_weights: &Array1<f64>,
) -> Result<f64> {
    check_training_inputs(graph, labels, sample_weights, model.classes())?;
    let wsum = sample_weights.sum();
    if wsum == 0.0 {
        return Ok(0.0);
    }
    let probs = softmax_rows(&forward(model, graph)?);
    let loss = weighted_cross_entropy(&probs, labels, sample_weights)?;
    Ok(loss / wsum)
}

/// Continues full-batch gradient descent from an existing model.
///
/// Aborts with a numerical error if the loss leaves the finite range; an
/// all-zero weight vector makes every gradient zero and returns the model
/// unchanged.
pub fn train_from(
    model: &GcnModel,
    graph: &Graph,
    labels: &[usize],
    sample_weights: &Array1<f64>,
    cfg: &TrainConfig,
) -> Result<GcnModel> {
    Ok(train_with_history(model, graph, labels, sample_weights, cfg)?.0)
}

/// Like [`train_from`] but also returns the per-epoch loss sequence.
pub fn train_with_history(
    model: &GcnModel,
    graph: &Graph,
    labels: &[usize],
    sample_weights: &Array1<f64>,
    cfg: &TrainConfig,
) -> Result<(GcnModel, Vec<f64>)> {
    cfg.validate()?;
    check_training_inputs(graph, labels, sample_weights, model.classes())?;
    if graph.feature_dim() != model.feature_dim() {
        return Err(GdaError::Dimension(format!(
            "model expects {} features, graph has {}",
            model.feature_dim(),
            graph.feature_dim()
        )));
    }
    let mut model = model.clone();
    let n = graph.n();
    let classes = model.classes();
    let layer_count = model.layers();
    let wsum = sample_weights.sum();
    if wsum == 0.0 {
        return Ok((model, Vec::new()));
    }
    let ah = normalize_adjacency(&graph.adjacency)?;
    let mut onehot: Array2<f64> = Array2::zeros((n, classes));
    for (i, &y) in labels.iter().enumerate() {
        onehot[[i, y]] = 1.0;
    }
    let scaled_w = sample_weights / wsum;
    // layer 0 input A^ X never changes; deeper inputs do
    let ax = ah.dot(&graph.features);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut pres: Vec<Array2<f64>> = Vec::with_capacity(layer_count);
        let mut props: Vec<Array2<f64>> = Vec::with_capacity(layer_count);
        for l in 0..layer_count {
            let input = if l == 0 {
                ax.clone()
            } else {
                ah.dot(&pres[l - 1].mapv(|v| v.max(0.0)))
            };
            let pre = input.dot(&model.weights[l]) + &model.biases[l];
            props.push(input);
            pres.push(pre);
        }
        let probs = softmax_rows(&pres[layer_count - 1]);
        let loss = weighted_cross_entropy(&probs, labels, &scaled_w).map_err(|_| {
            GdaError::Numerical(format!(
                "loss became non-finite at epoch {epoch}; lower the learning rate"
            ))
        })?;
        losses.push(loss);
        let mut delta = (&probs - &onehot) * &scaled_w.view().insert_axis(Axis(1));
        for l in (0..layer_count).rev() {
            let dw = props[l].t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            if l > 0 {
                let dinput = ah.dot(&delta).dot(&model.weights[l].t());
                delta = dinput * &pres[l - 1].mapv(|v| f64::from(v > 0.0));
            }
            model.weights[l] = &model.weights[l] - &(dw * cfg.learning_rate);
            model.biases[l] = &model.biases[l] - &(db * cfg.learning_rate);
        }
    }
    Ok((model, losses))
}

/// Initializes a fresh model from the config and trains it on the graph.
pub fn train(
    graph: &Graph,
    labels: &[usize],
    sample_weights: &Array1<f64>,
    classes: usize,
    cfg: &TrainConfig,
) -> Result<GcnModel> {
    let model = GcnModel::init(graph.feature_dim(), classes, cfg)?;
    train_from(&model, graph, labels, sample_weights, cfg)
}
