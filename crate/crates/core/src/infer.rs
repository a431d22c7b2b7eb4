//! Model bundles and native forward passes for the payload detectors.
//!
//! A bundle is validated and compiled once at load; inference on a compiled
//! model cannot fail on weight shapes, only on input length. Convolutions use
//! valid padding and stride 1, batch norm uses eps 1e-3, and every conv block
//! (conv, then batch norm when present) ends in an implicit ReLU.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{embedder, EmbedError, Embedder, EmbeddingSpec, HashEmbedder};
use crate::features::{Detector, FEATURE_SCHEMA_VERSION};

pub const FORMAT_VERSION: u32 = 1;
pub const BN_EPS: f64 = 1e-3;

/// Embedding widths the detectors are built around.
pub const SQLI_EMBED_DIM: usize = 384;
pub const OSI_EMBED_DIM: usize = 384;
pub const XSS_EMBED_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cnn1d,
    Mlp,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

/// Standardization of the handcrafted slice, which sits after the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layer {
    /// `weights[filter][in_channel][tap]`.
    Conv1d { filters: usize, kernel: usize, weights: Vec<Vec<Vec<f32>>>, bias: Vec<f32> },
    BatchNorm { gamma: Vec<f32>, beta: Vec<f32>, mean: Vec<f32>, var: Vec<f32> },
    MaxPool { size: usize },
    GlobalMaxPool,
    /// `weights[out][in]`.
    Dense { weights: Vec<Vec<f32>>, bias: Vec<f32>, activation: Activation },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeNode {
    /// Input index tested at this node, or -1 for a leaf.
    pub feature: i64,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default = "minus_one")]
    pub left: i64,
    #[serde(default = "minus_one")]
    pub right: i64,
    /// Probability of the malicious class; read at leaves only.
    #[serde(default)]
    pub value: f64,
}

fn minus_one() -> i64 {
    -1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBundle {
    pub format_version: u32,
    pub kind: ModelKind,
    pub input_dim: usize,
    pub feature_schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<Scaler>,
    #[serde(default = "default_threshold")]
    pub decision_threshold: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<Layer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trees: Vec<Tree>,
    /// Embedding the model was trained on; absent means the hash provider with
    /// seed 0 and the detector's standard width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingSpec>,
}

#[derive(Debug, Error)]
pub enum InferError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("bundle is not valid JSON: {0}")]
    Json(String),
    #[error("weight shape error: {0}")]
    WeightShape(String),
    #[error("input has {got} values, model expects {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("bundle kind {got:?} cannot be used as {wanted}")]
    Kind { got: ModelKind, wanted: &'static str },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

fn shape(msg: impl Into<String>) -> InferError {
    InferError::WeightShape(msg.into())
}

#[derive(Debug, Clone)]
enum Op {
    /// Flat weights indexed `(f * in_ch + c) * k + tap`.
    Conv { filters: usize, in_ch: usize, k: usize, w: Vec<f32>, b: Vec<f32> },
    /// Folded batch norm: `x * scale + shift` per channel.
    Affine { scale: Vec<f32>, shift: Vec<f32> },
    Relu,
    MaxPool(usize),
    GlobalMax,
    /// Flat weights indexed `o * inputs + i`.
    Dense { inputs: usize, outputs: usize, w: Vec<f32>, b: Vec<f32>, act: Activation },
}

/// A validated bundle ready for inference. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct Model {
    bundle: ModelBundle,
    ops: Vec<Op>,
}

impl Model {
    pub fn from_bundle(bundle: ModelBundle) -> Result<Self, InferError> {
        if bundle.format_version != FORMAT_VERSION {
            return Err(shape(format!("format_version {} is not {FORMAT_VERSION}", bundle.format_version)));
        }
        if bundle.input_dim == 0 {
            return Err(shape("input_dim must be positive"));
        }
        if !(0.0..=1.0).contains(&bundle.decision_threshold) {
            return Err(shape("decision_threshold must be in [0,1]"));
        }
        if let Some(s) = &bundle.scaler {
            if s.means.len() != s.stds.len() || s.means.len() > bundle.input_dim {
                return Err(shape("scaler means/stds must have equal length within input_dim"));
            }
            if s.means.iter().chain(&s.stds).any(|v| !v.is_finite()) || s.stds.iter().any(|&v| v < 0.0) {
                return Err(shape("scaler values must be finite with non-negative stds"));
            }
        }
        let ops = match bundle.kind {
            ModelKind::Cnn1d => compile_cnn(&bundle)?,
            ModelKind::Mlp => compile_mlp(&bundle)?,
            ModelKind::Forest => {
                validate_forest(&bundle)?;
                Vec::new()
            }
        };
        if bundle.kind != ModelKind::Forest && !bundle.trees.is_empty() {
            return Err(shape("only forest bundles carry trees"));
        }
        Ok(Self { bundle, ops })
    }

    pub fn from_json(text: &str) -> Result<Self, InferError> {
        let bundle: ModelBundle = serde_json::from_str(text).map_err(|e| InferError::Json(e.to_string()))?;
        Self::from_bundle(bundle)
    }

    pub fn load(path: &Path) -> Result<Self, InferError> {
        let text = std::fs::read_to_string(path).map_err(|e| InferError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_json(&text).map_err(|e| match e {
            InferError::Json(m) => InferError::Json(format!("{}: {m}", path.display())),
            InferError::WeightShape(m) => InferError::WeightShape(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    pub fn kind(&self) -> ModelKind {
        self.bundle.kind
    }

    /// Checks the production CNN stack: three conv(k3)+bn+pool2 blocks with
    /// 128, 256 and 512 filters, global max pool, dense 256 relu, dense 1 sigmoid.
    pub fn require_reference_stack(&self) -> Result<(), InferError> {
        if self.bundle.kind != ModelKind::Cnn1d {
            return Ok(());
        }
        let mut expected = Vec::new();
        for f in [128usize, 256, 512] {
            expected.push(format!("conv1d({f},3)"));
            expected.push("batch_norm".to_string());
            expected.push("max_pool(2)".to_string());
        }
        expected.extend(["global_max_pool".to_string(), "dense(256,relu)".to_string(), "dense(1,sigmoid)".to_string()]);
        let got: Vec<String> = self
            .bundle
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv1d { filters, kernel, .. } => format!("conv1d({filters},{kernel})"),
                Layer::BatchNorm { .. } => "batch_norm".to_string(),
                Layer::MaxPool { size } => format!("max_pool({size})"),
                Layer::GlobalMaxPool => "global_max_pool".to_string(),
                Layer::Dense { weights, activation, .. } => {
                    format!("dense({},{})", weights.len(), if *activation == Activation::Relu { "relu" } else { "sigmoid" })
                }
            })
            .collect();
        if got != expected {
            return Err(shape(format!("cnn layer stack is [{}], expected [{}]", got.join(", "), expected.join(", "))));
        }
        Ok(())
    }

    /// Pre-sigmoid output of a CNN or MLP.
    pub fn logit(&self, input: &[f32]) -> Result<f64, InferError> {
        self.check_input(input)?;
        match self.bundle.kind {
            ModelKind::Forest => Err(InferError::Kind { got: ModelKind::Forest, wanted: "a network" }),
            _ => Ok(run_ops(&self.ops, input)),
        }
    }

    /// Malicious-class probability in [0,1].
    pub fn probability(&self, input: &[f32]) -> Result<f64, InferError> {
        match self.bundle.kind {
            ModelKind::Forest => {
                self.check_input(input)?;
                Ok(forest_mean(&self.bundle.trees, input))
            }
            _ => self.logit(input).map(sigmoid),
        }
    }

    fn check_input(&self, input: &[f32]) -> Result<(), InferError> {
        if input.len() != self.bundle.input_dim {
            return Err(InferError::InputShape { expected: self.bundle.input_dim, got: input.len() });
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn flatten_dense(weights: &[Vec<f32>], bias: &[f32], inputs: usize, at: usize) -> Result<(usize, Vec<f32>), InferError> {
    let outputs = weights.len();
    if outputs == 0 || bias.len() != outputs {
        return Err(shape(format!("layer {at}: dense needs {outputs} > 0 rows and as many biases, got {}", bias.len())));
    }
    if let Some(row) = weights.iter().find(|r| r.len() != inputs) {
        return Err(shape(format!("layer {at}: dense rows must have {inputs} weights, found {}", row.len())));
    }
    Ok((outputs, weights.concat()))
}

fn check_output_layer(ops: &[Op]) -> Result<(), InferError> {
    match ops.last() {
        Some(Op::Dense { outputs: 1, act: Activation::Sigmoid, .. }) => {}
        _ => return Err(shape("the last layer must be dense with 1 output and sigmoid activation")),
    }
    let hidden_sigmoid = ops[..ops.len() - 1].iter().any(|o| matches!(o, Op::Dense { act: Activation::Sigmoid, .. }));
    if hidden_sigmoid {
        return Err(shape("hidden dense layers must use relu"));
    }
    Ok(())
}

fn compile_mlp(b: &ModelBundle) -> Result<Vec<Op>, InferError> {
    let mut ops = Vec::new();
    let mut width = b.input_dim;
    for (at, layer) in b.layers.iter().enumerate() {
        let Layer::Dense { weights, bias, activation } = layer else {
            return Err(shape(format!("layer {at}: mlp bundles hold dense layers only")));
        };
        let (outputs, w) = flatten_dense(weights, bias, width, at)?;
        ops.push(Op::Dense { inputs: width, outputs, w, b: bias.clone(), act: *activation });
        width = outputs;
    }
    check_output_layer(&ops)?;
    Ok(ops)
}

fn compile_cnn(b: &ModelBundle) -> Result<Vec<Op>, InferError> {
    let mut ops = Vec::new();
    let (mut channels, mut length) = (1usize, b.input_dim);
    let mut flat: Option<usize> = None;
    let mut open_block = false;
    let close_block = |ops: &mut Vec<Op>, open: &mut bool| {
        if std::mem::take(open) {
            ops.push(Op::Relu);
        }
    };
    for (at, layer) in b.layers.iter().enumerate() {
        match (layer, flat) {
            (Layer::Conv1d { filters, kernel, weights, bias }, None) => {
                close_block(&mut ops, &mut open_block);
                if *filters == 0 || *kernel == 0 || weights.len() != *filters || bias.len() != *filters {
                    return Err(shape(format!("layer {at}: conv1d needs {filters} filters with weights and biases")));
                }
                for f in weights {
                    if f.len() != channels || f.iter().any(|taps| taps.len() != *kernel) {
                        return Err(shape(format!("layer {at}: conv1d weights must be [{filters}][{channels}][{kernel}]")));
                    }
                }
                if *kernel > length {
                    return Err(shape(format!("layer {at}: kernel {kernel} exceeds sequence length {length}")));
                }
                let w: Vec<f32> = weights.iter().flatten().flatten().copied().collect();
                ops.push(Op::Conv { filters: *filters, in_ch: channels, k: *kernel, w, b: bias.clone() });
                channels = *filters;
                length = length - kernel + 1;
                open_block = true;
            }
            (Layer::BatchNorm { gamma, beta, mean, var }, None) => {
                if !open_block || !matches!(ops.last(), Some(Op::Conv { .. })) {
                    return Err(shape(format!("layer {at}: batch_norm must directly follow conv1d")));
                }
                if [gamma.len(), beta.len(), mean.len(), var.len()].iter().any(|&n| n != channels) {
                    return Err(shape(format!("layer {at}: batch_norm vectors must have {channels} entries")));
                }
                if var.iter().any(|&v| !(f64::from(v) + BN_EPS > 0.0)) {
                    return Err(shape(format!("layer {at}: batch_norm variance must exceed -eps")));
                }
                let mut scale = Vec::with_capacity(channels);
                let mut shift = Vec::with_capacity(channels);
                for c in 0..channels {
                    let s = f64::from(gamma[c]) / (f64::from(var[c]) + BN_EPS).sqrt();
                    scale.push(s as f32);
                    shift.push((f64::from(beta[c]) - f64::from(mean[c]) * s) as f32);
                }
                ops.push(Op::Affine { scale, shift });
            }
            (Layer::MaxPool { size }, None) => {
                close_block(&mut ops, &mut open_block);
                if *size == 0 || length / size == 0 {
                    return Err(shape(format!("layer {at}: max_pool({size}) leaves no outputs from length {length}")));
                }
                ops.push(Op::MaxPool(*size));
                length /= size;
            }
            (Layer::GlobalMaxPool, None) => {
                close_block(&mut ops, &mut open_block);
                ops.push(Op::GlobalMax);
                flat = Some(channels);
            }
            (Layer::Dense { weights, bias, activation }, Some(width)) => {
                let (outputs, w) = flatten_dense(weights, bias, width, at)?;
                ops.push(Op::Dense { inputs: width, outputs, w, b: bias.clone(), act: *activation });
                flat = Some(outputs);
            }
            (Layer::Dense { .. }, None) => return Err(shape(format!("layer {at}: dense before global_max_pool"))),
            (_, Some(_)) => return Err(shape(format!("layer {at}: only dense layers may follow global_max_pool"))),
        }
    }
    if !ops.iter().any(|o| matches!(o, Op::Conv { .. })) {
        return Err(shape("cnn1d bundles need at least one conv1d layer"));
    }
    check_output_layer(&ops)?;
    Ok(ops)
}

fn validate_forest(b: &ModelBundle) -> Result<(), InferError> {
    if b.trees.is_empty() {
        return Err(shape("forest bundles need at least one tree"));
    }
    if !b.layers.is_empty() {
        return Err(shape("forest bundles carry no layers"));
    }
    for (t, tree) in b.trees.iter().enumerate() {
        if tree.nodes.is_empty() {
            return Err(shape(format!("tree {t} has no nodes")));
        }
        let n = tree.nodes.len() as i64;
        for (i, node) in tree.nodes.iter().enumerate() {
            let i = i as i64;
            if node.feature < 0 {
                if !(0.0..=1.0).contains(&node.value) {
                    return Err(shape(format!("tree {t} node {i}: leaf value {} outside [0,1]", node.value)));
                }
                continue;
            }
            if node.feature as usize >= b.input_dim {
                return Err(shape(format!("tree {t} node {i}: feature {} beyond input_dim", node.feature)));
            }
            // Children after their parent rule out cycles, so descent terminates.
            for child in [node.left, node.right] {
                if child <= i || child >= n {
                    return Err(shape(format!("tree {t} node {i}: child index {child} invalid")));
                }
            }
            if node.threshold.is_nan() {
                return Err(shape(format!("tree {t} node {i}: threshold is NaN")));
            }
        }
    }
    Ok(())
}

fn forest_mean(trees: &[Tree], input: &[f32]) -> f64 {
    let total: f64 = trees
        .iter()
        .map(|tree| {
            let mut i = 0usize;
            loop {
                let node = &tree.nodes[i];
                if node.feature < 0 {
                    break node.value;
                }
                let x = f64::from(input[node.feature as usize]);
                i = if x <= node.threshold { node.left } else { node.right } as usize;
            }
        })
        .sum();
    total / trees.len() as f64
}

/// Runs compiled ops on a single-channel sequence; returns the final logit.
fn run_ops(ops: &[Op], input: &[f32]) -> f64 {
    // Sequence data is channel-major: `x[c * len + t]`.
    let mut x = input.to_vec();
    let mut len = input.len();
    let mut logit = 0.0;
    for op in ops {
        match op {
            Op::Conv { filters, in_ch, k, w, b } => {
                let out_len = len - k + 1;
                let mut y = vec![0f32; filters * out_len];
                for f in 0..*filters {
                    let row = &mut y[f * out_len..(f + 1) * out_len];
                    row.fill(b[f]);
                    for c in 0..*in_ch {
                        let xs = &x[c * len..(c + 1) * len];
                        for tap in 0..*k {
                            let wv = w[(f * in_ch + c) * k + tap];
                            let src = &xs[tap..tap + out_len];
                            for (o, &s) in row.iter_mut().zip(src) {
                                *o += wv * s;
                            }
                        }
                    }
                }
                x = y;
                len = out_len;
            }
            Op::Affine { scale, shift } => {
                for (c, chunk) in x.chunks_mut(len).enumerate() {
                    for v in chunk {
                        *v = *v * scale[c] + shift[c];
                    }
                }
            }
            Op::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Op::MaxPool(size) => {
                let out_len = len / size;
                x = x
                    .chunks(len)
                    .flat_map(|ch| (0..out_len).map(move |t| ch[t * size..(t + 1) * size].iter().copied().fold(f32::NEG_INFINITY, f32::max)))
                    .collect();
                len = out_len;
            }
            Op::GlobalMax => {
                x = x.chunks(len).map(|ch| ch.iter().copied().fold(f32::NEG_INFINITY, f32::max)).collect();
                len = x.len();
            }
            Op::Dense { inputs, outputs, w, b, act } => {
                let mut y = b.clone();
                for (o, yo) in y.iter_mut().enumerate() {
                    let row = &w[o * inputs..(o + 1) * inputs];
                    *yo += row.iter().zip(&x).map(|(a, b)| a * b).sum::<f32>();
                }
                if *outputs == 1 && *act == Activation::Sigmoid {
                    logit = f64::from(y[0]);
                } else if *act == Activation::Relu {
                    y.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                x = y;
                len = x.len();
            }
        }
    }
    logit
}

pub fn cnn_forward(model: &Model, input: &[f32]) -> Result<f64, InferError> {
    expect_kind(model, ModelKind::Cnn1d, "cnn1d")?;
    model.probability(input)
}

pub fn mlp_forward(model: &Model, input: &[f32]) -> Result<f64, InferError> {
    expect_kind(model, ModelKind::Mlp, "mlp")?;
    model.probability(input)
}

pub fn forest_forward(model: &Model, input: &[f32]) -> Result<f64, InferError> {
    expect_kind(model, ModelKind::Forest, "forest")?;
    model.probability(input)
}

fn expect_kind(model: &Model, kind: ModelKind, wanted: &'static str) -> Result<(), InferError> {
    if model.kind() != kind {
        return Err(InferError::Kind { got: model.kind(), wanted });
    }
    Ok(())
}

/// `[embedding ‖ scaled features]`. Scaling applies `(x - mean) / std` per
/// handcrafted element; a zero std leaves the element unchanged.
pub fn assemble_input(embedding: &[f32], features: &[f32], scaler: Option<&Scaler>, input_dim: usize) -> Result<Vec<f32>, InferError> {
    let got = embedding.len() + features.len();
    if got != input_dim {
        return Err(InferError::InputShape { expected: input_dim, got });
    }
    let mut out = Vec::with_capacity(input_dim);
    out.extend_from_slice(embedding);
    match scaler {
        Some(s) => {
            if s.means.len() != features.len() {
                return Err(InferError::InputShape { expected: s.means.len(), got: features.len() });
            }
            out.extend(features.iter().zip(s.means.iter().zip(&s.stds)).map(|(&x, (&m, &sd))| {
                if sd == 0.0 {
                    x
                } else {
                    ((f64::from(x) - m) / sd) as f32
                }
            }));
        }
        None => out.extend_from_slice(features),
    }
    Ok(out)
}

/// One detector's verdict on one payload site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub detector: Detector,
    pub probability: f64,
    pub malicious: bool,
    pub site: String,
    pub latency_micros: u64,
}

pub fn standard_embed_dim(d: Detector) -> usize {
    match d {
        Detector::Sqli => SQLI_EMBED_DIM,
        Detector::Osi => OSI_EMBED_DIM,
        Detector::Xss => XSS_EMBED_DIM,
    }
}

/// The classifier behind one detector.
#[derive(Debug, Clone)]
pub enum Classifier {
    Single(Model),
    /// Unweighted mean of a forest and an MLP.
    Ensemble { forest: Model, mlp: Model },
}

impl Classifier {
    fn models(&self) -> Vec<&Model> {
        match self {
            Classifier::Single(m) => vec![m],
            Classifier::Ensemble { forest, mlp } => vec![forest, mlp],
        }
    }

    /// Bundle threshold: the single model's, or the MLP's for the ensemble.
    pub fn decision_threshold(&self) -> f64 {
        match self {
            Classifier::Single(m) => m.bundle.decision_threshold,
            Classifier::Ensemble { mlp, .. } => mlp.bundle.decision_threshold,
        }
    }
}

/// Model, embedding provider and fallback for one detector.
pub struct DetectorModel {
    pub detector: Detector,
    pub classifier: Classifier,
    pub spec: EmbeddingSpec,
    embedder: Box<dyn Embedder>,
    fallback: HashEmbedder,
}

impl std::fmt::Debug for DetectorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DetectorModel").field("detector", &self.detector).field("spec", &self.spec).finish_non_exhaustive()
    }
}

/// Result of scoring one payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub probability: f64,
    /// The configured provider failed and the hash provider stood in.
    pub degraded: bool,
}

impl DetectorModel {
    /// Validates that every model agrees on the input layout for `detector`.
    pub fn new(detector: Detector, classifier: Classifier, base: &Path) -> Result<Self, InferError> {
        let first = classifier.models()[0].bundle.clone();
        let spec = first.embedding.clone().unwrap_or_else(|| EmbeddingSpec::hash(standard_embed_dim(detector), 0));
        let features = detector.feature_names().len();
        for m in classifier.models() {
            let b = &m.bundle;
            if b.feature_schema_version != FEATURE_SCHEMA_VERSION {
                return Err(shape(format!(
                    "{} bundle has feature_schema_version {}, engine has {FEATURE_SCHEMA_VERSION}",
                    detector.as_str(),
                    b.feature_schema_version
                )));
            }
            if b.input_dim != spec.dim + features {
                return Err(shape(format!("{} bundle input_dim {} != {} + {features}", detector.as_str(), b.input_dim, spec.dim)));
            }
            if b.embedding.as_ref().is_some_and(|e| *e != spec) {
                return Err(shape(format!("{} ensemble members disagree on the embedding", detector.as_str())));
            }
            if b.scaler.as_ref().is_some_and(|s| s.means.len() != features) {
                return Err(shape(format!("{} scaler must cover the {features} handcrafted features", detector.as_str())));
            }
        }
        let embedder = embedder(&spec, base)?;
        let fallback = HashEmbedder { dim: spec.dim, seed: spec.seed };
        Ok(Self { detector, classifier, spec, embedder, fallback })
    }

    pub fn score(&self, payload: &str) -> Result<Scored, InferError> {
        let (embedding, degraded) = match self.embedder.embed(payload) {
            Ok(v) => (v, false),
            Err(_) => (self.fallback.embed(payload)?, true),
        };
        let features = self.detector.features(payload).as_f32();
        let mut total = 0.0;
        let models = self.classifier.models();
        for m in &models {
            let input = assemble_input(&embedding, &features, m.bundle.scaler.as_ref(), m.bundle.input_dim)?;
            total += m.probability(&input)?;
        }
        Ok(Scored { probability: total / models.len() as f64, degraded })
    }

    /// Scores `payload` and applies `threshold` (`malicious ⇔ p >= threshold`).
    pub fn detect(&self, payload: &str, site: &str, threshold: f64) -> Result<(Detection, bool), InferError> {
        let start = Instant::now();
        let s = self.score(payload)?;
        let d = Detection {
            detector: self.detector,
            probability: s.probability,
            malicious: s.probability >= threshold,
            site: site.to_string(),
            latency_micros: start.elapsed().as_micros() as u64,
        };
        Ok((d, s.degraded))
    }
}

/// File names of the detector bundles inside a models directory.
pub const SQLI_FILE: &str = "sqli_cnn.json";
pub const OSI_FILE: &str = "osi_cnn.json";
pub const XSS_FOREST_FILE: &str = "xss_forest.json";
pub const XSS_MLP_FILE: &str = "xss_mlp.json";

/// All three detectors, loaded once and shared read-only.
#[derive(Debug)]
pub struct DetectorSet {
    pub sqli: DetectorModel,
    pub osi: DetectorModel,
    pub xss: DetectorModel,
}

impl DetectorSet {
    /// Loads `sqli_cnn.json`, `osi_cnn.json`, `xss_forest.json` and
    /// `xss_mlp.json`. The CNNs must have the production layer stack.
    pub fn load_dir(dir: &Path) -> Result<Self, InferError> {
        let load = |name: &str, kind: ModelKind| -> Result<Model, InferError> {
            let m = Model::load(&dir.join(name))?;
            if m.kind() != kind {
                let wanted = match kind {
                    ModelKind::Cnn1d => "cnn1d",
                    ModelKind::Mlp => "mlp",
                    ModelKind::Forest => "forest",
                };
                return Err(InferError::Kind { got: m.kind(), wanted });
            }
            m.require_reference_stack()?;
            Ok(m)
        };
        Ok(Self {
            sqli: DetectorModel::new(Detector::Sqli, Classifier::Single(load(SQLI_FILE, ModelKind::Cnn1d)?), dir)?,
            osi: DetectorModel::new(Detector::Osi, Classifier::Single(load(OSI_FILE, ModelKind::Cnn1d)?), dir)?,
            xss: DetectorModel::new(
                Detector::Xss,
                Classifier::Ensemble { forest: load(XSS_FOREST_FILE, ModelKind::Forest)?, mlp: load(XSS_MLP_FILE, ModelKind::Mlp)? },
                dir,
            )?,
        })
    }

    pub fn get(&self, d: Detector) -> &DetectorModel {
        match d {
            Detector::Sqli => &self.sqli,
            Detector::Osi => &self.osi,
            Detector::Xss => &self.xss,
        }
    }
}
