//! Multitask word-CNN with a per-task abstain class.
//!
//! Architecture: token embedding -> parallel valid 1-d convolutions (one per
//! filter width) -> ReLU -> max-over-time pooling -> feature concatenation ->
//! one dense + softmax head per task, each head `k + 1` wide (its last class
//! means "abstain").

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers;
use crate::layers::MaxPool;
use crate::prob::ProbabilityVector;
use crate::rng::Rng;
use crate::tensor::{Parameter, Tensor};

/// The task names this toolkit recognizes.
pub const TASK_NAMES: [&str; 6] = [
    "site",
    "subsite",
    "laterality",
    "behavior",
    "histology",
    "grade",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    /// True classes; the head emits `num_classes + 1` outputs.
    pub num_classes: usize,
}

impl TaskSpec {
    pub fn new(name: impl Into<String>, num_classes: usize) -> Self {
        TaskSpec {
            name: name.into(),
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !TASK_NAMES.contains(&self.name.as_str()) {
            return Err(Error::config(format!(
                "unknown task name '{}' (expected one of {:?})",
                self.name, TASK_NAMES
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "task '{}' needs at least 2 classes, got {}",
                self.name, self.num_classes
            )));
        }
        Ok(())
    }

    /// Output width of this task's head (true classes plus abstain).
    pub fn head_width(&self) -> usize {
        self.num_classes + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Strictly increasing filter widths.
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub tasks: Vec<TaskSpec>,
    /// Documents are truncated to this many tokens at ingestion.
    pub max_doc_len: usize,
    /// Dropout rate on the concatenated features during training; 0 disables.
    pub dropout: f64,
    /// Training-time probability of masking an input token to PAD; 0
    /// disables. Counters memorization of per-document token fingerprints.
    pub word_dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, tasks: Vec<TaskSpec>, seed: u64) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 300,
            filter_widths: vec![3, 4, 5],
            filters_per_width: 300,
            tasks,
            max_doc_len: 1500,
            dropout: 0.0,
            word_dropout: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::config(format!(
                "vocab_size must be at least 2 (pad + unk), got {}",
                self.vocab_size
            )));
        }
        if self.embed_dim == 0 {
            return Err(Error::config("embed_dim must be positive".to_string()));
        }
        if self.filter_widths.is_empty() {
            return Err(Error::config("filter_widths must be non-empty".to_string()));
        }
        if !self.filter_widths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config(format!(
                "filter_widths must be strictly increasing, got {:?}",
                self.filter_widths
            )));
        }
        if self.filter_widths[0] == 0 {
            return Err(Error::config("filter widths must be positive".to_string()));
        }
        if self.filters_per_width == 0 {
            return Err(Error::config("filters_per_width must be positive".to_string()));
        }
        if self.tasks.is_empty() {
            return Err(Error::config("tasks must be non-empty".to_string()));
        }
        for (i, task) in self.tasks.iter().enumerate() {
            task.validate()?;
            if self.tasks[i + 1..].iter().any(|t| t.name == task.name) {
                return Err(Error::config(format!("duplicate task name '{}'", task.name)));
            }
        }
        if self.max_doc_len < self.max_filter_width() {
            return Err(Error::config(format!(
                "max_doc_len {} shorter than the largest filter width {}",
                self.max_doc_len,
                self.max_filter_width()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.word_dropout) {
            return Err(Error::config(format!(
                "word_dropout {} outside [0, 1)",
                self.word_dropout
            )));
        }
        Ok(())
    }

    pub fn max_filter_width(&self) -> usize {
        *self.filter_widths.last().unwrap()
    }

    /// Width of the concatenated pooled features.
    pub fn feature_width(&self) -> usize {
        self.filters_per_width * self.filter_widths.len()
    }

    /// Closed-form total parameter count.
    pub fn parameter_count(&self) -> usize {
        let emb = self.vocab_size * self.embed_dim;
        let conv: usize = self
            .filter_widths
            .iter()
            .map(|w| self.filters_per_width * w * self.embed_dim + self.filters_per_width)
            .sum();
        let heads: usize = self
            .tasks
            .iter()
            .map(|t| self.feature_width() * t.head_width() + t.head_width())
            .sum();
        emb + conv + heads
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }
}

/// Per-task prediction; the abstain class winning means the model declines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskPrediction {
    Class(usize),
    Abstain,
}

impl TaskPrediction {
    pub fn is_abstain(&self) -> bool {
        matches!(self, TaskPrediction::Abstain)
    }
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    doc: Vec<u32>,
    embedded: Tensor,
    conv_pre: Vec<Tensor>,
    pools: Vec<MaxPool>,
    /// Concatenated (and, in training, dropout-scaled) features.
    features: Tensor,
    dropout_scale: Option<Vec<f64>>,
    pub probs: Vec<ProbabilityVector>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    /// Flat parameter list in a fixed order: embedding, then kernel/bias per
    /// width, then weight/bias per task head.
    pub params: Vec<Parameter>,
}

const EMBEDDING_IDX: usize = 0;

impl Model {
    fn conv_kernel_idx(&self, width_idx: usize) -> usize {
        1 + 2 * width_idx
    }
    fn conv_bias_idx(&self, width_idx: usize) -> usize {
        2 + 2 * width_idx
    }
    fn head_weight_idx(&self, task_idx: usize) -> usize {
        1 + 2 * self.config.filter_widths.len() + 2 * task_idx
    }
    fn head_bias_idx(&self, task_idx: usize) -> usize {
        self.head_weight_idx(task_idx) + 1
    }

    /// Allocates and initializes all parameters. Embeddings are uniform in
    /// (-0.05, 0.05); conv and dense weights are Glorot-uniform; biases zero.
    /// Deterministic for a given `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::with_stream(config.seed, "model-init");
        let mut params = Vec::new();

        let emb_len = config.vocab_size * config.embed_dim;
        let emb_values: Vec<f64> = (0..emb_len).map(|_| rng.uniform(-0.05, 0.05)).collect();
        params.push(Parameter::new(
            "embedding",
            Tensor::from_values(&[config.vocab_size, config.embed_dim], emb_values)?,
        ));

        for &width in &config.filter_widths {
            let fan_in = (width * config.embed_dim) as f64;
            let fan_out = config.filters_per_width as f64;
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            let klen = config.filters_per_width * width * config.embed_dim;
            let kvals: Vec<f64> = (0..klen).map(|_| rng.uniform(-limit, limit)).collect();
            params.push(Parameter::new(
                format!("conv_w{width}_kernel"),
                Tensor::from_values(
                    &[config.filters_per_width, width, config.embed_dim],
                    kvals,
                )?,
            ));
            params.push(Parameter::new(
                format!("conv_w{width}_bias"),
                Tensor::zeros(&[config.filters_per_width]),
            ));
        }

        let feat = config.feature_width();
        for task in &config.tasks {
            let out = task.head_width();
            let limit = (6.0 / (feat + out) as f64).sqrt();
            let wvals: Vec<f64> = (0..out * feat).map(|_| rng.uniform(-limit, limit)).collect();
            params.push(Parameter::new(
                format!("head_{}_weight", task.name),
                Tensor::from_values(&[out, feat], wvals)?,
            ));
            params.push(Parameter::new(
                format!("head_{}_bias", task.name),
                Tensor::zeros(&[out]),
            ));
        }

        Ok(Model { config, params })
    }

    /// Replaces the embedding table with one loaded from a checkpoint-format
    /// file (tensor name "embedding"), e.g. to start from pretrained vectors.
    pub fn load_embedding_table(&mut self, path: &Path) -> Result<()> {
        let tensors = read_named_tensors(path)?;
        let table = tensors
            .into_iter()
            .find(|(name, _)| name == "embedding")
            .map(|(_, t)| t)
            .ok_or_else(|| Error::format("no tensor named 'embedding' in file".to_string()))?;
        if table.shape != self.params[EMBEDDING_IDX].value.shape {
            return Err(Error::shape(format!(
                "embedding table shape {:?} does not match model {:?}",
                table.shape, self.params[EMBEDDING_IDX].value.shape
            )));
        }
        table.ensure_finite("embedding table")?;
        self.params[EMBEDDING_IDX].value = table;
        Ok(())
    }

    /// Forward pass keeping the activations needed by [`Model::backward`].
    /// `dropout_rng` enables training-mode dropout on the concatenated
    /// features; pass `None` for evaluation.
    pub fn forward_cached(
        &self,
        doc: &[u32],
        mut dropout_rng: Option<&mut Rng>,
    ) -> Result<ForwardCache> {
        let max_w = self.config.max_filter_width();
        if doc.len() < max_w {
            return Err(Error::data(format!(
                "document of {} tokens shorter than the max filter width {}; pad at tokenization time",
                doc.len(),
                max_w
            )));
        }
        let doc: Vec<u32> = match (&mut dropout_rng, self.config.word_dropout) {
            (Some(rng), p) if p > 0.0 => doc
                .iter()
                .map(|&t| if t != 0 && rng.bernoulli(p) { 0 } else { t })
                .collect(),
            _ => doc.to_vec(),
        };
        let doc = &doc[..];
        let embedded = layers::embedding_forward(&self.params[EMBEDDING_IDX], doc)?;

        let nw = self.config.filter_widths.len();
        let filters = self.config.filters_per_width;
        let mut conv_pre = Vec::with_capacity(nw);
        let mut pools = Vec::with_capacity(nw);
        let mut features = Tensor::zeros(&[self.config.feature_width()]);
        for wi in 0..nw {
            let pre = layers::conv1d_forward(
                &embedded,
                &self.params[self.conv_kernel_idx(wi)],
                &self.params[self.conv_bias_idx(wi)],
            )?;
            let post = layers::relu_forward(&pre);
            let pool = layers::max_over_time(&post)?;
            features.values[wi * filters..(wi + 1) * filters]
                .copy_from_slice(&pool.output.values);
            conv_pre.push(pre);
            pools.push(pool);
        }

        let dropout_scale = match (&mut dropout_rng, self.config.dropout) {
            (Some(rng), p) if p > 0.0 => {
                let keep = 1.0 - p;
                let scale: Vec<f64> = features
                    .values
                    .iter()
                    .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
                    .collect();
                for (v, s) in features.values.iter_mut().zip(&scale) {
                    *v *= s;
                }
                Some(scale)
            }
            _ => None,
        };

        let mut probs = Vec::with_capacity(self.config.tasks.len());
        for ti in 0..self.config.tasks.len() {
            let logits = layers::dense_forward(
                &features,
                &self.params[self.head_weight_idx(ti)],
                &self.params[self.head_bias_idx(ti)],
            )?;
            probs.push(layers::softmax(&logits.values)?);
        }

        Ok(ForwardCache {
            doc: doc.to_vec(),
            embedded,
            conv_pre,
            pools,
            features,
            dropout_scale,
            probs,
        })
    }

    /// Per-task output distributions for a document.
    pub fn forward(&self, doc: &[u32]) -> Result<Vec<ProbabilityVector>> {
        Ok(self.forward_cached(doc, None)?.probs)
    }

    /// Per-task argmax predictions; the abstain class winning maps to
    /// [`TaskPrediction::Abstain`]. Ties break toward the lowest index.
    pub fn predict(&self, doc: &[u32]) -> Result<Vec<TaskPrediction>> {
        let probs = self.forward(doc)?;
        Ok(probs
            .iter()
            .map(|p| {
                if p.abstains() {
                    TaskPrediction::Abstain
                } else {
                    TaskPrediction::Class(p.argmax())
                }
            })
            .collect())
    }

    /// Accumulates gradients for one sample given per-task logit gradients.
    pub fn backward(&mut self, cache: &ForwardCache, d_logits: &[Vec<f64>]) -> Result<()> {
        if d_logits.len() != self.config.tasks.len() {
            return Err(Error::shape(format!(
                "backward expects {} logit gradients, got {}",
                self.config.tasks.len(),
                d_logits.len()
            )));
        }
        let filters = self.config.filters_per_width;
        let mut d_features = Tensor::zeros(&[self.config.feature_width()]);
        for (ti, dl) in d_logits.iter().enumerate() {
            let d = Tensor::from_values(&[dl.len()], dl.clone())?;
            let (w_idx, b_idx) = (self.head_weight_idx(ti), self.head_bias_idx(ti));
            let (weight, bias) = pair_mut(&mut self.params, w_idx, b_idx);
            let partial = layers::dense_backward(&cache.features, weight, bias, &d);
            for (acc, v) in d_features.values.iter_mut().zip(&partial.values) {
                *acc += v;
            }
        }

        if let Some(scale) = &cache.dropout_scale {
            for (g, s) in d_features.values.iter_mut().zip(scale) {
                *g *= s;
            }
        }

        let mut d_embedded = Tensor::zeros(&cache.embedded.shape);
        for wi in 0..self.config.filter_widths.len() {
            let seg = &d_features.values[wi * filters..(wi + 1) * filters];
            let d_pool = Tensor::from_values(&[filters], seg.to_vec())?;
            let d_post = layers::max_over_time_backward(
                &cache.conv_pre[wi].shape,
                &cache.pools[wi],
                &d_pool,
            );
            let d_pre = layers::relu_backward(&cache.conv_pre[wi], &d_post);
            let (k_idx, b_idx) = (self.conv_kernel_idx(wi), self.conv_bias_idx(wi));
            let (kernel, bias) = pair_mut(&mut self.params, k_idx, b_idx);
            let partial = layers::conv1d_backward(&cache.embedded, kernel, bias, &d_pre);
            for (acc, v) in d_embedded.values.iter_mut().zip(&partial.values) {
                *acc += v;
            }
        }

        layers::embedding_backward(&mut self.params[EMBEDDING_IDX], &cache.doc, &d_embedded);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.scale_grad(factor);
        }
    }
}

fn pair_mut(params: &mut [Parameter], i: usize, j: usize) -> (&mut Parameter, &mut Parameter) {
    assert!(i < j);
    let (left, right) = params.split_at_mut(j);
    (&mut left[i], &mut right[0])
}

// ---------------------------------------------------------------------------
// Checkpoint format
//
// Versioned binary container: magic + version, a JSON header (model config
// and optional training metadata), then named tensor blocks as
// (name, dtype, shape, little-endian f64 values).
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"DACCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;
const DTYPE_F64_LE: u8 = 1;

/// Training state recorded alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epoch: usize,
    /// Frozen per-task abstention penalties.
    pub alphas: Vec<f64>,
    pub val_abstention: Vec<f64>,
    pub val_retained_accuracy: Vec<f64>,
    pub budgets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    model: ModelConfig,
    training: Option<TrainingMeta>,
}

pub fn save_checkpoint(model: &Model, meta: Option<&TrainingMeta>, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;

    let header = CheckpointHeader {
        model: model.config.clone(),
        training: meta.cloned(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::format(format!("checkpoint header encode: {e}")))?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;

    w.write_all(&(model.params.len() as u32).to_le_bytes())?;
    for p in &model.params {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[DTYPE_F64_LE, p.value.shape.len() as u8])?;
        for &d in &p.value.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &p.value.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format("truncated checkpoint file".to_string()))
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_header(r: &mut impl Read) -> Result<CheckpointHeader> {
    let mut magic = [0u8; 8];
    read_exact_or_truncated(r, &mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format("bad checkpoint magic bytes".to_string()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let header_len = read_u64(r)? as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact_or_truncated(r, &mut header_bytes)?;
    serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::format(format!("checkpoint header decode: {e}")))
}

fn read_tensor_block(r: &mut impl Read) -> Result<(String, Tensor)> {
    let name_len = read_u16(r)? as usize;
    let mut name_bytes = vec![0u8; name_len];
    read_exact_or_truncated(r, &mut name_bytes)?;
    let name = String::from_utf8(name_bytes)
        .map_err(|_| Error::format("non-utf8 tensor name".to_string()))?;
    let mut meta = [0u8; 2];
    read_exact_or_truncated(r, &mut meta)?;
    if meta[0] != DTYPE_F64_LE {
        return Err(Error::format(format!("unsupported dtype tag {}", meta[0])));
    }
    let ndim = meta[1] as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u64(r)? as usize);
    }
    let count: usize = shape.iter().product();
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        read_exact_or_truncated(r, &mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok((name, Tensor::from_values(&shape, values)?))
}

/// Reads the named tensor blocks of a checkpoint-format file.
pub fn read_named_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let _header = read_header(&mut r)?;
    let count = read_u32(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        tensors.push(read_tensor_block(&mut r)?);
    }
    Ok(tensors)
}

/// Loads a model (and any training metadata) saved by [`save_checkpoint`].
/// The round-trip is bit-exact.
pub fn load_checkpoint(path: &Path) -> Result<(Model, Option<TrainingMeta>)> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r)?;
    header.model.validate()?;

    let expected = Model::init(header.model.clone())?;
    let count = read_u32(&mut r)? as usize;
    if count != expected.params.len() {
        return Err(Error::shape(format!(
            "checkpoint has {} tensors, config implies {}",
            count,
            expected.params.len()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for exp in &expected.params {
        let (name, tensor) = read_tensor_block(&mut r)?;
        if name != exp.name {
            return Err(Error::format(format!(
                "tensor '{}' out of order (expected '{}')",
                name, exp.name
            )));
        }
        if tensor.shape != exp.value.shape {
            return Err(Error::shape(format!(
                "tensor '{}' has shape {:?}, config implies {:?}",
                name, tensor.shape, exp.value.shape
            )));
        }
        tensor.ensure_finite(&name)?;
        params.push(Parameter::new(name, tensor));
    }
    Ok((
        Model {
            config: header.model,
            params,
        },
        header.training,
    ))
}
