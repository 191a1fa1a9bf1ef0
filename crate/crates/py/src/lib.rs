//! Python bindings: the abstention loss and its controller, the exact
//! contingency tests, tokenization, and checkpointed-model inference with
//! perturbation explanations.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dac_core::corpus;
use dac_core::error::Error;
use dac_core::lime;
use dac_core::loss;
use dac_core::model;
use dac_core::prob::{ProbabilityVector, TargetLabel};
use dac_core::stats;
use dac_core::train;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Config(_) | Error::Data(_) => PyValueError::new_err(err.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Abstention loss for one sample: probabilities over k true classes plus a
/// final abstain entry, a target class index below k, and the penalty alpha.
#[pyfunction]
fn abstain_loss(probs: Vec<f64>, target: usize, alpha: f64) -> PyResult<f64> {
    let p = ProbabilityVector::new(probs).map_err(to_py_err)?;
    let t = TargetLabel::new(target, p.num_true_classes()).map_err(to_py_err)?;
    loss::abstain_loss(&p, t, alpha).map_err(to_py_err)
}

/// Gradient of the abstention loss with respect to the logits.
#[pyfunction]
fn abstain_loss_grad(logits: Vec<f64>, target: usize, alpha: f64) -> PyResult<Vec<f64>> {
    let t = TargetLabel::new(target, logits.len().saturating_sub(1)).map_err(to_py_err)?;
    loss::abstain_loss_grad(&logits, t, alpha).map_err(to_py_err)
}

#[pyfunction]
fn softmax(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(dac_core::layers::softmax(&logits)
        .map_err(to_py_err)?
        .probs()
        .to_vec())
}

/// One feedback-controller update of the abstention penalty.
#[pyfunction]
#[pyo3(signature = (alpha, budget, observed_abstention, epoch,
                    warmup_epochs=5, alpha_init=None, up_factor=1.2,
                    down_factor=1.2, slack=0.1, alpha_min=1e-4, alpha_max=1e6))]
#[allow(clippy::too_many_arguments)]
fn alpha_controller_step(
    alpha: f64,
    budget: f64,
    observed_abstention: f64,
    epoch: usize,
    warmup_epochs: usize,
    alpha_init: Option<f64>,
    up_factor: f64,
    down_factor: f64,
    slack: f64,
    alpha_min: f64,
    alpha_max: f64,
) -> PyResult<f64> {
    let cfg = loss::AbstentionConfig {
        alpha,
        budget,
        warmup_epochs,
        alpha_init: alpha_init.unwrap_or(alpha),
        up_factor,
        down_factor,
        slack,
        alpha_min,
        alpha_max,
    };
    cfg.validate().map_err(to_py_err)?;
    Ok(loss::alpha_controller_step(&cfg, epoch, observed_abstention))
}

/// Two-sided exact test for a 2x2 table `[[a, b], [c, d]]`.
#[pyfunction]
fn fisher_exact_2x2(table: [[u64; 2]; 2]) -> f64 {
    stats::fisher_exact_2x2(&stats::ContingencyTable2x2 { cells: table }).p_value
}

/// Two-sided exact test for a 2x3 table `[[a, b, c], [d, e, f]]`.
#[pyfunction]
fn fisher_exact_2x3(table: [[u64; 3]; 2]) -> f64 {
    stats::fisher_exact_2x3(&stats::ContingencyTable2x3 { cells: table }).p_value
}

/// Product attribution estimate; returns (product, truncated percent label).
#[pyfunction]
fn attribution_estimate(
    frac_in_abstained: f64,
    frac_lime_id: f64,
    frac_positive: f64,
) -> PyResult<(f64, String)> {
    let est = stats::attribution_estimate(frac_in_abstained, frac_lime_id, frac_positive)
        .map_err(to_py_err)?;
    Ok((est.product, est.percent_label()))
}

/// Naive task-combination guess from (retained_accuracy, abstention_rate)
/// pairs: (min accuracy, max abstention).
#[pyfunction]
fn naive_guess(pairs: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    train::naive_guess_pairs(&pairs).map_err(to_py_err)
}

/// Token <-> id mapping with PAD=0 and UNK=1.
#[pyclass]
struct Vocab {
    inner: corpus::Vocabulary,
}

#[pymethods]
impl Vocab {
    /// Loads a vocab.txt written by `dac generate` (one token per line).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Vocab {
            inner: corpus::Vocabulary::load(&path).map_err(to_py_err)?,
        })
    }

    /// Lowercases, splits, maps with UNK fallback, pads to `min_len`.
    #[pyo3(signature = (text, min_len=5))]
    fn encode(&self, text: &str, min_len: usize) -> Vec<u32> {
        corpus::tokenize(text, &self.inner, min_len)
    }

    fn token(&self, id: u32) -> Option<String> {
        self.inner.token(id).map(str::to_string)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A trained multitask abstaining classifier loaded from a checkpoint.
#[pyclass]
struct DacModel {
    inner: model::Model,
}

#[pymethods]
impl DacModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _meta) = model::load_checkpoint(&path).map_err(to_py_err)?;
        Ok(DacModel { inner })
    }

    fn task_names(&self) -> Vec<String> {
        self.inner
            .config
            .tasks
            .iter()
            .map(|t| t.name.clone())
            .collect()
    }

    fn num_classes(&self, task: &str) -> PyResult<usize> {
        self.inner
            .config
            .task_index(task)
            .map(|i| self.inner.config.tasks[i].num_classes)
            .ok_or_else(|| PyValueError::new_err(format!("unknown task '{task}'")))
    }

    /// Per-task probability vectors (k true classes plus abstain last).
    fn probabilities(&self, doc: Vec<u32>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self
            .inner
            .forward(&doc)
            .map_err(to_py_err)?
            .iter()
            .map(|p| p.probs().to_vec())
            .collect())
    }

    /// Per-task predicted class index, or None when the model abstains.
    fn predict(&self, doc: Vec<u32>) -> PyResult<Vec<Option<usize>>> {
        Ok(self
            .inner
            .predict(&doc)
            .map_err(to_py_err)?
            .into_iter()
            .map(|p| match p {
                model::TaskPrediction::Class(c) => Some(c),
                model::TaskPrediction::Abstain => None,
            })
            .collect())
    }

    /// Perturbation explanation of the model's predicted class for `task`
    /// (the abstain class when the model abstains). Returns a dict with the
    /// explained class, sorted (position, token, coefficient) entries, and
    /// the local fit's R^2.
    #[pyo3(signature = (doc, task, vocab, num_samples=2000, top_k=10, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn explain(
        &self,
        py: Python<'_>,
        doc: Vec<u32>,
        task: &str,
        vocab: &Vocab,
        num_samples: usize,
        top_k: usize,
        seed: u64,
    ) -> PyResult<PyObject> {
        let task_idx = self
            .inner
            .config
            .task_index(task)
            .ok_or_else(|| PyValueError::new_err(format!("unknown task '{task}'")))?;
        let num_classes = self.inner.config.tasks[task_idx].num_classes;
        let probs = self.inner.forward(&doc).map_err(to_py_err)?;
        let class_index = probs[task_idx].argmax();
        let target = lime::ExplainTarget {
            doc_id: 0,
            task: task.to_string(),
            class_index,
            class_is_abstain: class_index == num_classes,
        };
        let cfg = lime::PerturbationConfig {
            num_samples,
            top_k,
            seed,
            ..Default::default()
        };
        let model = &self.inner;
        let probe = |masked: &[u32]| -> dac_core::Result<f64> {
            Ok(model.forward(masked)?[task_idx].prob(class_index))
        };
        let expl = lime::explain(probe, &doc, &vocab.inner, &target, &cfg).map_err(to_py_err)?;

        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("class_index", expl.class_index)?;
        dict.set_item("is_abstain", expl.class_is_abstain)?;
        dict.set_item("r_squared", expl.r_squared)?;
        dict.set_item("degenerate", expl.degenerate)?;
        let entries: Vec<(usize, String, f64)> = expl
            .entries
            .iter()
            .map(|e| (e.position, e.token.clone(), e.coefficient))
            .collect();
        dict.set_item("entries", entries)?;
        Ok(dict.into())
    }
}

#[pymodule]
fn dac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(abstain_loss, m)?)?;
    m.add_function(wrap_pyfunction!(abstain_loss_grad, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_controller_step, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_exact_2x2, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_exact_2x3, m)?)?;
    m.add_function(wrap_pyfunction!(attribution_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(naive_guess, m)?)?;
    m.add_class::<Vocab>()?;
    m.add_class::<DacModel>()?;
    Ok(())
}
