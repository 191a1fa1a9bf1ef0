//! Per-task softmax output over k true classes plus one abstain class.

use crate::error::{Error, Result};

/// Probability vector over `k` true classes followed by one abstain class.
///
/// `probs[0..k]` are the true-class probabilities; `probs[k]` is the
/// probability of abstaining.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
    k: usize,
}

impl ProbabilityVector {
    /// Validates simplex membership: k+1 entries in [0,1] summing to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::shape(format!(
                "probability vector needs at least 2 entries, got {}",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::numeric(format!(
                    "probability {} at index {} outside [0, 1]",
                    p, i
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::numeric(format!(
                "probabilities sum to {} (|sum - 1| > 1e-9)",
                sum
            )));
        }
        let k = probs.len() - 1;
        Ok(ProbabilityVector { probs, k })
    }

    /// Number of true classes (abstain excluded).
    pub fn num_true_classes(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.probs[class]
    }

    /// Probability of the abstain class.
    pub fn abstain_prob(&self) -> f64 {
        self.probs[self.k]
    }

    /// Argmax over all k+1 classes; ties broken by lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Argmax restricted to the true classes (abstain masked out).
    pub fn argmax_true_classes(&self) -> usize {
        let mut best = 0;
        for i in 1..self.k {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// True when the abstain class wins the full argmax.
    pub fn abstains(&self) -> bool {
        self.argmax() == self.k
    }
}

/// Per-task classification target; the abstain class is never a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetLabel {
    class_index: usize,
}

impl TargetLabel {
    /// `class_index` must lie in [0, k).
    pub fn new(class_index: usize, num_true_classes: usize) -> Result<Self> {
        if class_index >= num_true_classes {
            return Err(Error::data(format!(
                "target class {} out of range for {} true classes",
                class_index, num_true_classes
            )));
        }
        Ok(TargetLabel { class_index })
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }
}
