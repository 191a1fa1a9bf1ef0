//! Abstention loss and the feedback controller for its penalty weight.
//!
//! With `p` the softmax output over k true classes plus an abstain class
//! (`p_a` its abstain probability) and `t` the target class, the loss is
//!
//! ```text
//! L = (1 - p_a) * (-log(p_t / (1 - p_a))) + alpha * log(1 / (1 - p_a))
//! ```
//!
//! It behaves like cross-entropy on the renormalized true classes, scaled by
//! the retained mass, plus an abstention penalty weighted by `alpha`. At
//! `p_a = 0` it reduces exactly to `-log p_t`. Larger `alpha` makes abstaining
//! more expensive; the controller in this module tunes per-task `alpha`
//! values during training so the validation abstention rate tracks a budget.

use crate::error::{Error, Result};
use crate::layers::softmax;
use crate::prob::{ProbabilityVector, TargetLabel};

/// Probabilities are clipped to `[PROB_FLOOR, 1 - PROB_FLOOR]` inside logs so
/// transient saturation cannot produce infinities; clip events are counted.
pub const PROB_FLOOR: f64 = 1e-12;

/// Counts of clipped probabilities seen while computing losses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaturationStats {
    /// `p_target` fell below the floor.
    pub target_floor: u64,
    /// `p_abstain` exceeded `1 - floor` (retained mass fell below the floor).
    pub abstain_ceiling: u64,
}

impl SaturationStats {
    pub fn total(&self) -> u64 {
        self.target_floor + self.abstain_ceiling
    }
}

#[inline]
fn ln_clipped(x: f64, clipped: &mut bool) -> f64 {
    if x < PROB_FLOOR {
        *clipped = true;
        PROB_FLOOR.ln()
    } else {
        x.ln()
    }
}

/// Abstention loss for one task and one sample. Always >= 0.
pub fn abstain_loss(p: &ProbabilityVector, target: TargetLabel, alpha: f64) -> Result<f64> {
    abstain_loss_with_stats(p, target, alpha, &mut SaturationStats::default())
}

/// As [`abstain_loss`], incrementing `stats` when probabilities are clipped.
pub fn abstain_loss_with_stats(
    p: &ProbabilityVector,
    target: TargetLabel,
    alpha: f64,
    stats: &mut SaturationStats,
) -> Result<f64> {
    if target.class_index() >= p.num_true_classes() {
        return Err(Error::data(format!(
            "target class {} out of range for {} true classes",
            target.class_index(),
            p.num_true_classes()
        )));
    }
    if alpha < 0.0 {
        return Err(Error::config(format!("alpha must be non-negative, got {alpha}")));
    }
    let p_target = p.prob(target.class_index());
    let retained = 1.0 - p.abstain_prob();

    let mut clipped_target = false;
    let mut clipped_retained = false;
    let log_target = ln_clipped(p_target, &mut clipped_target);
    let log_retained = ln_clipped(retained, &mut clipped_retained);
    if clipped_target {
        stats.target_floor += 1;
    }
    if clipped_retained {
        stats.abstain_ceiling += 1;
    }

    let retained = retained.max(PROB_FLOOR);
    // L = retained * (log retained - log p_t) + alpha * (-log retained)
    Ok(retained * (log_retained - log_target) + alpha * (-log_retained))
}

/// Slope of the loss in `alpha` for fixed probabilities:
/// `log(1 / (1 - p_abstain))`.
pub fn abstention_penalty_slope(p: &ProbabilityVector) -> f64 {
    let retained = (1.0 - p.abstain_prob()).max(PROB_FLOOR);
    -retained.ln()
}

/// Loss of `softmax(logits)` computed directly from logits via log-sum-exp;
/// numerically stable for extreme logits.
pub fn abstain_loss_from_logits(logits: &[f64], target: TargetLabel, alpha: f64) -> Result<f64> {
    let k = logits.len() - 1;
    if target.class_index() >= k {
        return Err(Error::data(format!(
            "target class {} out of range for {} true classes",
            target.class_index(),
            k
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::numeric("non-finite logit in abstention loss".to_string()));
    }
    let sum_all: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let sum_true: f64 = logits[..k].iter().map(|&z| (z - max).exp()).sum();
    let lse_all = max + sum_all.ln();
    let lse_true = max + sum_true.ln();
    let retained = (lse_true - lse_all).exp();
    // Renormalized cross-entropy is lse_true - z_t; the penalty is
    // lse_all - lse_true = log(1 / (1 - p_abstain)).
    Ok(retained * (lse_true - logits[target.class_index()]) + alpha * (lse_all - lse_true))
}

/// Gradient of `abstain_loss(softmax(logits), t, alpha)` with respect to the
/// logits.
pub fn abstain_loss_grad(logits: &[f64], target: TargetLabel, alpha: f64) -> Result<Vec<f64>> {
    let p = softmax(logits)?;
    abstain_loss_grad_from_probs(&p, target, alpha)
}

/// As [`abstain_loss_grad`] but starting from an already computed softmax
/// output (the training loop caches it).
pub fn abstain_loss_grad_from_probs(
    p: &ProbabilityVector,
    target: TargetLabel,
    alpha: f64,
) -> Result<Vec<f64>> {
    let k = p.num_true_classes();
    if target.class_index() >= k {
        return Err(Error::data(format!(
            "target class {} out of range for {} true classes",
            target.class_index(),
            k
        )));
    }
    let t = target.class_index();
    let p_t = p.prob(t).max(PROB_FLOOR);
    let p_a = p.abstain_prob();
    let retained = (1.0 - p_a).max(PROB_FLOOR);

    // L depends on the probabilities only through p_t and p_a:
    //   dL/dp_t = -retained / p_t
    //   dL/dp_a = -(log retained + 1 - log p_t - alpha / retained)
    let dl_dpt = -retained / p_t;
    let dl_dpa = -(retained.ln() + 1.0 - p_t.ln() - alpha / retained);

    // Chain through the softmax Jacobian dp_i/dz_j = p_i (delta_ij - p_j).
    let mut grad = vec![0.0; k + 1];
    for (j, g) in grad.iter_mut().enumerate() {
        let delta_t = if j == t { 1.0 } else { 0.0 };
        let delta_a = if j == k { 1.0 } else { 0.0 };
        *g = dl_dpt * p.prob(t) * (delta_t - p.prob(j)) + dl_dpa * p_a * (delta_a - p.prob(j));
    }
    Ok(grad)
}

/// Per-task abstention settings: the current penalty `alpha`, the target
/// budget, and the feedback-controller parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AbstentionConfig {
    /// Current abstention penalty. Starts at `alpha_init`.
    pub alpha: f64,
    /// Upper bound on the abstention rate the controller steers toward.
    pub budget: f64,
    /// Epochs during which alpha is held at `alpha_init`.
    pub warmup_epochs: usize,
    pub alpha_init: f64,
    /// Multiplied into alpha when observed abstention exceeds the budget.
    pub up_factor: f64,
    /// Divided out of alpha when observed abstention falls below the slack band.
    pub down_factor: f64,
    /// Width of the dead band below the budget, as a fraction of the budget.
    pub slack: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl AbstentionConfig {
    /// Defaults for a head with `num_true_classes` classes: warm-up holds
    /// alpha at twice the uniform-prediction loss scale `ln(k + 1)` so early
    /// training cannot collapse into total abstention.
    pub fn for_task(num_true_classes: usize, budget: f64) -> Self {
        let alpha_init = 2.0 * ((num_true_classes + 1) as f64).ln();
        AbstentionConfig {
            alpha: alpha_init,
            budget,
            warmup_epochs: 5,
            alpha_init,
            up_factor: 1.2,
            down_factor: 1.2,
            slack: 0.1,
            alpha_min: 1e-4,
            alpha_max: 1e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.budget) {
            return Err(Error::config(format!("budget {} outside [0, 1]", self.budget)));
        }
        if self.alpha_min > self.alpha_max {
            return Err(Error::config(format!(
                "alpha_min {} > alpha_max {}",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.alpha_min..=self.alpha_max).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha {} outside [{}, {}]",
                self.alpha, self.alpha_min, self.alpha_max
            )));
        }
        if self.up_factor <= 0.0 || self.down_factor <= 0.0 {
            return Err(Error::config("controller factors must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.slack) {
            return Err(Error::config(format!("slack {} outside [0, 1)", self.slack)));
        }
        Ok(())
    }
}

/// One controller update from the abstention rate observed on the validation
/// split. During warm-up alpha is pinned at `alpha_init`; afterwards alpha
/// multiplies up when abstention exceeds the budget and divides down when it
/// falls below `budget * (1 - slack)`, clamped to `[alpha_min, alpha_max]`.
pub fn alpha_controller_step(
    cfg: &AbstentionConfig,
    epoch: usize,
    observed_abstention: f64,
) -> f64 {
    if epoch < cfg.warmup_epochs {
        return cfg.alpha_init.clamp(cfg.alpha_min, cfg.alpha_max);
    }
    let mut alpha = cfg.alpha;
    if observed_abstention > cfg.budget {
        alpha *= cfg.up_factor;
    } else if observed_abstention < cfg.budget * (1.0 - cfg.slack) {
        alpha /= cfg.down_factor;
    }
    alpha.clamp(cfg.alpha_min, cfg.alpha_max)
}

/// Sum of per-task abstention losses for one sample.
pub fn multitask_loss(
    outputs: &[ProbabilityVector],
    targets: &[TargetLabel],
    alphas: &[f64],
    stats: &mut SaturationStats,
) -> Result<f64> {
    if outputs.len() != targets.len() || outputs.len() != alphas.len() {
        return Err(Error::shape(format!(
            "multitask loss got {} outputs, {} targets, {} alphas",
            outputs.len(),
            targets.len(),
            alphas.len()
        )));
    }
    let mut total = 0.0;
    for ((p, &t), &alpha) in outputs.iter().zip(targets).zip(alphas) {
        total += abstain_loss_with_stats(p, t, alpha, stats)?;
    }
    Ok(total)
}

/// Unweighted multitask loss averaged over a minibatch.
///
/// `batch` holds, per sample, the per-task outputs and targets; `alphas` is
/// one penalty per task.
pub fn loss_batch(
    batch: &[(Vec<ProbabilityVector>, Vec<TargetLabel>)],
    alphas: &[f64],
    stats: &mut SaturationStats,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::data("loss over an empty batch".to_string()));
    }
    let mut total = 0.0;
    for (outputs, targets) in batch {
        total += multitask_loss(outputs, targets, alphas, stats)?;
    }
    Ok(total / batch.len() as f64)
}

/// Validates the non-negativity/identity structure of a loss evaluation; used
/// by tests and kept here so the algebraic identity is stated once:
/// `L = retained * CE_renormalized + alpha * log(1 / retained)`.
pub fn loss_decomposition(p: &ProbabilityVector, target: TargetLabel, alpha: f64) -> (f64, f64) {
    let p_t = p.prob(target.class_index()).max(PROB_FLOOR);
    let retained = (1.0 - p.abstain_prob()).max(PROB_FLOOR);
    let ce_renorm = -(p_t / retained).ln();
    (retained * ce_renorm, alpha * -(retained.ln()))
}
