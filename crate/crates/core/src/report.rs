//! Machine-readable TSV and aligned-text renderings of metrics,
//! task-combination reports, association tables, audits, and explanations.

use crate::lime::Explanation;
use crate::stats::{AssociationRecord, AttributionEstimate};
use crate::train::{AuditRow, ComboMetrics, SelectiveMetrics, SweepRow};

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn opt_pct(x: Option<f64>) -> String {
    x.map(pct).unwrap_or_else(|| "n/a".to_string())
}

pub fn metrics_tsv(metrics: &[SelectiveMetrics]) -> String {
    let mut out = String::from(
        "task\ttotal\tbase_acc\tabstention_rate\tretained_acc\tabstained\tretained\tretained_correct\tbase_correct\n",
    );
    for m in metrics {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}\n",
            m.task,
            m.total,
            m.base_accuracy(),
            m.abstention_rate(),
            m.retained_accuracy()
                .map(|a| format!("{a:.6}"))
                .unwrap_or_else(|| "n/a".to_string()),
            m.abstained,
            m.retained(),
            m.retained_correct,
            m.base_correct,
        ));
    }
    out
}

/// Aligned per-task table: base accuracy, abstention rate, retained accuracy.
pub fn metrics_table(metrics: &[SelectiveMetrics]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>10} {:>10} {:>12}\n",
        "task", "base acc", "abs rate", "retained acc"
    ));
    for m in metrics {
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>12}\n",
            m.task,
            pct(m.base_accuracy()),
            pct(m.abstention_rate()),
            opt_pct(m.retained_accuracy()),
        ));
    }
    out
}

pub fn combos_tsv(combos: &[ComboMetrics]) -> String {
    let mut out = String::from(
        "tasks\ttotal\tjoint_base_acc\tjoint_abstention_rate\tjoint_retained_acc\tnaive_acc\tnaive_abstention\tjoint_abstained\tjoint_retained_all_correct\n",
    );
    for c in combos {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{}\t{:.6}\t{:.6}\t{}\t{}\n",
            c.tasks.join(","),
            c.total,
            c.joint_base_accuracy(),
            c.joint_abstention_rate(),
            c.joint_retained_accuracy()
                .map(|a| format!("{a:.6}"))
                .unwrap_or_else(|| "n/a".to_string()),
            c.naive_guess.0,
            c.naive_guess.1,
            c.joint_abstained,
            c.joint_retained_all_correct,
        ));
    }
    out
}

pub fn combos_table(combos: &[ComboMetrics]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>10} {:>10} {:>12} {:>20}\n",
        "tasks", "base acc", "abs rate", "retained acc", "naive (acc, abs)"
    ));
    for c in combos {
        out.push_str(&format!(
            "{:<24} {:>10} {:>10} {:>12} {:>20}\n",
            c.tasks.join(","),
            pct(c.joint_base_accuracy()),
            pct(c.joint_abstention_rate()),
            opt_pct(c.joint_retained_accuracy()),
            format!("({}, {})", pct(c.naive_guess.0), pct(c.naive_guess.1)),
        ));
    }
    out
}

pub fn audit_tsv(rows: &[AuditRow]) -> String {
    let mut out = String::from(
        "task\tflag\tabstained_with\tabstained_total\tretained_with\tretained_total\tenrichment\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.task,
            r.flag,
            r.abstained_with,
            r.abstained_total,
            r.retained_with,
            r.retained_total,
            r.enrichment,
        ));
    }
    out
}

pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("budget\tseed\ttask\tval_abstention\tval_retained_acc\n");
    for row in rows {
        for (task, abs, acc) in &row.per_task {
            out.push_str(&format!(
                "{:.6}\t{}\t{}\t{:.6}\t{:.6}\n",
                row.budget, row.seed, task, abs, acc
            ));
        }
    }
    out
}

/// Association rows in the documented column order: class, stem, the raw
/// counts with percentages, then the occurrence and pickup p-values.
pub fn associations_tsv(records: &[AssociationRecord]) -> String {
    let mut out = String::from(
        "class\tstem\tcorrect_total\tabstained_total\tcorrect_with\tcorrect_with_pct\tabstained_with\tabstained_with_pct\tcorrect_lime_id\tcorrect_lime_id_pct\tcorrect_lime_pos\tcorrect_lime_pos_pct\tabstained_lime_id\tabstained_lime_id_pct\tabstained_lime_pos\tabstained_lime_pos_pct\toccurrence_p\tpickup_p\n",
    );
    let ratio_pct = |num: u64, den: u64| -> String {
        if den == 0 {
            "n/a".to_string()
        } else {
            format!("{:.0}", num as f64 / den as f64 * 100.0)
        }
    };
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.1e}\t{:.1e}\n",
            r.class_name,
            r.stem,
            r.correct_total,
            r.abstained_total,
            r.correct_with_word,
            ratio_pct(r.correct_with_word, r.correct_total),
            r.abstained_with_word,
            ratio_pct(r.abstained_with_word, r.abstained_total),
            r.correct_lime_id,
            ratio_pct(r.correct_lime_id, r.correct_with_word),
            r.correct_lime_positive,
            ratio_pct(r.correct_lime_positive, r.correct_lime_id),
            r.abstained_lime_id,
            ratio_pct(r.abstained_lime_id, r.abstained_with_word),
            r.abstained_lime_positive,
            ratio_pct(r.abstained_lime_positive, r.abstained_lime_id),
            r.occurrence_p,
            r.pickup_p,
        ));
    }
    out
}

/// Attribution summary: the three factors and their product per (class, stem).
pub fn attribution_tsv(rows: &[(String, String, Option<AttributionEstimate>)]) -> String {
    let mut out =
        String::from("class\tstem\tfrac_in_abstained\tfrac_lime_id\tfrac_positive\tproduct\tlabel\n");
    for (class, stem, est) in rows {
        match est {
            Some(e) => out.push_str(&format!(
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
                class, stem, e.frac_in_abstained, e.frac_lime_id, e.frac_positive, e.product,
                e.percent_label(),
            )),
            None => out.push_str(&format!("{class}\t{stem}\tn/a\tn/a\tn/a\tn/a\tn/a\n")),
        }
    }
    out
}

/// Renders the top entries of an explanation as signed character bars:
/// positive coefficients extend right of the centerline, negative left.
pub fn explanation_bars(expl: &Explanation, top_n: usize) -> String {
    const BAR_WIDTH: usize = 24;
    let mut out = format!(
        "doc {}  task {}  class {}{}  r2={:.3}{}\n",
        expl.doc_id,
        expl.task,
        if expl.class_is_abstain {
            "<abstain>".to_string()
        } else {
            expl.class_index.to_string()
        },
        "",
        expl.r_squared,
        if expl.degenerate { "  [degenerate]" } else { "" },
    );
    let entries: Vec<_> = expl.entries.iter().take(top_n).collect();
    let max_abs = entries
        .iter()
        .map(|e| e.coefficient.abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    let width = entries.iter().map(|e| e.token.len()).max().unwrap_or(4).max(4);
    for e in entries {
        let len = ((e.coefficient.abs() / max_abs) * BAR_WIDTH as f64).round() as usize;
        let (left, right) = if e.coefficient >= 0.0 {
            (String::new(), "#".repeat(len))
        } else {
            ("#".repeat(len), String::new())
        };
        out.push_str(&format!(
            "  {:>w$}  {:+.4}  {:>bw$}|{}\n",
            e.token,
            e.coefficient,
            left,
            right,
            w = width,
            bw = BAR_WIDTH,
        ));
    }
    out
}
