//! Exact contingency-table tests and word-association analysis.
//!
//! Both Fisher tests use the probability-mass definition of the two-sided
//! p-value: the sum of the (multivariate) hypergeometric probabilities of all
//! tables sharing the observed margins whose probability does not exceed the
//! observed table's (with a 1e-12 tie tolerance in log space). Factorials are
//! taken from a cumulative log table; for small 2x2 tables an exact rational
//! enumeration is kept as a cross-check.

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDocument;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Tolerance in log-probability when deciding whether a table is "no more
/// probable than" the observed one.
const LOG_TIE_TOLERANCE: f64 = 1e-12;

/// 2x2 table of non-negative counts. Rows: correctly classified / abstained;
/// columns: word present / absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub cells: [[u64; 2]; 2],
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable2x2 {
            cells: [[a, b], [c, d]],
        }
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    fn row_sums(&self) -> [u64; 2] {
        [
            self.cells[0][0] + self.cells[0][1],
            self.cells[1][0] + self.cells[1][1],
        ]
    }

    fn col_sums(&self) -> [u64; 2] {
        [
            self.cells[0][0] + self.cells[1][0],
            self.cells[0][1] + self.cells[1][1],
        ]
    }
}

/// 2x3 table. Rows: correctly classified / abstained; columns: word not
/// picked by the explainer, picked with positive coefficient, picked with
/// negative coefficient (among documents containing the word).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x3 {
    pub cells: [[u64; 3]; 2],
}

impl ContingencyTable2x3 {
    pub fn new(row0: [u64; 3], row1: [u64; 3]) -> Self {
        ContingencyTable2x3 { cells: [row0, row1] }
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    fn row_sums(&self) -> [u64; 2] {
        [self.cells[0].iter().sum(), self.cells[1].iter().sum()]
    }

    fn col_sums(&self) -> [u64; 3] {
        [
            self.cells[0][0] + self.cells[1][0],
            self.cells[0][1] + self.cells[1][1],
            self.cells[0][2] + self.cells[1][2],
        ]
    }
}

/// Exact-test outcome. `degenerate` marks tables whose margins admit only one
/// table (p = 1 by construction) or that are entirely zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    pub p_value: f64,
    pub degenerate: bool,
}

/// Cumulative table of ln(n!) built by summing logs; exact to ~1e-13 relative
/// at the sizes used here and fully deterministic.
struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    fn up_to(n: u64) -> Self {
        let mut table = Vec::with_capacity(n as usize + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for i in 1..=n {
            acc += (i as f64).ln();
            table.push(acc);
        }
        LnFactorial { table }
    }

    #[inline]
    fn get(&self, n: u64) -> f64 {
        self.table[n as usize]
    }
}

/// Sum of ln-factorials over the cells, accumulated in descending cell order
/// so permuted cell multisets produce bit-identical sums (exact tie
/// detection between mirrored tables).
fn cell_score(lf: &LnFactorial, cells: &mut [u64]) -> f64 {
    cells.sort_unstable_by(|a, b| b.cmp(a));
    cells.iter().map(|&c| lf.get(c)).sum()
}

/// Two-sided Fisher exact test for a 2x2 table.
pub fn fisher_exact_2x2(table: &ContingencyTable2x2) -> FisherResult {
    let rows = table.row_sums();
    let cols = table.col_sums();
    let n = table.total();
    if n == 0 {
        return FisherResult {
            p_value: 1.0,
            degenerate: true,
        };
    }
    // Range of the free cell a given the margins.
    let a_min = rows[0].saturating_sub(cols[1]);
    let a_max = rows[0].min(cols[0]);
    if a_min == a_max {
        return FisherResult {
            p_value: 1.0,
            degenerate: true,
        };
    }

    let lf = LnFactorial::up_to(n);
    // ln P(a) = K - score(a): the margin part K is shared by every table, so
    // comparisons reduce to the cell score alone.
    let margin_part =
        lf.get(rows[0]) + lf.get(rows[1]) + lf.get(cols[0]) + lf.get(cols[1]) - lf.get(n);
    let score_of = |a: u64| -> f64 {
        let b = rows[0] - a;
        let c = cols[0] - a;
        let d = rows[1] - c;
        cell_score(&lf, &mut [a, b, c, d])
    };

    let observed_score = score_of(table.cells[0][0]);
    // Tables with score >= observed - tol are no more probable than observed.
    let mut log_probs = Vec::new();
    for a in a_min..=a_max {
        let s = score_of(a);
        if s >= observed_score - LOG_TIE_TOLERANCE {
            log_probs.push(margin_part - s);
        }
    }
    FisherResult {
        p_value: sum_of_log_probs(&log_probs),
        degenerate: false,
    }
}

/// Two-sided Fisher exact test for a 2x3 table, enumerating every table with
/// the observed margins (two free cells).
pub fn fisher_exact_2x3(table: &ContingencyTable2x3) -> FisherResult {
    let rows = table.row_sums();
    let cols = table.col_sums();
    let n = table.total();
    if n == 0 || rows[0] == 0 || rows[1] == 0 {
        return FisherResult {
            p_value: 1.0,
            degenerate: true,
        };
    }

    let lf = LnFactorial::up_to(n);
    let margin_part = lf.get(rows[0]) + lf.get(rows[1]) + lf.get(cols[0]) + lf.get(cols[1])
        + lf.get(cols[2])
        - lf.get(n);
    let score_of = |a: u64, b: u64| -> f64 {
        // First row (a, b, c); second row is determined by the margins.
        let c = rows[0] - a - b;
        let d = cols[0] - a;
        let e = cols[1] - b;
        let f = cols[2] - c;
        cell_score(&lf, &mut [a, b, c, d, e, f])
    };

    let observed_score = score_of(table.cells[0][0], table.cells[0][1]);
    let mut log_probs = Vec::new();
    let mut table_count = 0u64;
    for a in 0..=rows[0].min(cols[0]) {
        let rem = rows[0] - a;
        let b_min = rem.saturating_sub(cols[2]);
        let b_max = rem.min(cols[1]);
        if b_min > b_max {
            continue;
        }
        for b in b_min..=b_max {
            table_count += 1;
            let s = score_of(a, b);
            if s >= observed_score - LOG_TIE_TOLERANCE {
                log_probs.push(margin_part - s);
            }
        }
    }
    if table_count <= 1 {
        return FisherResult {
            p_value: 1.0,
            degenerate: true,
        };
    }
    FisherResult {
        p_value: sum_of_log_probs(&log_probs),
        degenerate: false,
    }
}

/// Total probability mass over all 2x3 tables with the given margins; should
/// be 1 (completeness check used by the test suite).
pub fn hypergeometric_2x3_total_mass(table: &ContingencyTable2x3) -> f64 {
    let rows = table.row_sums();
    let cols = table.col_sums();
    let n = table.total();
    if n == 0 {
        return 1.0;
    }
    let lf = LnFactorial::up_to(n);
    let margin_part = lf.get(rows[0]) + lf.get(rows[1]) + lf.get(cols[0]) + lf.get(cols[1])
        + lf.get(cols[2])
        - lf.get(n);
    let mut log_probs = Vec::new();
    for a in 0..=rows[0].min(cols[0]) {
        let rem = rows[0] - a;
        let b_min = rem.saturating_sub(cols[2]);
        let b_max = rem.min(cols[1]);
        if b_min > b_max {
            continue;
        }
        for b in b_min..=b_max {
            let c = rows[0] - a - b;
            let d = cols[0] - a;
            let e = cols[1] - b;
            let f = cols[2] - c;
            log_probs.push(margin_part - cell_score(&lf, &mut [a, b, c, d, e, f]));
        }
    }
    sum_of_log_probs(&log_probs)
}

fn sum_of_log_probs(log_probs: &[f64]) -> f64 {
    if log_probs.is_empty() {
        return 0.0;
    }
    let max = log_probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_probs.iter().map(|&lp| (lp - max).exp()).sum();
    (max.exp() * sum).min(1.0)
}

/// Exact rational 2x2 test for n <= 40 using u128 binomial products; the
/// cross-check path for the log-space implementation.
pub fn fisher_exact_2x2_rational(table: &ContingencyTable2x2) -> Result<FisherResult> {
    let rows = table.row_sums();
    let cols = table.col_sums();
    let n = table.total();
    if n > 40 {
        return Err(Error::config(format!(
            "rational path supports n <= 40, got {n}"
        )));
    }
    if n == 0 {
        return Ok(FisherResult {
            p_value: 1.0,
            degenerate: true,
        });
    }
    let a_min = rows[0].saturating_sub(cols[1]);
    let a_max = rows[0].min(cols[0]);
    if a_min == a_max {
        return Ok(FisherResult {
            p_value: 1.0,
            degenerate: true,
        });
    }
    // P(a) = C(c1, a) * C(c2, r1 - a) / C(n, r1); compare integer numerators.
    let numerator = |a: u64| -> u128 {
        binomial_u128(cols[0], a) * binomial_u128(cols[1], rows[0] - a)
    };
    let denom = binomial_u128(n, rows[0]);
    let observed = numerator(table.cells[0][0]);
    let mut mass: u128 = 0;
    for a in a_min..=a_max {
        let num = numerator(a);
        if num <= observed {
            mass += num;
        }
    }
    Ok(FisherResult {
        p_value: mass as f64 / denom as f64,
        degenerate: false,
    })
}

fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of documents containing at least one token starting with `stem`.
/// Counting is document-level: several occurrences count once.
pub fn count_word_occurrence(docs: &[LabeledDocument], vocab: &Vocabulary, stem: &str) -> usize {
    docs.iter()
        .filter(|doc| doc_contains_stem(doc, vocab, stem))
        .count()
}

pub fn doc_contains_stem(doc: &LabeledDocument, vocab: &Vocabulary, stem: &str) -> bool {
    doc.tokens
        .iter()
        .any(|&id| vocab.token(id).is_some_and(|t| t.starts_with(stem)))
}

/// Per-(class, stem) association counts and p-values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub class_name: String,
    pub stem: String,
    pub correct_total: u64,
    pub abstained_total: u64,
    /// Documents containing the stem.
    pub correct_with_word: u64,
    pub abstained_with_word: u64,
    /// Among documents containing the stem: picked up by the explainer.
    pub correct_lime_id: u64,
    pub abstained_lime_id: u64,
    /// Among picked-up documents: the matching coefficient was positive.
    pub correct_lime_positive: u64,
    pub abstained_lime_positive: u64,
    /// 2x2 test on word occurrence vs outcome.
    pub occurrence_p: f64,
    /// 2x3 test on (not picked / picked positive / picked negative) vs outcome.
    pub pickup_p: f64,
}

impl AssociationRecord {
    pub fn occurrence_table(&self) -> ContingencyTable2x2 {
        ContingencyTable2x2::new(
            self.correct_with_word,
            self.correct_total - self.correct_with_word,
            self.abstained_with_word,
            self.abstained_total - self.abstained_with_word,
        )
    }

    pub fn pickup_table(&self) -> ContingencyTable2x3 {
        ContingencyTable2x3::new(
            [
                self.correct_with_word - self.correct_lime_id,
                self.correct_lime_positive,
                self.correct_lime_id - self.correct_lime_positive,
            ],
            [
                self.abstained_with_word - self.abstained_lime_id,
                self.abstained_lime_positive,
                self.abstained_lime_id - self.abstained_lime_positive,
            ],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.correct_with_word > self.correct_total
            || self.abstained_with_word > self.abstained_total
        {
            return Err(Error::data(format!(
                "{}/{}: documents with word exceed group totals",
                self.class_name, self.stem
            )));
        }
        if self.correct_lime_id > self.correct_with_word
            || self.abstained_lime_id > self.abstained_with_word
        {
            return Err(Error::data(format!(
                "{}/{}: explainer pickups exceed documents with word",
                self.class_name, self.stem
            )));
        }
        if self.correct_lime_positive > self.correct_lime_id
            || self.abstained_lime_positive > self.abstained_lime_id
        {
            return Err(Error::data(format!(
                "{}/{}: positive pickups exceed pickups",
                self.class_name, self.stem
            )));
        }
        Ok(())
    }

    /// Fills both p-values from the count columns.
    pub fn compute_p_values(&mut self) -> Result<()> {
        self.validate()?;
        self.occurrence_p = fisher_exact_2x2(&self.occurrence_table()).p_value;
        self.pickup_p = fisher_exact_2x3(&self.pickup_table()).p_value;
        Ok(())
    }
}

/// Raw inputs for building one association row from model outputs.
pub struct AssociationGroupInputs<'a> {
    pub class_name: &'a str,
    /// (document, explanation pickup for the stem) for correctly classified docs.
    pub correct: &'a [DocStemEvidence],
    /// Same for abstained docs (explained for the abstain class).
    pub abstained: &'a [DocStemEvidence],
}

/// Stem evidence extracted from one document and its explanation.
#[derive(Debug, Clone, Copy)]
pub struct DocStemEvidence {
    pub contains_word: bool,
    pub picked_up: bool,
    pub positive: bool,
}

/// Builds one association record from per-document evidence; pickup requires
/// word presence, positivity requires pickup.
pub fn build_association_record(
    inputs: &AssociationGroupInputs,
    stem: &str,
) -> Result<AssociationRecord> {
    fn tally(group: &[DocStemEvidence]) -> Result<(u64, u64, u64, u64)> {
        let total = group.len() as u64;
        let mut with_word = 0;
        let mut picked = 0;
        let mut positive = 0;
        for e in group {
            if e.picked_up && !e.contains_word {
                return Err(Error::data(
                    "explainer pickup recorded for a document without the word".to_string(),
                ));
            }
            if e.positive && !e.picked_up {
                return Err(Error::data(
                    "positive coefficient recorded without a pickup".to_string(),
                ));
            }
            with_word += e.contains_word as u64;
            picked += e.picked_up as u64;
            positive += e.positive as u64;
        }
        Ok((total, with_word, picked, positive))
    }

    let (ct, cw, cid, cpos) = tally(inputs.correct)?;
    let (at, aw, aid, apos) = tally(inputs.abstained)?;
    let mut record = AssociationRecord {
        class_name: inputs.class_name.to_string(),
        stem: stem.to_string(),
        correct_total: ct,
        abstained_total: at,
        correct_with_word: cw,
        abstained_with_word: aw,
        correct_lime_id: cid,
        abstained_lime_id: aid,
        correct_lime_positive: cpos,
        abstained_lime_positive: apos,
        occurrence_p: 1.0,
        pickup_p: 1.0,
    };
    record.compute_p_values()?;
    Ok(record)
}

/// Estimated share of abstentions attributable to a stem: the product of the
/// fraction of abstained documents containing it, the fraction of those where
/// the explainer picks it up, and the fraction of pickups with
/// abstention-positive sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionEstimate {
    pub frac_in_abstained: f64,
    pub frac_lime_id: f64,
    pub frac_positive: f64,
    pub product: f64,
}

impl AttributionEstimate {
    /// Whole-percent label, truncated toward zero ("0.2653" reads "26%").
    pub fn percent_label(&self) -> String {
        format!("{}%", (self.product * 100.0).floor() as i64)
    }
}

pub fn attribution_estimate(
    frac_in_abstained: f64,
    frac_lime_id: f64,
    frac_positive: f64,
) -> Result<AttributionEstimate> {
    for (name, f) in [
        ("frac_in_abstained", frac_in_abstained),
        ("frac_lime_id", frac_lime_id),
        ("frac_positive", frac_positive),
    ] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::config(format!("{name} = {f} outside [0, 1]")));
        }
    }
    Ok(AttributionEstimate {
        frac_in_abstained,
        frac_lime_id,
        frac_positive,
        product: frac_in_abstained * frac_lime_id * frac_positive,
    })
}
