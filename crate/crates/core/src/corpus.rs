//! Corpus machinery: vocabulary, tokenization, synthetic generation with
//! controllable label noise, train/val/test splitting, and JSONL ingestion.
//!
//! The synthetic generator produces pathology-like documents: a mixture of
//! class-signal tokens for each task's label and shared background tokens.
//! Two noise channels corrupt labels. Uncorrelated noise flips a label
//! uniformly at random, independent of the text. Correlated noise injects a
//! "confuser" token sequence into the text and, conditionally, corrupts the
//! designated task's label, so the corruption is visible in the text and
//! abstaining on such documents is the correct behavior. Every noise event is
//! recorded in per-document provenance so evaluation can audit what the
//! trained model abstains on.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TaskSpec;
use crate::rng::Rng;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Bijective token <-> dense id mapping with reserved PAD=0 and UNK=1.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        vocab.add(PAD_TOKEN);
        vocab.add(UNK_TOKEN);
        vocab
    }

    /// Adds a token if absent; returns its id either way.
    pub fn add(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// One token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for token in &self.tokens {
            writeln!(w, "{token}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let token = line?;
            if index.contains_key(&token) {
                return Err(Error::data(format!(
                    "duplicate token '{token}' at vocabulary line {}",
                    i + 1
                )));
            }
            index.insert(token.clone(), i as u32);
            tokens.push(token);
        }
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN)
            || tokens.get(1).map(String::as_str) != Some(UNK_TOKEN)
        {
            return Err(Error::data(
                "vocabulary must start with the reserved <pad> and <unk> tokens".to_string(),
            ));
        }
        Ok(Vocabulary { tokens, index })
    }
}

/// Why a document's label for one task is what it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    Clean,
    FlippedUncorrelated,
    ConfuserCorrupted,
}

/// Noise ground truth for one synthetic document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocProvenance {
    pub label_status: Vec<LabelStatus>,
    /// Confuser tokens were injected into the text.
    pub confuser_present: bool,
    /// In multi-report cases: whether this report's text was generated from
    /// the consolidated case labels.
    pub supports_case_label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDocument {
    pub doc_id: u64,
    pub case_id: Option<String>,
    pub tokens: Vec<u32>,
    /// Per-task label indices, aligned with the corpus task list.
    pub labels: Vec<usize>,
    /// Present for synthetic corpora only.
    pub provenance: Option<DocProvenance>,
}

/// Correlated-noise channel: inject a marker token sequence and corrupt the
/// target task's label with some probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfuserSpec {
    /// Number of distinct confuser token types.
    pub token_count: usize,
    /// Copies injected per affected document.
    pub copies: usize,
    /// Probability a document receives the injection.
    pub injection_rate: f64,
    /// Probability the target label is corrupted, given injection.
    pub corruption_prob: f64,
    /// Index of the task whose label the confuser corrupts.
    pub target_task: usize,
}

impl Default for ConfuserSpec {
    fn default() -> Self {
        ConfuserSpec {
            token_count: 1,
            copies: 2,
            injection_rate: 0.15,
            corruption_prob: 0.8,
            target_task: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub tasks: Vec<TaskSpec>,
    pub num_docs: usize,
    pub vocab_size: usize,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    /// Distinct signal token types per (task, class).
    pub signal_tokens_per_class: usize,
    /// Probability each emitted token is a class signal rather than background.
    pub signal_rate: f64,
    /// Per document and task, a mixing ratio is drawn uniformly from
    /// [0, distractor_rate_max]; that share of the task's signal tokens comes
    /// from a distractor class instead of the labeled one. This grades how
    /// ambiguous documents are.
    pub distractor_rate_max: f64,
    /// Size of the shared "generic term" pool per unordered class pair; 0
    /// disables the mechanism. Shared tokens are emitted for both classes of
    /// the pair, so documents written mostly in them are genuinely ambiguous
    /// between the gold class and the document's distractor class.
    pub pair_tokens_per_pair: usize,
    /// Size of a task-wide vague-term pool shared by every class; documents
    /// written almost entirely in these carry no class evidence at all. 0
    /// disables.
    pub generic_tokens_per_task: usize,
    /// Skew of the per-document vague-token share `a = U(0,1)^(1/gamma)`: larger
    /// gamma puts more mass near 1 (more near-hopeless documents). Used when a
    /// pair or generic pool is enabled.
    pub pair_share_exponent: f64,
    /// Per-task uncorrelated flip rates.
    pub flip_rates: Vec<f64>,
    pub confuser: Option<ConfuserSpec>,
    /// Reports emitted per case; 1 gives a flat corpus.
    pub docs_per_case: usize,
    /// Probability a report's text reflects the consolidated case labels
    /// (only meaningful when docs_per_case > 1).
    pub case_support_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::config("synthetic spec needs at least one task".to_string()));
        }
        for task in &self.tasks {
            task.validate()?;
        }
        if self.flip_rates.len() != self.tasks.len() {
            return Err(Error::config(format!(
                "flip_rates has {} entries for {} tasks",
                self.flip_rates.len(),
                self.tasks.len()
            )));
        }
        for (name, rate) in [
            ("signal_rate", self.signal_rate),
            ("distractor_rate_max", self.distractor_rate_max),
            ("case_support_rate", self.case_support_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::config(format!("{name} = {rate} outside [0, 1]")));
            }
        }
        if (self.pair_tokens_per_pair > 0 || self.generic_tokens_per_task > 0)
            && self.pair_share_exponent <= 0.0
        {
            return Err(Error::config(format!(
                "pair_share_exponent must be positive, got {}",
                self.pair_share_exponent
            )));
        }
        for (i, &rate) in self.flip_rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::config(format!(
                    "flip rate {rate} for task '{}' outside [0, 1]",
                    self.tasks[i].name
                )));
            }
        }
        if let Some(conf) = &self.confuser {
            if conf.target_task >= self.tasks.len() {
                return Err(Error::config(format!(
                    "confuser target task {} out of range",
                    conf.target_task
                )));
            }
            if conf.token_count == 0 || conf.copies == 0 {
                return Err(Error::config(
                    "confuser token_count and copies must be positive".to_string(),
                ));
            }
            for (name, rate) in [
                ("injection_rate", conf.injection_rate),
                ("corruption_prob", conf.corruption_prob),
            ] {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(Error::config(format!("confuser {name} = {rate} outside [0, 1]")));
                }
            }
        }
        if self.doc_len_min == 0 || self.doc_len_min > self.doc_len_max {
            return Err(Error::config(format!(
                "document length range [{}, {}] invalid",
                self.doc_len_min, self.doc_len_max
            )));
        }
        if self.docs_per_case == 0 {
            return Err(Error::config("docs_per_case must be positive".to_string()));
        }
        if self.num_docs == 0 {
            return Err(Error::config("num_docs must be positive".to_string()));
        }
        let reserved = 2 + self.signal_token_total() + self.confuser_token_total();
        if self.vocab_size <= reserved {
            return Err(Error::config(format!(
                "vocab_size {} leaves no background tokens ({} reserved)",
                self.vocab_size, reserved
            )));
        }
        Ok(())
    }

    fn signal_token_total(&self) -> usize {
        self.tasks
            .iter()
            .map(|t| {
                let pairs = t.num_classes * (t.num_classes - 1) / 2;
                t.num_classes * self.signal_tokens_per_class
                    + pairs * self.pair_tokens_per_pair
                    + self.generic_tokens_per_task
            })
            .sum()
    }

    fn confuser_token_total(&self) -> usize {
        self.confuser.as_ref().map_or(0, |c| c.token_count)
    }
}

/// Built vocabulary plus the id ranges the generator draws from.
struct GeneratorVocab {
    vocab: Vocabulary,
    /// signal_ids[task][class] -> token ids exclusive to that class.
    signal_ids: Vec<Vec<Vec<u32>>>,
    /// pair_ids[task][pair_index(i, j)] -> shared token ids for classes i < j.
    pair_ids: Vec<Vec<Vec<u32>>>,
    /// generic_ids[task] -> token ids shared by every class of the task.
    generic_ids: Vec<Vec<u32>>,
    confuser_ids: Vec<u32>,
    background_ids: Vec<u32>,
}

/// Dense index of the unordered pair (i, j), i < j < k.
fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

fn build_generator_vocab(spec: &SyntheticSpec) -> GeneratorVocab {
    let mut vocab = Vocabulary::new();
    let mut signal_ids = Vec::with_capacity(spec.tasks.len());
    let mut pair_ids = Vec::with_capacity(spec.tasks.len());
    let mut generic_ids = Vec::with_capacity(spec.tasks.len());
    for task in &spec.tasks {
        let mut per_class = Vec::with_capacity(task.num_classes);
        for class in 0..task.num_classes {
            let ids = (0..spec.signal_tokens_per_class)
                .map(|i| vocab.add(&format!("sig{}{}x{}", task.name, class, i)))
                .collect();
            per_class.push(ids);
        }
        signal_ids.push(per_class);
        let mut per_pair = Vec::new();
        for j in 1..task.num_classes {
            for i in 0..j {
                let ids = (0..spec.pair_tokens_per_pair)
                    .map(|n| vocab.add(&format!("amb{}{}{}x{}", task.name, i, j, n)))
                    .collect();
                debug_assert_eq!(per_pair.len(), pair_index(i, j));
                per_pair.push(ids);
            }
        }
        pair_ids.push(per_pair);
        generic_ids.push(
            (0..spec.generic_tokens_per_task)
                .map(|n| vocab.add(&format!("vague{}x{}", task.name, n)))
                .collect(),
        );
    }
    let confuser_ids = (0..spec.confuser_token_total())
        .map(|i| vocab.add(&format!("confuser{i}")))
        .collect();
    let background_count = spec.vocab_size - vocab.len();
    let background_ids = (0..background_count)
        .map(|i| vocab.add(&format!("bg{i:05}")))
        .collect();
    GeneratorVocab {
        vocab,
        signal_ids,
        pair_ids,
        generic_ids,
        confuser_ids,
        background_ids,
    }
}

/// Where a document's vague signal tokens come from.
#[derive(Clone, Copy, PartialEq)]
enum VagueKind {
    None,
    Pair,
    Generic,
}

/// Generates the synthetic corpus. Deterministic for a given spec.
pub fn generate_corpus(spec: &SyntheticSpec) -> Result<(Vec<LabeledDocument>, Vocabulary)> {
    spec.validate()?;
    let gv = build_generator_vocab(spec);
    let mut rng = Rng::with_stream(spec.seed, "corpus-generate");
    let mut docs = Vec::with_capacity(spec.num_docs);

    let mut doc_id = 0u64;
    let mut case_index = 0usize;
    while docs.len() < spec.num_docs {
        let case_labels: Vec<usize> = spec.tasks.iter().map(|t| rng.below(t.num_classes)).collect();
        let case_id = format!("case{case_index:06}");
        case_index += 1;
        let remaining = spec.num_docs - docs.len();
        for _ in 0..spec.docs_per_case.min(remaining) {
            let supports = spec.docs_per_case == 1 || rng.bernoulli(spec.case_support_rate);
            let apparent: Vec<usize> = if supports {
                case_labels.clone()
            } else {
                spec.tasks.iter().map(|t| rng.below(t.num_classes)).collect()
            };

            let len = rng.range_inclusive(spec.doc_len_min, spec.doc_len_max);
            // Per-task distractor class, exclusive-token mixing ratio, and
            // the vague-token share plus its source pool.
            let mixing: Vec<(usize, f64, f64, VagueKind)> = spec
                .tasks
                .iter()
                .zip(&apparent)
                .map(|(task, &label)| {
                    let distractor = rng.below_excluding(task.num_classes, label);
                    let m = rng.uniform(0.0, spec.distractor_rate_max);
                    let kind = match (spec.pair_tokens_per_pair > 0, spec.generic_tokens_per_task > 0)
                    {
                        (false, false) => VagueKind::None,
                        (true, false) => VagueKind::Pair,
                        (false, true) => VagueKind::Generic,
                        (true, true) => {
                            if rng.bernoulli(0.5) {
                                VagueKind::Pair
                            } else {
                                VagueKind::Generic
                            }
                        }
                    };
                    let share = if kind == VagueKind::None {
                        0.0
                    } else {
                        rng.next_f64().powf(1.0 / spec.pair_share_exponent)
                    };
                    (distractor, m, share, kind)
                })
                .collect();

            let mut tokens = Vec::with_capacity(len);
            for _ in 0..len {
                if rng.bernoulli(spec.signal_rate) {
                    let task = rng.below(spec.tasks.len());
                    let (distractor, m, share, kind) = mixing[task];
                    if share > 0.0 && rng.bernoulli(share) {
                        match kind {
                            VagueKind::Pair => {
                                let (lo, hi) = if apparent[task] < distractor {
                                    (apparent[task], distractor)
                                } else {
                                    (distractor, apparent[task])
                                };
                                tokens.push(*rng.choose(&gv.pair_ids[task][pair_index(lo, hi)]));
                            }
                            VagueKind::Generic => {
                                tokens.push(*rng.choose(&gv.generic_ids[task]));
                            }
                            VagueKind::None => unreachable!(),
                        }
                    } else {
                        let class = if rng.bernoulli(m) { distractor } else { apparent[task] };
                        tokens.push(*rng.choose(&gv.signal_ids[task][class]));
                    }
                } else {
                    tokens.push(*rng.choose(&gv.background_ids));
                }
            }

            let mut labels = case_labels.clone();
            let mut status = vec![LabelStatus::Clean; spec.tasks.len()];
            let mut confuser_present = false;
            if let Some(conf) = &spec.confuser {
                if rng.bernoulli(conf.injection_rate) {
                    confuser_present = true;
                    for _ in 0..conf.copies {
                        let pos = rng.below(tokens.len());
                        tokens[pos] = *rng.choose(&gv.confuser_ids);
                    }
                    if rng.bernoulli(conf.corruption_prob) {
                        let k = spec.tasks[conf.target_task].num_classes;
                        labels[conf.target_task] =
                            rng.below_excluding(k, labels[conf.target_task]);
                        status[conf.target_task] = LabelStatus::ConfuserCorrupted;
                    }
                }
            }
            for (t, task) in spec.tasks.iter().enumerate() {
                if status[t] == LabelStatus::Clean && rng.bernoulli(spec.flip_rates[t]) {
                    labels[t] = rng.below_excluding(task.num_classes, labels[t]);
                    status[t] = LabelStatus::FlippedUncorrelated;
                }
            }

            docs.push(LabeledDocument {
                doc_id,
                case_id: Some(case_id.clone()),
                tokens,
                labels,
                provenance: Some(DocProvenance {
                    label_status: status,
                    confuser_present,
                    supports_case_label: supports,
                }),
            });
            doc_id += 1;
        }
    }
    Ok((docs, gv.vocab))
}

/// Lowercases, splits on non-alphanumeric runs, maps through the vocabulary
/// with UNK fallback, and right-pads with PAD to at least `min_len`.
pub fn tokenize(text: &str, vocab: &Vocabulary, min_len: usize) -> Vec<u32> {
    let lower = text.to_lowercase();
    let mut ids: Vec<u32> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| vocab.id(w).unwrap_or(UNK_ID))
        .collect();
    pad_to_min(&mut ids, min_len);
    ids
}

/// Splits a text into lowercase alphanumeric words without mapping to ids
/// (vocabulary building).
pub fn split_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Right-pads with PAD up to `min_len`.
pub fn pad_to_min(tokens: &mut Vec<u32>, min_len: usize) {
    while tokens.len() < min_len {
        tokens.push(PAD_ID);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// Keep all documents of a case in the same subset.
    pub by_case: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.6,
            val_fraction: 0.2,
            test_fraction: 0.2,
            by_case: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fracs.iter().any(|&f| f <= 0.0) {
            return Err(Error::config("split fractions must be positive".to_string()));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CorpusSplits {
    pub train: Vec<LabeledDocument>,
    pub val: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
}

/// Largest-remainder apportionment of `total` into three integer sizes.
fn apportion(total: usize, fracs: [f64; 3]) -> [usize; 3] {
    let mut sizes = [0usize; 3];
    let mut remainders = [(0.0f64, 0usize); 3];
    let mut assigned = 0;
    for i in 0..3 {
        let exact = fracs[i] * total as f64;
        sizes[i] = exact.floor() as usize;
        remainders[i] = (exact - exact.floor(), i);
        assigned += sizes[i];
    }
    // Hand leftovers to the largest fractional parts; ties to earlier splits.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for r in remainders.iter().take(total - assigned) {
        sizes[r.1] += 1;
    }
    sizes
}

/// Shuffled partition into train/val/test. In by-case mode all documents
/// sharing a `case_id` land in the same subset.
pub fn split_corpus(
    docs: &[LabeledDocument],
    spec: &SplitSpec,
    rng: &mut Rng,
) -> Result<CorpusSplits> {
    spec.validate()?;
    if docs.is_empty() {
        return Err(Error::data("cannot split an empty corpus".to_string()));
    }
    let fracs = [spec.train_fraction, spec.val_fraction, spec.test_fraction];

    let mut groups: Vec<Vec<usize>> = if spec.by_case {
        let mut by_key: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
        for (i, doc) in docs.iter().enumerate() {
            let key = doc
                .case_id
                .clone()
                .unwrap_or_else(|| format!("__doc{}", doc.doc_id));
            by_key.entry(key).or_default().push(i);
        }
        by_key.into_values().collect()
    } else {
        (0..docs.len()).map(|i| vec![i]).collect()
    };
    if groups.len() < 3 {
        return Err(Error::data(format!(
            "{} groups cannot fill 3 splits",
            groups.len()
        )));
    }
    rng.shuffle(&mut groups);

    let sizes = apportion(docs.len(), fracs);
    let mut out = CorpusSplits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for group in groups {
        // Greedy fill in order; a group goes to the first split still short.
        let bucket = if out.train.len() < sizes[0] {
            &mut out.train
        } else if out.val.len() < sizes[1] {
            &mut out.val
        } else {
            &mut out.test
        };
        for idx in group {
            bucket.push(docs[idx].clone());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSONL ingestion and persistence
// ---------------------------------------------------------------------------

/// Label registries: task order and per-task label names; index in the name
/// list is the label index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub tasks: Vec<TaskSpec>,
    pub label_names: Vec<Vec<String>>,
}

impl CorpusMeta {
    pub fn from_synthetic(spec: &SyntheticSpec) -> Self {
        CorpusMeta {
            tasks: spec.tasks.clone(),
            label_names: spec
                .tasks
                .iter()
                .map(|t| (0..t.num_classes).map(|c| c.to_string()).collect())
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("label registry encode: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let meta: CorpusMeta = serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("label registry decode: {e}")))?;
        if meta.tasks.len() != meta.label_names.len() {
            return Err(Error::data(
                "label registry tasks and label_names misaligned".to_string(),
            ));
        }
        Ok(meta)
    }

    pub fn label_index(&self, task: usize, name: &str) -> Option<usize> {
        self.label_names[task].iter().position(|n| n == name)
    }
}

#[derive(Deserialize)]
struct RawJsonDoc {
    text: String,
    labels: std::collections::BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    case_id: Option<String>,
}

fn label_value_to_name(v: &serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::data(format!(
            "label value {other} is neither string nor integer"
        ))),
    }
}

#[derive(Debug)]
pub struct LoadedCorpus {
    pub docs: Vec<LabeledDocument>,
    pub vocab: Vocabulary,
    pub meta: CorpusMeta,
}

/// Loads a JSONL corpus, building the vocabulary and label registries from
/// the data (tasks are the sorted label keys of the first line; every line
/// must carry exactly those keys).
pub fn load_jsonl_build(path: &Path, min_doc_len: usize, max_doc_len: usize) -> Result<LoadedCorpus> {
    let reader = BufReader::new(File::open(path)?);
    let mut vocab = Vocabulary::new();
    let mut tasks: Vec<String> = Vec::new();
    let mut label_names: Vec<Vec<String>> = Vec::new();
    let mut docs = Vec::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawJsonDoc = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("line {line_no}: {e}")))?;
        if docs.is_empty() && tasks.is_empty() {
            tasks = raw.labels.keys().cloned().collect();
            if tasks.is_empty() {
                return Err(Error::data(format!("line {line_no}: no labels present")));
            }
            label_names = vec![Vec::new(); tasks.len()];
        }
        let mut labels = Vec::with_capacity(tasks.len());
        for (t, task) in tasks.iter().enumerate() {
            let value = raw.labels.get(task).ok_or_else(|| {
                Error::data(format!("line {line_no}: missing label for task '{task}'"))
            })?;
            let name = label_value_to_name(value)
                .map_err(|e| Error::data(format!("line {line_no}: {e}")))?;
            let idx = match label_names[t].iter().position(|n| *n == name) {
                Some(i) => i,
                None => {
                    label_names[t].push(name);
                    label_names[t].len() - 1
                }
            };
            labels.push(idx);
        }
        if raw.labels.len() != tasks.len() {
            let extra: Vec<_> = raw
                .labels
                .keys()
                .filter(|k| !tasks.contains(k))
                .cloned()
                .collect();
            return Err(Error::data(format!(
                "line {line_no}: unexpected label keys {extra:?}"
            )));
        }
        let mut ids: Vec<u32> = split_words(&raw.text)
            .into_iter()
            .map(|w| vocab.add(&w))
            .collect();
        ids.truncate(max_doc_len);
        pad_to_min(&mut ids, min_doc_len);
        docs.push(LabeledDocument {
            doc_id: (docs.len()) as u64,
            case_id: raw.case_id,
            tokens: ids,
            labels,
            provenance: None,
        });
    }

    let meta = CorpusMeta {
        tasks: tasks
            .iter()
            .zip(&label_names)
            .map(|(name, names)| TaskSpec::new(name.clone(), names.len()))
            .collect(),
        label_names,
    };
    Ok(LoadedCorpus { docs, vocab, meta })
}

/// Loads a JSONL corpus against an existing vocabulary and label registry;
/// unknown label values are rejected, unknown words map to UNK.
pub fn load_jsonl_strict(
    path: &Path,
    vocab: &Vocabulary,
    meta: &CorpusMeta,
    min_doc_len: usize,
    max_doc_len: usize,
) -> Result<Vec<LabeledDocument>> {
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawJsonDoc = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("line {line_no}: {e}")))?;
        let mut labels = Vec::with_capacity(meta.tasks.len());
        for (t, task) in meta.tasks.iter().enumerate() {
            let value = raw.labels.get(&task.name).ok_or_else(|| {
                Error::data(format!(
                    "line {line_no}: missing label for task '{}'",
                    task.name
                ))
            })?;
            let name = label_value_to_name(value)
                .map_err(|e| Error::data(format!("line {line_no}: {e}")))?;
            let idx = meta.label_index(t, &name).ok_or_else(|| {
                Error::data(format!(
                    "line {line_no}: unknown label '{}' for task '{}' in strict mode",
                    name, task.name
                ))
            })?;
            labels.push(idx);
        }
        let mut ids = tokenize(&raw.text, vocab, min_doc_len);
        ids.truncate(max_doc_len.max(min_doc_len));
        docs.push(LabeledDocument {
            doc_id: docs.len() as u64,
            case_id: raw.case_id,
            tokens: ids,
            labels,
            provenance: None,
        });
    }
    Ok(docs)
}

/// Writes documents as JSONL (text reconstructed from non-PAD tokens, labels
/// as registry names).
pub fn save_jsonl(
    docs: &[LabeledDocument],
    vocab: &Vocabulary,
    meta: &CorpusMeta,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for doc in docs {
        let words: Vec<&str> = doc
            .tokens
            .iter()
            .filter(|&&id| id != PAD_ID)
            .filter_map(|&id| vocab.token(id))
            .collect();
        let mut labels = serde_json::Map::new();
        for (t, task) in meta.tasks.iter().enumerate() {
            labels.insert(
                task.name.clone(),
                serde_json::Value::String(meta.label_names[t][doc.labels[t]].clone()),
            );
        }
        let mut obj = serde_json::Map::new();
        obj.insert("doc_id".to_string(), serde_json::json!(doc.doc_id));
        if let Some(case) = &doc.case_id {
            obj.insert("case_id".to_string(), serde_json::json!(case));
        }
        obj.insert("text".to_string(), serde_json::json!(words.join(" ")));
        obj.insert("labels".to_string(), serde_json::Value::Object(labels));
        writeln!(w, "{}", serde_json::Value::Object(obj))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    doc_id: u64,
    #[serde(flatten)]
    provenance: DocProvenance,
}

/// Sidecar file mapping doc_id -> noise flags.
pub fn save_provenance(docs: &[LabeledDocument], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for doc in docs {
        if let Some(p) = &doc.provenance {
            let line = ProvenanceLine {
                doc_id: doc.doc_id,
                provenance: p.clone(),
            };
            writeln!(
                w,
                "{}",
                serde_json::to_string(&line)
                    .map_err(|e| Error::format(format!("provenance encode: {e}")))?
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_provenance(path: &Path) -> Result<HashMap<u64, DocProvenance>> {
    let reader = BufReader::new(File::open(path)?);
    let mut map = HashMap::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ProvenanceLine = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("provenance line {}: {e}", line_no + 1)))?;
        map.insert(parsed.doc_id, parsed.provenance);
    }
    Ok(map)
}

/// Attaches sidecar provenance to documents by doc_id.
pub fn attach_provenance(docs: &mut [LabeledDocument], prov: &HashMap<u64, DocProvenance>) {
    for doc in docs {
        if let Some(p) = prov.get(&doc.doc_id) {
            doc.provenance = Some(p.clone());
        }
    }
}
