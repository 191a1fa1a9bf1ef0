//! Loading and saving the on-disk corpus layout.
//!
//! A data directory holds `corpus.jsonl` plus the sidecars `vocab.txt`
//! (token per line), `labels.json` (task and label registries), and
//! optionally `provenance.jsonl` (noise ground truth for synthetic corpora).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use dac_core::corpus::{
    load_jsonl_build, load_jsonl_strict, load_provenance, CorpusMeta, DocProvenance,
    LabeledDocument, Vocabulary,
};
use dac_core::error::{Error, Result};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const LABELS_FILE: &str = "labels.json";
pub const PROVENANCE_FILE: &str = "provenance.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.dac";
pub const HISTORY_FILE: &str = "history.tsv";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const COMBOS_FILE: &str = "combos.tsv";
pub const AUDIT_FILE: &str = "audit.tsv";
pub const EXPLANATIONS_FILE: &str = "explanations.jsonl";
pub const EXPLANATIONS_TEXT_FILE: &str = "explanations.txt";
pub const ASSOCIATIONS_FILE: &str = "associations.tsv";
pub const ATTRIBUTION_FILE: &str = "attribution.tsv";
pub const SNAPSHOT_FILE: &str = "config.resolved.ini";

pub struct DataDir {
    pub docs: Vec<LabeledDocument>,
    pub vocab: Vocabulary,
    pub meta: CorpusMeta,
    pub provenance: Option<HashMap<u64, DocProvenance>>,
}

pub fn corpus_path(dir: &Path) -> PathBuf {
    dir.join(CORPUS_FILE)
}

/// Loads a corpus directory. With `vocab.txt` and `labels.json` present the
/// corpus is read strictly against them; otherwise the vocabulary and label
/// registries are built from the data.
pub fn load_data_dir(dir: &Path, min_doc_len: usize, max_doc_len: usize) -> Result<DataDir> {
    let corpus_file = corpus_path(dir);
    if !corpus_file.exists() {
        return Err(Error::data(format!(
            "no {CORPUS_FILE} in {}",
            dir.display()
        )));
    }
    let vocab_file = dir.join(VOCAB_FILE);
    let labels_file = dir.join(LABELS_FILE);
    let (docs, vocab, meta) = if vocab_file.exists() && labels_file.exists() {
        let vocab = Vocabulary::load(&vocab_file)?;
        let meta = CorpusMeta::load(&labels_file)?;
        let docs = load_jsonl_strict(&corpus_file, &vocab, &meta, min_doc_len, max_doc_len)?;
        (docs, vocab, meta)
    } else {
        let loaded = load_jsonl_build(&corpus_file, min_doc_len, max_doc_len)?;
        (loaded.docs, loaded.vocab, loaded.meta)
    };

    let prov_file = dir.join(PROVENANCE_FILE);
    let provenance = if prov_file.exists() {
        Some(load_provenance(&prov_file)?)
    } else {
        None
    };
    Ok(DataDir {
        docs,
        vocab,
        meta,
        provenance,
    })
}
