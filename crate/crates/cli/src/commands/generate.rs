//! `dac generate`: synthesize a corpus with configured label noise.

use std::path::Path;

use dac_core::corpus::{generate_corpus, save_jsonl, save_provenance, CorpusMeta};
use dac_core::error::Result;

use crate::config::{snapshot, RunConfig};
use crate::data;
use crate::util::write_output;

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let (docs, vocab) = generate_corpus(&config.corpus)?;
    let meta = CorpusMeta::from_synthetic(&config.corpus);

    save_jsonl(&docs, &vocab, &meta, &out_dir.join(data::CORPUS_FILE))?;
    vocab.save(&out_dir.join(data::VOCAB_FILE))?;
    meta.save(&out_dir.join(data::LABELS_FILE))?;
    save_provenance(&docs, &out_dir.join(data::PROVENANCE_FILE))?;
    write_output(&out_dir.join(data::SNAPSHOT_FILE), &snapshot(config))?;

    println!(
        "generated {} documents ({} tokens in vocabulary) into {}",
        docs.len(),
        vocab.len(),
        out_dir.display()
    );
    Ok(())
}
