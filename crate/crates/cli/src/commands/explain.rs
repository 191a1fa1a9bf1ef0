//! `dac explain`: perturbation explanations of predicted classes (including
//! the abstain class), as JSONL records plus a signed-bar text rendering.

use std::collections::BTreeMap;
use std::path::Path;

use dac_core::corpus::LabeledDocument;
use dac_core::error::{Error, Result};
use dac_core::lime::{explain, ExplainTarget, Explanation, PerturbationConfig};
use dac_core::model::{load_checkpoint, Model};
use dac_core::report::explanation_bars;
use dac_core::rng::Rng;
use dac_core::train::predict_records;

use crate::config::{resolve_task_name, snapshot, RunConfig};
use crate::data::{self, load_data_dir};
use crate::util::{parallel_map_ordered, write_output};

pub struct ExplainArgs<'a> {
    pub checkpoint: &'a Path,
    pub data_dir: &'a Path,
    pub out_dir: &'a Path,
    pub task: &'a str,
    pub doc_ids: Option<Vec<u64>>,
    /// Balanced sampling: per gold class, up to N correctly classified and up
    /// to N abstained documents.
    pub sample_per_class: Option<usize>,
    pub config: Option<&'a RunConfig>,
}

/// One output line of `explanations.jsonl`.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct ExplanationRecord {
    pub doc_id: u64,
    pub task: String,
    pub class_index: usize,
    pub class_is_abstain: bool,
    pub gold_index: usize,
    pub entries: Vec<(usize, String, f64)>,
    pub r_squared: f64,
    pub degenerate: bool,
    pub method: String,
    pub num_samples: usize,
    pub config_digest: String,
}

impl ExplanationRecord {
    pub fn from_explanation(expl: &Explanation, gold_index: usize) -> Self {
        ExplanationRecord {
            doc_id: expl.doc_id,
            task: expl.task.clone(),
            class_index: expl.class_index,
            class_is_abstain: expl.class_is_abstain,
            gold_index,
            entries: expl
                .entries
                .iter()
                .map(|e| (e.position, e.token.clone(), e.coefficient))
                .collect(),
            r_squared: expl.r_squared,
            degenerate: expl.degenerate,
            method: expl.method.clone(),
            num_samples: expl.num_samples,
            config_digest: expl.config_digest.clone(),
        }
    }
}

pub fn run(args: &ExplainArgs) -> Result<()> {
    std::fs::create_dir_all(args.out_dir)?;
    let (model, _) = load_checkpoint(args.checkpoint)?;
    let task_idx = resolve_task_name(&model.config.tasks, args.task)?;
    let num_classes = model.config.tasks[task_idx].num_classes;
    let min_len = model.config.max_filter_width();
    let dataset = load_data_dir(args.data_dir, min_len, model.config.max_doc_len)?;

    let lime_cfg = args
        .config
        .map(|c| c.lime.clone())
        .unwrap_or_default();
    let threads = args.config.map(|c| c.threads).unwrap_or(1);
    let base_seed = args.config.map(|c| c.seed).unwrap_or(lime_cfg.seed);

    let records = predict_records(&model, &dataset.docs)?;
    let by_id: BTreeMap<u64, usize> = dataset
        .docs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_id, i))
        .collect();

    // Select documents to explain.
    let selected: Vec<usize> = match (&args.doc_ids, args.sample_per_class) {
        (Some(ids), _) => {
            let mut out = Vec::new();
            for id in ids {
                let idx = by_id.get(id).ok_or_else(|| {
                    Error::data(format!("unknown doc id {id} in {}", args.data_dir.display()))
                })?;
                out.push(*idx);
            }
            out
        }
        (None, Some(per_class)) => {
            // Per gold class: up to N correctly classified documents and up
            // to N abstained ones, drawn in seeded shuffled order.
            let mut order: Vec<usize> = (0..dataset.docs.len()).collect();
            Rng::with_stream(base_seed, "explain-sample").shuffle(&mut order);
            let mut correct: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
            let mut abstained: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
            for &i in &order {
                let rec = &records[i];
                let gold = rec.gold[task_idx];
                if rec.full_pred[task_idx] == num_classes {
                    if abstained[gold].len() < per_class {
                        abstained[gold].push(i);
                    }
                } else if rec.full_pred[task_idx] == gold && correct[gold].len() < per_class {
                    correct[gold].push(i);
                }
            }
            let mut out: Vec<usize> = correct.into_iter().flatten().collect();
            out.extend(abstained.into_iter().flatten());
            out.sort_unstable();
            out
        }
        (None, None) => {
            return Err(Error::config(
                "explain needs --doc-ids or --sample-per-class".to_string(),
            ))
        }
    };
    if selected.is_empty() {
        return Err(Error::data("no documents selected for explanation".to_string()));
    }

    let model_ref = &model;
    let docs_ref = &dataset.docs;
    let vocab_ref = &dataset.vocab;
    let records_ref = &records;
    let lime_ref = &lime_cfg;
    let task_name = model.config.tasks[task_idx].name.clone();
    let task_name_ref = &task_name;

    let results: Vec<Result<(Explanation, usize)>> =
        parallel_map_ordered(selected, threads, move |i| {
            let doc: &LabeledDocument = &docs_ref[i];
            let rec = &records_ref[i];
            let class_index = rec.full_pred[task_idx];
            let class_is_abstain = class_index == num_classes;
            let target = ExplainTarget {
                doc_id: doc.doc_id,
                task: task_name_ref.clone(),
                class_index,
                class_is_abstain,
            };
            let cfg = PerturbationConfig {
                seed: base_seed.wrapping_add(doc.doc_id),
                ..lime_ref.clone()
            };
            let probe = |masked: &[u32]| -> Result<f64> {
                let probs = Model::forward(model_ref, masked)?;
                Ok(probs[task_idx].prob(class_index))
            };
            explain(probe, &doc.tokens, vocab_ref, &target, &cfg)
                .map(|e| (e, rec.gold[task_idx]))
        });

    let mut jsonl = String::new();
    let mut text = String::new();
    for result in results {
        let (expl, gold) = result?;
        let record = ExplanationRecord::from_explanation(&expl, gold);
        jsonl.push_str(
            &serde_json::to_string(&record)
                .map_err(|e| Error::format(format!("explanation encode: {e}")))?,
        );
        jsonl.push('\n');
        text.push_str(&explanation_bars(&expl, 10));
        text.push('\n');
    }
    write_output(&args.out_dir.join(data::EXPLANATIONS_FILE), &jsonl)?;
    write_output(&args.out_dir.join(data::EXPLANATIONS_TEXT_FILE), &text)?;
    if let Some(config) = args.config {
        write_output(&args.out_dir.join(data::SNAPSHOT_FILE), &snapshot(config))?;
    }
    print!("{text}");
    Ok(())
}
