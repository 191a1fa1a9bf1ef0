//! `dac eval`: per-task selective metrics, task-combination reports, and the
//! abstention audit against a provenance sidecar.

use std::path::Path;

use dac_core::corpus::split_corpus;
use dac_core::error::{Error, Result};
use dac_core::model::load_checkpoint;
use dac_core::report;
use dac_core::rng::Rng;
use dac_core::train::{abstention_audit, evaluate_combo, predict_records, selective_metrics};

use crate::config::{resolve_task_name, RunConfig};
use crate::data::{self, load_data_dir};
use crate::util::write_output;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

impl std::str::FromStr for SplitChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(SplitChoice::Train),
            "val" => Ok(SplitChoice::Val),
            "test" => Ok(SplitChoice::Test),
            "all" => Ok(SplitChoice::All),
            other => Err(format!("unknown split '{other}' (train|val|test|all)")),
        }
    }
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub data_dir: &'a Path,
    pub out_dir: &'a Path,
    /// Needed to re-derive splits when `split` is not `All`.
    pub config: Option<&'a RunConfig>,
    pub split: SplitChoice,
    /// Restrict the per-task report to these tasks (names or aliases).
    pub tasks: Option<Vec<String>>,
    /// Task combinations, each a comma-separated list.
    pub combos: Vec<String>,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    std::fs::create_dir_all(args.out_dir)?;
    let (model, _meta) = load_checkpoint(args.checkpoint)?;
    let min_len = model.config.max_filter_width();
    let dataset = load_data_dir(args.data_dir, min_len, model.config.max_doc_len)?;
    if dataset.vocab.len() != model.config.vocab_size {
        return Err(Error::shape(format!(
            "corpus vocabulary {} != checkpoint vocab size {}",
            dataset.vocab.len(),
            model.config.vocab_size
        )));
    }

    let docs = match (args.split, args.config) {
        (SplitChoice::All, _) => dataset.docs,
        (choice, Some(config)) => {
            let splits = split_corpus(
                &dataset.docs,
                &config.split,
                &mut Rng::with_stream(config.seed, "split"),
            )?;
            match choice {
                SplitChoice::Train => splits.train,
                SplitChoice::Val => splits.val,
                SplitChoice::Test => splits.test,
                SplitChoice::All => unreachable!(),
            }
        }
        (_, None) => {
            return Err(Error::config(
                "--split train|val|test needs --config to re-derive the split".to_string(),
            ))
        }
    };
    if docs.is_empty() {
        return Err(Error::data("selected split is empty".to_string()));
    }

    let records = predict_records(&model, &docs)?;
    let all_metrics = selective_metrics(&model, &records);

    let metrics: Vec<_> = match &args.tasks {
        None => all_metrics.clone(),
        Some(names) => {
            let mut selected = Vec::new();
            for name in names {
                let idx = resolve_task_name(&model.config.tasks, name)?;
                selected.push(all_metrics[idx].clone());
            }
            selected
        }
    };

    write_output(&args.out_dir.join(data::METRICS_FILE), &report::metrics_tsv(&metrics))?;
    print!("{}", report::metrics_table(&metrics));

    if !args.combos.is_empty() {
        let mut combo_metrics = Vec::new();
        for combo in &args.combos {
            let subset: Vec<usize> = combo
                .split(',')
                .map(|name| resolve_task_name(&model.config.tasks, name))
                .collect::<Result<Vec<_>>>()?;
            combo_metrics.push(evaluate_combo(&model, &records, &subset)?);
        }
        write_output(
            &args.out_dir.join(data::COMBOS_FILE),
            &report::combos_tsv(&combo_metrics),
        )?;
        println!();
        print!("{}", report::combos_table(&combo_metrics));
    }

    if let Some(provenance) = &dataset.provenance {
        let audit = abstention_audit(&model, &records, provenance)?;
        write_output(&args.out_dir.join(data::AUDIT_FILE), &report::audit_tsv(&audit))?;
        println!("\nabstention audit (P(flag|abstained) / P(flag|retained)):");
        for row in &audit {
            println!(
                "  {:<12} {:<22} abstained {:>5}/{:<5} retained {:>5}/{:<5} enrichment {}",
                row.task,
                row.flag,
                row.abstained_with,
                row.abstained_total,
                row.retained_with,
                row.retained_total,
                row.enrichment
            );
        }
    }
    Ok(())
}
