//! `dac train`: minibatch training with per-task abstention-budget control.

use std::path::Path;

use dac_core::corpus::split_corpus;
use dac_core::error::{Error, Result};
use dac_core::model::{load_checkpoint, save_checkpoint, Model};
use dac_core::rng::Rng;
use dac_core::train::{train, EpochStats};

use crate::config::{snapshot, RunConfig};
use crate::data::{self, load_data_dir};
use crate::util::write_output;

pub fn history_tsv(tasks: &[String], history: &[EpochStats]) -> String {
    let mut out = String::from("epoch\ttrain_loss\tsaturations\tmeets_budget\tis_best");
    for t in tasks {
        out.push_str(&format!("\talpha_{t}\tval_abs_{t}\tval_retacc_{t}\tval_baseacc_{t}"));
    }
    out.push('\n');
    for h in history {
        out.push_str(&format!(
            "{}\t{:.6}\t{}\t{}\t{}",
            h.epoch, h.train_loss, h.saturations, h.meets_budget, h.is_best
        ));
        for t in 0..tasks.len() {
            out.push_str(&format!(
                "\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                h.alphas[t], h.val_abstention[t], h.val_retained_accuracy[t],
                h.val_base_accuracy[t]
            ));
        }
        out.push('\n');
    }
    out
}

pub struct TrainArgs<'a> {
    pub data_dir: &'a Path,
    pub out_dir: &'a Path,
    pub init_embeddings: Option<&'a Path>,
    pub resume: Option<&'a Path>,
}

pub fn run(config: &RunConfig, args: &TrainArgs) -> Result<()> {
    std::fs::create_dir_all(args.out_dir)?;
    let min_len = *config.filter_widths.last().unwrap();
    let dataset = load_data_dir(args.data_dir, min_len, config.max_doc_len)?;

    // The corpus registries must agree with the configured tasks.
    if dataset.meta.tasks != config.tasks {
        return Err(Error::config(format!(
            "configured tasks {:?} do not match the corpus registries {:?}",
            config.tasks, dataset.meta.tasks
        )));
    }

    let splits = split_corpus(
        &dataset.docs,
        &config.split,
        &mut Rng::with_stream(config.seed, "split"),
    )?;

    let mut model = match args.resume {
        Some(path) => {
            let (model, _) = load_checkpoint(path)?;
            if model.config.tasks != config.tasks {
                return Err(Error::config(
                    "resume checkpoint tasks do not match the configuration".to_string(),
                ));
            }
            if model.config.vocab_size != dataset.vocab.len() {
                return Err(Error::shape(format!(
                    "resume checkpoint vocab size {} != corpus vocabulary {}",
                    model.config.vocab_size,
                    dataset.vocab.len()
                )));
            }
            model
        }
        None => Model::init(config.model_config(dataset.vocab.len()))?,
    };
    if let Some(path) = args.init_embeddings {
        model.load_embedding_table(path)?;
    }

    let output = train(model, &splits.train, &splits.val, &config.train_config())?;

    let task_names: Vec<String> = config.tasks.iter().map(|t| t.name.clone()).collect();
    write_output(
        &args.out_dir.join(data::HISTORY_FILE),
        &history_tsv(&task_names, &output.history),
    )?;
    write_output(&args.out_dir.join(data::SNAPSHOT_FILE), &snapshot(config))?;
    save_checkpoint(
        &output.model,
        Some(&output.meta),
        &args.out_dir.join(data::CHECKPOINT_FILE),
    )?;

    if let Some(reason) = &output.divergence {
        return Err(Error::numeric(format!(
            "training diverged ({reason}); partial history preserved in {}",
            args.out_dir.display()
        )));
    }

    println!(
        "trained {} epochs; best epoch {} (budget met: {})",
        output.history.len(),
        output.meta.epoch,
        output.budget_met
    );
    for (t, name) in task_names.iter().enumerate() {
        println!(
            "  {name}: alpha {:.4}, val abstention {:.2}%, val retained acc {:.2}%",
            output.meta.alphas[t],
            output.meta.val_abstention.get(t).copied().unwrap_or(0.0) * 100.0,
            output.meta.val_retained_accuracy.get(t).copied().unwrap_or(0.0) * 100.0,
        );
    }
    println!("checkpoint written to {}", args.out_dir.join(data::CHECKPOINT_FILE).display());
    Ok(())
}
