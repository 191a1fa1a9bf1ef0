//! `dac associate`: word-stem association tables with exact test p-values,
//! plus per-(class, stem) abstention-attribution estimates.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use dac_core::error::{Error, Result};
use dac_core::report::{associations_tsv, attribution_tsv};
use dac_core::stats::{
    attribution_estimate, AssociationRecord, AttributionEstimate, DocStemEvidence,
};

use crate::commands::explain::ExplanationRecord;
use crate::data::{self, load_data_dir};
use crate::util::write_output;

pub struct AssociateArgs<'a> {
    pub out_dir: &'a Path,
    pub stems: Vec<String>,
    /// Normal mode: explanations plus the corpus they refer to.
    pub explanations: Option<&'a Path>,
    pub data_dir: Option<&'a Path>,
    /// Verification mode: published counts in, p-values out.
    pub from_counts: Option<&'a Path>,
}

/// Parses the verification-mode TSV: one row of published counts per
/// (class, stem).
fn parse_counts_file(path: &Path) -> Result<Vec<AssociationRecord>> {
    const HEADER: [&str; 10] = [
        "class",
        "stem",
        "correct_total",
        "abstained_total",
        "correct_with",
        "abstained_with",
        "correct_lime_id",
        "correct_lime_pos",
        "abstained_lime_id",
        "abstained_lime_pos",
    ];
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data("empty counts file".to_string()))??;
    let cols: Vec<&str> = header.trim_end().split('\t').collect();
    if cols != HEADER {
        return Err(Error::data(format!(
            "counts header must be {:?}, got {:?}",
            HEADER.join("\t"),
            header
        )));
    }
    let mut records = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split('\t').collect();
        if fields.len() != HEADER.len() {
            return Err(Error::data(format!(
                "counts line {}: expected {} fields, got {}",
                line_no + 2,
                HEADER.len(),
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<u64> {
            fields[i].parse().map_err(|_| {
                Error::data(format!(
                    "counts line {}: '{}' is not a count",
                    line_no + 2,
                    fields[i]
                ))
            })
        };
        let mut record = AssociationRecord {
            class_name: fields[0].to_string(),
            stem: fields[1].to_string(),
            correct_total: num(2)?,
            abstained_total: num(3)?,
            correct_with_word: num(4)?,
            abstained_with_word: num(5)?,
            correct_lime_id: num(6)?,
            correct_lime_positive: num(7)?,
            abstained_lime_id: num(8)?,
            abstained_lime_positive: num(9)?,
            occurrence_p: 1.0,
            pickup_p: 1.0,
        };
        record.compute_p_values()?;
        records.push(record);
    }
    Ok(records)
}

fn attribution_rows(
    records: &[AssociationRecord],
) -> Vec<(String, String, Option<AttributionEstimate>)> {
    records
        .iter()
        .map(|r| {
            let est = if r.abstained_total > 0 && r.abstained_with_word > 0 && r.abstained_lime_id > 0
            {
                attribution_estimate(
                    r.abstained_with_word as f64 / r.abstained_total as f64,
                    r.abstained_lime_id as f64 / r.abstained_with_word as f64,
                    r.abstained_lime_positive as f64 / r.abstained_lime_id as f64,
                )
                .ok()
            } else {
                None
            };
            (r.class_name.clone(), r.stem.clone(), est)
        })
        .collect()
}

pub fn run(args: &AssociateArgs) -> Result<()> {
    if args.stems.is_empty() {
        return Err(Error::config("--stems must list at least one stem".to_string()));
    }
    let stems: Vec<String> = args
        .stems
        .iter()
        .map(|s| s.trim().to_lowercase())
        .collect();
    if stems.iter().any(|s| s.is_empty()) {
        return Err(Error::config("empty stem".to_string()));
    }
    std::fs::create_dir_all(args.out_dir)?;

    let records = match (args.from_counts, args.explanations, args.data_dir) {
        (Some(path), _, _) => parse_counts_file(path)?,
        (None, Some(expl_path), Some(data_dir)) => {
            build_from_explanations(expl_path, data_dir, &stems)?
        }
        _ => {
            return Err(Error::config(
                "associate needs either --from-counts or both --explanations and --data".to_string(),
            ))
        }
    };

    write_output(&args.out_dir.join(data::ASSOCIATIONS_FILE), &associations_tsv(&records))?;
    let attribution = attribution_rows(&records);
    write_output(&args.out_dir.join(data::ATTRIBUTION_FILE), &attribution_tsv(&attribution))?;

    for r in &records {
        println!(
            "{} / {:<12} occurrence p = {:.1e}   pickup p = {:.1e}",
            r.class_name, r.stem, r.occurrence_p, r.pickup_p
        );
    }
    for (class, stem, est) in &attribution {
        if let Some(e) = est {
            println!(
                "attribution {class}/{stem}: {:.2} x {:.2} x {:.2} = {:.4} ({})",
                e.frac_in_abstained,
                e.frac_lime_id,
                e.frac_positive,
                e.product,
                e.percent_label()
            );
        }
    }
    Ok(())
}

/// Builds association rows from explanation records and their corpus: for
/// each gold class of the explained task, the correctly classified and
/// abstained groups, scanned for each stem.
fn build_from_explanations(
    expl_path: &Path,
    data_dir: &Path,
    stems: &[String],
) -> Result<Vec<AssociationRecord>> {
    let file = std::fs::File::open(expl_path)?;
    let mut records: Vec<ExplanationRecord> = Vec::new();
    for (line_no, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::data(format!("explanations line {}: {e}", line_no + 1)))?,
        );
    }
    if records.is_empty() {
        return Err(Error::data("no explanation records".to_string()));
    }
    let task_name = records[0].task.clone();
    if records.iter().any(|r| r.task != task_name) {
        return Err(Error::data(
            "explanations mix tasks; associate expects a single task".to_string(),
        ));
    }

    // Token sequences for occurrence scans.
    let dataset = load_data_dir(data_dir, 1, usize::MAX)?;
    let docs_by_id: BTreeMap<u64, &dac_core::corpus::LabeledDocument> =
        dataset.docs.iter().map(|d| (d.doc_id, d)).collect();
    let task_idx = dataset
        .meta
        .tasks
        .iter()
        .position(|t| t.name == task_name)
        .ok_or_else(|| Error::data(format!("task '{task_name}' not in corpus registries")))?;

    let mut out = Vec::new();
    for class in 0..dataset.meta.tasks[task_idx].num_classes {
        let class_name = dataset.meta.label_names[task_idx][class].clone();
        let mut missing: Vec<u64> = Vec::new();
        let mut correct_group: Vec<(u64, &ExplanationRecord)> = Vec::new();
        let mut abstained_group: Vec<(u64, &ExplanationRecord)> = Vec::new();
        for rec in &records {
            if rec.gold_index != class {
                continue;
            }
            if !docs_by_id.contains_key(&rec.doc_id) {
                missing.push(rec.doc_id);
                continue;
            }
            if rec.class_is_abstain {
                abstained_group.push((rec.doc_id, rec));
            } else if rec.class_index == rec.gold_index {
                correct_group.push((rec.doc_id, rec));
            }
        }
        if !missing.is_empty() {
            missing.truncate(8);
            return Err(Error::data(format!(
                "explained documents missing from the corpus: {missing:?}"
            )));
        }
        if correct_group.is_empty() && abstained_group.is_empty() {
            continue;
        }
        for stem in stems {
            let evidence = |group: &[(u64, &ExplanationRecord)]| -> Vec<DocStemEvidence> {
                group
                    .iter()
                    .map(|(doc_id, rec)| {
                        let doc = docs_by_id[doc_id];
                        let contains_word =
                            dac_core::stats::doc_contains_stem(doc, &dataset.vocab, stem);
                        // Picked up: any entry whose token starts with the
                        // stem; sign taken from the strongest such entry.
                        let best = rec
                            .entries
                            .iter()
                            .filter(|(_, token, _)| token.starts_with(stem.as_str()))
                            .max_by(|a, b| a.2.abs().partial_cmp(&b.2.abs()).unwrap());
                        let picked_up = contains_word && best.is_some();
                        let positive = picked_up && best.is_some_and(|(_, _, c)| *c > 0.0);
                        DocStemEvidence {
                            contains_word,
                            picked_up,
                            positive,
                        }
                    })
                    .collect()
            };
            let correct_ev = evidence(&correct_group);
            let abstained_ev = evidence(&abstained_group);
            out.push(dac_core::stats::build_association_record(
                &dac_core::stats::AssociationGroupInputs {
                    class_name: &class_name,
                    correct: &correct_ev,
                    abstained: &abstained_ev,
                },
                stem,
            )?);
        }
    }
    Ok(out)
}
