//! Sectioned key-value run configuration.
//!
//! The format is INI-style: `[section]` headers, `key = value` pairs, `#`
//! comments. Unknown sections or keys are rejected. Every command writes a
//! resolved snapshot (canonical ordering, every value explicit) next to its
//! outputs, so a run can be reproduced from the snapshot and the seed alone.

use std::collections::BTreeMap;
use std::path::Path;

use dac_core::adam::AdamConfig;
use dac_core::corpus::{ConfuserSpec, SplitSpec, SyntheticSpec};
use dac_core::error::{Error, Result};
use dac_core::lime::PerturbationConfig;
use dac_core::loss::AbstentionConfig;
use dac_core::model::{ModelConfig, TaskSpec, TASK_NAMES};
use dac_core::train::TrainConfig;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub tasks: Vec<TaskSpec>,
    pub corpus: SyntheticSpec,
    pub split: SplitSpec,
    pub embed_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub max_doc_len: usize,
    pub dropout: f64,
    pub word_dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub patience: usize,
    pub abstention_enabled: bool,
    pub abstention: Vec<AbstentionConfig>,
    pub lime: PerturbationConfig,
}

impl RunConfig {
    /// Model configuration for a corpus with `vocab_size` tokens.
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            filter_widths: self.filter_widths.clone(),
            filters_per_width: self.filters_per_width,
            tasks: self.tasks.clone(),
            max_doc_len: self.max_doc_len,
            dropout: self.dropout,
            word_dropout: self.word_dropout,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: self.adam,
            abstention: self.abstention.clone(),
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn task_index(&self, name: &str) -> Result<usize> {
        resolve_task_name(&self.tasks, name)
    }
}

/// Accepts full task names plus the single-letter aliases used in reports
/// (S, B, H, L, G, SS for subsite).
pub fn resolve_task_name(tasks: &[TaskSpec], name: &str) -> Result<usize> {
    let lowered = name.trim().to_lowercase();
    let canonical = match lowered.as_str() {
        "s" => "site",
        "b" => "behavior",
        "h" => "histology",
        "l" => "laterality",
        "g" => "grade",
        "ss" | "u" => "subsite",
        other => other,
    };
    tasks
        .iter()
        .position(|t| t.name == canonical)
        .ok_or_else(|| Error::config(format!("unknown task '{name}'")))
}

struct Section {
    entries: Vec<(String, String)>,
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        // Strip comments: a leading `#`/`;`, or one after whitespace.
        let mut line = raw;
        for marker in ["#", ";"] {
            if let Some(pos) = line.find(marker) {
                let head = &line[..pos];
                if head.trim().is_empty() || head.ends_with([' ', '\t']) {
                    line = head;
                }
            }
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                return Err(Error::config(format!(
                    "line {line_no}: duplicate section [{name}]"
                )));
            }
            sections.insert(name.clone(), Section { entries: Vec::new() });
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "line {line_no}: expected 'key = value', got '{line}'"
            )));
        };
        let section = current
            .as_ref()
            .ok_or_else(|| Error::config(format!("line {line_no}: key before any [section]")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let entries = &mut sections.get_mut(section).unwrap().entries;
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(Error::config(format!(
                "line {line_no}: duplicate key '{key}' in [{section}]"
            )));
        }
        entries.push((key, value));
    }
    Ok(sections)
}

fn parse_value<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::config(format!("[{section}] {key} = '{value}': cannot parse"))
    })
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::config(format!(
            "[{section}] {key} = '{other}': expected true/false"
        ))),
    }
}

macro_rules! read_keys {
    ($section:expr, $name:expr, { $($key:literal => $slot:expr),* $(,)? }, $extra:expr) => {{
        let extra: &dyn Fn(&str, &str) -> Result<bool> = &$extra;
        for (key, value) in &$section.entries {
            match key.as_str() {
                $($key => {
                    #[allow(unused_mut)]
                    let mut handler = $slot;
                    let result: Result<()> = handler(value.as_str());
                    result?;
                })*
                other => {
                    if !extra(other, value)? {
                        return Err(Error::config(format!(
                            "unknown key '{}' in [{}]", other, $name
                        )));
                    }
                }
            }
        }
        Ok::<(), Error>(())
    }};
}

/// Parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = parse_sections(text)?;
    const KNOWN: [&str; 9] = [
        "run", "tasks", "corpus", "noise", "split", "model", "train", "abstention", "lime",
    ];
    for name in sections.keys() {
        let base = name.split('.').next().unwrap();
        if !KNOWN.contains(&base) {
            return Err(Error::config(format!("unknown section [{name}]")));
        }
        if name.contains('.') && base != "abstention" {
            return Err(Error::config(format!(
                "only [abstention.<task>] sections may be task-scoped, got [{name}]"
            )));
        }
    }

    // [tasks] is required and fixes the task order (file order).
    let task_section = sections
        .get("tasks")
        .ok_or_else(|| Error::config("missing required section [tasks]".to_string()))?;
    let mut tasks = Vec::new();
    for (key, value) in &task_section.entries {
        if !TASK_NAMES.contains(&key.as_str()) {
            return Err(Error::config(format!(
                "unknown task '{key}' in [tasks] (expected one of {TASK_NAMES:?})"
            )));
        }
        tasks.push(TaskSpec::new(key.clone(), parse_value("tasks", key, value)?));
    }
    if tasks.is_empty() {
        return Err(Error::config("[tasks] must list at least one task".to_string()));
    }

    let mut seed: u64 = 42;
    let mut threads: usize = 1;
    if let Some(run) = sections.get("run") {
        read_keys!(run, "run", {
            "seed" => |v| { seed = parse_value("run", "seed", v)?; Ok(()) },
            "threads" => |v| { threads = parse_value("run", "threads", v)?; Ok(()) },
        }, |_, _| Ok(false))?;
    }

    let mut corpus = SyntheticSpec {
        tasks: tasks.clone(),
        num_docs: 10_000,
        vocab_size: 2000,
        doc_len_min: 20,
        doc_len_max: 40,
        signal_tokens_per_class: 15,
        signal_rate: 0.5,
        distractor_rate_max: 0.0,
        pair_tokens_per_pair: 3,
        generic_tokens_per_task: 6,
        pair_share_exponent: 3.0,
        flip_rates: vec![0.0; tasks.len()],
        confuser: None,
        docs_per_case: 1,
        case_support_rate: 1.0,
        seed,
    };
    if let Some(section) = sections.get("corpus") {
        read_keys!(section, "corpus", {
            "num_docs" => |v| { corpus.num_docs = parse_value("corpus", "num_docs", v)?; Ok(()) },
            "vocab_size" => |v| { corpus.vocab_size = parse_value("corpus", "vocab_size", v)?; Ok(()) },
            "doc_len_min" => |v| { corpus.doc_len_min = parse_value("corpus", "doc_len_min", v)?; Ok(()) },
            "doc_len_max" => |v| { corpus.doc_len_max = parse_value("corpus", "doc_len_max", v)?; Ok(()) },
            "signal_tokens_per_class" => |v| { corpus.signal_tokens_per_class = parse_value("corpus", "signal_tokens_per_class", v)?; Ok(()) },
            "signal_rate" => |v| { corpus.signal_rate = parse_value("corpus", "signal_rate", v)?; Ok(()) },
            "distractor_rate_max" => |v| { corpus.distractor_rate_max = parse_value("corpus", "distractor_rate_max", v)?; Ok(()) },
            "pair_tokens_per_pair" => |v| { corpus.pair_tokens_per_pair = parse_value("corpus", "pair_tokens_per_pair", v)?; Ok(()) },
            "generic_tokens_per_task" => |v| { corpus.generic_tokens_per_task = parse_value("corpus", "generic_tokens_per_task", v)?; Ok(()) },
            "pair_share_exponent" => |v| { corpus.pair_share_exponent = parse_value("corpus", "pair_share_exponent", v)?; Ok(()) },
            "docs_per_case" => |v| { corpus.docs_per_case = parse_value("corpus", "docs_per_case", v)?; Ok(()) },
            "case_support_rate" => |v| { corpus.case_support_rate = parse_value("corpus", "case_support_rate", v)?; Ok(()) },
        }, |_, _| Ok(false))?;
    }
    corpus.seed = seed;

    if let Some(section) = sections.get("noise") {
        let mut confuser = ConfuserSpec {
            token_count: 1,
            copies: 3,
            injection_rate: 0.15,
            corruption_prob: 0.8,
            target_task: 0,
        };
        let mut confuser_enabled = false;
        let tasks_ref = &tasks;
        let flip_rates = std::cell::RefCell::new(&mut corpus.flip_rates);
        read_keys!(section, "noise", {
            "flip_rate" => |v| {
                let rate: f64 = parse_value("noise", "flip_rate", v)?;
                flip_rates.borrow_mut().iter_mut().for_each(|r| *r = rate);
                Ok(())
            },
            "confuser_enabled" => |v| { confuser_enabled = parse_bool("noise", "confuser_enabled", v)?; Ok(()) },
            "confuser_tokens" => |v| { confuser.token_count = parse_value("noise", "confuser_tokens", v)?; Ok(()) },
            "confuser_copies" => |v| { confuser.copies = parse_value("noise", "confuser_copies", v)?; Ok(()) },
            "confuser_rate" => |v| { confuser.injection_rate = parse_value("noise", "confuser_rate", v)?; Ok(()) },
            "confuser_corrupt_prob" => |v| { confuser.corruption_prob = parse_value("noise", "confuser_corrupt_prob", v)?; Ok(()) },
            "confuser_target_task" => |v| {
                confuser.target_task = resolve_task_name(tasks_ref, v)?;
                Ok(())
            },
        }, |key, value| {
            // Per-task flip-rate overrides: flip_rate.<task>.
            if let Some(task_name) = key.strip_prefix("flip_rate.") {
                let idx = resolve_task_name(tasks_ref, task_name)?;
                flip_rates.borrow_mut()[idx] = parse_value("noise", key, value)?;
                return Ok(true);
            }
            Ok(false)
        })?;
        if confuser_enabled {
            corpus.confuser = Some(confuser);
        }
    }

    let mut split = SplitSpec {
        by_case: false,
        ..Default::default()
    };
    if let Some(section) = sections.get("split") {
        read_keys!(section, "split", {
            "train" => |v| { split.train_fraction = parse_value("split", "train", v)?; Ok(()) },
            "val" => |v| { split.val_fraction = parse_value("split", "val", v)?; Ok(()) },
            "test" => |v| { split.test_fraction = parse_value("split", "test", v)?; Ok(()) },
            "by_case" => |v| { split.by_case = parse_bool("split", "by_case", v)?; Ok(()) },
        }, |_, _| Ok(false))?;
    }

    let mut embed_dim = 300usize;
    let mut filter_widths = vec![3usize, 4, 5];
    let mut filters_per_width = 300usize;
    let mut max_doc_len = 1500usize;
    let mut dropout = 0.0f64;
    let mut word_dropout = 0.0f64;
    if let Some(section) = sections.get("model") {
        read_keys!(section, "model", {
            "embed_dim" => |v| { embed_dim = parse_value("model", "embed_dim", v)?; Ok(()) },
            "filter_widths" => |v: &str| {
                filter_widths = v
                    .split(',')
                    .map(|w| parse_value("model", "filter_widths", w.trim()))
                    .collect::<Result<Vec<usize>>>()?;
                Ok(())
            },
            "filters_per_width" => |v| { filters_per_width = parse_value("model", "filters_per_width", v)?; Ok(()) },
            "max_doc_len" => |v| { max_doc_len = parse_value("model", "max_doc_len", v)?; Ok(()) },
            "dropout" => |v| { dropout = parse_value("model", "dropout", v)?; Ok(()) },
            "word_dropout" => |v| { word_dropout = parse_value("model", "word_dropout", v)?; Ok(()) },
        }, |_, _| Ok(false))?;
    }

    let mut epochs = 30usize;
    let mut batch_size = 32usize;
    let mut adam = AdamConfig::default();
    let mut patience = 0usize;
    if let Some(section) = sections.get("train") {
        read_keys!(section, "train", {
            "epochs" => |v| { epochs = parse_value("train", "epochs", v)?; Ok(()) },
            "batch_size" => |v| { batch_size = parse_value("train", "batch_size", v)?; Ok(()) },
            "learning_rate" => |v| { adam.learning_rate = parse_value("train", "learning_rate", v)?; Ok(()) },
            "adam_beta1" => |v| { adam.beta1 = parse_value("train", "adam_beta1", v)?; Ok(()) },
            "adam_beta2" => |v| { adam.beta2 = parse_value("train", "adam_beta2", v)?; Ok(()) },
            "adam_epsilon" => |v| { adam.epsilon = parse_value("train", "adam_epsilon", v)?; Ok(()) },
            "patience" => |v| { patience = parse_value("train", "patience", v)?; Ok(()) },
        }, |_, _| Ok(false))?;
    }

    // Abstention: global section plus optional per-task overrides.
    let mut abstention_enabled = true;
    let mut abstention: Vec<AbstentionConfig> = tasks
        .iter()
        .map(|t| AbstentionConfig::for_task(t.num_classes, 0.5))
        .collect();
    let apply_abstention = |section: &Section,
                                name: &str,
                                targets: &mut dyn Iterator<Item = usize>,
                                configs: &mut Vec<AbstentionConfig>,
                                enabled: Option<&mut bool>|
     -> Result<()> {
        let idx: Vec<usize> = targets.collect();
        let enabled_cell = std::cell::RefCell::new(enabled);
        let configs = std::cell::RefCell::new(configs);
        read_keys!(section, name, {
            "enabled" => |v| {
                match &mut *enabled_cell.borrow_mut() {
                    Some(e) => { **e = parse_bool(name, "enabled", v)?; Ok(()) }
                    None => Err(Error::config(format!(
                        "'enabled' is only valid in the global [abstention] section, not [{name}]"
                    ))),
                }
            },
            "budget" => |v| {
                let x: f64 = parse_value(name, "budget", v)?;
                let mut c = configs.borrow_mut();
                for &i in &idx { c[i].budget = x; }
                Ok(())
            },
            "warmup_epochs" => |v| {
                let x: usize = parse_value(name, "warmup_epochs", v)?;
                let mut c = configs.borrow_mut();
                for &i in &idx { c[i].warmup_epochs = x; }
                Ok(())
            },
            "alpha_init" => |v: &str| {
                let mut c = configs.borrow_mut();
                if v == "auto" {
                    for &i in &idx {
                        c[i].alpha_init = AbstentionConfig::for_task(2, 0.5).alpha_init;
                    }
                    // Recomputed properly below once per task; marker value.
                    for &i in &idx { c[i].alpha_init = f64::NAN; }
                } else {
                    let x: f64 = parse_value(name, "alpha_init", v)?;
                    for &i in &idx { c[i].alpha_init = x; }
                }
                Ok(())
            },
            "up_factor" => |v| {
                let x: f64 = parse_value(name, "up_factor", v)?;
                let mut c = configs.borrow_mut();
                for &i in &idx { c[i].up_factor = x; }
                Ok(())
            },
            "down_factor" => |v| {
                let x: f64 = parse_value(name, "down_factor", v)?;
                let mut c = configs.borrow_mut();
                for &i in &idx { c[i].down_factor = x; }
                Ok(())
            },
            "slack" => |v| {
                let x: f64 = parse_value(name, "slack", v)?;
                let mut c = configs.borrow_mut();
                for &i in &idx { c[i].slack = x; }
                Ok(())
            },
            "alpha_min" => |v| {
                let x: f64 = parse_value(name, "alpha_min", v)?;
                let mut c = configs.borrow_mut();
                for &i in &idx { c[i].alpha_min = x; }
                Ok(())
            },
            "alpha_max" => |v| {
                let x: f64 = parse_value(name, "alpha_max", v)?;
                let mut c = configs.borrow_mut();
                for &i in &idx { c[i].alpha_max = x; }
                Ok(())
            },
        }, |_, _| Ok(false))
    };
    if let Some(section) = sections.get("abstention") {
        apply_abstention(
            section,
            "abstention",
            &mut (0..tasks.len()),
            &mut abstention,
            Some(&mut abstention_enabled),
        )?;
    }
    for (name, section) in &sections {
        if let Some(task_name) = name.strip_prefix("abstention.") {
            let idx = resolve_task_name(&tasks, task_name)?;
            apply_abstention(section, name, &mut std::iter::once(idx), &mut abstention, None)?;
        }
    }
    // Resolve "auto" alpha_init markers and sync current alpha.
    for (cfg, task) in abstention.iter_mut().zip(&tasks) {
        if cfg.alpha_init.is_nan() {
            cfg.alpha_init = 2.0 * ((task.num_classes + 1) as f64).ln();
        }
        cfg.alpha = cfg.alpha_init.clamp(cfg.alpha_min, cfg.alpha_max);
        cfg.validate()?;
    }
    if !abstention_enabled {
        // Baseline mode: pin a huge constant penalty so the abstain class is
        // never attractive; the controller has no room to move it.
        for cfg in &mut abstention {
            cfg.alpha_init = 1e6;
            cfg.alpha = 1e6;
            cfg.alpha_min = 1e6;
            cfg.alpha_max = 1e6;
            cfg.budget = 1.0;
        }
    }

    let mut lime = PerturbationConfig {
        seed,
        ..Default::default()
    };
    if let Some(section) = sections.get("lime") {
        read_keys!(section, "lime", {
            "num_samples" => |v| { lime.num_samples = parse_value("lime", "num_samples", v)?; Ok(()) },
            "top_k" => |v| { lime.top_k = parse_value("lime", "top_k", v)?; Ok(()) },
            "kernel_width" => |v: &str| {
                lime.kernel_width = if v == "auto" {
                    None
                } else {
                    Some(parse_value("lime", "kernel_width", v)?)
                };
                Ok(())
            },
            "ridge_lambda" => |v| { lime.ridge_lambda = parse_value("lime", "ridge_lambda", v)?; Ok(()) },
        }, |_, _| Ok(false))?;
    }
    lime.validate()?;

    let config = RunConfig {
        seed,
        threads: threads.max(1),
        tasks,
        corpus,
        split,
        embed_dim,
        filter_widths,
        filters_per_width,
        max_doc_len,
        dropout,
        word_dropout,
        epochs,
        batch_size,
        adam,
        patience,
        abstention_enabled,
        abstention,
        lime,
    };
    config.corpus.validate()?;
    config.split.validate()?;
    Ok(config)
}

/// Canonical snapshot: fixed section and key order, all values explicit.
/// Re-parsing a snapshot yields the same resolved configuration.
pub fn snapshot(config: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str("[run]\n");
    out.push_str(&format!("seed = {}\n", config.seed));
    out.push_str(&format!("threads = {}\n", config.threads));

    out.push_str("\n[tasks]\n");
    for task in &config.tasks {
        out.push_str(&format!("{} = {}\n", task.name, task.num_classes));
    }

    let c = &config.corpus;
    out.push_str("\n[corpus]\n");
    out.push_str(&format!("num_docs = {}\n", c.num_docs));
    out.push_str(&format!("vocab_size = {}\n", c.vocab_size));
    out.push_str(&format!("doc_len_min = {}\n", c.doc_len_min));
    out.push_str(&format!("doc_len_max = {}\n", c.doc_len_max));
    out.push_str(&format!(
        "signal_tokens_per_class = {}\n",
        c.signal_tokens_per_class
    ));
    out.push_str(&format!("signal_rate = {}\n", c.signal_rate));
    out.push_str(&format!("distractor_rate_max = {}\n", c.distractor_rate_max));
    out.push_str(&format!("pair_tokens_per_pair = {}\n", c.pair_tokens_per_pair));
    out.push_str(&format!(
        "generic_tokens_per_task = {}\n",
        c.generic_tokens_per_task
    ));
    out.push_str(&format!("pair_share_exponent = {}\n", c.pair_share_exponent));
    out.push_str(&format!("docs_per_case = {}\n", c.docs_per_case));
    out.push_str(&format!("case_support_rate = {}\n", c.case_support_rate));

    out.push_str("\n[noise]\n");
    for (task, rate) in config.tasks.iter().zip(&c.flip_rates) {
        out.push_str(&format!("flip_rate.{} = {}\n", task.name, rate));
    }
    match &c.confuser {
        Some(conf) => {
            out.push_str("confuser_enabled = true\n");
            out.push_str(&format!("confuser_tokens = {}\n", conf.token_count));
            out.push_str(&format!("confuser_copies = {}\n", conf.copies));
            out.push_str(&format!("confuser_rate = {}\n", conf.injection_rate));
            out.push_str(&format!("confuser_corrupt_prob = {}\n", conf.corruption_prob));
            out.push_str(&format!(
                "confuser_target_task = {}\n",
                config.tasks[conf.target_task].name
            ));
        }
        None => out.push_str("confuser_enabled = false\n"),
    }

    out.push_str("\n[split]\n");
    out.push_str(&format!("train = {}\n", config.split.train_fraction));
    out.push_str(&format!("val = {}\n", config.split.val_fraction));
    out.push_str(&format!("test = {}\n", config.split.test_fraction));
    out.push_str(&format!("by_case = {}\n", config.split.by_case));

    out.push_str("\n[model]\n");
    out.push_str(&format!("embed_dim = {}\n", config.embed_dim));
    out.push_str(&format!(
        "filter_widths = {}\n",
        config
            .filter_widths
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.push_str(&format!("filters_per_width = {}\n", config.filters_per_width));
    out.push_str(&format!("max_doc_len = {}\n", config.max_doc_len));
    out.push_str(&format!("dropout = {}\n", config.dropout));
    out.push_str(&format!("word_dropout = {}\n", config.word_dropout));

    out.push_str("\n[train]\n");
    out.push_str(&format!("epochs = {}\n", config.epochs));
    out.push_str(&format!("batch_size = {}\n", config.batch_size));
    out.push_str(&format!("learning_rate = {}\n", config.adam.learning_rate));
    out.push_str(&format!("adam_beta1 = {}\n", config.adam.beta1));
    out.push_str(&format!("adam_beta2 = {}\n", config.adam.beta2));
    out.push_str(&format!("adam_epsilon = {}\n", config.adam.epsilon));
    out.push_str(&format!("patience = {}\n", config.patience));

    out.push_str("\n[abstention]\n");
    out.push_str(&format!("enabled = {}\n", config.abstention_enabled));
    for (task, a) in config.tasks.iter().zip(&config.abstention) {
        out.push_str(&format!("\n[abstention.{}]\n", task.name));
        out.push_str(&format!("budget = {}\n", a.budget));
        out.push_str(&format!("warmup_epochs = {}\n", a.warmup_epochs));
        out.push_str(&format!("alpha_init = {}\n", a.alpha_init));
        out.push_str(&format!("up_factor = {}\n", a.up_factor));
        out.push_str(&format!("down_factor = {}\n", a.down_factor));
        out.push_str(&format!("slack = {}\n", a.slack));
        out.push_str(&format!("alpha_min = {}\n", a.alpha_min));
        out.push_str(&format!("alpha_max = {}\n", a.alpha_max));
    }

    out.push_str("\n[lime]\n");
    out.push_str(&format!("num_samples = {}\n", config.lime.num_samples));
    out.push_str(&format!("top_k = {}\n", config.lime.top_k));
    match config.lime.kernel_width {
        Some(w) => out.push_str(&format!("kernel_width = {w}\n")),
        None => out.push_str("kernel_width = auto\n"),
    }
    out.push_str(&format!("ridge_lambda = {}\n", config.lime.ridge_lambda));
    out
}
