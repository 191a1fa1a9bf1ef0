//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `cargo test -p dac-cli --test acceptance -- --nocapture`).

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use dac_cli::commands;
use dac_cli::config::parse_config;
use dac_core::adam::AdamConfig;
use dac_core::corpus::{generate_corpus, split_corpus, ConfuserSpec, SplitSpec, SyntheticSpec};
use dac_core::gradcheck::grad_check;
use dac_core::layers;
use dac_core::lime::{explain, stability, ExplainTarget, PerturbationConfig};
use dac_core::loss::{
    abstain_loss, abstain_loss_grad_from_probs, abstention_penalty_slope, AbstentionConfig,
};
use dac_core::model::{Model, ModelConfig, TaskSpec};
use dac_core::prob::{ProbabilityVector, TargetLabel};
use dac_core::rng::Rng;
use dac_core::stats::{
    attribution_estimate, fisher_exact_2x2, fisher_exact_2x2_rational, fisher_exact_2x3,
    ContingencyTable2x2, ContingencyTable2x3,
};
use dac_core::tensor::{Parameter, Tensor};
use dac_core::train::{
    abstention_audit, evaluate_combo, naive_guess_pairs, predict_records, selective_metrics,
    train, Enrichment, TrainConfig,
};

fn pass(criterion: u32, what: &str) {
    println!("[acceptance] criterion {criterion} ({what}): PASS");
}

fn random_simplex(rng: &mut Rng, len: usize) -> ProbabilityVector {
    let mut draws: Vec<f64> = (0..len).map(|_| -(1.0 - rng.next_f64()).ln()).collect();
    let sum: f64 = draws.iter().sum();
    draws.iter_mut().for_each(|d| *d /= sum);
    ProbabilityVector::new(draws).unwrap()
}

#[test]
fn criterion_01_loss_reduces_to_cross_entropy() {
    let mut rng = Rng::new(101);
    for _ in 0..1000 {
        let k = 2 + rng.below(6);
        // Random simplex over the true classes; abstain mass exactly zero.
        let mut probs = random_simplex(&mut rng, k).probs().to_vec();
        probs.push(0.0);
        let p = ProbabilityVector::new(probs).unwrap();
        let t = TargetLabel::new(rng.below(k), k).unwrap();
        let alpha = rng.uniform(0.0, 5.0);
        let loss = abstain_loss(&p, t, alpha).unwrap();
        let ce = -p.prob(t.class_index()).ln();
        assert!(
            (loss - ce).abs() < 1e-12,
            "loss {loss} vs cross-entropy {ce}"
        );
    }
    pass(1, "abstention loss reduces to cross-entropy at zero abstain mass");
}

#[test]
fn criterion_02_loss_point_value() {
    let p = ProbabilityVector::new(vec![0.6, 0.3, 0.1]).unwrap();
    let t = TargetLabel::new(0, 2).unwrap();
    let loss = abstain_loss(&p, t, 1.0).unwrap();
    assert!((loss - 0.470279).abs() < 1e-6, "loss {loss}");
    pass(2, "independently computed point value 0.470279");
}

fn full_model_loss(
    params: &[Parameter],
    config: &ModelConfig,
    doc: &[u32],
    labels: &[usize],
    alphas: &[f64],
) -> dac_core::Result<f64> {
    let model = Model {
        config: config.clone(),
        params: params.to_vec(),
    };
    let probs = model.forward(doc)?;
    let mut total = 0.0;
    for (t, p) in probs.iter().enumerate() {
        let target = TargetLabel::new(labels[t], config.tasks[t].num_classes)?;
        total += abstain_loss(p, target, alphas[t])?;
    }
    Ok(total)
}

#[test]
fn criterion_03_gradient_fidelity() {
    // End-to-end: 20 random small configurations at 1e-4.
    for seed in 0..20u64 {
        let mut rng = Rng::new(3000 + seed);
        let names = ["site", "behavior", "grade"];
        let tasks: Vec<TaskSpec> = (0..1 + rng.below(3))
            .map(|i| TaskSpec::new(names[i], 2 + rng.below(3)))
            .collect();
        let config = ModelConfig {
            vocab_size: 8 + rng.below(8),
            embed_dim: 2 + rng.below(4),
            filter_widths: if rng.bernoulli(0.5) { vec![2, 3] } else { vec![2] },
            filters_per_width: 2 + rng.below(3),
            tasks,
            max_doc_len: 64,
            dropout: 0.0,
            word_dropout: 0.0,
            seed,
        };
        let mut model = Model::init(config.clone()).unwrap();
        let doc: Vec<u32> = (0..config.max_filter_width() + rng.below(8))
            .map(|_| rng.below(config.vocab_size) as u32)
            .collect();
        let labels: Vec<usize> = config.tasks.iter().map(|t| rng.below(t.num_classes)).collect();
        let alphas: Vec<f64> = config.tasks.iter().map(|_| rng.uniform(0.1, 2.0)).collect();

        model.zero_grads();
        let cache = model.forward_cached(&doc, None).unwrap();
        let mut d_logits = Vec::new();
        for t in 0..config.tasks.len() {
            let target = TargetLabel::new(labels[t], config.tasks[t].num_classes).unwrap();
            d_logits
                .push(abstain_loss_grad_from_probs(&cache.probs[t], target, alphas[t]).unwrap());
        }
        model.backward(&cache, &d_logits).unwrap();
        let mut params = model.params;
        let err = grad_check(
            |ps| full_model_loss(ps, &config, &doc, &labels, &alphas),
            &mut params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "config seed {seed}: end-to-end rel err {err}");
    }

    // Isolated layers at 1e-6: convolution and dense through fixed mixes.
    let mut rng = Rng::new(42);
    let input =
        Tensor::from_values(&[5, 3], (0..15).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
    let mut kernel = Parameter::new(
        "k",
        Tensor::from_values(&[4, 2, 3], (0..24).map(|_| rng.uniform(-0.7, 0.7)).collect()).unwrap(),
    );
    let mut bias = Parameter::new(
        "b",
        Tensor::from_values(&[4], (0..4).map(|_| rng.uniform(-0.2, 0.2)).collect()).unwrap(),
    );
    let mix: Vec<f64> = (0..16).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let out = layers::conv1d_forward(&input, &kernel, &bias).unwrap();
    let d_out = Tensor::from_values(&out.shape, mix.clone()).unwrap();
    layers::conv1d_backward(&input, &mut kernel, &mut bias, &d_out);
    let mut params = vec![kernel, bias];
    let err = grad_check(
        |ps| {
            let out = layers::conv1d_forward(&input, &ps[0], &ps[1])?;
            Ok(out.values.iter().zip(&mix).map(|(o, m)| o * m).sum())
        },
        &mut params,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "conv rel err {err}");

    let x = Tensor::from_values(&[6], (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
    let mut weight = Parameter::new(
        "w",
        Tensor::from_values(&[3, 6], (0..18).map(|_| rng.uniform(-0.8, 0.8)).collect()).unwrap(),
    );
    let mut dbias = Parameter::new(
        "b",
        Tensor::from_values(&[3], (0..3).map(|_| rng.uniform(-0.2, 0.2)).collect()).unwrap(),
    );
    let mix3: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let d_out = Tensor::from_values(&[3], mix3.clone()).unwrap();
    layers::dense_backward(&x, &mut weight, &mut dbias, &d_out);
    let mut params = vec![weight, dbias];
    let err = grad_check(
        |ps| {
            let out = layers::dense_forward(&x, &ps[0], &ps[1])?;
            Ok(out.values.iter().zip(&mix3).map(|(o, m)| o * m).sum())
        },
        &mut params,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "dense rel err {err}");

    pass(3, "gradients match central differences (1e-4 end-to-end, 1e-6 isolated)");
}

#[test]
fn criterion_04_alpha_monotonicity_slope() {
    let mut rng = Rng::new(404);
    for _ in 0..1000 {
        let k = 2 + rng.below(5);
        let p = random_simplex(&mut rng, k + 1);
        let t = TargetLabel::new(rng.below(k), k).unwrap();
        let a = rng.uniform(0.0, 4.0);
        let b = a + rng.uniform(1e-6, 4.0);
        let la = abstain_loss(&p, t, a).unwrap();
        let lb = abstain_loss(&p, t, b).unwrap();
        assert!(lb >= la, "loss must be non-decreasing in alpha");
        let slope = abstention_penalty_slope(&p);
        let delta = lb - la - (b - a) * slope;
        assert!(delta.abs() < 1e-10, "slope identity off by {delta}");
    }
    pass(4, "loss is affine in alpha with slope log(1/(1-p_abstain))");
}

#[test]
fn criterion_05_fisher_2x2_exactness() {
    // Exhaustive enumeration oracle (exact rational arithmetic, n <= 40).
    let skewed = ContingencyTable2x2::new(3, 1, 1, 3);
    let oracle = fisher_exact_2x2_rational(&skewed).unwrap();
    assert!((oracle.p_value - 34.0 / 70.0).abs() < 1e-15);
    let got = fisher_exact_2x2(&skewed);
    assert!((got.p_value - oracle.p_value).abs() < 1e-9, "p={}", got.p_value);
    assert!((got.p_value - 0.485714).abs() < 1e-6);

    let balanced = fisher_exact_2x2(&ContingencyTable2x2::new(5, 5, 5, 5));
    assert_eq!(balanced.p_value, 1.0);
    pass(5, "2x2 exact test matches exhaustive enumeration");
}

#[test]
fn criterion_06_occurrence_p_values_from_published_counts() {
    // Through the CLI verification mode: published counts in, p-values out.
    let dir = tempdir("acceptance-counts");
    let counts = dir.join("counts.tsv");
    std::fs::write(
        &counts,
        "class\tstem\tcorrect_total\tabstained_total\tcorrect_with\tabstained_with\tcorrect_lime_id\tcorrect_lime_pos\tabstained_lime_id\tabstained_lime_pos\n\
         breast\tbreast\t320\t320\t320\t209\t293\t218\t206\t15\n\
         breast\tmetast\t320\t320\t155\t171\t38\t15\t131\t85\n",
    )
    .unwrap();
    let out = dir.join("out");
    commands::associate::run(&commands::associate::AssociateArgs {
        out_dir: &out,
        stems: vec!["breast".to_string(), "metast".to_string()],
        explanations: None,
        data_dir: None,
        from_counts: Some(&counts),
    })
    .unwrap();

    let tsv = std::fs::read_to_string(out.join("associations.tsv")).unwrap();
    let mut checked = 0;
    for line in tsv.lines().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        let p: f64 = fields[16].parse().unwrap();
        let expected: f64 = match fields[1] {
            "breast" => 6.9e-39,
            "metast" => 2.3e-1,
            other => panic!("unexpected stem {other}"),
        };
        let dlog = (p.log10() - expected.log10()).abs();
        assert!(dlog <= 0.1, "{}: p={p} (dlog10={dlog})", fields[1]);
        checked += 1;
    }
    assert_eq!(checked, 2);
    pass(6, "published occurrence p-values 6.9e-39 and 2.3e-1 reproduced via --from-counts");
}

/// Independent numerical route for the 2x3 test: unnormalized table weights
/// as direct products of f64 binomial coefficients (no log-gamma), with the
/// qualifying mass normalized by the total mass.
fn fisher_2x3_ratio_oracle(cells: [[u64; 3]; 2]) -> f64 {
    fn binomial_f64(n: u64, k: u64) -> f64 {
        let k = k.min(n - k);
        let mut acc = 1.0f64;
        for i in 1..=k {
            acc *= (n - k + i) as f64 / i as f64;
        }
        acc
    }
    let rows = [cells[0].iter().sum::<u64>(), cells[1].iter().sum::<u64>()];
    let cols = [
        cells[0][0] + cells[1][0],
        cells[0][1] + cells[1][1],
        cells[0][2] + cells[1][2],
    ];
    let weight = |a: u64, b: u64| -> f64 {
        let c = rows[0] - a - b;
        binomial_f64(cols[0], a) * binomial_f64(cols[1], b) * binomial_f64(cols[2], c)
    };
    let observed = weight(cells[0][0], cells[0][1]);
    let mut total = 0.0;
    let mut qualifying = 0.0;
    for a in 0..=rows[0].min(cols[0]) {
        let rem = rows[0] - a;
        let b_min = rem.saturating_sub(cols[2]);
        let b_max = rem.min(cols[1]);
        if b_min > b_max {
            continue;
        }
        for b in b_min..=b_max {
            let w = weight(a, b);
            total += w;
            if w <= observed * (1.0 + 1e-9) {
                qualifying += w;
            }
        }
    }
    qualifying / total
}

#[test]
fn criterion_07_pickup_p_value_reproduction() {
    // Cells reconstructed from the published sample counts for the
    // breast/"node" row, tested under both sidedness conventions.
    let reconstruction = ContingencyTable2x3::new([124, 58, 12], [37, 8, 105]);
    let two_sided = fisher_exact_2x3(&reconstruction).p_value;

    // Independent oracle: integer-ratio recurrence enumeration of the same
    // definition, plus the externally computed exact-rational value.
    let oracle = fisher_2x3_ratio_oracle([[124, 58, 12], [37, 8, 105]]);
    let rel = (two_sided - oracle).abs() / oracle;
    assert!(rel < 1e-9, "implementation {two_sided} vs ratio oracle {oracle}");
    let exact_enumeration = 4.879949e-38; // exhaustive big-integer enumeration
    assert!((two_sided - exact_enumeration).abs() / exact_enumeration < 1e-5);

    // One-sided (strict-inequality mass) changes only tie handling, not the
    // scale; both conventions are 32 orders from the printed 1.8e-70, which
    // the published table also prints for the breast/"breast" row.
    println!(
        "[acceptance]   note: reconstructed breast/'node' table gives {two_sided:.3e} two-sided; \
         the printed 1.8e-70 duplicates the breast/'breast' row"
    );

    // Resolved reproduction: the published values that are self-consistent,
    // with columns (picked negative, picked positive, not picked) over the
    // full groups, under the two-sided probability-mass convention.
    let resolved: [([[u64; 3]; 2], f64, &str); 3] = [
        ([[75, 218, 27], [191, 15, 114]], 1.8e-70, "breast/'breast'"),
        ([[0, 294, 26], [61, 84, 175]], 3.1e-72, "lung/'lung'"),
        ([[0, 320, 0], [42, 200, 78]], 1.4e-42, "prostate/'prostate'"),
    ];
    for (cells, expected, name) in resolved {
        let r = fisher_exact_2x3(&ContingencyTable2x3::new(cells[0], cells[1]));
        let oracle = fisher_2x3_ratio_oracle(cells);
        assert!((r.p_value - oracle).abs() / oracle < 1e-9, "{name} oracle drift");
        let dlog = (r.p_value.log10() - expected.log10()).abs();
        assert!(dlog <= 0.15, "{name}: p={} (dlog10={dlog})", r.p_value);
    }
    pass(
        7,
        "2x3 exact test verified against enumeration; published pickup p-values reproduced (two-sided, documented resolution)",
    );
}

#[test]
fn criterion_08_attribution_formula() {
    let est = attribution_estimate(0.53, 0.77, 0.65).unwrap();
    assert!((est.product - 0.265265).abs() < 1e-12);
    assert_eq!(est.percent_label(), "26%");
    pass(8, "attribution product 0.53 x 0.77 x 0.65 reported as 26%");
}

#[test]
fn criterion_09_naive_guess_and_joint_invariants() {
    // Published per-task numbers: site (98.80 retained, 24.46 abstention),
    // histology (90.27, 38.75) -> naive guess (90.27, 38.75).
    let pairs = [(0.9880, 0.2446), (0.9027, 0.3875)];
    let (acc, abs) = naive_guess_pairs(&pairs).unwrap();
    assert!((acc - 0.9027).abs() < 1e-12);
    assert!((abs - 0.3875).abs() < 1e-12);

    // Structural invariants on real evaluation runs: train a small two-task
    // model and check every subset on raw prediction records.
    let spec = SyntheticSpec {
        tasks: vec![TaskSpec::new("site", 3), TaskSpec::new("behavior", 2)],
        num_docs: 400,
        vocab_size: 220,
        doc_len_min: 8,
        doc_len_max: 14,
        signal_tokens_per_class: 6,
        signal_rate: 0.5,
        distractor_rate_max: 0.0,
        pair_tokens_per_pair: 2,
        generic_tokens_per_task: 3,
        pair_share_exponent: 2.0,
        flip_rates: vec![0.15, 0.1],
        confuser: None,
        docs_per_case: 1,
        case_support_rate: 1.0,
        seed: 909,
    };
    let (docs, vocab) = generate_corpus(&spec).unwrap();
    let model = Model::init(ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: 8,
        filter_widths: vec![2, 3],
        filters_per_width: 6,
        tasks: spec.tasks.clone(),
        max_doc_len: 32,
        dropout: 0.0,
        word_dropout: 0.3,
        seed: 13,
    })
    .unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 16,
        adam: AdamConfig::default(),
        abstention: vec![
            {
                let mut a = AbstentionConfig::for_task(3, 0.4);
                a.warmup_epochs = 2;
                a.alpha_init = 1.2;
                a.alpha = 1.2;
                a
            },
            {
                let mut a = AbstentionConfig::for_task(2, 0.4);
                a.warmup_epochs = 2;
                a.alpha_init = 1.2;
                a.alpha = 1.2;
                a
            },
        ],
        patience: 0,
        seed: 31,
    };
    let out = train(model, &docs[..300], &docs[300..], &cfg).unwrap();
    let records = predict_records(&out.model, &docs[300..]).unwrap();
    let per_task = selective_metrics(&out.model, &records);
    for subset in [vec![0usize], vec![1], vec![0, 1]] {
        // evaluate_combo enforces the invariants internally and errors on
        // violation; re-check the counts here explicitly.
        let combo = evaluate_combo(&out.model, &records, &subset).unwrap();
        let max_individual = subset.iter().map(|&t| per_task[t].abstained).max().unwrap();
        assert!(combo.joint_abstained >= max_individual);
        for &correct in &combo.per_task_correct_on_joint_retained {
            assert!(combo.joint_retained_all_correct <= correct);
        }
    }
    pass(9, "naive guess (90.27%, 38.75%) and joint-rule invariants hold");
}

/// The frozen end-to-end selective-prediction scenario (10k docs, vocab 2000,
/// 20% flips, confuser at 0.15/0.8, budget 30%).
fn selective_scenario() -> (SyntheticSpec, ModelConfig, TrainConfig) {
    let tasks = vec![TaskSpec::new("site", 4)];
    let corpus = SyntheticSpec {
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
        flip_rates: vec![0.2],
        confuser: Some(ConfuserSpec {
            token_count: 1,
            copies: 3,
            injection_rate: 0.15,
            corruption_prob: 0.8,
            target_task: 0,
        }),
        docs_per_case: 1,
        case_support_rate: 1.0,
        seed: 424242,
    };
    let model = ModelConfig {
        vocab_size: 0, // filled after generation
        embed_dim: 16,
        filter_widths: vec![3, 4, 5],
        filters_per_width: 16,
        tasks,
        max_doc_len: 64,
        dropout: 0.4,
        word_dropout: 0.5,
        seed: 7,
    };
    let mut abstention = AbstentionConfig::for_task(4, 0.30);
    abstention.alpha_init = 1.61;
    abstention.alpha = 1.61;
    abstention.warmup_epochs = 3;
    abstention.up_factor = 1.15;
    abstention.down_factor = 1.15;
    let train_cfg = TrainConfig {
        epochs: 60,
        batch_size: 32,
        adam: AdamConfig::default(),
        abstention: vec![abstention],
        patience: 0,
        seed: 99,
    };
    (corpus, model, train_cfg)
}

#[test]
fn criterion_10_selective_prediction_end_to_end() {
    let started = Instant::now();
    let (spec, mut model_cfg, train_cfg) = selective_scenario();
    let (docs, vocab) = generate_corpus(&spec).unwrap();
    let splits = split_corpus(
        &docs,
        &SplitSpec {
            by_case: false,
            ..Default::default()
        },
        &mut Rng::with_stream(spec.seed, "split"),
    )
    .unwrap();
    model_cfg.vocab_size = vocab.len();
    let model = Model::init(model_cfg).unwrap();
    let out = train(model, &splits.train, &splits.val, &train_cfg).unwrap();
    assert!(out.divergence.is_none());
    assert!(out.budget_met, "no epoch met the abstention budget");

    // (a) final validation abstention within +-5 points of the 30% budget.
    let val_abs = out.meta.val_abstention[0];
    assert!(
        (0.25..=0.35).contains(&val_abs),
        "validation abstention {val_abs} outside 30% +- 5 points"
    );

    // (b) retained accuracy at least 10 points above base accuracy.
    let records = predict_records(&out.model, &splits.test).unwrap();
    let metrics = &selective_metrics(&out.model, &records)[0];
    let base = metrics.base_accuracy();
    let retained = metrics.retained_accuracy().expect("retained set non-empty");
    assert!(
        retained >= base + 0.10,
        "retained {retained} not 10 points above base {base}"
    );

    // (c) confuser-token enrichment among abstained documents >= 2x.
    let provenance: HashMap<_, _> = splits
        .test
        .iter()
        .map(|d| (d.doc_id, d.provenance.clone().unwrap()))
        .collect();
    let audit = abstention_audit(&out.model, &records, &provenance).unwrap();
    let confuser = audit
        .iter()
        .find(|r| r.flag == "confuser_present")
        .unwrap();
    match confuser.enrichment {
        Enrichment::Ratio(r) => assert!(r >= 2.0, "confuser enrichment {r} below 2"),
        Enrichment::Infinite => {}
        Enrichment::Undefined => panic!("confuser enrichment undefined"),
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 900,
        "scenario took {elapsed:?}, budget is 15 minutes"
    );
    println!(
        "[acceptance]   val abstention {:.3}, test base {:.3}, retained {:.3}, confuser enrichment {}, {:?}",
        val_abs, base, retained, confuser.enrichment, elapsed
    );
    pass(
        10,
        "budget tracked to 30% +- 5, retained >= base + 10 points, confuser enrichment >= 2x",
    );
}

#[test]
fn criterion_11_lime_oracle_recovery_and_stability() {
    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }
    let mut vocab = dac_core::corpus::Vocabulary::new();
    for i in 0..300 {
        vocab.add(&format!("w{i:03}"));
    }
    let mut rng = Rng::with_stream(2718, "lime-oracle");
    let weights: Vec<f64> = (0..vocab.len()).map(|_| rng.uniform(-0.5, 0.5)).collect();
    let probe = |doc: &[u32]| -> dac_core::Result<f64> {
        let z: f64 = doc
            .iter()
            .filter(|&&t| t != 0)
            .map(|&t| weights[t as usize])
            .sum();
        Ok(sigmoid(z))
    };

    let mut recovered = 0;
    let mut jaccard_sum = 0.0;
    let docs = 100;
    for d in 0..docs {
        // 15..=25 distinct tokens; redraw until the 3rd/4th |weight| order
        // statistics are separated so the true top-3 is well-posed.
        let doc: Vec<u32> = loop {
            let len = rng.range_inclusive(15, 25);
            let mut ids: Vec<u32> = (2..vocab.len() as u32).collect();
            rng.shuffle(&mut ids);
            let candidate: Vec<u32> = ids[..len].to_vec();
            let mut mags: Vec<f64> =
                candidate.iter().map(|&t| weights[t as usize].abs()).collect();
            mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if mags[2] - mags[3] >= 0.06 {
                break candidate;
            }
        };
        let cfg = PerturbationConfig {
            num_samples: 2000,
            top_k: 40,
            seed: 9000 + d,
            ..Default::default()
        };
        let target = ExplainTarget {
            doc_id: d,
            task: "site".into(),
            class_index: 0,
            class_is_abstain: false,
        };
        let expl = explain(probe, &doc, &vocab, &target, &cfg).unwrap();
        let mut got: Vec<u32> = expl.entries.iter().take(3).map(|e| doc[e.position]).collect();
        got.sort_unstable();
        let mut want: Vec<u32> = {
            let mut v = doc.clone();
            v.sort_by(|&a, &b| {
                weights[b as usize]
                    .abs()
                    .partial_cmp(&weights[a as usize].abs())
                    .unwrap()
            });
            v[..3].to_vec()
        };
        want.sort_unstable();
        if got == want {
            recovered += 1;
        }
        jaccard_sum += stability(probe, &doc, &vocab, &target, &cfg, 5).unwrap();
    }
    let mean_jaccard = jaccard_sum / docs as f64;
    assert!(recovered >= 95, "top-3 recovered on {recovered}/100 documents");
    assert!(mean_jaccard >= 0.8, "mean top-10 Jaccard {mean_jaccard}");
    println!("[acceptance]   recovery {recovered}/100, mean Jaccard {mean_jaccard:.3}");
    pass(11, "linear-oracle top-3 recovery >= 95% with stable top-10 sets");
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("dac-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const DETERMINISM_CONFIG: &str = r#"
[run]
seed = 17

[tasks]
site = 3

[corpus]
num_docs = 300
vocab_size = 260
doc_len_min = 8
doc_len_max = 14
signal_tokens_per_class = 6
signal_rate = 0.5
pair_tokens_per_pair = 2
generic_tokens_per_task = 3
pair_share_exponent = 2.0

[noise]
flip_rate = 0.1
confuser_enabled = true

[model]
embed_dim = 8
filter_widths = 2,3
filters_per_width = 6
max_doc_len = 24
dropout = 0.2
word_dropout = 0.2

[train]
epochs = 4
batch_size = 16

[abstention]
budget = 0.3
warmup_epochs = 1
alpha_init = 1.2

[lime]
num_samples = 200
top_k = 8
"#;

fn run_pipeline(base: &Path) -> Vec<(String, Vec<u8>)> {
    let config_path = base.join("config.ini");
    std::fs::write(&config_path, DETERMINISM_CONFIG).unwrap();
    let cfg = parse_config(DETERMINISM_CONFIG).unwrap();

    let data = base.join("data");
    commands::generate::run(&cfg, &data).unwrap();
    let run = base.join("run");
    commands::train::run(
        &cfg,
        &commands::train::TrainArgs {
            data_dir: &data,
            out_dir: &run,
            init_embeddings: None,
            resume: None,
        },
    )
    .unwrap();
    let eval = base.join("eval");
    commands::eval::run(&commands::eval::EvalArgs {
        checkpoint: &run.join("checkpoint.dac"),
        data_dir: &data,
        out_dir: &eval,
        config: Some(&cfg),
        split: commands::eval::SplitChoice::Test,
        tasks: None,
        combos: vec!["site".to_string()],
    })
    .unwrap();
    let expl = base.join("expl");
    commands::explain::run(&commands::explain::ExplainArgs {
        checkpoint: &run.join("checkpoint.dac"),
        data_dir: &data,
        out_dir: &expl,
        task: "site",
        doc_ids: None,
        sample_per_class: Some(5),
        config: Some(&cfg),
    })
    .unwrap();
    let assoc = base.join("assoc");
    commands::associate::run(&commands::associate::AssociateArgs {
        out_dir: &assoc,
        stems: vec!["confuser".to_string(), "vague".to_string()],
        explanations: Some(&expl.join("explanations.jsonl")),
        data_dir: Some(&data),
        from_counts: None,
    })
    .unwrap();

    let mut artifacts = Vec::new();
    for (dir, name) in [
        (&data, "corpus.jsonl"),
        (&data, "vocab.txt"),
        (&data, "labels.json"),
        (&data, "provenance.jsonl"),
        (&data, "config.resolved.ini"),
        (&run, "checkpoint.dac"),
        (&run, "history.tsv"),
        (&eval, "metrics.tsv"),
        (&eval, "combos.tsv"),
        (&eval, "audit.tsv"),
        (&expl, "explanations.jsonl"),
        (&expl, "explanations.txt"),
        (&assoc, "associations.tsv"),
        (&assoc, "attribution.tsv"),
    ] {
        let path = dir.join(name);
        artifacts.push((name.to_string(), std::fs::read(&path).unwrap()));
    }
    artifacts
}

#[test]
fn criterion_12_byte_identical_reruns() {
    let base_a = tempdir("determinism-a");
    let base_b = tempdir("determinism-b");
    let run_a = run_pipeline(&base_a);
    let run_b = run_pipeline(&base_b);
    assert_eq!(run_a.len(), run_b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in run_a.iter().zip(&run_b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "artifact {name_a} differs between reruns");
    }
    let _ = std::fs::remove_dir_all(&base_a);
    let _ = std::fs::remove_dir_all(&base_b);
    pass(12, "full pipeline reruns produce byte-identical artifacts");
}
