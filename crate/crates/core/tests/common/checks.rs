//! One function per acceptance criterion. Each returns a short detail
//! string on success and a failure description otherwise.

use std::collections::HashSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use piostack::base_learner::{
    bce_with_logits, forward_logits, gradient, sigmoid_scalar, LinearHead, Triple,
};
use piostack::cleaning::{clean_dataset, CleanConfig};
use piostack::labeling::{
    category_histogram, map_heading, normalize_heading, Decision, HeadingMap, LabelSet,
    LabeledSequence, DEFAULT_HEADING_MAP,
};
use piostack::metrics::roc_auc;
use piostack::stacker::{
    feature_names, fit_gbdt, fit_label, fit_stacked, make_folds, split_base_stack, BaseStackSplit,
    GbdtConfig, GbdtModel, SplitProtocol, StackError, StackInstance,
};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < budget, || {
        format!("took {took:?}, budget {budget:?}")
    })?;
    Ok(took)
}

// ---- equation fidelity -------------------------------------------------

fn direct_loss(s: &Triple, t: &Triple) -> f64 {
    (0..3)
        .map(|i| {
            let y = 1.0 / (1.0 + (-s[i]).exp());
            let one_minus_y = 1.0 / (1.0 + s[i].exp());
            -(t[i] * y.ln() + (1.0 - t[i]) * one_minus_y.ln())
        })
        .sum()
}

fn random_head(rng: &mut ChaCha8Rng, dim: usize) -> LinearHead {
    let mut head = LinearHead::zeros(dim, true);
    head.weights
        .iter_mut()
        .for_each(|w| *w = rng.gen_range(-1.0..1.0));
    head.bias = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    head
}

fn loss_of(head: &LinearHead, h: &[f64], t: &Triple) -> f64 {
    bce_with_logits(&forward_logits(h, head).expect("shape"), t)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub fn equation_fidelity() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst_loss: f64 = 0.0;
    for _ in 0..1000 {
        let s: Triple = [
            rng.gen_range(-30.0..30.0),
            rng.gen_range(-30.0..30.0),
            rng.gen_range(-30.0..30.0),
        ];
        let t: Triple = [0, 1, 2].map(|_| f64::from(rng.gen_range(0u8..2)));
        worst_loss = worst_loss.max((bce_with_logits(&s, &t) - direct_loss(&s, &t)).abs());
    }
    ensure(worst_loss <= 1e-9, || {
        format!("loss deviates by {worst_loss:e}")
    })?;

    let step = 1e-5;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.gen_range(1..8);
        let head = random_head(&mut rng, dim);
        let h: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t: Triple = [0, 1, 2].map(|_| f64::from(rng.gen_range(0u8..2)));
        let (dw, db) = gradient(&forward_logits(&h, &head).expect("shape"), &t, &h);
        for k in 0..head.weights.len() + 3 {
            let (mut plus, mut minus) = (head.clone(), head.clone());
            let analytic = if k < head.weights.len() {
                plus.weights[k] += step;
                minus.weights[k] -= step;
                dw[k]
            } else {
                plus.bias[k - head.weights.len()] += step;
                minus.bias[k - head.weights.len()] -= step;
                db[k - head.weights.len()]
            };
            let fd = (loss_of(&plus, &h, &t) - loss_of(&minus, &h, &t)) / (2.0 * step);
            worst_grad = worst_grad.max(rel_err(analytic, fd));
        }
    }
    ensure(worst_grad <= 1e-6, || {
        format!("gradient relative error {worst_grad:e}")
    })?;

    ensure(sigmoid_scalar(0.0) == 0.5, || "sigmoid(0) != 0.5".into())?;
    for _ in 0..1000 {
        let s = rng.gen_range(-40.0..40.0);
        let sym = (sigmoid_scalar(s) + sigmoid_scalar(-s) - 1.0).abs();
        ensure(sym <= 1e-12, || format!("symmetry broken at {s}: {sym:e}"))?;
    }
    let took = within_budget(start, Duration::from_secs(5))?;
    Ok(format!(
        "max |loss diff| {worst_loss:.1e}, max grad rel err {worst_grad:.1e}, {took:.2?}"
    ))
}

// ---- AUC oracle -------------------------------------------------------

pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in (0..scores.len()).filter(|&i| labels[i]) {
        for j in (0..scores.len()).filter(|&j| !labels[j]) {
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

pub fn auc_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        // every third dataset draws from only three score levels
        let levels = if k % 3 == 0 { 3 } else { 10_000 };
        let scores: Vec<f64> = (0..200)
            .map(|_| f64::from(rng.gen_range(0..levels)) / f64::from(levels))
            .collect();
        let mut labels: Vec<bool> = (0..200).map(|_| rng.gen_bool(0.35)).collect();
        labels[0] = true;
        labels[199] = false;
        let fast = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((fast - auc_pairwise(&scores, &labels)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    ensure(roc_auc(&[0.1, 0.2], &[true, true]).is_err(), || {
        "single class accepted".into()
    })?;
    let took = within_budget(start, Duration::from_secs(5))?;
    Ok(format!(
        "50 datasets, max deviation {worst:.1e}, {took:.2?}"
    ))
}

// ---- protocol integrity -----------------------------------------------

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{}-0", 500_000 + k)).collect()
}

/// Instances whose features carry the targets plus noise.
pub fn toy_instances(ids: &[String], seed: u64) -> Vec<StackInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.iter()
        .enumerate()
        .map(|(k, id)| {
            let mask = (k % 7 + 1) as u8 ^ if rng.gen_bool(0.1) { 1 } else { 0 };
            let t = LabelSet::from_mask(mask).as_targets();
            let base: Triple =
                t.map(|v| (0.25 + 0.5 * v + rng.gen_range(-0.3..0.3)).clamp(0.0, 1.0));
            let text = [
                rng.gen_range(0.5..2.0),
                0.0,
                t[0] + rng.gen_range(0.0..1.0),
                0.0,
                1.0,
            ];
            StackInstance::assemble(id.clone(), &[base], text, t)
        })
        .collect()
}

pub fn small_gbdt() -> GbdtConfig {
    GbdtConfig {
        num_rounds: 20,
        ..GbdtConfig::default()
    }
}

fn expect_protocol(res: Result<impl Sized, StackError>, case: &str) -> Result<(), String> {
    match res {
        Err(StackError::Protocol(_)) => Ok(()),
        Err(e) => Err(format!("{case}: wrong error {e}")),
        Ok(_) => Err(format!("{case}: accepted")),
    }
}

pub fn protocol_integrity() -> Check {
    let mut runs = 0;
    for (n, seed) in [(13, 1), (37, 2), (120, 3), (333, 4)] {
        let all = ids(n);
        let protocol = SplitProtocol {
            seed,
            ..SplitProtocol::default()
        };
        let split = split_base_stack(&all, &protocol).map_err(|e| e.to_string())?;
        let base: HashSet<_> = split.base_ids.iter().collect();
        let stack: HashSet<_> = split.stack_ids.iter().collect();
        ensure(base.is_disjoint(&stack), || "base and stack overlap".into())?;
        ensure(base.len() + stack.len() == n, || "split loses ids".into())?;
        ensure(
            split.base_ids.len() == (0.6 * n as f64).round() as usize,
            || "base size".into(),
        )?;

        let folds = make_folds(&split.stack_ids, 5, seed).map_err(|e| e.to_string())?;
        let mut union: Vec<&String> = folds.iter().flatten().collect();
        union.sort();
        let mut expect: Vec<&String> = split.stack_ids.iter().collect();
        expect.sort();
        ensure(union == expect, || {
            "folds do not partition the stack set".into()
        })?;
        let (lo, hi) = folds.iter().fold((usize::MAX, 0), |(lo, hi), f| {
            (lo.min(f.len()), hi.max(f.len()))
        });
        ensure(hi - lo <= 1, || "unbalanced folds".into())?;

        if split.stack_ids.len() >= 40 {
            let inst = toy_instances(&split.stack_ids, seed);
            let fit = fit_stacked(
                &inst,
                &split,
                feature_names(1),
                vec!["toy".into()],
                &small_gbdt(),
            )
            .map_err(|e| e.to_string())?;
            let mut seen: Vec<&String> = fit.oof.iter().map(|o| &o.id).collect();
            seen.sort();
            ensure(seen == expect, || {
                "OOF predictions do not cover each stack id once".into()
            })?;
            for o in &fit.oof {
                ensure(folds[o.fold].contains(&o.id), || {
                    format!("{} predicted by a model that saw it", o.id)
                })?;
            }
            runs += 1;
        }
    }

    let all = ids(60);
    let split = split_base_stack(&all, &SplitProtocol::default()).map_err(|e| e.to_string())?;
    let inst = toy_instances(&split.stack_ids, 9);
    let fit = |inst: &[StackInstance], split: &BaseStackSplit| {
        fit_stacked(
            inst,
            split,
            feature_names(1),
            vec!["toy".into()],
            &small_gbdt(),
        )
    };

    let mut overlap = split.clone();
    overlap.stack_ids.push(split.base_ids[0].clone());
    expect_protocol(fit(&inst, &overlap), "overlapping split")?;

    let mut dup = split.clone();
    dup.stack_ids.push(split.stack_ids[0].clone());
    expect_protocol(fit(&inst, &dup), "duplicated stack id")?;

    let mut leaked = inst.clone();
    leaked[0].id = split.base_ids[0].clone();
    expect_protocol(fit(&leaked, &split), "base id in stack matrix")?;

    expect_protocol(fit(&inst[1..], &split), "missing stack instance")?;

    let mut foreign = inst.clone();
    foreign[0].id = "999999-0".into();
    expect_protocol(fit(&foreign, &split), "unknown id")?;

    let mut repeated = all.clone();
    repeated.push(all[0].clone());
    expect_protocol(
        split_base_stack(&repeated, &SplitProtocol::default()),
        "duplicate input id",
    )?;

    Ok(format!(
        "{runs} OOF runs covered, 6 corrupted splits rejected"
    ))
}

// ---- GBDT correctness -------------------------------------------------

pub fn random_fixture(seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(40..200);
    let d = rng.gen_range(1..6);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| {
                    if j % 2 == 0 {
                        rng.gen_range(-3.0..3.0)
                    } else {
                        f64::from(rng.gen_range(0u8..4))
                    }
                })
                .collect()
        })
        .collect();
    let mut y: Vec<bool> = x
        .iter()
        .map(|r| r[0] + rng.gen_range(-1.5..1.5) > 0.0)
        .collect();
    y[0] = true;
    y[1] = false;
    (x, y)
}

pub fn separable_fixture() -> (Vec<Vec<f64>>, Vec<bool>) {
    let x: Vec<Vec<f64>> = (0..40).map(|k| vec![f64::from(k) / 4.0]).collect();
    let y = x.iter().map(|r| r[0] >= 5.0).collect();
    (x, y)
}

pub fn gbdt_correctness() -> Check {
    let cfg = GbdtConfig {
        num_rounds: 100,
        ..GbdtConfig::default()
    };
    let mut total_rounds = 0;
    for seed in 0..20 {
        let (x, y) = random_fixture(seed);
        let out = fit_label(&x, &y, &cfg).map_err(|e| e.to_string())?;
        let traj = &out.loss_trajectory;
        total_rounds += traj.len() - 1;
        for w in traj.windows(2) {
            ensure(w[1] <= w[0], || {
                format!("fixture {seed}: loss rose {} -> {}", w[0], w[1])
            })?;
        }
    }

    let (x, y) = separable_fixture();
    let ten = GbdtConfig {
        num_rounds: 10,
        ..GbdtConfig::default()
    };
    let out = fit_label(&x, &y, &ten).map_err(|e| e.to_string())?;
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(r, &t)| (out.booster.predict_proba(r) >= 0.5) == t)
        .count();
    ensure(correct == x.len(), || {
        format!("separable fixture accuracy {correct}/{}", x.len())
    })?;

    let (x, _) = random_fixture(77);
    let targets: Vec<Triple> = x
        .iter()
        .enumerate()
        .map(|(k, r)| {
            [
                f64::from(r[0] > 0.0),
                f64::from(k % 3 == 0),
                f64::from(k % 2 == 0),
            ]
        })
        .collect();
    let model = fit_gbdt(&x, &targets, &small_gbdt())
        .map_err(|e| e.to_string())?
        .model;
    let json = serde_json::to_string(&model).map_err(|e| e.to_string())?;
    let back: GbdtModel = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    for r in &x {
        let (a, b) = (model.predict(r).unwrap(), back.predict(r).unwrap());
        ensure(a.map(f64::to_bits) == b.map(f64::to_bits), || {
            "round trip changed a prediction".into()
        })?;
    }
    Ok(format!(
        "20 fixtures monotone over {total_rounds} rounds, separable 40/40 in 10 rounds, round trip bitwise"
    ))
}

// ---- dataset rules ----------------------------------------------------

pub fn dataset_rules(fixture: &Path) -> Check {
    let cfg = CleanConfig::default();
    let filler = |n: usize| {
        (0..n)
            .map(|k| ["the", "patient"][k % 2])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let recs: Vec<LabeledSequence> = [4, 5, 200, 201]
        .iter()
        .map(|&n| {
            LabeledSequence::new(
                format!("{n}-0"),
                n as u64,
                "PATIENTS".into(),
                filler(n),
                LabelSet::from_mask(1),
            )
        })
        .collect();
    let kept: Vec<String> = clean_dataset(&recs, &cfg)
        .0
        .into_iter()
        .map(|r| r.id)
        .collect();
    ensure(kept == ["5-0", "200-0"], || {
        format!("length filter kept {kept:?}")
    })?;

    let map = HeadingMap::parse(DEFAULT_HEADING_MAP).map_err(|e| e.to_string())?;
    let cases = [
        ("subjects", Decision::Positive(LabelSet::from_mask(1))),
        (
            "population and intervention",
            Decision::Positive(LabelSet::from_mask(3)),
        ),
        ("aim", Decision::Negative),
        ("population and method", Decision::Discard),
    ];
    for (raw, want) in cases {
        let got = map_heading(&normalize_heading(raw), &map);
        ensure(got == want, || format!("{raw:?} mapped to {got:?}"))?;
    }

    let input: Vec<LabeledSequence> =
        piostack::io::read_jsonl(fixture).map_err(|e| e.to_string())?;
    let hist = category_histogram(&input);
    ensure(hist == [1, 4, 2, 1, 2, 0, 0, 0], || {
        format!("histogram {hist:?}")
    })?;
    let (once, report) = clean_dataset(&input, &cfg);
    ensure(report.kept == 5 && report.dropped() == 5, || {
        format!("report {report:?}")
    })?;
    let (twice, _) = clean_dataset(&once, &cfg);
    ensure(once == twice, || "clean_dataset is not idempotent".into())?;
    Ok("length 4/5/200/201, 4 headings, histogram, idempotence".into())
}

// ---- ingest -----------------------------------------------------------

pub fn ingest() -> Check {
    use piostack::ingest::{
        fetch_corpus, parse_pubmed_xml, FetchError, SearchSpec, BACKOFF_SCHEDULE, DEFAULT_MIN_DELAY,
    };

    for (name, articles, abstracts, structured) in [
        ("structured.xml", 1, 1, 1),
        ("unstructured.xml", 1, 1, 0),
        ("missing_abstract.xml", 3, 2, 2),
        ("entities.xml", 1, 1, 1),
    ] {
        let bytes = std::fs::read(super::fixture(name)).map_err(|e| e.to_string())?;
        let b = parse_pubmed_xml(&bytes).map_err(|e| format!("{name}: {e}"))?;
        let got = (
            b.articles,
            b.abstracts.len(),
            b.abstracts.iter().filter(|a| a.is_structured).count(),
        );
        ensure(got == (articles, abstracts, structured), || {
            format!("{name}: counts {got:?}")
        })?;
    }

    let spec = SearchSpec {
        page_size: 1,
        ..SearchSpec::new("asthma")
    };
    let pages = || (1..=3).map(super::one_article_page).collect::<Vec<_>>();
    let gaps_ok = |t: &[Duration]| t.windows(2).all(|w| w[1] - w[0] >= DEFAULT_MIN_DELAY);

    // 503 twice then success, and a 429 on the first page
    let mut clock = super::VirtualClock::default();
    let mut server = super::MockServer::new(clock.clone(), 3, 1, pages());
    server.failures.push((0, 1, 429));
    server.failures.push((2, 2, 503));
    let summary = fetch_corpus(&spec, "http://mock", &mut server, &mut clock, &mut |_| {
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    ensure(
        (summary.fetched, summary.skipped, summary.retries) == (3, 0, 3),
        || format!("{summary:?}"),
    )?;
    let times = server.request_times();
    ensure(gaps_ok(&times), || {
        "requests closer than the minimum gap".into()
    })?;
    let n = times.len();
    ensure(
        times[n - 1] - times[n - 2] >= BACKOFF_SCHEDULE[1]
            && times[n - 2] - times[n - 3] >= BACKOFF_SCHEDULE[0],
        || "backoff schedule not honoured".into(),
    )?;

    // four consecutive failures exhaust the page
    let mut clock = super::VirtualClock::default();
    let mut server = super::MockServer::new(clock.clone(), 3, 1, pages());
    server.failures.push((1, 4, 0));
    match fetch_corpus(&spec, "http://mock", &mut server, &mut clock, &mut |_| {
        Ok(())
    }) {
        Err(FetchError::Exhausted { what, attempts, .. }) if what == "page 2" && attempts == 4 => {}
        other => return Err(format!("expected exhaustion of page 2, got {other:?}")),
    }
    Ok("4 XML fixtures, 429/503 retry, exhaustion after 4 attempts, min gap held".into())
}
