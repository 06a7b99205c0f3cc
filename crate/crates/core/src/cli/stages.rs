use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::config::PipelineConfig;
use super::{
    CleanArgs, EvalArgs, FeaturizeArgs, FetchArgs, LabelArgs, PredictArgs, StackArgs, SynthArgs,
    TrainBaseArgs,
};
use crate::base_learner::{
    predict_batch, read_probability_file, train, write_probability_file, BaseProbabilities,
    Example, LinearHead, Triple,
};
use crate::cleaning::clean_dataset;
use crate::features::{featurize_dataset, fit_on_records, hashed_bow, QiefDetectors};
use crate::ingest::{
    fetch_corpus, parse_pubmed_xml, FetchSummary, RawAbstract, SearchSpec, SystemClock,
    UreqTransport,
};
use crate::labeling::{heading_samples, label_corpus, HeadingMap, LabeledSequence};
use crate::manifest::ManifestBuilder;
use crate::metrics::{evaluate, EvalReport};
use crate::stacker::{
    feature_names, fit_stacked, read_stack_matrix, split_base_stack, write_stack_matrix,
    BaseStackSplit, StackError, StackInstance, StackMatrix, StackedModel,
};
use crate::synth::{generate_abstracts, generate_sequences, to_pubmed_xml, SynthConfig};
use crate::{io, Error, Result};

pub(super) struct Context {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn manifest(&self, stage: &str, seeded: bool) -> ManifestBuilder {
        ManifestBuilder::new(stage, seeded.then_some(self.cfg.seed), self.cfg.to_map())
    }

    fn ensure_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }
}

pub(super) fn fetch(ctx: &Context, a: FetchArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("fetch", false);
    let mut records: Vec<RawAbstract> = Vec::new();
    let summary = if a.xml.is_empty() {
        let mut spec = SearchSpec::new(a.query.unwrap_or_default());
        spec.date_cutoff = a.date_cutoff;
        spec.page_size = a.page_size.unwrap_or(ctx.cfg.page_size);
        spec.api_key = std::env::var("NCBI_API_KEY").ok().filter(|k| !k.is_empty());
        let mut transport = UreqTransport::default();
        let mut clock = SystemClock::default();
        fetch_corpus(&spec, &a.base_url, &mut transport, &mut clock, &mut |r| {
            records.push(r);
            Ok(())
        })?
    } else {
        let mut summary = FetchSummary::default();
        let mut seen = HashSet::new();
        for path in &a.xml {
            m.input(path);
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let batch = parse_pubmed_xml(&bytes)?;
            summary.pages += 1;
            summary.count += batch.articles as u64;
            summary.skipped += batch.skipped_without_abstract;
            summary.duplicates += batch.duplicate_pmids;
            for r in batch.abstracts {
                if !seen.insert(r.pmid) {
                    summary.duplicates += 1;
                    continue;
                }
                summary.unstructured += usize::from(!r.is_structured);
                summary.fetched += 1;
                records.push(r);
            }
        }
        summary
    };
    let out = ctx.path("raw_abstracts.jsonl");
    let sum = ctx.path("fetch_summary.json");
    io::write_jsonl(&out, &records)?;
    io::write_json(&sum, &summary)?;
    info!(
        fetched = summary.fetched,
        skipped = summary.skipped,
        pages = summary.pages,
        "fetch done"
    );
    m.finish(&ctx.out, &[out, sum])?;
    Ok(())
}

pub(super) fn label(ctx: &Context, a: LabelArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("label", false);
    m.input(&a.input);
    let map = match &a.heading_map {
        Some(p) => {
            m.input(p);
            HeadingMap::load(p)?
        }
        None => HeadingMap::default(),
    };
    let abstracts: Vec<RawAbstract> = io::read_jsonl(&a.input)?;
    let (records, report) = label_corpus(&abstracts, &map);
    let out = ctx.path("labeled.jsonl");
    let rep = ctx.path("label_report.json");
    io::write_jsonl(&out, &records)?;
    io::write_json(&rep, &report)?;
    let mut outputs = vec![out, rep];
    if let Some(n) = a.samples {
        let samples = ctx.path("heading_samples.json");
        io::write_json(&samples, &heading_samples(&abstracts, n))?;
        outputs.push(samples);
    }
    info!(
        labeled = report.labeled,
        discarded = report.discarded,
        unstructured = report.unstructured,
        "label done"
    );
    m.finish(&ctx.out, &outputs)?;
    Ok(())
}

pub(super) fn clean(ctx: &Context, a: CleanArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("clean", false);
    m.input(&a.input);
    let records: Vec<LabeledSequence> = io::read_jsonl(&a.input)?;
    let (kept, report) = clean_dataset(&records, &ctx.cfg.clean);
    let out = ctx.path("clean.jsonl");
    let rep = ctx.path("drop_report.json");
    io::write_jsonl(&out, &kept)?;
    io::write_json(&rep, &report)?;
    info!(kept = report.kept, dropped = report.dropped(), "clean done");
    m.finish(&ctx.out, &[out, rep])?;
    Ok(())
}

pub(super) fn featurize(ctx: &Context, a: FeaturizeArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("featurize", true);
    m.input(&a.input);
    let records: Vec<LabeledSequence> = io::read_jsonl(&a.input)?;
    let split = match &a.splits {
        Some(p) => {
            m.input(p);
            let s: BaseStackSplit = io::read_json(p)?;
            s.validate()?;
            s
        }
        None => {
            let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
            split_base_stack(&ids, &ctx.cfg.split_protocol())?
        }
    };
    let detectors = match &a.qief_patterns {
        Some(p) => {
            m.input(p);
            QiefDetectors::load(p)?
        }
        None => QiefDetectors::default(),
    };
    let base: HashSet<&str> = split.base_ids.iter().map(String::as_str).collect();
    // Document frequencies come from the base split only.
    let stats = fit_on_records(records.iter().filter(|r| base.contains(r.id.as_str())))?;
    let features = featurize_dataset(&records, &stats, &detectors);
    let rows: Vec<(String, _)> = records.iter().map(|r| r.id.clone()).zip(features).collect();

    let splits_out = ctx.path("splits.json");
    let tfidf_out = ctx.path("tfidf.json");
    let features_out = ctx.path("features.csv");
    let mut outputs = vec![tfidf_out.clone(), features_out.clone()];
    if a.splits.is_none() {
        io::write_json(&splits_out, &split)?;
        outputs.insert(0, splits_out);
    }
    io::write_json(&tfidf_out, &stats)?;
    io::write_features(&features_out, &rows)?;
    info!(
        records = rows.len(),
        base = split.base_ids.len(),
        stack = split.stack_ids.len(),
        "featurize done"
    );
    m.finish(&ctx.out, &outputs)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct BaseModelFile {
    model_name: String,
    /// `vectors` or `hashed_bow`.
    representation: String,
    hash_dim: Option<usize>,
    train_instances: usize,
    head: LinearHead,
    loss_trajectory: Vec<f64>,
}

fn targets_by_id(records: &[LabeledSequence]) -> HashMap<&str, Triple> {
    records
        .iter()
        .map(|r| (r.id.as_str(), r.labels.as_targets()))
        .collect()
}

pub(super) fn train_base(ctx: &Context, a: TrainBaseArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("train_base", true);
    m.input(&a.input);
    m.input(&a.splits);
    let records: Vec<LabeledSequence> = io::read_jsonl(&a.input)?;
    let split: BaseStackSplit = io::read_json(&a.splits)?;
    split.validate()?;
    let by_id: HashMap<&str, &LabeledSequence> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();

    let vectors: Option<HashMap<String, Vec<f64>>> = match &a.vectors {
        Some(p) => {
            m.input(p);
            Some(io::read_vectors(p)?.into_iter().collect())
        }
        None => None,
    };
    let hash_dim = ctx.cfg.hash_dim;
    let input_of = |id: &str| -> Result<Vec<f64>> {
        match &vectors {
            Some(v) => v.get(id).cloned().ok_or_else(|| {
                StackError::Protocol(format!("no input vector for id {id:?}")).into()
            }),
            None => {
                let r = by_id.get(id).ok_or_else(|| {
                    StackError::Protocol(format!("split id {id:?} has no record"))
                })?;
                Ok(hashed_bow(&r.text, hash_dim))
            }
        }
    };
    let lookup = |id: &str| -> Result<&LabeledSequence> {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| StackError::Protocol(format!("split id {id:?} has no record")).into())
    };

    let mut train_set = Vec::with_capacity(split.base_ids.len());
    for id in &split.base_ids {
        train_set.push(Example {
            h: input_of(id)?,
            t: lookup(id)?.labels.as_targets(),
        });
    }
    let outcome = train(&train_set, &ctx.cfg.base_train_config())?;
    let stack_inputs = split
        .stack_ids
        .iter()
        .map(|id| input_of(id))
        .collect::<Result<Vec<_>>>()?;
    let probs = predict_batch(&outcome.head, &stack_inputs)?;
    let rows: Vec<BaseProbabilities> = split
        .stack_ids
        .iter()
        .zip(probs)
        .map(|(id, p)| BaseProbabilities {
            instance_id: id.clone(),
            model_name: a.name.clone(),
            p,
        })
        .collect();

    let model_out = ctx.path("base_model.json");
    let probs_out = ctx.path("base_probs.csv");
    let first = outcome.loss_trajectory.first().copied().unwrap_or(f64::NAN);
    let last = outcome.loss_trajectory.last().copied().unwrap_or(f64::NAN);
    io::write_json(
        &model_out,
        &BaseModelFile {
            model_name: a.name.clone(),
            representation: if vectors.is_some() {
                "vectors"
            } else {
                "hashed_bow"
            }
            .into(),
            hash_dim: vectors.is_none().then_some(hash_dim),
            train_instances: train_set.len(),
            head: outcome.head,
            loss_trajectory: outcome.loss_trajectory,
        },
    )?;
    let w = io::create(&probs_out)?;
    write_probability_file(w, &rows)?;
    info!(
        train = train_set.len(),
        scored = rows.len(),
        initial_loss = first,
        final_loss = last,
        "train-base done"
    );
    m.finish(&ctx.out, &[model_out, probs_out])?;
    Ok(())
}

/// Assemble stack instances in `split.stack_ids` order.
fn build_stack_instances(
    split: &BaseStackSplit,
    records: &[LabeledSequence],
    features: &HashMap<String, [f64; 5]>,
    probs: &[(String, HashMap<String, Triple>)],
) -> Result<Vec<StackInstance>> {
    let targets = targets_by_id(records);
    let mut out = Vec::with_capacity(split.stack_ids.len());
    for id in &split.stack_ids {
        let t = *targets.get(id.as_str()).ok_or_else(|| {
            StackError::Protocol(format!("stack id {id:?} has no labeled record"))
        })?;
        let text = *features
            .get(id)
            .ok_or_else(|| StackError::Protocol(format!("stack id {id:?} has no feature row")))?;
        let mut base = Vec::with_capacity(probs.len());
        for (model, by_id) in probs {
            base.push(*by_id.get(id).ok_or_else(|| {
                StackError::Protocol(format!(
                    "model {model:?} has no probabilities for stack id {id:?}"
                ))
            })?);
        }
        out.push(StackInstance::assemble(id.clone(), &base, text, t));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct StackReport<'a> {
    base_models: &'a [String],
    stack_instances: usize,
    fold_sizes: Vec<usize>,
    cv: &'a crate::stacker::CvScores,
}

pub(super) fn stack(ctx: &Context, a: StackArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("stack", true);
    for p in [&a.input, &a.splits, &a.features]
        .into_iter()
        .chain(&a.probs)
    {
        m.input(p);
    }
    let split: BaseStackSplit = io::read_json(&a.splits)?;
    split.validate()?;
    let records: Vec<LabeledSequence> = io::read_jsonl(&a.input)?;
    let features: HashMap<String, [f64; 5]> = io::read_features(&a.features)?
        .into_iter()
        .map(|(id, f)| (id, f.to_array()))
        .collect();

    let base: HashSet<&str> = split.base_ids.iter().map(String::as_str).collect();
    let mut probs = Vec::with_capacity(a.probs.len());
    let mut model_names = Vec::with_capacity(a.probs.len());
    for path in &a.probs {
        let rows = read_probability_file(path)?;
        let names: HashSet<&str> = rows.iter().map(|r| r.model_name.as_str()).collect();
        if names.len() != 1 {
            return Err(Error::Format {
                path: path.clone(),
                line: 0,
                message: format!(
                    "expected exactly one model per probability file, found {}",
                    names.len()
                ),
            });
        }
        let name = rows[0].model_name.clone();
        if let Some(r) = rows.iter().find(|r| base.contains(r.instance_id.as_str())) {
            warn!(model = %name, id = %r.instance_id, "probability file scores base-split ids; they are ignored");
        }
        let by_id: HashMap<String, Triple> =
            rows.into_iter().map(|r| (r.instance_id, r.p)).collect();
        model_names.push(name.clone());
        probs.push((name, by_id));
    }
    if HashSet::<&String>::from_iter(&model_names).len() != model_names.len() {
        return Err(Error::Config(
            "the same model name appears in two probability files".into(),
        ));
    }

    let instances = build_stack_instances(&split, &records, &features, &probs)?;
    let names = feature_names(model_names.len());
    let fit = fit_stacked(
        &instances,
        &split,
        names,
        model_names.clone(),
        &ctx.cfg.gbdt,
    )?;

    let matrix_out = ctx.path("stack_matrix.csv");
    let model_out = ctx.path("stacked_model.json");
    let oof_out = ctx.path("oof.csv");
    let cv_out = ctx.path("cv_scores.json");
    write_stack_matrix(
        io::create(&matrix_out)?,
        &StackMatrix {
            n_models: model_names.len(),
            instances: instances.clone(),
        },
    )?;
    fit.model.save(&model_out)?;
    let oof_rows: Vec<BaseProbabilities> = fit
        .oof
        .iter()
        .map(|o| BaseProbabilities {
            instance_id: o.id.clone(),
            model_name: "stacker".into(),
            p: o.p,
        })
        .collect();
    write_probability_file(io::create(&oof_out)?, &oof_rows)?;
    io::write_json(
        &cv_out,
        &StackReport {
            base_models: &model_names,
            stack_instances: instances.len(),
            fold_sizes: fit.model.folds.iter().map(Vec::len).collect(),
            cv: &fit.cv,
        },
    )?;
    info!(
        oof_macro_auc = fit.cv.oof_macro_auc,
        mean_fold_macro_auc = fit.cv.mean_fold_macro_auc,
        "stack done"
    );
    m.finish(&ctx.out, &[matrix_out, model_out, oof_out, cv_out])?;
    Ok(())
}

pub(super) fn predict(ctx: &Context, a: PredictArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("predict", false);
    m.input(&a.model);
    m.input(&a.matrix);
    let model = StackedModel::load(&a.model)?;
    let matrix = read_stack_matrix(io::open(&a.matrix)?, &a.matrix)?;
    if matrix.n_models != model.base_models.len() {
        return Err(StackError::Shape {
            expected: model.n_features(),
            got: 3 * matrix.n_models + 5,
        }
        .into());
    }
    let mut rows = Vec::with_capacity(matrix.instances.len());
    for inst in &matrix.instances {
        rows.push(BaseProbabilities {
            instance_id: inst.id.clone(),
            model_name: "stacker".into(),
            p: model.predict(&inst.x)?,
        });
    }
    let out = ctx.path("predictions.csv");
    write_probability_file(io::create(&out)?, &rows)?;
    m.finish(&ctx.out, &[out])?;
    Ok(())
}

pub(super) fn eval(ctx: &Context, a: EvalArgs) -> Result<()> {
    ctx.ensure_out()?;
    let mut m = ctx.manifest("eval", false);
    m.input(&a.probs);
    m.input(&a.input);
    let threshold = a.threshold.unwrap_or(ctx.cfg.threshold);
    let records: Vec<LabeledSequence> = io::read_jsonl(&a.input)?;
    let targets = targets_by_id(&records);
    let rows = read_probability_file(&a.probs)?;
    let mut models: Vec<&str> = Vec::new();
    for r in &rows {
        if !models.contains(&r.model_name.as_str()) {
            models.push(&r.model_name);
        }
    }
    let mut reports: Vec<EvalReport> = Vec::new();
    for model in models {
        let mut p = Vec::new();
        let mut t = Vec::new();
        for r in rows.iter().filter(|r| r.model_name == model) {
            let truth = targets
                .get(r.instance_id.as_str())
                .ok_or_else(|| Error::Format {
                    path: a.probs.clone(),
                    line: 0,
                    message: format!("id {:?} has no labeled record", r.instance_id),
                })?;
            p.push(r.p);
            t.push(*truth);
        }
        let report = evaluate(model, &p, &t, threshold)?;
        println!("{report}");
        reports.push(report);
    }
    println!("{}", EvalReport::SUMMARY_HEADER);
    for r in &reports {
        println!("{}", r.summary_row());
    }
    let stem = a
        .probs
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("probs")
        .to_string();
    let out = ctx.path(&format!("eval_{stem}.json"));
    let summary = ctx.path(&format!("eval_{stem}.csv"));
    io::write_json(&out, &reports)?;
    let mut text = String::from(EvalReport::SUMMARY_HEADER);
    text.push('\n');
    for r in &reports {
        text.push_str(&r.summary_row());
        text.push('\n');
    }
    std::fs::write(&summary, text).map_err(|e| Error::io(&summary, e))?;
    m.finish(&ctx.out, &[out, summary])?;
    Ok(())
}

pub(super) fn synth(ctx: &Context, a: SynthArgs) -> Result<()> {
    ctx.ensure_out()?;
    let m = ctx.manifest("synth", true);
    let cfg = SynthConfig {
        seed: ctx.cfg.seed,
        ..SynthConfig::default()
    };
    let outputs = if let Some(n) = a.abstracts {
        let out = ctx.path("pubmed.xml");
        let xml = to_pubmed_xml(&generate_abstracts(n, &cfg), 25);
        std::fs::write(&out, xml).map_err(|e| Error::io(&out, e))?;
        vec![out]
    } else {
        let recs = generate_sequences(a.n, &cfg);
        let seqs: Vec<_> = recs.iter().map(|r| r.sequence.clone()).collect();
        let vecs: Vec<_> = recs
            .iter()
            .map(|r| (r.sequence.id.clone(), r.planted.clone()))
            .collect();
        let seq_out = ctx.path("synth.jsonl");
        let vec_out = ctx.path("vectors.csv");
        io::write_jsonl(&seq_out, &seqs)?;
        io::write_vectors(&vec_out, &vecs)?;
        vec![seq_out, vec_out]
    };
    m.finish(&ctx.out, &outputs)?;
    Ok(())
}
