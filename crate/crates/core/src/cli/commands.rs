use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cli::{RunConfig, SynthKind};
use crate::corpus::{
    generate_context_task, generate_synthetic, load_corpus, save_index, Abnormality, ClassLabel,
    ContextTaskSpec, Corpus, LabeledQuery, ReferenceCase, Severity, SyntheticSpec, Task,
    SYNTHETIC_DEMENTIA,
};
use crate::encoder::{load_encoder, retrieval_accuracy, save_encoder, train_contrastive, PairBatch};
use crate::error::{Error, Result};
use crate::eval::{
    few_shot, metrics_for_task, retrieval_consistency, run_ablation, similarity_distribution,
    MetricsBundle, Splits,
};
use crate::evidence::{load_head, prepare_examples, save_head, train_head, EvidenceModel, HeadExample};
use crate::numerics::{derive_seed, softmax, Matrix};
use crate::report::{
    assemble, example_report, parse_json, render_json, render_text_with, AlphaSource, PredictionSet,
    ReportMetadata, TextOptions,
};
use crate::retrieval::top_k_excluding;
use crate::zeroshot::predict_all;

struct Out<'a> {
    dir: &'a Path,
}

impl Out<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, content: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, content).map_err(|e| Error::io(path, e))
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s)
    }

    fn corpus(&self, stem: &str, corpus: &Corpus) -> Result<()> {
        save_index(corpus, self.path(&format!("{stem}.json")), self.path(&format!("{stem}.bin")))
    }
}

pub(crate) fn run(command: &str, cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let out = Out { dir };
    out.json("config.json", cfg)?;
    match command {
        "build-index" => build_index(cfg, &out),
        "train-encoder" => train_encoder(cfg, &out),
        "train-head" => train_head_cmd(cfg, &out),
        "zeroshot" => zeroshot(cfg, &out),
        "infer" => infer(cfg, &out),
        "report" => report(cfg, &out),
        "eval" => eval(cfg, &out),
        "fewshot" => fewshot(cfg, &out),
        "ablate" => ablate(cfg, &out),
        "gen-synth" => gen_synth(cfg, &out),
        "export-embeddings" => export_embeddings(cfg, &out),
        other => Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
}

/// The blob sits next to its manifest with a `.bin` extension.
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    load_corpus(path, path.with_extension("bin"))
}

/// Short content hash of the given files.
fn files_id(paths: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(fs::read(p).map_err(|e| Error::io(p, e))?);
    }
    Ok(hex::encode(h.finalize())[..12].to_string())
}

fn reference_corpus(cfg: &RunConfig) -> Result<Corpus> {
    load_manifest(cfg.require(&cfg.corpus, "corpus")?)
}

/// Queries drawn from `source`; a query whose id is also a reference never
/// retrieves that reference.
fn queries_from(source: &Corpus, refs: &Corpus, task: Task) -> Vec<LabeledQuery> {
    source
        .cases()
        .iter()
        .filter_map(|c| {
            c.label_for(task).map(|label| LabeledQuery {
                embedding: c.image.clone(),
                label,
                exclude: refs.index_of(&c.id),
            })
        })
        .collect()
}

fn optional_corpus(path: &Option<PathBuf>) -> Result<Option<Corpus>> {
    path.as_deref().map(load_manifest).transpose()
}

struct Prepared {
    train: Vec<HeadExample>,
    val: Vec<HeadExample>,
    test: Vec<HeadExample>,
}

/// Training queries default to the references; without a validation file
/// every fifth training query is held out for it.
fn prepare_splits(cfg: &RunConfig, refs: &Corpus, need_test: bool) -> Result<Prepared> {
    let task = cfg.task;
    let prep = |c: &Corpus| prepare_examples(&queries_from(c, refs, task), refs, cfg.k);
    let train_all = match optional_corpus(&cfg.train)? {
        Some(c) => prep(&c)?,
        None => prep(refs)?,
    };
    let (train, val) = match optional_corpus(&cfg.val)? {
        Some(c) => (train_all, prep(&c)?),
        None => {
            let (mut train, mut val) = (Vec::new(), Vec::new());
            for (i, ex) in train_all.into_iter().enumerate() {
                if i % 5 == 4 {
                    val.push(ex);
                } else {
                    train.push(ex);
                }
            }
            (train, val)
        }
    };
    let test = match optional_corpus(&cfg.test)? {
        Some(c) => prep(&c)?,
        None if need_test => return Err(Error::Config("missing required `--test`".into())),
        None => Vec::new(),
    };
    if train.is_empty() || val.is_empty() {
        return Err(Error::Domain(format!("no {task} training or validation queries")));
    }
    Ok(Prepared { train, val, test })
}

fn gen_synth(cfg: &RunConfig, out: &Out) -> Result<()> {
    match cfg.synth_kind {
        SynthKind::Clusters => {
            let spec = |n: usize, stream: u64, prefix: &str| SyntheticSpec {
                n_per_class: n,
                noise_sigma: cfg.sigma,
                seed: if stream == 0 { cfg.seed } else { derive_seed(cfg.seed, stream) },
                id_prefix: prefix.into(),
                ..SyntheticSpec::new(cfg.classes, n, cfg.dim, cfg.separation, cfg.seed)
            };
            out.corpus("corpus", &generate_synthetic(&spec(cfg.per_class, 0, "syn"))?)?;
            for (n, stream, stem) in [(cfg.val_per_class, 1, "val"), (cfg.test_per_class, 2, "test")] {
                if n > 0 {
                    out.corpus(stem, &generate_synthetic(&spec(n, stream, stem))?)?;
                }
            }
        }
        SynthKind::Context => {
            let spec = ContextTaskSpec {
                n_classes: cfg.classes,
                n_clusters: 8 * cfg.classes,
                dim: cfg.dim,
                refs_per_cluster: cfg.per_class,
                val_per_cluster: cfg.val_per_class,
                test_per_cluster: cfg.test_per_class,
                seed: cfg.seed,
                ..ContextTaskSpec::default()
            };
            let task = generate_context_task(&spec)?;
            let refs = &task.references;
            let ids: Vec<String> = refs.cases().iter().map(|c| c.id.clone()).collect();
            out.corpus("corpus", refs)?;
            out.corpus("train", &query_corpus(&task.train, refs.dim(), |i| ids[i].clone())?)?;
            for (queries, stem) in [(&task.val, "val"), (&task.test, "test")] {
                if !queries.is_empty() {
                    out.corpus(stem, &query_corpus(queries, refs.dim(), |i| format!("{stem}-{i:05}"))?)?;
                }
            }
        }
    }
    Ok(())
}

/// Stores bare query embeddings as cases with zero text embeddings.
fn query_corpus(queries: &[LabeledQuery], dim: usize, id: impl Fn(usize) -> String) -> Result<Corpus> {
    let cases = queries
        .iter()
        .enumerate()
        .map(|(i, q)| ReferenceCase {
            id: id(i),
            image: q.embedding.clone(),
            abn_text: vec![0.0; dim],
            dx_text: vec![0.0; dim],
            desc_text: vec![0.0; dim],
            abnormality: Abnormality::ALL[q.label],
            dementia: SYNTHETIC_DEMENTIA[q.label],
            severity: Some(Severity::ALL[q.label]),
            description: String::new(),
        })
        .collect();
    Corpus::new(dim, cases, Vec::new(), "query split")
}

fn build_index(cfg: &RunConfig, out: &Out) -> Result<()> {
    let corpus = reference_corpus(cfg)?;
    let corpus = match &cfg.encoder {
        Some(path) => load_encoder(path)?.embed_corpus(&corpus)?,
        None => corpus,
    };
    out.corpus("index", &corpus)
}

fn pairs_of(corpus: &Corpus) -> Result<(PairBatch, Vec<usize>)> {
    let images: Vec<Vec<f64>> = corpus.cases().iter().map(|c| c.image.clone()).collect();
    let texts: Vec<Vec<f64>> = corpus.cases().iter().map(|c| c.abn_text.clone()).collect();
    let labels = corpus.cases().iter().map(|c| c.abnormality.index()).collect();
    Ok((PairBatch::new(Matrix::from_rows(&images)?, Matrix::from_rows(&texts)?)?, labels))
}

fn train_encoder(cfg: &RunConfig, out: &Out) -> Result<()> {
    let (pairs, labels) = pairs_of(&reference_corpus(cfg)?)?;
    let (encoder, history) =
        train_contrastive(&pairs, &cfg.contrastive_config()?, None, cfg.dim, cfg.encoder_init())?;
    let held_out = match optional_corpus(&cfg.test)? {
        Some(test) => {
            let (pairs, labels) = pairs_of(&test)?;
            Some(retrieval_accuracy(&encoder, &pairs, &labels)?)
        }
        None => None,
    };
    save_encoder(&encoder, out.path("encoder.json"))?;
    out.json(
        "history.json",
        &json!({
            "history": history,
            "train_retrieval_accuracy": retrieval_accuracy(&encoder, &pairs, &labels)?,
            "test_retrieval_accuracy": held_out,
        }),
    )
}

fn train_head_cmd(cfg: &RunConfig, out: &Out) -> Result<()> {
    let refs = reference_corpus(cfg)?;
    let splits = prepare_splits(cfg, &refs, false)?;
    let head_cfg = cfg.head_config()?;
    let (model, history) = train_head(&splits.train, &splits.val, &refs, &head_cfg)?;
    save_head(&model, out.path("head.json"))?;
    let test = if splits.test.is_empty() {
        None
    } else {
        Some(score(&model, &splits.test, &refs)?)
    };
    out.json("history.json", &json!({ "history": history, "test_metrics": test }))
}

fn score(model: &EvidenceModel, examples: &[HeadExample], refs: &Corpus) -> Result<MetricsBundle> {
    let preds = model.predict_examples(examples, refs)?;
    let truths: Vec<usize> = examples.iter().map(|e| e.label).collect();
    metrics_for_task(model.task, &preds, &truths)
}

fn zeroshot(cfg: &RunConfig, out: &Out) -> Result<()> {
    let refs = reference_corpus(cfg)?;
    let source = optional_corpus(&cfg.test)?;
    let queries = source.as_ref().unwrap_or(&refs);
    let tasks: Vec<Task> = match cfg.task_filter {
        Some(t) => vec![t],
        None => Task::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    let mut hits = vec![0usize; tasks.len()];
    let mut totals = vec![0usize; tasks.len()];
    for case in queries.cases() {
        if cfg.query.as_ref().is_some_and(|q| *q != case.id) {
            continue;
        }
        let zs = predict_all(&case.image, refs.anchors())?;
        let mut row = serde_json::Map::new();
        row.insert("id".into(), json!(case.id));
        for (i, &task) in tasks.iter().enumerate() {
            let value = match task {
                Task::Abnormality => serde_json::to_value(&zs.abnormality)?,
                Task::BinaryDementia => serde_json::to_value(&zs.binary)?,
                Task::DementiaType => serde_json::to_value(&zs.dementia_type)?,
                Task::Severity => serde_json::to_value(&zs.severity)?,
            };
            row.insert(task.key().into(), value);
            if let Some(truth) = case.label_for(task) {
                totals[i] += 1;
                hits[i] += usize::from(zs.predicted(task) == truth);
            }
        }
        rows.push(Value::Object(row));
    }
    if rows.is_empty() {
        return Err(Error::Lookup(match &cfg.query {
            Some(q) => format!("unknown query id `{q}`"),
            None => "no queries".into(),
        }));
    }
    let accuracy: serde_json::Map<String, Value> = tasks
        .iter()
        .enumerate()
        .filter(|(i, _)| totals[*i] > 0)
        .map(|(i, t)| (t.key().to_string(), json!(hits[i] as f64 / totals[i] as f64)))
        .collect();
    out.json("zeroshot.json", &json!({ "accuracy": accuracy, "queries": rows }))
}

fn infer(cfg: &RunConfig, out: &Out) -> Result<()> {
    let refs = reference_corpus(cfg)?;
    let id = cfg
        .query
        .as_deref()
        .ok_or_else(|| Error::Config("missing required `--query`".into()))?;
    let source = optional_corpus(&cfg.test)?;
    let query = source
        .as_ref()
        .unwrap_or(&refs)
        .get(id)
        .ok_or_else(|| Error::Lookup(format!("unknown query id `{id}`")))?
        .image
        .clone();
    let hits = top_k_excluding(&query, &refs, cfg.k, refs.index_of(id))?;
    let mut set = PredictionSet::from_zero_shot(&predict_all(&query, refs.anchors())?)?;
    let mut alpha = None;
    for path in &cfg.heads {
        let head = load_head(path)?;
        let pred = head.infer(&query, &hits, &refs)?;
        if alpha.is_none() {
            alpha = pred.alpha.clone();
        }
        set = set.with_evidence(head.task, &pred)?;
    }
    let corpus_path = cfg.require(&cfg.corpus, "corpus")?;
    let mut metadata = ReportMetadata::new(
        files_id(&[corpus_path.to_path_buf(), corpus_path.with_extension("bin")])?,
        match &cfg.encoder {
            Some(p) => files_id(std::slice::from_ref(p))?,
            None => "none".into(),
        },
        cfg.k,
    );
    let alpha = match alpha {
        Some(a) => {
            metadata.alpha_source = AlphaSource::Attention;
            a
        }
        None => softmax(&hits.iter().map(|h| h.sim).collect::<Vec<_>>())?,
    };
    let report = assemble(set, &hits, &alpha, &refs, metadata)?;
    write_report(cfg, out, &report)
}

fn write_report(cfg: &RunConfig, out: &Out, report: &crate::report::DiagnosticReport) -> Result<()> {
    let opts = TextOptions {
        max_description: cfg.max_description,
    };
    out.write("report.txt", render_text_with(report, opts))?;
    out.write("report.json", render_json(report)?)
}

fn report(cfg: &RunConfig, out: &Out) -> Result<()> {
    let report = match &cfg.input {
        Some(path) => parse_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?,
        None => example_report(),
    };
    write_report(cfg, out, &report)
}

fn metrics_table(rows: &[(String, MetricsBundle)]) -> String {
    let mut s = format!("{:<28}", "run");
    for name in MetricsBundle::NAMES {
        let _ = write!(s, " {name:>11}");
    }
    s.push('\n');
    for (label, m) in rows {
        let _ = write!(s, "{label:<28}");
        for v in m.values() {
            let _ = write!(s, " {v:>11.4}");
        }
        s.push('\n');
    }
    s
}

fn eval(cfg: &RunConfig, out: &Out) -> Result<()> {
    let refs = reference_corpus(cfg)?;
    let test = optional_corpus(&cfg.test)?;
    let queries = test.as_ref().unwrap_or(&refs);
    let mut results = Vec::new();
    let mut table = Vec::new();
    if cfg.heads.is_empty() {
        let task = cfg.task;
        let (mut preds, mut truths) = (Vec::new(), Vec::new());
        for case in queries.cases() {
            if let Some(t) = case.label_for(task) {
                preds.push(predict_all(&case.image, refs.anchors())?.predicted(task));
                truths.push(t);
            }
        }
        let m = metrics_for_task(task, &preds, &truths)?;
        results.push(json!({ "task": task, "source": "zero_shot", "n": truths.len(), "metrics": m }));
        table.push((format!("zero_shot/{task}"), m));
    }
    for path in &cfg.heads {
        let head = load_head(path)?;
        let examples = prepare_examples(&queries_from(queries, &refs, head.task), &refs, head.k)?;
        let m = score(&head, &examples, &refs)?;
        results.push(json!({
            "task": head.task,
            "source": "evidence",
            "mask": head.mask.to_string(),
            "n": examples.len(),
            "metrics": m,
        }));
        table.push((format!("evidence/{}", head.task), m));
    }
    out.json("metrics.json", &json!({ "results": results }))?;
    out.write("metrics.txt", metrics_table(&table))?;
    if let Some(test) = &test {
        out.json("consistency.json", &retrieval_consistency(&refs, test, cfg.k_max)?)?;
        for task in [Task::Abnormality, Task::DementiaType] {
            let dist = similarity_distribution(&refs, test, cfg.k, task)?;
            out.write(&format!("similarity_{}_k{}.csv", task.key(), cfg.k), dist.to_csv())?;
            out.json(&format!("similarity_{}_k{}.json", task.key(), cfg.k), &dist)?;
        }
    }
    Ok(())
}

fn fewshot(cfg: &RunConfig, out: &Out) -> Result<()> {
    let refs = reference_corpus(cfg)?;
    let p = prepare_splits(cfg, &refs, true)?;
    let splits = Splits {
        train: &p.train,
        val: &p.val,
        test: &p.test,
        corpus: &refs,
    };
    let report = few_shot(splits, &cfg.head_config()?, &cfg.few_shot_config())?;
    let mut s = format!("{:>6} {:>9} {:>9} {:>9} {:>9}\n", "shots", "f1_mean", "f1_std", "acc_mean", "acc_std");
    for pt in &report.points {
        let _ = writeln!(
            s,
            "{:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            pt.shots, pt.mean.f1, pt.std.f1, pt.mean.accuracy, pt.std.accuracy
        );
    }
    out.json("fewshot.json", &report)?;
    out.write("fewshot.txt", s)
}

fn ablate(cfg: &RunConfig, out: &Out) -> Result<()> {
    let refs = reference_corpus(cfg)?;
    let p = prepare_splits(cfg, &refs, true)?;
    let splits = Splits {
        train: &p.train,
        val: &p.val,
        test: &p.test,
        corpus: &refs,
    };
    let report = run_ablation(splits, &cfg.head_config()?, &cfg.variant_masks()?, cfg.runs, cfg.seed)?;
    let mut s = format!("{:<28} {:>9} {:>9} {:>9}\n", "variant", "f1_mean", "f1_std", "f1_delta");
    for v in &report.variants {
        let _ = writeln!(
            s,
            "{:<28} {:>9.4} {:>9.4} {:>+9.4}",
            v.name, v.mean.f1, v.std.f1, v.delta.f1
        );
    }
    out.json("ablation.json", &report)?;
    out.write("ablation.txt", s)
}

fn export_embeddings(cfg: &RunConfig, out: &Out) -> Result<()> {
    let refs = reference_corpus(cfg)?;
    let mut s = String::from("split,id,kind,abnormality,dementia");
    for i in 0..refs.dim() {
        let _ = write!(s, ",e{i}");
    }
    s.push('\n');
    fn row(s: &mut String, fields: [&str; 5], v: &[f64]) {
        s.push_str(&fields.join(","));
        for x in v {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    fn cases(s: &mut String, split: &str, corpus: &Corpus) {
        for c in corpus.cases() {
            for (kind, v) in ["image", "abn", "dx", "desc"].iter().zip(c.modalities()) {
                row(s, [split, &c.id, kind, c.abnormality.key(), c.dementia.key()], v);
            }
        }
    }
    cases(&mut s, "reference", &refs);
    if let Some(test) = optional_corpus(&cfg.test)? {
        if test.dim() != refs.dim() {
            return Err(Error::Shape("query and reference dimensions differ".into()));
        }
        cases(&mut s, "query", &test);
    }
    for set in refs.anchors() {
        for (class, v) in set.classes().iter().zip(set.embeddings()) {
            row(&mut s, ["anchor", set.task().key(), class, "", ""], v);
        }
    }
    out.write("embeddings.csv", s)
}
