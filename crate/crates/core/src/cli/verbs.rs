use std::path::Path;

use super::manifest::{Manifest, MANIFEST_FILE};
use super::run::Run;
use super::Verb;
use crate::autodiff::{check_all_primitives, ParamStore};
use crate::config::Config;
use crate::dataset::{
    build_splits, category_counts, class_distribution, filter_tweet, gate_image_by_text_probability, import_corpus,
    keyword_hate_rates, split_counts, write_distribution_csv, write_keyword_csv, AggregateError, FilterDecision,
    GateDecision, LabeledExample, Split, TweetRecord,
};
use crate::encoders::{apply_embeddings, parse_embeddings, preprocess_tweet_text, Vocabulary};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate, random_scores, results_table, score_dataset, write_curve_csv, EvalReport, ResultRow, ResultsTable,
};
use crate::fusion::{gradcheck_variant, FusionModel, InputMask, ModelKind};
use crate::synth::{generate, write_corpus};
use crate::training::{samples_from_records, train, Sample};

/// Vocabulary size of the models built by `gradcheck`.
const GRADCHECK_VOCAB: usize = 30;

pub(super) fn dispatch(verb: Verb, cfg: &Config, out: &Path) -> Result<Manifest> {
    let mut run = Run::start(verb.as_str(), cfg, out)?;
    let result = match verb {
        Verb::Prepare => prepare(cfg, &mut run),
        Verb::Synth => synth(cfg, &mut run),
        Verb::Train => train_verb(cfg, &mut run),
        Verb::Eval => eval_verb(cfg, &mut run).map(|_| ()),
        Verb::Ablate => ablate(cfg, &mut run),
        Verb::Gradcheck => gradcheck(cfg, &mut run),
        Verb::Report => report(cfg, &mut run),
    };
    match result {
        Ok(()) => run.finish(),
        Err(e) => {
            run.fail(&e);
            Err(e)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))
}

fn prepare(cfg: &Config, run: &mut Run) -> Result<()> {
    let input = cfg.require_path("prepare.input")?;
    let imported = import_corpus(input)?;
    run.input(input)?;
    for key in ["prepare.banned_terms", "prepare.keywords"] {
        if let Some(p) = cfg.path(key) {
            run.input(p)?;
        }
    }
    let rules = cfg.filter_rules()?;
    let min_duration = cfg.min_duration()?;
    let seed = cfg.stage_seed("prepare.seed")?;
    run.seed("prepare.seed", seed);
    let root = input.parent().unwrap_or(Path::new("."));

    run.write(
        "diagnostics.csv",
        &csv_bytes(
            &["line", "message"],
            imported.diagnostics.iter().map(|d| [d.line.to_string(), d.message.clone()]),
        )?,
    )?;

    let mut decisions = Vec::new();
    let mut kept: Vec<(LabeledExample, TweetRecord)> = Vec::new();
    for r in &imported.records {
        let filter = filter_tweet(r, &rules);
        let mut row = [r.id.clone(), filter.code().to_string(), String::new(), String::new()];
        if filter == FilterDecision::Keep {
            let gate = gate_image_by_text_probability(r, rules.text_probability_threshold);
            row[2] = gate.code().to_string();
            if gate != GateDecision::Discard {
                row[3] = match LabeledExample::from_record(r, min_duration) {
                    Ok(e) => {
                        let code = if e.binary_tie { format!("{}_tie", e.label) } else { e.label.to_string() };
                        let mut rec = r.clone();
                        rec.image_ref = rec.image_ref.map(|p| root.join(p).to_string_lossy().into_owned());
                        kept.push((e, rec));
                        code
                    }
                    Err(AggregateError::NoAnnotations) => "no_annotations".into(),
                    Err(AggregateError::Unlabelable { .. }) => "unlabelable".into(),
                };
            }
        }
        decisions.push(row);
    }
    run.write("decisions.csv", &csv_bytes(&["id", "filter", "gate", "aggregation"], decisions)?)?;

    let mut examples: Vec<LabeledExample> = kept.iter().map(|(e, _)| e.clone()).collect();
    build_splits(&mut examples, cfg.parse_value("prepare.val_size")?, cfg.parse_value("prepare.test_size")?, seed)?;
    for split in [Split::Train, Split::Val, Split::Test] {
        let records: Vec<TweetRecord> = examples
            .iter()
            .zip(&kept)
            .filter(|(e, _)| e.split == Some(split))
            .map(|(_, (_, r))| r.clone())
            .collect();
        let path = run.path(&format!("{}.jsonl", split.as_str()));
        crate::dataset::export_corpus(&path, &records)?;
        run.record(&format!("{}.jsonl", split.as_str()))?;
    }

    let streams: Vec<Vec<String>> = examples
        .iter()
        .zip(&kept)
        .filter(|(e, _)| e.split == Some(Split::Train))
        .flat_map(|(_, (_, r))| [preprocess_tweet_text(&r.tweet_text), preprocess_tweet_text(&r.image_text)])
        .collect();
    let vocab = Vocabulary::build(streams.iter().map(Vec::as_slice), cfg.parse_value("prepare.min_vocab_count")?);
    run.write("vocab.txt", vocab.to_file_string().as_bytes())?;

    run.write(
        "splits.csv",
        &csv_bytes(
            &["id", "label", "category", "split", "binary_tie"],
            examples.iter().map(|e| {
                [
                    e.id.clone(),
                    e.label.to_string(),
                    e.category.as_str().to_string(),
                    e.split.map_or("", Split::as_str).to_string(),
                    e.binary_tie.to_string(),
                ]
            }),
        )?,
    )?;
    run.write(
        "split_counts.csv",
        &csv_bytes(
            &["split", "hate", "not_hate", "total"],
            [Split::Train, Split::Val, Split::Test].map(|s| {
                let c = split_counts(&examples, s);
                [s.as_str().to_string(), c.hate.to_string(), c.not_hate.to_string(), c.total().to_string()]
            }),
        )?,
    )?;
    let dist = class_distribution(&category_counts(&examples), None);
    run.write_with("class_distribution.csv", |buf| write_distribution_csv(buf, &dist))?;
    if !rules.keyword_list.is_empty() {
        let rates = keyword_hate_rates(&examples, &rules.keyword_list);
        run.write_with("keyword_rates.csv", |buf| write_keyword_csv(buf, &rates))?;
    }
    println!(
        "prepare: {} records, {} kept, {} in train",
        imported.records.len(),
        examples.len(),
        split_counts(&examples, Split::Train).total()
    );
    Ok(())
}

fn synth(cfg: &Config, run: &mut Run) -> Result<()> {
    let spec = cfg.synth_spec()?;
    run.seed("synth.seed", spec.seed);
    let corpus = generate(&spec)?;
    write_corpus(&run.out, &spec, &corpus)?;
    for rel in ["train.jsonl", "val.jsonl", "test.jsonl", "vocab.txt"] {
        run.record(rel)?;
    }
    run.record_dir("images")?;
    println!(
        "synth: {} {} / {} / {} examples",
        spec.mode,
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len()
    );
    Ok(())
}

fn load_vocab(cfg: &Config, run: &mut Run) -> Result<Vocabulary> {
    let path = cfg.require_path("data.dir")?.join("vocab.txt");
    let vocab = Vocabulary::load(&path)?;
    run.input(&path)?;
    Ok(vocab)
}

/// Samples of one split; `None` if the split file is absent.
fn load_split(cfg: &Config, run: &mut Run, vocab: &Vocabulary, split: Split) -> Result<Option<Vec<Sample>>> {
    let dir = cfg.require_path("data.dir")?;
    let path = dir.join(format!("{}.jsonl", split.as_str()));
    if !path.exists() {
        return Ok(None);
    }
    let imported = import_corpus(&path)?;
    if let Some(d) = imported.diagnostics.first() {
        return Err(Error::Data(format!("{}: {d}", path.display())));
    }
    run.input(&path)?;
    samples_from_records(&imported.records, vocab, dir, cfg.min_duration()?).map(Some)
}

fn build_model(cfg: &Config, vocab: &Vocabulary) -> Result<FusionModel> {
    FusionModel::new(cfg.model_config(vocab.len())?)
}

fn initial_params(cfg: &Config, run: &mut Run, model: &FusionModel, vocab: &Vocabulary, seed: u64) -> Result<ParamStore> {
    let mut store = model.init(seed);
    if let Some(path) = cfg.path("model.embeddings") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        run.input(path)?;
        let imported = parse_embeddings(&text)?;
        let tables: Vec<String> = store
            .iter()
            .filter(|(n, _)| n.ends_with(".embedding"))
            .map(|(n, _)| n.to_string())
            .collect();
        for name in tables {
            let hits = apply_embeddings(store.get_mut(&name)?, vocab, &imported)?;
            eprintln!("{name}: {hits} of {} words from pretrained vectors", vocab.len());
        }
    }
    if let Some(path) = cfg.path("model.init_checkpoint") {
        let ckpt = ParamStore::load(path)?;
        run.input(path)?;
        let copied = store.load_matching(&ckpt)?;
        if copied == 0 {
            return Err(Error::Data(format!("{}: no parameter matches the model", path.display())));
        }
    }
    Ok(store)
}

pub(super) const CHECKPOINT_FILE: &str = "checkpoint.mfuse";

fn train_verb(cfg: &Config, run: &mut Run) -> Result<()> {
    let vocab = load_vocab(cfg, run)?;
    let train_set = load_split(cfg, run, &vocab, Split::Train)?
        .ok_or_else(|| Error::Data("data.dir has no train.jsonl".into()))?;
    let val_set = load_split(cfg, run, &vocab, Split::Val)?.unwrap_or_default();
    let model = build_model(cfg, &vocab)?;
    let tc = cfg.train_config()?;
    run.seed("train.seed", tc.seed);
    let init = initial_params(cfg, run, &model, &vocab, tc.seed)?;
    let outcome = train(&model, init, &train_set, &val_set, &tc)?;
    run.write_with("history.csv", |buf| outcome.history.write_csv(buf))?;
    run.write(CHECKPOINT_FILE, outcome.params.to_checkpoint_string().as_bytes())?;
    if let Some(d) = outcome.diverged {
        return Err(Error::Numeric(d.message));
    }
    let best = outcome.best.map_or("-".to_string(), |b| format!("{:.4} at step {}", b.val_auc, b.step));
    println!(
        "train: {} {} steps in {:.1}s, best val AUC {best}",
        model.config.kind,
        outcome.history.steps.len(),
        outcome.history.wall_clock_seconds
    );
    Ok(())
}

fn model_name(cfg: &Config) -> Result<String> {
    let name = cfg.get("eval.name");
    if !name.is_empty() {
        return Ok(name.to_string());
    }
    Ok(cfg.parse_value::<ModelKind>("model.variant")?.as_str().to_uppercase())
}

pub(super) const METRICS_FILE: &str = "metrics.csv";
const METRICS_HEADER: [&str; 7] = ["model", "inputs", "f1_at_half", "max_f1", "best_threshold", "auc", "balanced_accuracy"];

fn eval_verb(cfg: &Config, run: &mut Run) -> Result<ResultRow> {
    let vocab = load_vocab(cfg, run)?;
    let split = match cfg.get("eval.split") {
        "train" => Split::Train,
        "val" => Split::Val,
        "test" => Split::Test,
        other => return Err(Error::Config(format!("unknown split `{other}` (train|val|test)"))),
    };
    let samples = load_split(cfg, run, &vocab, split)?
        .ok_or_else(|| Error::Data(format!("data.dir has no {}.jsonl", split.as_str())))?;
    let model = build_model(cfg, &vocab)?;
    let ckpt_path = cfg.require_path("eval.checkpoint")?;
    let ckpt = ParamStore::load(ckpt_path)?;
    run.input(ckpt_path)?;
    let mut params = model.init(0);
    let mismatch = |detail: String| Error::Config(format!("{} does not match the configured model: {detail}", ckpt_path.display()));
    let copied = params.load_matching(&ckpt).map_err(|e| mismatch(e.to_string()))?;
    if copied != params.len() || ckpt.len() != params.len() {
        return Err(mismatch(format!("{copied} of {} entries shared", params.len())));
    }
    let mask: InputMask = cfg.parse_value("train.inputs")?;
    let scored = score_dataset(&model, &params, &samples, mask, cfg.parse_value("eval.batch_size")?)?;
    run.write(
        "scores.csv",
        &csv_bytes(
            &["id", "label", "score"],
            scored.iter().map(|s| [s.id.clone(), u8::from(s.label).to_string(), s.score.to_string()]),
        )?,
    )?;
    let report = evaluate(&scored)?;
    let row = ResultRow::from_report(model_name(cfg)?, mask.to_string(), &report);
    write_eval_outputs(run, &row, &report)?;
    print!("{}", results_table(vec![row.clone()])?.to_text());
    Ok(row)
}

fn write_eval_outputs(run: &mut Run, row: &ResultRow, report: &EvalReport) -> Result<()> {
    run.write(
        METRICS_FILE,
        &csv_bytes(
            &METRICS_HEADER,
            [[
                row.model.clone(),
                row.inputs.clone(),
                report.f1_at_half.to_string(),
                report.max_f1.to_string(),
                report.best_threshold.to_string(),
                report.auc.to_string(),
                report.balanced_accuracy.to_string(),
            ]],
        )?,
    )?;
    run.write_with("pr.csv", |buf| write_curve_csv(buf, &report.curves.pr))?;
    run.write_with("roc.csv", |buf| write_curve_csv(buf, &report.curves.roc))?;
    Ok(())
}

fn write_table(run: &mut Run, table: &ResultsTable) -> Result<()> {
    run.write("results.csv", table.to_csv().as_bytes())?;
    run.write("results.txt", table.to_text().as_bytes())?;
    Ok(())
}

/// Reads the row of a `metrics.csv`.
fn read_metrics(path: &Path) -> Result<ResultRow> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Data(format!("{}: unexpected header", path.display())));
    }
    let rec = r
        .records()
        .next()
        .ok_or_else(|| Error::Data(format!("{}: no metrics row", path.display())))?
        .map_err(csv_err)?;
    let num = |i: usize| -> Result<f64> {
        rec[i]
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad number `{}`", path.display(), &rec[i])))
    };
    Ok(ResultRow {
        model: rec[0].to_string(),
        inputs: rec[1].to_string(),
        f: num(3)?,
        auc: num(5)?,
        acc: num(6)?,
    })
}

fn arm_slug(mask: InputMask) -> String {
    mask.to_string().replace(',', "_").to_lowercase()
}

fn ablate(cfg: &Config, run: &mut Run) -> Result<()> {
    let mut rows = Vec::new();
    for mask in InputMask::ABLATION {
        let slug = arm_slug(mask);
        let dir = run.path(&format!("arms/{slug}"));
        let mut arm_cfg = cfg.clone();
        arm_cfg.set("train.inputs", &mask.to_string())?;
        let (train_dir, eval_dir) = (dir.join("train"), dir.join("eval"));
        arm_cfg.set("eval.checkpoint", &train_dir.join(CHECKPOINT_FILE).to_string_lossy())?;

        let train_m = resume_or(&train_dir, &arm_cfg, |c| dispatch(Verb::Train, c, &train_dir))?;
        let eval_m = resume_or(&eval_dir, &arm_cfg, |c| dispatch(Verb::Eval, c, &eval_dir))?;
        run.absorb(&format!("arms/{slug}/train"), &train_m);
        run.absorb(&format!("arms/{slug}/eval"), &eval_m);
        rows.push(read_metrics(&eval_dir.join(METRICS_FILE))?);
    }
    let table = results_table(rows)?;
    write_table(run, &table)?;
    print!("{}", table.to_text());
    Ok(())
}

/// Reuses a complete run in `dir` made with the same configuration.
fn resume_or<F>(dir: &Path, cfg: &Config, f: F) -> Result<Manifest>
where
    F: FnOnce(&Config) -> Result<Manifest>,
{
    if let Ok(m) = Manifest::load(&dir.join(MANIFEST_FILE)) {
        let same = m.config.iter().map(|(k, v)| (k.as_str(), v.as_str())).eq(cfg.iter());
        if m.complete && same {
            eprintln!("ablate: reusing {}", dir.display());
            return Ok(m);
        }
    }
    f(cfg)
}

fn gradcheck(cfg: &Config, run: &mut Run) -> Result<()> {
    let eps: f64 = cfg.parse_value("gradcheck.eps")?;
    let tolerance: f64 = cfg.parse_value("gradcheck.tolerance")?;
    let draws: usize = cfg.parse_value("gradcheck.draws")?;
    let per_tensor: usize = cfg.parse_value("gradcheck.per_tensor")?;
    let seed = cfg.seed()?;
    run.seed("seed", seed);
    let mut rows: Vec<[String; 6]> = Vec::new();
    let status = |ok: bool| if ok { "PASS" } else { "FAIL" }.to_string();
    for c in check_all_primitives(draws, eps, seed)? {
        let ok = c.passes(tolerance);
        rows.push([
            "primitive".into(),
            c.name.into(),
            format!("{:.3e}", c.max_rel_error),
            c.coords_checked.to_string(),
            c.kinks_avoided.to_string(),
            status(ok),
        ]);
    }
    for kind in ModelKind::ALL {
        let mut c = cfg.clone();
        c.set("model.variant", kind.as_str())?;
        let r = gradcheck_variant(c.model_config(GRADCHECK_VOCAB)?, eps, per_tensor, seed)?;
        let ok = r.passes(tolerance);
        rows.push([
            "model".into(),
            kind.as_str().into(),
            format!("{:.3e}", r.max_rel_error),
            r.coords_checked.to_string(),
            r.kinks_avoided.to_string(),
            status(ok),
        ]);
    }
    for r in &rows {
        println!("{} {:<9} {:<24} max rel error {} over {} coordinates", r[5], r[0], r[1], r[2], r[3]);
    }
    let failed = rows.iter().filter(|r| r[5] != "PASS").count();
    println!("gradcheck: {} checks, {failed} failed", rows.len());
    run.write(
        "gradcheck.csv",
        &csv_bytes(&["kind", "name", "max_rel_error", "coords", "kinks_avoided", "status"], rows)?,
    )?;
    if failed > 0 {
        return Err(Error::Numeric(format!("{failed} gradient checks exceed {tolerance}")));
    }
    Ok(())
}

fn report(cfg: &Config, run: &mut Run) -> Result<()> {
    let mut rows = Vec::new();
    let random_n: usize = cfg.parse_value("report.random_n")?;
    if random_n > 0 {
        let seed = cfg.seed()?;
        run.seed("seed", seed);
        let r = evaluate(&random_scores(random_n, seed)?)?;
        rows.push(ResultRow::from_report("Random", "-", &r));
    }
    for dir in cfg.get("report.runs").split(',').filter(|d| !d.is_empty()) {
        let path = Path::new(dir).join(METRICS_FILE);
        rows.push(read_metrics(&path)?);
        run.input(&path)?;
    }
    let table = results_table(rows)?;
    write_table(run, &table)?;
    print!("{}", table.to_text());
    Ok(())
}
