//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so criteria execute one after another
//! and wall-clock limits are measured on an otherwise idle core. Pass
//! criterion numbers as arguments to run a subset.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{self, Command};
use std::time::{Duration, Instant};

use mfuse::autodiff::{check_all_primitives, Graph, Mode, ParamStore, Tensor};
use mfuse::dataset::{
    build_splits, class_distribution, category_counts, keyword_hate_rates, split_counts,
    write_distribution_csv, write_keyword_csv, Split,
};
use mfuse::evaluation::{auc_roc, balanced_accuracy, evaluate, f_scores, random_scores, score_dataset};
use mfuse::fusion::{
    fcm_forward, gradcheck_variant, init_conv_tail, init_fc_head, init_kernel_generators,
    scm_forward, tkm_forward, FusionModel, FusionModelConfig, InputMask, ModelKind, Trace,
};
use mfuse::layers::Ctx;
use mfuse::synth::{generate, synth_vocabulary, to_samples, SynthMode, SynthSpec};
use mfuse::training::{class_weights, collate, train, Sample, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Check = fn() -> Result<String, String>;

const TOL_GRAD: f64 = 1e-4;
const EPS_GRAD: f64 = 1e-5;
const GRADCHECK_VOCAB: usize = 30;
const LR: f64 = 1e-3;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn c1_gradients() -> Result<String, String> {
    let start = Instant::now();
    let prims = check_all_primitives(100, EPS_GRAD, 0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for c in &prims {
        worst = worst.max(c.max_rel_error);
        if !c.passes(TOL_GRAD) {
            failed.push(format!("{} {:.2e}", c.name, c.max_rel_error));
        }
    }
    for kind in [ModelKind::Fcm, ModelKind::Scm, ModelKind::Tkm, ModelKind::Lstm] {
        let cfg = FusionModelConfig::desk(kind, GRADCHECK_VOCAB);
        let r = gradcheck_variant(cfg, EPS_GRAD, 8, 0).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_rel_error);
        if !r.passes(TOL_GRAD) {
            failed.push(format!("{kind} {:.2e}", r.max_rel_error));
        }
    }
    let took = start.elapsed();
    ensure(failed.is_empty(), || format!("above {TOL_GRAD}: {}", failed.join(", ")))?;
    ensure(took < Duration::from_secs(120), || format!("took {}", secs(took)))?;
    Ok(format!(
        "{} primitives x 100 draws and 4 desk models, worst rel. error {worst:.2e}, {}",
        prims.len(),
        secs(took)
    ))
}

fn c2_metric_oracles() -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        let s = random_instance(seed);
        let e = |msg: mfuse::Error| format!("instance {seed}: {msg}");
        let f = f_scores(&s).map_err(e)?;
        let threshold = ChaCha8Rng::seed_from_u64(seed ^ 0xabc).random::<f64>();
        let pairs = [
            (auc_roc(&s).map_err(e)?, oracle_auc(&s)),
            (f.max_f1, oracle_max_f1(&s)),
            (f.f1_at_half, oracle_f1(&s, 0.5)),
            (balanced_accuracy(&s, 0.5).map_err(e)?, oracle_balanced_accuracy(&s, 0.5)),
            (balanced_accuracy(&s, threshold).map_err(e)?, oracle_balanced_accuracy(&s, threshold)),
        ];
        for (i, (got, want)) in pairs.into_iter().enumerate() {
            let d = (got - want).abs();
            worst = worst.max(d);
            ensure(d <= 1e-12, || format!("instance {seed} metric {i}: {got} vs oracle {want}"))?;
        }
    }
    Ok(format!("200 instances, largest deviation {worst:.1e}"))
}

fn c3_random_row() -> Result<String, String> {
    let start = Instant::now();
    let scored = random_scores(10_000, 0).map_err(|e| e.to_string())?;
    let r = evaluate(&scored).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let line = format!(
        "max_f1 {:.4}, AUC {:.4}, balanced ACC {:.2}, {}",
        r.max_f1,
        r.auc,
        r.balanced_accuracy,
        secs(took)
    );
    ensure((r.max_f1 - 0.667).abs() <= 0.005, || line.clone())?;
    ensure((r.auc - 0.5).abs() <= 0.02, || line.clone())?;
    ensure((r.balanced_accuracy - 50.0).abs() <= 1.0, || line.clone())?;
    ensure(took < Duration::from_secs(10), || line.clone())?;
    Ok(line)
}

/// Runs the fusion heads at full-size dimensions on a stand-in visual map
/// and returns the shape of every traced intermediate.
fn paper_head_shapes(kind: ModelKind) -> Result<Vec<(&'static str, Vec<usize>)>, String> {
    let cfg = FusionModelConfig::paper(kind, 100);
    let shapes = cfg.shapes();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    match kind {
        ModelKind::Fcm => init_fc_head(&mut store, &cfg, shapes.concat_len, &mut rng),
        ModelKind::Scm => init_conv_tail(&mut store, &cfg, shapes.scm_fused_map[2], &mut rng),
        ModelKind::Tkm => {
            init_kernel_generators(&mut store, &cfg, &mut rng);
            init_conv_tail(&mut store, &cfg, shapes.tkm_fused_map[2], &mut rng);
        }
        ModelKind::Lstm => unreachable!(),
    }
    let (s, d, h) = (cfg.map_side(), cfg.d_v(), cfg.hidden());
    let mut g = Graph::new(0);
    let mut ctx = Ctx::new(&store, Mode::Eval, cfg.dropout_rate);
    let map = g.constant(Tensor::uniform(&[1, s, s, d], 0.0, 1.0, &mut rng));
    let pooled = g.constant(Tensor::uniform(&[1, d], 0.0, 1.0, &mut rng));
    let tt = g.constant(Tensor::uniform(&[1, h], -1.0, 1.0, &mut rng));
    let it = g.constant(Tensor::uniform(&[1, h], -1.0, 1.0, &mut rng));
    let mut trace = Trace::default();
    let logits = match kind {
        ModelKind::Fcm => fcm_forward(&mut ctx, &mut g, &cfg, pooled, tt, it, &mut trace),
        ModelKind::Scm => scm_forward(&mut ctx, &mut g, &cfg, map, tt, it, &mut trace),
        _ => tkm_forward(&mut ctx, &mut g, &cfg, map, tt, it, &mut trace),
    }
    .map_err(|e| e.to_string())?;
    ensure(g.value(logits).shape() == [1, 2], || format!("{kind} logits {:?}", g.value(logits).shape()))?;
    // inputs of the wrong size are refused before any arithmetic
    let refused = match kind {
        ModelKind::Fcm => {
            let short = g.constant(Tensor::zeros(&[1, d - 1]));
            fcm_forward(&mut ctx, &mut g, &cfg, short, tt, it, &mut Trace::default()).is_err()
        }
        _ => {
            let shallow = g.constant(Tensor::zeros(&[1, s, s, d - 1]));
            scm_forward(&mut ctx, &mut g, &cfg, shallow, tt, it, &mut Trace::default()).is_err()
                && tkm_forward(&mut ctx, &mut g, &cfg, shallow, tt, it, &mut Trace::default()).is_err()
        }
    };
    ensure(refused, || format!("{kind} accepted a mis-shaped visual input"))?;
    Ok(trace
        .names()
        .map(|n| (n, g.value(trace.get(n).expect("listed")).shape().to_vec()))
        .collect())
}

fn traced(kind: ModelKind, name: &str) -> Result<Vec<usize>, String> {
    paper_head_shapes(kind)?
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
        .ok_or_else(|| format!("{kind} did not trace `{name}`"))
}

fn c4_paper_shapes() -> Result<String, String> {
    let fcm = FusionModelConfig::paper(ModelKind::Fcm, 100).shapes();
    let tkm = FusionModelConfig::paper(ModelKind::Tkm, 100).shapes();
    ensure(fcm.concat_len == 2348, || format!("formula concat {}", fcm.concat_len))?;
    ensure(tkm.multimodal_map == [8, 8, 15], || format!("formula map {:?}", tkm.multimodal_map))?;
    ensure(tkm.tkm_fused_map == [8, 8, 315], || format!("formula fused {:?}", tkm.tkm_fused_map))?;
    let concat = traced(ModelKind::Fcm, "concat")?;
    ensure(concat == [1, 2348], || format!("FCM concat {concat:?}"))?;
    let mm = traced(ModelKind::Tkm, "multimodal_map")?;
    ensure(mm == [1, 8, 8, 15], || format!("TKM multimodal map {mm:?}"))?;
    let fused = traced(ModelKind::Tkm, "fused_map")?;
    ensure(fused == [1, 8, 8, 315], || format!("TKM fused map {fused:?}"))?;
    let scm = traced(ModelKind::Scm, "fused_map")?;
    ensure(scm == [1, 8, 8, 2348], || format!("SCM fused map {scm:?}"))?;
    Ok("FCM concat 2348, TKM 8x8x15 -> 8x8x315, SCM 8x8x2348".into())
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize) -> Vec<usize> {
    let len = rng.random_range(0..8);
    (0..len).map(|_| rng.random_range(0..vocab)).collect()
}

fn eval_logits(model: &FusionModel, params: &ParamStore, samples: &[Sample], mask: InputMask) -> Vec<f64> {
    let members: Vec<&Sample> = samples.iter().collect();
    let batch = collate(&model.config, &members, Mode::Eval, 0).expect("collate");
    let mut g = Graph::new(0);
    let mut ctx = Ctx::new(params, Mode::Eval, model.config.dropout_rate);
    let out = model.forward(&mut ctx, &mut g, &batch, mask).expect("forward");
    g.value(out.logits).data().to_vec()
}

fn c5_masked_invariance() -> Result<String, String> {
    const VOCAB: usize = 30;
    const PAIRS: usize = 100;
    let mut sensitive = 0;
    for kind in ModelKind::ALL {
        let model = FusionModel::new(FusionModelConfig::desk(kind, VOCAB)).map_err(|e| e.to_string())?;
        let params = model.init(11);
        let side = model.config.backbone.geometry.resize_shortest;
        let masks: &[InputMask] = if kind == ModelKind::Lstm {
            &[InputMask::TT, InputMask::TT_IT, InputMask::ALL]
        } else {
            &[InputMask::TT, InputMask::TT_IT, InputMask::I]
        };
        let mut rng = ChaCha8Rng::seed_from_u64(kind as u64 + 1);
        for (m, &mask) in masks.iter().enumerate() {
            let count = PAIRS / masks.len() + usize::from(m < PAIRS % masks.len());
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for i in 0..count {
                let base = Sample {
                    id: format!("p{i}"),
                    image: Some(Tensor::uniform(&[side, side, 3], 0.0, 1.0, &mut rng)),
                    tweet: random_tokens(&mut rng, VOCAB),
                    image_text: random_tokens(&mut rng, VOCAB),
                    label: i % 2,
                };
                let mut other = base.clone();
                // the text-only model never reads the image or the image text
                let lstm = kind == ModelKind::Lstm;
                if !mask.image || lstm {
                    other.image = Some(Tensor::uniform(&[side, side, 3], 0.0, 1.0, &mut rng));
                }
                if !mask.image_text || lstm {
                    other.image_text = random_tokens(&mut rng, VOCAB);
                    other.image_text.push(VOCAB - 1);
                }
                if !mask.tweet_text {
                    other.tweet = random_tokens(&mut rng, VOCAB);
                    other.tweet.push(VOCAB - 1);
                }
                a.push(base);
                b.push(other);
            }
            let (la, lb) = (eval_logits(&model, &params, &a, mask), eval_logits(&model, &params, &b, mask));
            let same = la.iter().zip(&lb).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure(same, || format!("{kind} with inputs {mask}: logits changed with masked content"))?;
            // the same content change is visible once the input is enabled
            if kind != ModelKind::Lstm {
                let full = eval_logits(&model, &params, &a, InputMask::ALL) != eval_logits(&model, &params, &b, InputMask::ALL);
                ensure(full, || format!("{kind}: content change invisible with all inputs"))?;
                sensitive += 1;
            }
        }
    }
    Ok(format!("{PAIRS} pairs for each of 4 variants bitwise equal; {sensitive} control sets differ unmasked"))
}

struct Experiment {
    mode: SynthMode,
    noise: f64,
    multimodal_fraction: f64,
    side: usize,
    desk: bool,
    kind: ModelKind,
    mask: InputMask,
}

impl Experiment {
    fn xor(kind: ModelKind, mask: InputMask, desk: bool) -> Self {
        Self {
            mode: SynthMode::CrossmodalXor,
            noise: 0.0,
            multimodal_fraction: 1.0,
            side: if desk { 64 } else { 16 },
            desk,
            kind,
            mask,
        }
    }

    /// Test balanced accuracy after one epoch.
    fn run(&self) -> Result<f64, String> {
        let spec = SynthSpec {
            mode: self.mode,
            label_noise: self.noise,
            multimodal_fraction: self.multimodal_fraction,
            image_side: self.side,
            n_train: 8000,
            n_val: 500,
            n_test: 2000,
            ..SynthSpec::default()
        };
        let corpus = generate(&spec).map_err(|e| e.to_string())?;
        let vocab = synth_vocabulary(&spec);
        let cfg = if self.desk {
            FusionModelConfig::desk(self.kind, vocab.len())
        } else {
            FusionModelConfig::synth(self.kind, vocab.len(), self.side)
        };
        let model = FusionModel::new(cfg).map_err(|e| e.to_string())?;
        let (tr, va, te) = (
            to_samples(&corpus.train, &vocab),
            to_samples(&corpus.val, &vocab),
            to_samples(&corpus.test, &vocab),
        );
        let tc = TrainConfig { lr: LR, epochs: 1, seed: 1, mask: self.mask, ..TrainConfig::default() };
        let out = train(&model, model.init(1), &tr, &va, &tc).map_err(|e| e.to_string())?;
        if let Some(d) = out.diverged {
            return Err(format!("{} diverged: {}", self.kind, d.message));
        }
        let scored = score_dataset(&model, &out.params, &te, self.mask, 64).map_err(|e| e.to_string())?;
        balanced_accuracy(&scored, 0.5).map_err(|e| e.to_string())
    }
}

fn c6_crossmodal_learnability() -> Result<String, String> {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    let runs: [(&str, Experiment, bool, f64); 6] = [
        ("TKM", Experiment::xor(ModelKind::Tkm, InputMask::ALL, true), true, 95.0),
        ("SCM", Experiment::xor(ModelKind::Scm, InputMask::ALL, true), true, 95.0),
        ("FCM", Experiment::xor(ModelKind::Fcm, InputMask::ALL, true), true, 90.0),
        ("text-only", Experiment::xor(ModelKind::Lstm, InputMask::TT, true), false, 55.0),
        ("image-only", Experiment::xor(ModelKind::Fcm, InputMask::I, true), false, 55.0),
        (
            "text LSTM on unimodal_text",
            Experiment { mode: SynthMode::UnimodalText, ..Experiment::xor(ModelKind::Lstm, InputMask::TT, true) },
            true,
            95.0,
        ),
    ];
    for (name, exp, at_least, bound) in runs {
        let acc = exp.run()?;
        let ok = if at_least { acc >= bound } else { acc <= bound };
        let rel = if at_least { ">=" } else { "<=" };
        lines.push(format!("{name} {acc:.1}"));
        if !ok {
            failures.push(format!("{name} {acc:.2} not {rel} {bound}"));
        }
    }
    let took = start.elapsed();
    if took > Duration::from_secs(600) {
        failures.push(format!("took {}", secs(took)));
    }
    let summary = format!("{}, {}", lines.join(", "), secs(took));
    ensure(failures.is_empty(), || format!("{}; {summary}", failures.join("; ")))?;
    Ok(summary)
}

fn monotone_down(acc: &[f64], jitter: f64) -> bool {
    acc.windows(2).all(|w| w[1] <= w[0] + jitter) && acc[acc.len() - 1] < acc[0]
}

fn c7_degradation() -> Result<String, String> {
    let base = || Experiment::xor(ModelKind::Tkm, InputMask::ALL, false);
    let noise: Vec<f64> = [0.0, 0.1, 0.2, 0.3]
        .into_iter()
        .map(|noise| Experiment { noise, ..base() }.run())
        .collect::<Result<_, _>>()?;
    let fraction: Vec<f64> = [1.0, 0.7, 0.4, 0.1]
        .into_iter()
        .map(|multimodal_fraction| Experiment { multimodal_fraction, ..base() }.run())
        .collect::<Result<_, _>>()?;
    let text = Experiment::xor(ModelKind::Lstm, InputMask::TT, false).run()?;
    let image = Experiment::xor(ModelKind::Fcm, InputMask::I, false).run()?;
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.1}")).collect::<Vec<_>>().join(" ");
    let summary = format!(
        "noise 0..0.3: {}; multimodal fraction 1..0.1: {}; text-only {text:.1}, image-only {image:.1}",
        fmt(&noise),
        fmt(&fraction)
    );
    ensure(monotone_down(&noise, 2.0), || format!("noise sweep not decreasing; {summary}"))?;
    ensure(monotone_down(&fraction, 2.0), || format!("fraction sweep not decreasing; {summary}"))?;
    let last = fraction[3];
    ensure((last - text).abs() <= 5.0 && (last - image).abs() <= 5.0, || {
        format!("fraction 0.1 not within 5 points of the unimodal models; {summary}")
    })?;
    Ok(summary)
}

fn c8_fixture() -> Result<String, String> {
    let replay = replay_fixture();
    ensure(replay.decisions == read_rows(&expected("decisions.csv")), || "filter/gate/aggregation decisions differ".into())?;
    ensure(label_rows(&replay.examples) == read_rows(&expected("labels.csv")), || "aggregated labels differ".into())?;
    let fast_hit = replay.examples.iter().any(|e| e.id == "f21" && e.retained_votes() == 2);
    let tie = replay.examples.iter().any(|e| e.id == "f22" && e.binary_tie);
    ensure(fast_hit && tie, || "fixture lost its fast-hit or tie record".into())?;

    let mut examples = replay.examples.clone();
    build_splits(&mut examples, FIXTURE_VAL, FIXTURE_TEST, FIXTURE_SPLIT_SEED).map_err(|e| e.to_string())?;
    ensure(examples.iter().all(|e| e.split.is_some()), || "an example has no split".into())?;
    let counts: Vec<Vec<String>> = [Split::Train, Split::Val, Split::Test]
        .iter()
        .map(|&s| {
            let c = split_counts(&examples, s);
            vec![s.as_str().into(), c.hate.to_string(), c.not_hate.to_string(), c.total().to_string()]
        })
        .collect();
    ensure(counts == read_rows(&expected("split_counts.csv")), || format!("split counts {counts:?}"))?;

    let mut kw = Vec::new();
    write_keyword_csv(&mut kw, &keyword_hate_rates(&examples, &fixture_rules().keyword_list)).map_err(|e| e.to_string())?;
    ensure(kw == fs::read(expected("keyword_rates.csv")).unwrap(), || "keyword rates differ".into())?;
    let mut dist = Vec::new();
    write_distribution_csv(&mut dist, &class_distribution(&category_counts(&examples), None)).map_err(|e| e.to_string())?;
    ensure(dist == fs::read(expected("class_distribution.csv")).unwrap(), || "class distribution differs".into())?;

    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = fixture_dir();
    let status = Command::new(env!("CARGO_BIN_EXE_mfuse"))
        .arg("prepare")
        .arg("--config")
        .arg(dir.join("prepare.cfg"))
        .arg("--out")
        .arg(out.path())
        .arg(format!("prepare.input={}", dir.join("corpus.jsonl").display()))
        .current_dir(&dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
    for name in ["decisions.csv", "split_counts.csv", "keyword_rates.csv", "class_distribution.csv"] {
        let same = fs::read(out.path().join(name)).ok() == fs::read(expected(name)).ok();
        ensure(same, || format!("mfuse prepare wrote a different {name}"))?;
    }

    // not hate, hate
    let w = class_weights(&[112_845, 36_978]).map_err(|e| e.to_string())?;
    ensure((2.025..=2.027).contains(&w[1]) && (0.663..=0.665).contains(&w[0]), || format!("weights {w:?}"))?;
    Ok(format!(
        "60 records, {} labeled, splits 24/8/12, CLI outputs identical, w_hate {:.4}, w_not {:.4}",
        examples.len(),
        w[1],
        w[0]
    ))
}

fn mfuse(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mfuse"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("mfuse {} exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr))
    })
}

fn c9_manifest_rerun() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    mfuse(&["synth", "--out", "corpus", "synth.n_train=200", "synth.n_val=40", "synth.n_test=40", "seed=3"], root)?;
    mfuse(
        &["train", "--out", "run1", "data.dir=corpus", "model.profile=synth", "train.lr=0.001", "train.epochs=2", "seed=3"],
        root,
    )?;
    let first = mfuse::cli::Manifest::load(&root.join("run1/manifest.json")).map_err(|e| e.to_string())?;
    mfuse(&["train", "--manifest", "run1/manifest.json", "--out", "run2"], root)?;
    let hash = |dir: &str| mfuse::cli::sha256_file(&root.join(dir).join("checkpoint.mfuse")).map_err(|e| e.to_string());
    let (a, b) = (hash("run1")?, hash("run2")?);
    ensure(a == b, || format!("checkpoint {a} vs rerun {b}"))?;
    ensure(first.artifacts.get("checkpoint.mfuse") == Some(&a), || "manifest hash differs from the file".into())?;
    Ok(format!("checkpoint sha256 {}... reproduced", &a[..16]))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("gradient checks", c1_gradients),
        ("metric oracles", c2_metric_oracles),
        ("random baseline row", c3_random_row),
        ("full-size shapes", c4_paper_shapes),
        ("masked-modality invariance", c5_masked_invariance),
        ("cross-modal learnability", c6_crossmodal_learnability),
        ("degradation sweeps", c7_degradation),
        ("dataset pipeline fixture", c8_fixture),
        ("manifest rerun determinism", c9_manifest_rerun),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match result {
            Ok(detail) => println!("PASS {n} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n} {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        process::exit(1);
    }
}
