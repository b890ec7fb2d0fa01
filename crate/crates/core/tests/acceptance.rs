//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hob2srnn::attention::{attend, AttentionMode, AttentionParams};
use hob2srnn::data::{split_grouped, synth_generate, Dataset, SegmentSample, SynthSpec, DEFAULT_FRACTIONS};
use hob2srnn::fcgru::{CandidateInput, Enrichment, FcgruConfig, FcgruParams};
use hob2srnn::hierarchy::{pretrain_transfer, ClassHierarchy};
use hob2srnn::model::{combine_scores, Checkpoint, Hob2srnnModel, ModelConfig, Pass, Sources};
use hob2srnn::numkernel::{finite_diff_grad, max_relative_error, Matrix, Parameters, SeededRng};
use hob2srnn::traineval::{
    export_attention, init_model, multi_run, run_once, train, Ablation, MetricsReport, TrainConfig, Variant,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut SeededRng) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| scale * rng.normal()).collect()).unwrap()
}

fn random_sample(t_r: usize, c_r: usize, t_o: usize, c_o: usize, label: usize, rng: &mut SeededRng) -> SegmentSample {
    SegmentSample {
        id: "x".into(),
        group: "g".into(),
        radar: random_matrix(t_r, c_r, 1.0, rng),
        optical: random_matrix(t_o, c_o, 1.0, rng),
        label,
    }
}

fn small_config(sources: Sources) -> ModelConfig {
    ModelConfig {
        sources,
        radar_channels: 2,
        optical_channels: 3,
        hidden_units: 8,
        fc1_units: 4,
        fc2_units: 6,
        enrichment: Enrichment::FullyConnected,
        candidate_input: CandidateInput::Enriched,
        attention: AttentionMode::Tanh,
    }
}

fn small_train_config() -> TrainConfig {
    TrainConfig {
        epochs_per_level: 3,
        batch_size: 16,
        learning_rate: 1e-3,
        hidden_units: 8,
        fc1_units: 4,
        fc2_units: 6,
        ..TrainConfig::default()
    }
}

fn fixture_spec(segments: usize) -> SynthSpec {
    SynthSpec {
        segments,
        ..SynthSpec::default()
    }
}

fn fixture(segments: usize, seed: u64) -> Dataset {
    synth_generate(&fixture_spec(segments), &mut SeededRng::new(seed)).unwrap().dataset
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let model = Hob2srnnModel::new(small_config(Sources::Both), vec![3], 0, &mut SeededRng::new(1)).unwrap();
    let mut rng = SeededRng::new(2);
    let sample = random_sample(4, 2, 5, 3, 1, &mut rng);
    let out = model.forward(&sample, 0, Some(1), Pass::Record).unwrap();
    let analytic = model.backward(&out, 1.0).unwrap();
    let numeric = finite_diff_grad(
        |m: &Hob2srnnModel| m.forward(&sample, 0, Some(1), Pass::Eval).unwrap().loss.unwrap().l_total,
        &model,
        1e-5,
    )
    .map_err(|e| e.to_string())?;
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    let mut worst = (0.0, String::new());
    for ((a, n), name) in analytic.iter().zip(&numeric).zip(&names) {
        let err = max_relative_error(&[a], std::slice::from_ref(n), 1e-6);
        if err > worst.0 {
            worst = (err, name.clone());
        }
    }
    let elapsed = start.elapsed();
    check(worst.0 < 1e-4, || format!("max relative error {:.3e} in {}", worst.0, worst.1))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} tensors, max relative error {:.2e} ({}), {:.1?}",
        names.len(),
        worst.0,
        worst.1,
        elapsed
    ))
}

fn criterion_2() -> Outcome {
    let mut worst_loss: f64 = 0.0;
    let mut worst_score: f64 = 0.0;
    let mut steps = 0;
    let ds = fixture(60, 3);
    let cfg = TrainConfig {
        epochs_per_level: 2,
        ..small_train_config()
    };
    for seed in 0..3 {
        let r = run_once(&ds, &cfg, seed).map_err(|e| e.to_string())?;
        for rec in &r.outcome.log {
            let l = rec.loss;
            worst_loss = worst_loss.max((l.l_total - (0.5 * l.l_rad + 0.5 * l.l_opt + l.l_fused)).abs());
            steps += 1;
        }
        let norm = r.normalization.apply_dataset(&ds).unwrap();
        let mut rng = SeededRng::new(seed);
        for s in &norm.samples {
            let pass = Pass::Train { dropout: 0.4, rng: &mut rng };
            let out = r.outcome.model.forward(s, 2, Some(s.label), pass).unwrap();
            let l = out.loss.unwrap();
            worst_loss = worst_loss.max((l.l_total - (0.5 * l.l_rad + 0.5 * l.l_opt + l.l_fused)).abs());
            let sc = &out.scores;
            let (rad, opt) = (sc.rad.as_ref().unwrap(), sc.opt.as_ref().unwrap());
            for k in 0..sc.fused.len() {
                worst_score = worst_score.max((sc.combined[k] - (0.5 * rad[k] + 0.5 * opt[k] + sc.fused[k])).abs());
            }
            steps += 1;
        }
    }
    check(worst_loss <= 1e-12, || format!("loss identity off by {worst_loss:e}"))?;
    check(worst_score <= 1e-12, || format!("score weighting off by {worst_score:e}"))?;
    let c = combine_scores(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]).unwrap();
    check(c == vec![0.5, 1.5], || format!("combine example gave {c:?}"))?;
    Ok(format!(
        "{steps} checks, loss identity max error {worst_loss:.1e}, score weighting max error {worst_score:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = SeededRng::new(4);
    let mut tanh_min: f64 = 0.0;
    let mut tanh_max: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for i in 0..10_000 {
        let d = 1 + i % 6;
        let n = 1 + (i / 6) % 9;
        let scale = [0.1, 1.0, 10.0, 100.0][i % 4];
        let mut params = AttentionParams::new(d, &mut rng);
        params.w = random_matrix(d, d, scale, &mut rng);
        params.b = random_matrix(1, d, scale, &mut rng);
        params.u = random_matrix(1, d, scale, &mut rng);
        let h = random_matrix(n, d, scale, &mut rng);
        let (t, _) = attend(AttentionMode::Tanh, Some(&params), &h).unwrap();
        for &l in &t.lambdas {
            tanh_min = tanh_min.min(l);
            tanh_max = tanh_max.max(l);
        }
        let (s, _) = attend(AttentionMode::Softmax, Some(&params), &h).unwrap();
        worst_sum = worst_sum.max((s.lambdas.iter().sum::<f64>() - 1.0).abs());
    }
    check(tanh_min >= -1.0 && tanh_max <= 1.0, || format!("tanh weights span [{tanh_min}, {tanh_max}]"))?;
    check(worst_sum <= 1e-9, || format!("softmax sum off by {worst_sum:e}"))?;
    let params = AttentionParams::new(5, &mut rng);
    let h = random_matrix(1, 5, 3.0, &mut rng);
    let (one, _) = attend(AttentionMode::Softmax, Some(&params), &h).unwrap();
    check(one.feat.as_slice() == h.row(0), || "N=1 softmax feature differs from h_1".into())?;
    Ok(format!(
        "10^4 inputs: tanh weights in [{tanh_min:.4}, {tanh_max:.4}], softmax sum error {worst_sum:.1e}, N=1 exact"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = SeededRng::new(5);
    let (mut gate_lo, mut gate_hi) = (1.0f64, 0.0f64);
    let mut h_abs: f64 = 0.0;
    let mut worst_sat: f64 = 0.0;
    for i in 0..300 {
        let cfg = FcgruConfig {
            input_channels: 1 + i % 4,
            fc1_units: 1 + i % 5,
            fc2_units: 1 + i % 3,
            hidden_units: 1 + i % 7,
            enrichment: if i % 2 == 0 { Enrichment::FullyConnected } else { Enrichment::Identity },
            candidate_input: CandidateInput::Enriched,
        };
        let scale = [0.5, 2.0, 8.0][i % 3];
        let mut p = FcgruParams::new(cfg, &mut rng).unwrap();
        for t in p.tensors_mut() {
            *t = random_matrix(t.rows(), t.cols(), scale, &mut rng);
        }
        let width = cfg.gate_input_width();
        let mut h = vec![0.0; cfg.hidden_units];
        for _ in 0..20 {
            let x: Vec<f64> = (0..width).map(|_| scale * rng.normal()).collect();
            let rec = p.step(&x, &h).unwrap();
            for &g in rec.z.iter().chain(&rec.r) {
                gate_lo = gate_lo.min(g);
                gate_hi = gate_hi.max(g);
            }
            h = rec.h;
            h_abs = h.iter().fold(h_abs, |m, v| m.max(v.abs()));
        }
        // Gate pre-activation = 20 + a bounded remainder of magnitude <= 0.5.
        let mut sat = p.clone();
        sat.b_z = Matrix::filled(1, cfg.hidden_units, 20.0);
        let bound = 0.5 / (width + cfg.hidden_units) as f64;
        for t in [&mut sat.w_zx, &mut sat.w_zh] {
            *t = t.map(|v| v.clamp(-bound, bound));
        }
        let x: Vec<f64> = (0..width).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let h_prev: Vec<f64> = (0..cfg.hidden_units).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let rec = sat.step(&x, &h_prev).unwrap();
        let diff = rec.h.iter().zip(&h_prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst_sat = worst_sat.max(diff);
    }
    check(gate_lo > 0.0 && gate_hi < 1.0, || format!("gates span [{gate_lo}, {gate_hi}]"))?;
    check(h_abs <= 1.0, || format!("hidden magnitude {h_abs}"))?;
    check(worst_sat < 1e-8, || format!("saturated step moved state by {worst_sat:e}"))?;
    Ok(format!(
        "gates in [{gate_lo:.3e}, {:.3e}] (strict), max |h| {h_abs:.4}, saturated drift {worst_sat:.1e}",
        gate_hi
    ))
}

fn criterion_5() -> Outcome {
    let spec = SynthSpec {
        segments: 60,
        segments_per_group: 3,
        ..SynthSpec::default()
    };
    let ds = synth_generate(&spec, &mut SeededRng::new(6)).unwrap().dataset;
    let cfg = small_train_config();
    let mut rng = SeededRng::new(7);
    let mut model = init_model(&cfg, &ds, &mut rng).unwrap();
    let d = cfg.hidden_units;
    let mut transfers = 0;
    for next in 1..=ds.hierarchy.target_level() {
        let before = model.shared_digest();
        pretrain_transfer(&mut model, &ds.hierarchy, next, &mut rng).unwrap();
        check(model.shared_digest() == before, || format!("shared digest changed entering level {next}"))?;
        let heads = model.heads(next).unwrap();
        let k = ds.hierarchy.class_count(next);
        for head in [heads.rad.as_ref().unwrap(), heads.opt.as_ref().unwrap(), &heads.fused] {
            check(head.w.shape() == (d, k), || format!("head shape {:?} at level {next}", head.w.shape()))?;
        }
        transfers += 1;
    }
    // The trainer transfers the selected model; its digests must line up too.
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (tr, va): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| (i / 3) % 3 != 0);
    let (tr, va) = (ds.subset(&tr), ds.subset(&va));

    let leaves = ds.hierarchy.names(ds.hierarchy.target_level()).to_vec();
    let flat_h = ClassHierarchy::single_level(leaves).unwrap();
    let flatten = |d: &Dataset| Dataset {
        hierarchy: flat_h.clone(),
        ..d.clone()
    };
    let (ftr, fva) = (flatten(&tr), flatten(&va));
    let run = |cfg: &TrainConfig| {
        let mut rng = SeededRng::new(8);
        let m = init_model(cfg, &ftr, &mut rng).unwrap();
        let out = train(m, &ftr, &fva, cfg, &mut rng).unwrap();
        Checkpoint {
            model: out.model,
            normalization: None,
            seed: 8,
            hierarchy_digest: flat_h.digest(),
        }
        .to_text()
    };
    let hier = run(&cfg);
    let no_pre = run(&TrainConfig {
        ablation: Ablation::NoHierPre,
        ..cfg.clone()
    });
    check(hier == no_pre, || "single-level run differs from noHierPre".into())?;
    Ok(format!(
        "{transfers} transfers kept shared digests, heads d x K_next, single-level checkpoint identical to noHierPre ({} bytes)",
        hier.len()
    ))
}

/// Desk-scale architecture for the end-to-end run.
const E2E_HIDDEN: usize = 32;
const E2E_FC1: usize = 16;
const E2E_FC2: usize = 32;
const E2E_LEARNING_RATE: f64 = 1e-4;
const E2E_EPOCHS: usize = 200;
const E2E_SEEDS: u64 = 5;

fn criterion_6() -> Outcome {
    let ds = fixture(500, 2024);
    let cfg = TrainConfig {
        epochs_per_level: E2E_EPOCHS,
        learning_rate: E2E_LEARNING_RATE,
        hidden_units: E2E_HIDDEN,
        fc1_units: E2E_FC1,
        fc2_units: E2E_FC2,
        ..TrainConfig::default()
    };
    let no_pre = TrainConfig {
        ablation: Ablation::NoHierPre,
        ..cfg.clone()
    };
    let mut hier_acc = Vec::new();
    let mut flat_acc = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 0..E2E_SEEDS {
        let start = Instant::now();
        let r = run_once(&ds, &cfg, seed).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        hier_acc.push(r.test.accuracy);
        flat_acc.push(run_once(&ds, &no_pre, seed).map_err(|e| e.to_string())?.test.accuracy);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (h, f) = (mean(&hier_acc), mean(&flat_acc));
    let summary = format!(
        "hierarchical mean test accuracy {h:.4} {hier_acc:.3?}, noHierPre {f:.4} {flat_acc:.3?}, slowest seed {:.0?}",
        slowest
    );
    check(h >= 0.95, || format!("{summary}: accuracy below 0.95"))?;
    check(h >= f, || format!("{summary}: pretraining below noHierPre"))?;
    check(slowest < Duration::from_secs(15 * 60), || format!("{summary}: too slow"))?;
    Ok(summary)
}

fn criterion_7() -> Outcome {
    let ds = fixture(100, 9);
    let mut names = Vec::new();
    for v in Variant::standard() {
        let cfg = v.apply(&TrainConfig {
            epochs_per_level: 2,
            ..small_train_config()
        });
        let r = run_once(&ds, &cfg, 10).map_err(|e| format!("{}: {e}", v.name))?;
        let prepared = cfg.prepare_dataset(&ds).unwrap();
        let norm = r.normalization.apply_dataset(&prepared).unwrap();
        for s in &norm.samples {
            let out = r.outcome.model.forward(s, 2, Some(s.label), Pass::Eval).unwrap();
            let sc = &out.scores;
            for p in [sc.rad.as_ref(), sc.opt.as_ref(), Some(&sc.fused)].into_iter().flatten() {
                check(p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9, || {
                    format!("{}: score row off the simplex", v.name)
                })?;
            }
            let l = out.loss.unwrap();
            check((l.l_total - (0.5 * l.l_rad + 0.5 * l.l_opt + l.l_fused)).abs() < 1e-12, || {
                format!("{}: loss identity violated", v.name)
            })?;
            let lambdas = [&out.attention.rad, &out.attention.opt, &out.attention.fused];
            for att in lambdas.into_iter().flatten() {
                check(att.lambdas.iter().all(|x| (-1.0..=1.0).contains(x)), || {
                    format!("{}: attention weight out of range", v.name)
                })?;
            }
        }
        check(r.test.total() == r.split.test.len(), || format!("{}: confusion total", v.name))?;
        names.push(v.name);
    }

    let cfg = FcgruConfig {
        input_channels: 1,
        fc1_units: 1,
        fc2_units: 1,
        hidden_units: 1,
        enrichment: Enrichment::Identity,
        candidate_input: CandidateInput::Enriched,
    };
    let mut p = FcgruParams::new(cfg, &mut SeededRng::new(1)).unwrap();
    let set = |m: &mut Matrix, v: f64| *m = Matrix::filled(1, 1, v);
    set(&mut p.w_zx, 0.5);
    set(&mut p.w_zh, -0.3);
    set(&mut p.b_z, 0.1);
    set(&mut p.w_rx, 0.8);
    set(&mut p.w_rh, 0.2);
    set(&mut p.b_r, -0.1);
    set(&mut p.w_hx, 1.2);
    set(&mut p.w_hr, -0.7);
    set(&mut p.b_h, 0.05);
    let (x, h) = (0.6, 0.3);
    let sigma = |v: f64| 1.0 / (1.0 + (-v).exp());
    let z = sigma(0.5 * x - 0.3 * h + 0.1);
    let r = sigma(0.8 * x + 0.2 * h - 0.1);
    let c = (1.2 * x - 0.7 * (r * h) + 0.05).tanh();
    let hand = z * h + (1.0 - z) * c;
    let enriched = p.enrich(&[x]).unwrap();
    let rec = p.step(&enriched, &[h]).unwrap();
    let err = (rec.h[0] - hand).abs().max((rec.h[0] - 0.412_734_776_415_174).abs());
    check(err < 1e-12, || format!("noEnrich step {} vs hand {hand}", rec.h[0]))?;
    Ok(format!("variants {} ok; noEnrich scalar step error {err:.1e}", names.join(", ")))
}

fn criterion_8() -> Outcome {
    let truth = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
    let pred = [0, 0, 0, 1, 0, 0, 1, 1, 1, 1];
    let m = MetricsReport::from_predictions(&truth, &pred, 2).map_err(|e| e.to_string())?;
    check(m.confusion == vec![vec![3, 1], vec![2, 4]], || format!("confusion {:?}", m.confusion))?;
    let expect = [(m.accuracy, 0.7), (m.per_class_f1[0], 0.6667), (m.per_class_f1[1], 0.7273), (m.kappa, 0.4)];
    for (got, want) in expect {
        check((got - want).abs() <= 1e-4, || format!("{got} vs {want}"))?;
    }
    Ok(format!(
        "accuracy {:.4}, F1 {{{:.4}, {:.4}}}, kappa {:.4}",
        m.accuracy, m.per_class_f1[0], m.per_class_f1[1], m.kappa
    ))
}

fn criterion_9() -> Outcome {
    let ds = fixture(500, 11);
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let split = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(seed)).unwrap();
        let mut owner = std::collections::HashMap::new();
        for (p, part) in split.partitions().iter().enumerate() {
            for &i in part.iter() {
                let prev = owner.insert(ds.samples[i].group.clone(), p);
                check(prev.is_none_or(|q| q == p), || format!("group {} split (seed {seed})", ds.samples[i].group))?;
            }
            worst = worst.max((part.len() as f64 / ds.len() as f64 - DEFAULT_FRACTIONS[p]).abs());
        }
        check(owner.len() == 100, || "groups missing from the split".into())?;
    }
    check(worst <= 0.05, || format!("fraction off by {worst:.3}"))?;
    let cfg = TrainConfig {
        epochs_per_level: 2,
        ..small_train_config()
    };
    let small = fixture(100, 12);
    let a = multi_run(&small, &cfg, 3, 40).map_err(|e| e.to_string())?;
    let b = multi_run(&small, &cfg, 3, 40).map_err(|e| e.to_string())?;
    check(a.to_toml() == b.to_toml(), || "multi_run reports differ".into())?;
    Ok(format!(
        "50 splits group-exclusive, worst fraction deviation {:.1} points, repeated multi_run identical",
        worst * 100.0
    ))
}

fn criterion_10() -> Outcome {
    let ds = fixture(40, 13);
    let cfg = TrainConfig {
        hidden_units: 8,
        fc1_units: 4,
        fc2_units: 8,
        ablation: Ablation::NoHierPre,
        ..TrainConfig::default()
    };
    // Without pretraining the fresh model already carries leaf-level heads.
    let model = init_model(&cfg, &ds, &mut SeededRng::new(14)).unwrap();
    let ex = export_attention(&model, &ds, 2).map_err(|e| e.to_string())?;
    let fused = ex.fused.as_ref().ok_or("no fused table")?;
    let width = fused.dates.len();
    check(width == 35, || format!("fused width {width}"))?;
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for (table, pick) in [
        (ex.radar.as_ref().unwrap(), 0usize),
        (ex.optical.as_ref().unwrap(), 1),
        (fused, 2),
    ] {
        let csv = table.to_csv();
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        check(header[3..] == table.dates.iter().map(String::as_str).collect::<Vec<_>>()[..], || {
            "header dates".into()
        })?;
        for (line, s) in lines.zip(&ds.samples) {
            let fields: Vec<&str> = line.split(',').collect();
            check(fields[0] == s.id, || format!("row order: {} vs {}", fields[0], s.id))?;
            let out = model.forward(s, 2, None, Pass::Eval).unwrap();
            let lambdas = [&out.attention.rad, &out.attention.opt, &out.attention.fused][pick]
                .as_ref()
                .unwrap()
                .lambdas
                .clone();
            check(fields.len() == 3 + lambdas.len(), || "row width".into())?;
            for (f, l) in fields[3..].iter().zip(&lambdas) {
                let v: f64 = f.parse().map_err(|_| format!("unparsable weight {f}"))?;
                worst = worst.max((v - l).abs());
            }
            rows += 1;
        }
    }
    check(rows == 3 * ds.len(), || format!("{rows} rows exported"))?;
    check(worst <= 1e-12, || format!("export differs by {worst:e}"))?;
    Ok(format!("fused width {width}, {rows} rows reproduce in-memory weights (max error {worst:.1e})"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "gradient correctness", criterion_1),
        (2, "loss and score weighting", criterion_2),
        (3, "attention invariants", criterion_3),
        (4, "recurrent cell invariants", criterion_4),
        (5, "pretraining transfer", criterion_5),
        (6, "synthetic end-to-end", criterion_6),
        (7, "ablation harness", criterion_7),
        (8, "metrics oracle", criterion_8),
        (9, "protocol fidelity", criterion_9),
        (10, "attention export", criterion_10),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS [{name}] {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL [{name}] {detail} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
