//! Acceptance checks A1–A8. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hsad::cli::{run, EXIT_OK, TWO_TONE_D, TWO_TONE_L};
use hsad::run_manifest::RunManifest;
use hsad_core::detector::{DetectorConfig, DetectorModel, PassOptions};
use hsad_core::fft::FftPlan;
use hsad_core::labeler::{label_dataset, LabelConfig, Scorer};
use hsad_core::matrix::Matrix;
use hsad_core::metrics::auroc;
use hsad_core::pipeline::{run_ablation, run_pipeline, AblationMode, AblationSettings, PipelineConfig};
use hsad_core::spectral::amplitude_spectrum;
use hsad_core::toy::{generate_synthetic_traces, run_toy_model, CaptureScope, PositionRecord, SyntheticSpec, ToyConfig, ToyModel};
use hsad_core::{ActivationTrace, ExampleMeta, FeatureSource, ObservationPoint, SpectralFeature};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn naive_amplitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let phase = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * phase.cos();
                im += v * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

fn a1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lengths = [2usize, 4, 6, 8, 112, 128];
    let (mut worst_fft, mut worst_parseval, mut worst_rev) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..1000 {
        let n = lengths[i % lengths.len()];
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let fast = amplitude_spectrum(&x).map_err(|e| e.to_string())?.amplitudes;
        let slow = naive_amplitudes(&x);
        let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        for (a, b) in fast.iter().zip(&slow) {
            worst_fft = worst_fft.max((a - b).abs() / scale);
        }
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = FftPlan::new(n).forward_real(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        worst_parseval = worst_parseval.max((energy - freq).abs() / energy.max(1.0));
        let reversed: Vec<f64> = (0..n).map(|t| x[(n - t) % n]).collect();
        let rev = amplitude_spectrum(&reversed).map_err(|e| e.to_string())?.amplitudes;
        for (a, b) in fast.iter().zip(&rev) {
            worst_rev = worst_rev.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst_fft <= 1e-9, || format!("fft vs naive relative error {worst_fft:e}"))?;
    ensure(worst_parseval <= 1e-9, || format!("Parseval relative error {worst_parseval:e}"))?;
    ensure(worst_rev <= 1e-12, || format!("reversal amplitude difference {worst_rev:e}"))?;
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!(
        "1000 signals: fft {worst_fft:.1e}, Parseval {worst_parseval:.1e}, reversal {worst_rev:.1e}, {elapsed:.2?}"
    ))
}

fn a2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let input_dim = rng.random_range(1..5);
        let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(1..5)).collect();
        let rows = rng.random_range(2..7);
        let cfg = DetectorConfig {
            hidden_dims: hidden,
            dropout_rate: 0.0,
            lambda_l1: 0.0,
            seed: rng.random(),
            ..DetectorConfig::new(input_dim)
        };
        let mut model = DetectorModel::init_relaxed(&cfg).map_err(|e| e.to_string())?;
        for layer in &mut model.hidden {
            for k in 0..layer.out_dim {
                layer.running_mean[k] = rng.random_range(-0.5..0.5);
                layer.running_var[k] = rng.random_range(0.5..2.0);
                layer.bn_scale[k] = rng.random_range(0.5..1.5);
                layer.bn_shift[k] = rng.random_range(-0.3..0.3);
            }
        }
        let x = Matrix::from_vec(rows, input_dim, (0..rows * input_dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .map_err(|e| e.to_string())?;
        let mut y: Vec<bool> = (0..rows).map(|_| rng.random()).collect();
        y[0] = true;
        y[1] = false;
        let opts = PassOptions::EVAL;
        let (_, analytic, _) = model.loss_and_gradient(&x, &y, opts).map_err(|e| e.to_string())?;
        let base = model.parameters();
        let mut probe = model.clone();
        for (i, &a) in analytic.iter().enumerate() {
            let h = 1e-6;
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_parameters(&p).map_err(|e| e.to_string())?;
            let up = probe.loss_and_gradient(&x, &y, opts).map_err(|e| e.to_string())?.0;
            p[i] = base[i] - h;
            probe.set_parameters(&p).map_err(|e| e.to_string())?;
            let down = probe.loss_and_gradient(&x, &y, opts).map_err(|e| e.to_string())?.0;
            let n = (up - down) / (2.0 * h);
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-5));
        }
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-4, || format!("relative gradient error {worst:e}"))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("50 configurations: max relative error {worst:.1e}, {elapsed:.2?}"))
}

fn two_tone() -> (Vec<ActivationTrace>, Vec<ExampleMeta>) {
    generate_synthetic_traces(&SyntheticSpec::two_tone(TWO_TONE_L), TWO_TONE_D, TWO_TONE_L).expect("two-tone data")
}

fn small_config() -> PipelineConfig {
    PipelineConfig::new(DetectorConfig {
        hidden_dims: vec![256],
        ..DetectorConfig::new(TWO_TONE_D as usize)
    })
}

/// A3 runs the feature-source ablation with the default detector; A7 reuses its rows.
fn a3(rows_out: &mut Option<(f64, f64)>) -> Check {
    let start = Instant::now();
    let (traces, metas) = two_tone();
    let base = PipelineConfig::new(DetectorConfig::new(TWO_TONE_D as usize));
    let rows = run_ablation(&traces, &metas, AblationMode::FeatureSource, &base, &AblationSettings::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(rows.len() == 2, || format!("{} feature-source rows", rows.len()))?;
    let (fft, tm) = (&rows[0], &rows[1]);
    ensure(fft.source == FeatureSource::FftMaxNonDc && tm.source == FeatureSource::TimeMax, || "row order".into())?;
    *rows_out = Some((fft.auroc_mean, tm.auroc_mean));
    let r = &fft.reports[0];
    ensure((r.n_train, r.n_pos + r.n_neg) == (140, 60), || format!("split {} / {}", r.n_train, r.n_pos + r.n_neg))?;
    ensure(fft.auroc_mean >= 0.95, || format!("fft AUROC {:.4}", fft.auroc_mean))?;
    ensure(tm.auroc_mean < fft.auroc_mean, || format!("time-max {:.4} not below fft {:.4}", tm.auroc_mean, fft.auroc_mean))?;
    within(elapsed, Duration::from_secs(120))?;
    Ok(format!(
        "l={TWO_TONE_L} d={TWO_TONE_D}, 140/60 split: fft AUROC {:.4}, time-max {:.4}, {elapsed:.1?}",
        fft.auroc_mean, tm.auroc_mean
    ))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn a4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut residual, mut cached, mut rows) = (0.0f64, 0.0f64, 0.0f64);
    let mut captures = 0usize;
    let mut configs = vec![ToyConfig::default()];
    for _ in 0..7 {
        let heads = rng.random_range(1..4);
        configs.push(ToyConfig {
            l: rng.random_range(1..6),
            d: heads * rng.random_range(1..6),
            n_heads: heads,
            vocab: rng.random_range(2..50),
            seed: rng.random(),
        });
    }
    for cfg in &configs {
        let prompt: Vec<u32> = (0..rng.random_range(1..8)).map(|_| rng.random_range(0..cfg.vocab as u32)).collect();
        let run = run_toy_model(cfg, &prompt, rng.random_range(1..8), "a4", CaptureScope::All).map_err(|e| e.to_string())?;
        for rec in &run.records {
            let mut prev = rec.embedding.as_slice();
            for nodes in &rec.layers {
                let rh: Vec<f64> = nodes.ah.iter().zip(prev).map(|(a, p)| a + p).collect();
                let h: Vec<f64> = nodes.rh.iter().zip(&nodes.mh).map(|(r, m)| r + m).collect();
                residual = residual.max(max_diff(&nodes.rh, &rh)).max(max_diff(&nodes.h, &h));
                prev = &nodes.h;
            }
            for head in rec.attention.iter().flatten() {
                ensure(head.len() == rec.position + 1 && head.iter().all(|&w| w >= 0.0), || "attention mask".into())?;
                rows = rows.max((head.iter().sum::<f64>() - 1.0).abs());
            }
            captures += 1;
        }
        let mut tokens = prompt.clone();
        tokens.extend(&run.generated);
        let full = ToyModel::new(cfg).map_err(|e| e.to_string())?.forward_full(&tokens).map_err(|e| e.to_string())?;
        cached = cached.max(record_distance(&run.records, &full)?);
    }
    ensure(residual <= 1e-9, || format!("residual identity error {residual:e}"))?;
    ensure(cached <= 1e-9, || format!("cached vs uncached difference {cached:e}"))?;
    ensure(rows <= 1e-9, || format!("attention row sum error {rows:e}"))?;
    Ok(format!(
        "{} models, {captures} captures: residual {residual:.1e}, cache {cached:.1e}, attention rows {rows:.1e}",
        configs.len()
    ))
}

fn record_distance(a: &[PositionRecord], b: &[PositionRecord]) -> Result<f64, String> {
    ensure(a.len() == b.len(), || "record counts differ".into())?;
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        ensure(x.token == y.token, || format!("token differs at position {}", x.position))?;
        for (p, q) in x.layers.iter().zip(&y.layers) {
            for (u, v) in [(&p.ah, &q.ah), (&p.rh, &q.rh), (&p.mh, &q.mh), (&p.h, &q.h)] {
                worst = worst.max(max_diff(u, v));
            }
        }
        for (p, q) in x.attention.iter().flatten().zip(y.attention.iter().flatten()) {
            worst = worst.max(max_diff(p, q));
        }
    }
    Ok(worst)
}

fn brute_force_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1;
                twice += if si > sj { 2 } else if si == sj { 1 } else { 0 };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

fn a5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tied_sets = 0;
    for case in 0..200 {
        let n = rng.random_range(2..80);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64 * 0.1 - 0.5).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        labels[0] = true;
        labels[1] = false;
        let value = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        let expected = brute_force_auroc(&scores, &labels);
        ensure(value == expected, || format!("case {case}: {value} vs pair counting {expected}"))?;
        let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s + 7.0).collect();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let cube: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
        for (name, t) in [("affine", &affine), ("exp", &exp), ("cube", &cube)] {
            let v = auroc(t, &labels).map_err(|e| e.to_string())?;
            ensure(v == value, || format!("case {case}: {name} transform gives {v}, expected {value}"))?;
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            tied_sets += 1;
        }
    }
    Ok(format!("200 sets ({tied_sets} with ties) equal pair counting; affine, exp and cube invariant"))
}

fn hsad(args: &[&str]) -> Result<String, String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("hsad").chain(args.iter().copied()), &mut out, &mut err);
    if code == EXIT_OK {
        Ok(String::from_utf8_lossy(&out).into_owned())
    } else {
        Err(format!("hsad {} exited {code}: {}", args.join(" "), String::from_utf8_lossy(&err).trim()))
    }
}

fn a6() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let p = |name: &str| dir.join(name).display().to_string();
    hsad(&["synth", "--seed", "0", "--classes", "two-tone", "--out", &p("synth")])?;
    hsad(&["features", "--traces", &p("synth/traces.hsadtrc"), "--out", &p("features")])?;
    hsad(&["label", "--features", &p("features/features.hsadfea"), "--manifest", &p("synth/manifest.jsonl"), "--out", &p("labels")])?;
    hsad(&["train", "--labels", &p("labels/labels.hsadlbl"), "--hidden", "256", "--out", &p("model")])?;
    hsad(&["eval", "--model", &p("model/model.hsadmdl"), "--labels", &p("labels/labels.hsadlbl"), "--out", &p("eval")])?;
    hsad(&[
        "ablate",
        "--traces",
        &p("synth/traces.hsadtrc"),
        "--manifest",
        &p("synth/manifest.jsonl"),
        "--mode",
        "feature-source",
        "--hidden",
        "256",
        "--out",
        &p("ablate"),
    ])?;
    hsad(&["synth", "--classes", "toy", "--examples", "4", "--seed", "9", "--out", &p("toy")])?;
    let steps = ["synth", "features", "labels", "model", "eval", "ablate", "toy"];
    let mut files = 0;
    for step in steps {
        let again = dir.join(format!("replay-{step}"));
        hsad(&["replay", &p(step), "--out", &again.display().to_string()])?;
        let recorded = RunManifest::read(&dir.join(step).join("run_manifest.json")).map_err(|e| e.to_string())?;
        for d in &recorded.outputs {
            let a = fs::read(dir.join(step).join(&d.path)).map_err(|e| e.to_string())?;
            let b = fs::read(again.join(&d.path)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{step}/{} differs on replay", d.path))?;
            files += 1;
        }
    }
    Ok(format!("{} commands replayed, {files} output files byte-identical", steps.len()))
}

fn a7(feature_source: Option<(f64, f64)>) -> Check {
    let (traces, metas) = two_tone();
    let base = small_config();
    let settings = AblationSettings::default();
    let obs = run_ablation(&traces, &metas, AblationMode::ObservationPoints, &base, &settings).map_err(|e| e.to_string())?;
    ensure(obs.len() == 6, || format!("{} observation-point rows", obs.len()))?;
    let points: Vec<ObservationPoint> = obs.iter().map(|r| r.observation).collect();
    ensure(points == ObservationPoint::ALL, || format!("observation order {points:?}"))?;

    let full = run_pipeline(&traces, &metas, &base).map_err(|e| e.to_string())?;
    let sampling = AblationSettings {
        layer_grid: Some(vec![TWO_TONE_L]),
        seeds: 3,
        strided: false,
    };
    let layers = run_ablation(&traces, &metas, AblationMode::LayerSampling, &base, &sampling).map_err(|e| e.to_string())?;
    ensure(layers.len() == 1, || format!("{} layer-sampling rows", layers.len()))?;
    for r in &layers[0].reports {
        ensure(r.auroc == full.auroc, || format!("count = l gives {} vs full {}", r.auroc, full.auroc))?;
    }
    let (fft, tm) = feature_source.ok_or("feature-source rows missing (A3 failed early)")?;
    ensure(tm < fft, || format!("time-max {tm:.4} not below fft {fft:.4}"))?;
    Ok(format!(
        "6 observation rows; count = l matches full AUROC {:.4} over {} seeds; fft {fft:.4} > time-max {tm:.4}",
        full.auroc, layers[0].runs
    ))
}

fn a8() -> Check {
    let feature = SpectralFeature {
        f: vec![1.0],
        source: FeatureSource::FftMaxNonDc,
        observation: ObservationPoint::AEnd,
        layer_count: 1,
        peak_bins: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    for set in 0..50 {
        let n = rng.random_range(1..100);
        // half the scores sit exactly on grid points
        let metas: Vec<ExampleMeta> = (0..n)
            .map(|i| ExampleMeta {
                example_id: format!("e{i}"),
                similarity_score: Some(if rng.random() { grid[rng.random_range(0..21)] } else { rng.random_range(0.0..=1.0) }),
                ..Default::default()
            })
            .collect();
        let features: BTreeMap<String, SpectralFeature> = metas.iter().map(|m| (m.example_id.clone(), feature.clone())).collect();
        let mut previous: Vec<String> = Vec::new();
        for &tau in &grid {
            let cfg = LabelConfig {
                tau,
                scorer: Scorer::External,
            };
            let out = label_dataset(&metas, &features, &cfg).map_err(|e| e.to_string())?;
            let positives: Vec<String> = out.examples.iter().filter(|e| e.label).map(|e| e.example_id.clone()).collect();
            ensure(previous.iter().all(|id| positives.contains(id)), || format!("set {set}: inclusion fails at tau {tau}"))?;
            for (m, e) in metas.iter().zip(&out.examples) {
                let sim = m.similarity_score.unwrap_or(f64::NAN);
                ensure(e.label == (sim <= tau), || format!("set {set}: sim {sim} at tau {tau}"))?;
            }
            previous = positives;
        }
    }
    let boundary = vec![ExampleMeta {
        example_id: "b".into(),
        similarity_score: Some(0.35),
        ..Default::default()
    }];
    let features: BTreeMap<String, SpectralFeature> = [("b".to_string(), feature)].into();
    let cfg = LabelConfig {
        tau: 0.35,
        scorer: Scorer::External,
    };
    let out = label_dataset(&boundary, &features, &cfg).map_err(|e| e.to_string())?;
    ensure(out.examples[0].label, || "sim = tau must label 1".into())?;
    Ok("21-value tau grid: inclusion holds on 50 sets; sim = tau labels 1".into())
}

fn report(id: &str, result: &Check) -> bool {
    match result {
        Ok(detail) => println!("{id} PASS {detail}"),
        Err(detail) => println!("{id} FAIL {detail}"),
    }
    result.is_ok()
}

fn main() {
    let mut feature_source = None;
    let results = [
        ("A1", a1()),
        ("A2", a2()),
        ("A3", a3(&mut feature_source)),
        ("A4", a4()),
        ("A5", a5()),
        ("A6", a6()),
        ("A7", a7(feature_source)),
        ("A8", a8()),
    ];
    let mut ok = true;
    for (id, result) in &results {
        ok &= report(id, result);
    }
    if !ok {
        std::process::exit(1);
    }
}
