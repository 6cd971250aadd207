use hsad_core::detector::DetectorConfig;
use hsad_core::pipeline::{
    ablation_tsv, compute_features, plan_ablation, run_ablation, run_pipeline, AblationMode, AblationSettings, PipelineConfig,
};
use hsad_core::signal::LayerSelection;
use hsad_core::toy::{generate_synthetic_traces, SyntheticSpec};
use hsad_core::{Error, FeatureSource, ObservationPoint, Stage};

const L: u32 = 8;
const D: u32 = 2;

fn config() -> PipelineConfig {
    PipelineConfig::new(DetectorConfig {
        hidden_dims: vec![256],
        ..DetectorConfig::new(D as usize)
    })
}

fn data() -> (Vec<hsad_core::ActivationTrace>, Vec<hsad_core::ExampleMeta>) {
    generate_synthetic_traces(&SyntheticSpec::two_tone(L), D, L).unwrap()
}

#[test]
fn two_tone_is_separable_and_time_max_is_not() {
    let (traces, metas) = data();
    let fft = run_pipeline(&traces, &metas, &config()).unwrap();
    assert!(fft.auroc >= 0.95, "fft auroc {}", fft.auroc);
    assert_eq!((fft.n_pos, fft.n_neg, fft.n_train), (30, 30, 140));
    assert_eq!(fft.layer_count, L);
    let cfg = PipelineConfig {
        source: FeatureSource::TimeMax,
        ..config()
    };
    let tm = run_pipeline(&traces, &metas, &cfg).unwrap();
    assert!(tm.auroc < fft.auroc, "time-max {} vs fft {}", tm.auroc, fft.auroc);
}

#[test]
fn features_separate_the_classes_exactly() {
    // noise-free: every class-a column peaks at bin 1 with amplitude N/2 = 2l,
    // every class-b column at the Nyquist bin with amplitude N = 4l
    let spec = SyntheticSpec {
        noise_std: 0.0,
        n_per_class: 2,
        ..SyntheticSpec::two_tone(L)
    };
    let (traces, _) = generate_synthetic_traces(&spec, 3, L).unwrap();
    let f = compute_features(&traces, ObservationPoint::AEnd, &LayerSelection::All, FeatureSource::FftMaxNonDc).unwrap();
    let n = 4.0 * L as f64;
    for v in &f["synth-a-0000"].f {
        assert!((v - n / 2.0).abs() < 1e-4, "{v}");
    }
    for v in &f["synth-b-0001"].f {
        assert!((v - n).abs() < 1e-4, "{v}");
    }
}

#[test]
fn ablation_shapes() {
    let (traces, metas) = data();
    let base = config();
    let settings = AblationSettings::default();
    let obs = plan_ablation(AblationMode::ObservationPoints, &base, &settings, L).unwrap();
    assert_eq!(obs.len(), 6);
    let src = plan_ablation(AblationMode::FeatureSource, &base, &settings, L).unwrap();
    assert_eq!(src.len(), 2);
    let layers = plan_ablation(AblationMode::LayerSampling, &base, &settings, L).unwrap();
    // counts 1, 2, 4, 8 with 5 seeds each
    assert_eq!(layers.len(), 20);

    let rows = run_ablation(&traces, &metas, AblationMode::FeatureSource, &base, &settings).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].source, FeatureSource::FftMaxNonDc);
    assert_eq!(rows[1].source, FeatureSource::TimeMax);
    assert!(rows[0].auroc_mean > rows[1].auroc_mean);
    let tsv = ablation_tsv(&rows);
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.split('\t').count() == 14));
}

#[test]
fn layer_sampling_at_l_matches_the_full_pipeline() {
    let (traces, metas) = data();
    let settings = AblationSettings {
        layer_grid: Some(vec![L]),
        seeds: 2,
        strided: false,
    };
    let rows = run_ablation(&traces, &metas, AblationMode::LayerSampling, &config(), &settings).unwrap();
    let full = run_pipeline(&traces, &metas, &config()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].runs, 2);
    assert_eq!(rows[0].layer_count, L);
    for r in &rows[0].reports {
        assert_eq!(r.auroc, full.auroc);
    }
}

#[test]
fn failures_name_their_stage() {
    let (traces, mut metas) = data();
    for m in &mut metas {
        m.similarity_score = Some(0.1);
    }
    let err = run_pipeline(&traces, &metas, &config()).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Labeler));
    assert!(matches!(err.root(), Error::SingleClass { .. }));

    let (mut traces, metas) = data();
    traces[3].captures.pop();
    let err = run_pipeline(&traces, &metas, &config()).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Signal));
    assert!(err.to_string().contains("synth-b-0001"), "{err}");

    let (traces, metas) = data();
    let bad = PipelineConfig {
        detector: DetectorConfig::new(D as usize),
        ..config()
    };
    let bad = PipelineConfig {
        detector: DetectorConfig { dropout_rate: 1.0, ..bad.detector },
        ..bad
    };
    let err = run_pipeline(&traces, &metas, &bad).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Train));
}
