//! End-to-end evaluation: signals → features → labels → split → detector →
//! AUROC, plus the ablation sweeps built on top of it.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::str::FromStr;

use crate::detector::{train_examples, DetectorConfig, DetectorModel};
use crate::error::{Error, Result, Stage};
use crate::labeler::{label_dataset, ClassBalance, LabelConfig, LabeledExample};
use crate::metrics::{auroc, split_indices, SplitSpec};
use crate::signal::{build_signal_matrix, LayerSelection, ObservationPoint};
use crate::spectral::{extract_features, FeatureSource, SpectralFeature};
use crate::trace::{ActivationTrace, ExampleMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub observation: ObservationPoint,
    pub layers: LayerSelection,
    pub source: FeatureSource,
    pub label: LabelConfig,
    /// `input_dim` is overwritten with the feature width at run time.
    pub detector: DetectorConfig,
    pub split: SplitSpec,
}

impl PipelineConfig {
    pub fn new(detector: DetectorConfig) -> Self {
        Self {
            observation: ObservationPoint::AEnd,
            layers: LayerSelection::All,
            source: FeatureSource::FftMaxNonDc,
            label: LabelConfig::default(),
            detector,
            split: SplitSpec::default(),
        }
    }
}

/// Test-set AUROC with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_train: usize,
    pub observation: ObservationPoint,
    pub layer_count: u32,
    pub layer_selection: String,
    pub source: FeatureSource,
    pub label: LabelConfig,
    pub detector: DetectorConfig,
    pub split: SplitSpec,
}

/// Features of every trace, keyed by example id.
pub fn compute_features(
    traces: &[ActivationTrace],
    observation: ObservationPoint,
    layers: &LayerSelection,
    source: FeatureSource,
) -> Result<BTreeMap<String, SpectralFeature>> {
    let mut out = BTreeMap::new();
    let mut resolved: Option<(u32, Vec<u32>)> = None;
    for trace in traces {
        let ids = match &resolved {
            Some((l, ids)) if *l == trace.l => ids.clone(),
            _ => {
                let ids = layers
                    .resolve(trace.l)
                    .map_err(|e| e.at(Stage::Signal, Some(&trace.example_id)))?;
                resolved = Some((trace.l, ids.clone()));
                ids
            }
        };
        let t = build_signal_matrix(trace, observation, &ids).map_err(|e| e.at(Stage::Signal, Some(&trace.example_id)))?;
        let f = extract_features(&t, source).map_err(|e| e.at(Stage::Features, Some(&trace.example_id)))?;
        if out.insert(trace.example_id.clone(), f).is_some() {
            return Err(Error::InvariantViolation(alloc::format!("duplicate trace id `{}`", trace.example_id))
                .at(Stage::Features, Some(&trace.example_id)));
        }
    }
    Ok(out)
}

/// Labels with a single-class check attributed to the labeler.
pub fn label_stage(
    metas: &[ExampleMeta],
    features: &BTreeMap<String, SpectralFeature>,
    cfg: &LabelConfig,
) -> Result<Vec<LabeledExample>> {
    let outcome = label_dataset(metas, features, cfg).map_err(|e| {
        let id = match &e {
            Error::MissingFeature(id) | Error::MissingScore(id) | Error::MissingText(id) => Some(id.clone()),
            _ => None,
        };
        e.at(Stage::Labeler, id.as_deref())
    })?;
    let ClassBalance { positives, negatives } = outcome.balance;
    if outcome.balance.is_single_class() {
        return Err(Error::SingleClass { positives, negatives }.at(Stage::Labeler, None));
    }
    Ok(outcome.examples)
}

/// Train/test partition of labeled examples.
pub fn split_stage(examples: &[LabeledExample], spec: &SplitSpec) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    let (tr, te) = split_indices(&labels, spec).map_err(|e| e.at(Stage::Split, None))?;
    Ok((
        tr.iter().map(|&i| examples[i].clone()).collect(),
        te.iter().map(|&i| examples[i].clone()).collect(),
    ))
}

/// Trains a fresh detector on `train` (input width taken from the data).
pub fn train_stage(train: &[LabeledExample], detector: &DetectorConfig) -> Result<DetectorModel> {
    let mut cfg = detector.clone();
    cfg.input_dim = train.first().map_or(cfg.input_dim, |e| e.feature.dim());
    let model = DetectorModel::init(&cfg).map_err(|e| e.at(Stage::Train, None))?;
    Ok(train_examples(model, train).map_err(|e| e.at(Stage::Train, None))?.model)
}

/// Probabilities for `examples` followed by their AUROC.
pub fn score_stage(model: &DetectorModel, examples: &[LabeledExample]) -> Result<(Vec<f64>, f64)> {
    let mut scores = Vec::with_capacity(examples.len());
    for e in examples {
        scores.push(model.predict(&e.feature.f).map_err(|err| err.at(Stage::Predict, Some(&e.example_id)))?);
    }
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    let value = auroc(&scores, &labels).map_err(|e| e.at(Stage::Metric, None))?;
    Ok((scores, value))
}

/// Full pipeline on one configuration.
pub fn run_pipeline(traces: &[ActivationTrace], metas: &[ExampleMeta], cfg: &PipelineConfig) -> Result<EvalReport> {
    let features = compute_features(traces, cfg.observation, &cfg.layers, cfg.source)?;
    let labeled = label_stage(metas, &features, &cfg.label)?;
    let (train, test) = split_stage(&labeled, &cfg.split)?;
    let model = train_stage(&train, &cfg.detector)?;
    let (_, value) = score_stage(&model, &test)?;
    let balance = ClassBalance::of(test.iter().map(|e| &e.label));
    let layer_count = labeled.first().map_or(0, |e| e.feature.layer_count);
    Ok(EvalReport {
        auroc: value,
        n_pos: balance.positives,
        n_neg: balance.negatives,
        n_train: train.len(),
        observation: cfg.observation,
        layer_count,
        layer_selection: cfg.layers.describe(),
        source: cfg.source,
        label: cfg.label,
        detector: model.config.clone(),
        split: cfg.split,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    ObservationPoints,
    LayerSampling,
    FeatureSource,
}

impl AblationMode {
    pub fn name(self) -> &'static str {
        match self {
            AblationMode::ObservationPoints => "observation-points",
            AblationMode::LayerSampling => "layer-sampling",
            AblationMode::FeatureSource => "feature-source",
        }
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observation-points" => Ok(AblationMode::ObservationPoints),
            "layer-sampling" => Ok(AblationMode::LayerSampling),
            "feature-source" => Ok(AblationMode::FeatureSource),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown ablation mode `{s}`"))),
        }
    }
}

/// Ablation sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSettings {
    /// Layer counts for layer sampling; `None` means `1, 2, 4, …` plus `l`.
    pub layer_grid: Option<Vec<u32>>,
    /// Layer-selection seeds `0..seeds` per layer count.
    pub seeds: u64,
    /// Evenly spaced layers instead of random subsets.
    pub strided: bool,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            layer_grid: None,
            seeds: 5,
            strided: false,
        }
    }
}

/// One pipeline run within an ablation; cells sharing `row` are aggregated.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub row: usize,
    pub config: PipelineConfig,
}

/// Powers of two below `l`, then `l`.
pub fn default_layer_grid(l: u32) -> Vec<u32> {
    let mut grid = Vec::new();
    let mut k = 1;
    while k < l {
        grid.push(k);
        k *= 2;
    }
    grid.push(l);
    grid
}

/// Expands an ablation into independent pipeline runs.
pub fn plan_ablation(mode: AblationMode, base: &PipelineConfig, settings: &AblationSettings, l: u32) -> Result<Vec<AblationCell>> {
    let mut cells = Vec::new();
    match mode {
        AblationMode::ObservationPoints => {
            for (row, &p) in ObservationPoint::ALL.iter().enumerate() {
                let mut config = base.clone();
                config.observation = p;
                cells.push(AblationCell { row, config });
            }
        }
        AblationMode::FeatureSource => {
            for (row, source) in [FeatureSource::FftMaxNonDc, FeatureSource::TimeMax].into_iter().enumerate() {
                let mut config = base.clone();
                config.source = source;
                cells.push(AblationCell { row, config });
            }
        }
        AblationMode::LayerSampling => {
            let grid = settings.layer_grid.clone().unwrap_or_else(|| default_layer_grid(l));
            if settings.seeds == 0 {
                return Err(Error::InvalidConfig("layer sampling needs at least one seed".into()));
            }
            for (row, &count) in grid.iter().enumerate() {
                if count < 1 || count > l {
                    return Err(Error::InvalidConfig(alloc::format!("layer count {count} outside 1..={l}")));
                }
                let seeds = if settings.strided { 1 } else { settings.seeds };
                for seed in 0..seeds {
                    let mut config = base.clone();
                    config.layers = if settings.strided {
                        LayerSelection::Strided { count }
                    } else {
                        LayerSelection::Random { count, seed }
                    };
                    cells.push(AblationCell { row, config });
                }
            }
        }
    }
    Ok(cells)
}

/// Aggregated result for one ablation row.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub observation: ObservationPoint,
    pub source: FeatureSource,
    pub layer_count: u32,
    pub layer_selection: String,
    pub runs: usize,
    pub auroc_mean: f64,
    /// Population standard deviation over runs.
    pub auroc_std: f64,
    pub reports: Vec<EvalReport>,
}

/// Groups cell reports into rows, preserving row order.
pub fn assemble_ablation(mode: AblationMode, cells: &[AblationCell], reports: Vec<EvalReport>) -> Vec<AblationRow> {
    let mut rows: Vec<AblationRow> = Vec::new();
    for (cell, report) in cells.iter().zip(reports) {
        if rows.len() <= cell.row {
            let selection = match (&cell.config.layers, mode) {
                (LayerSelection::Random { count, .. }, AblationMode::LayerSampling) => alloc::format!("random:{count}"),
                (other, _) => other.describe(),
            };
            rows.push(AblationRow {
                mode,
                observation: report.observation,
                source: report.source,
                layer_count: report.layer_count,
                layer_selection: selection,
                runs: 0,
                auroc_mean: 0.0,
                auroc_std: 0.0,
                reports: Vec::new(),
            });
        }
        rows[cell.row].reports.push(report);
    }
    for row in &mut rows {
        let k = row.reports.len() as f64;
        row.runs = row.reports.len();
        row.auroc_mean = row.reports.iter().map(|r| r.auroc).sum::<f64>() / k;
        let var = row.reports.iter().map(|r| {
            let dev = r.auroc - row.auroc_mean;
            dev * dev
        }).sum::<f64>() / k;
        row.auroc_std = libm::sqrt(var);
    }
    rows
}

/// Runs every cell sequentially and aggregates.
pub fn run_ablation(
    traces: &[ActivationTrace],
    metas: &[ExampleMeta],
    mode: AblationMode,
    base: &PipelineConfig,
    settings: &AblationSettings,
) -> Result<Vec<AblationRow>> {
    let l = traces.first().map_or(1, |t| t.l);
    let cells = plan_ablation(mode, base, settings, l)?;
    let reports = cells
        .iter()
        .map(|c| run_pipeline(traces, metas, &c.config))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_ablation(mode, &cells, reports))
}

const TABLE_COLUMNS: [&str; 14] = [
    "mode",
    "observation",
    "source",
    "layer_count",
    "layer_selection",
    "runs",
    "tau",
    "scorer",
    "hidden_dims",
    "epochs",
    "learning_rate",
    "seed",
    "auroc_mean",
    "auroc_std",
];

fn table_cells(row: &AblationRow) -> [String; 14] {
    let first = &row.reports[0];
    let hidden: Vec<String> = first.detector.hidden_dims.iter().map(|h| alloc::format!("{h}")).collect();
    [
        row.mode.name().into(),
        row.observation.name().into(),
        row.source.name().into(),
        alloc::format!("{}", row.layer_count),
        row.layer_selection.clone(),
        alloc::format!("{}", row.runs),
        alloc::format!("{}", first.label.tau),
        first.label.scorer.name().into(),
        hidden.join("-"),
        alloc::format!("{}", first.detector.epochs),
        alloc::format!("{}", first.detector.learning_rate),
        alloc::format!("{}", first.detector.seed),
        alloc::format!("{:.6}", row.auroc_mean),
        alloc::format!("{:.6}", row.auroc_std),
    ]
}

/// Tab-separated results table with a header row.
pub fn ablation_tsv(rows: &[AblationRow]) -> String {
    let mut out = TABLE_COLUMNS.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&table_cells(row).join("\t"));
        out.push('\n');
    }
    out
}

/// Column-aligned plain-text summary.
pub fn ablation_text(rows: &[AblationRow]) -> String {
    let header = ["observation", "source", "layers", "selection", "runs", "auroc"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.observation.name().into(),
                r.source.name().into(),
                alloc::format!("{}", r.layer_count),
                r.layer_selection.clone(),
                alloc::format!("{}", r.runs),
                alloc::format!("{:.4} ± {:.4}", r.auroc_mean, r.auroc_std),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for cells in &body {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| {
                let mut s = String::from(*c);
                s.extend(core::iter::repeat_n(' ', w - c.chars().count()));
                s
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&header);
    for cells in &body {
        let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        line(&refs);
    }
    out
}
