//! `hsad` subcommands. Each one reads files, writes files into `--out` and
//! records a [`RunManifest`] there.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use hsad_core::detector::{examples_to_matrix, train, DetectorConfig, DetectorModel};
use hsad_core::labeler::{label_dataset, LabelConfig, LabelWarning, LabeledExample, Scorer};
use hsad_core::metrics::SplitSpec;
use hsad_core::pipeline::{
    ablation_text, ablation_tsv, compute_features, score_stage, split_stage, AblationMode, AblationSettings, PipelineConfig,
};
use hsad_core::signal::LayerSelection;
use hsad_core::toy::{generate_synthetic_traces, generate_toy_dataset, CaptureScope, SyntheticSpec, ToyConfig};
use hsad_core::{Error, FeatureSource, ObservationPoint, Stage};

use crate::error::FormatError;
use crate::formats::{
    features::FEATURE_MAGIC, labels::LABEL_MAGIC, manifest::entries_from_metas, model::MODEL_MAGIC, read_feature_file,
    read_label_file, read_manifest, read_model_file, read_trace_file, trace_file::TRACE_MAGIC, write_feature_file,
    write_label_file, write_manifest, write_model_file, write_trace_file, FeatureSet, LabelSet,
};
use crate::parallel::{run_ablation_parallel, threads_from_env};
use crate::run_manifest::{sha256_file, FileDigest, RunManifest, RUN_MANIFEST_NAME};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e.root() {
            Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Invalid(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn display<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn parse_core<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "hsad", version, about = "Hallucination detection from hidden-layer spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate traces and a manifest (two-tone synthetic data or the toy transformer).
    Synth(SynthArgs),
    /// Traces → spectral (or time-max) feature file.
    Features(FeaturesArgs),
    /// Feature file + manifest → labeled dataset.
    Label(LabelArgs),
    /// Train the detector on the training split of a labeled dataset.
    Train(TrainArgs),
    /// Score a labeled dataset and report AUROC.
    Eval(EvalArgs),
    /// Run an ablation sweep from traces and a manifest.
    Ablate(AblateArgs),
    /// Print the header of a trace, feature, label, model or manifest file.
    Inspect(InspectArgs),
    /// Re-run the command recorded in a run_manifest.json.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Features(_) => "features",
            Command::Label(_) => "label",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
            Command::Inspect(_) => "inspect",
            Command::Replay(_) => "replay",
        }
    }

    /// Input files followed by the output directory, when the command has one.
    fn paths_mut(&mut self) -> (Vec<&mut PathBuf>, Option<&mut PathBuf>) {
        match self {
            Command::Synth(a) => (vec![], Some(&mut a.out)),
            Command::Features(a) => (vec![&mut a.traces], Some(&mut a.out)),
            Command::Label(a) => (vec![&mut a.features, &mut a.manifest], Some(&mut a.out)),
            Command::Train(a) => {
                let mut inputs = vec![&mut a.data.labels];
                inputs.extend(a.data.features.as_mut());
                (inputs, Some(&mut a.out))
            }
            Command::Eval(a) => {
                let mut inputs = vec![&mut a.model, &mut a.data.labels];
                inputs.extend(a.data.features.as_mut());
                (inputs, Some(&mut a.out))
            }
            Command::Ablate(a) => (vec![&mut a.traces, &mut a.manifest], Some(&mut a.out)),
            Command::Inspect(a) => (vec![&mut a.path], None),
            Command::Replay(a) => (vec![&mut a.manifest], a.out.as_mut()),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Synth(a) => Some(a.seed),
            Command::Features(a) => Some(a.seed),
            Command::Train(a) => Some(a.detector.seed),
            Command::Eval(a) => Some(a.split.split_seed),
            Command::Ablate(a) => Some(a.detector.seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classes {
    TwoTone,
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capture {
    All,
    Answer,
    ObservationPoints,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "two-tone")]
    pub classes: Classes,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Layers (default 8 for two-tone, 4 for toy).
    #[arg(long)]
    pub l: Option<u32>,
    /// Hidden width (default 2 for two-tone, 16 for toy).
    #[arg(long)]
    pub d: Option<u32>,
    /// Question (prompt) length.
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    /// Answer (generation) length.
    #[arg(long, default_value_t = 4)]
    pub n: u32,
    /// Two-tone: examples per class.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Two-tone: Gaussian noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Two-tone: class-a frequency bin (default 1).
    #[arg(long)]
    pub class_a_bin: Option<usize>,
    /// Two-tone: class-b frequency bin (default 2·l).
    #[arg(long)]
    pub class_b_bin: Option<usize>,
    /// Toy: number of examples.
    #[arg(long, default_value_t = 20)]
    pub examples: usize,
    /// Toy: attention heads.
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    /// Toy: vocabulary size.
    #[arg(long, default_value_t = 64)]
    pub vocab: usize,
    /// Toy: weight seed (prompts use --seed).
    #[arg(long, default_value_t = 0)]
    pub model_seed: u64,
    /// Toy: which positions to capture.
    #[arg(long, value_enum, default_value = "all")]
    pub capture: Capture,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectionArgs {
    #[arg(long, default_value = "a-end", value_parser = parse_core::<ObservationPoint>)]
    #[serde(serialize_with = "display")]
    pub observation: ObservationPoint,
    /// `all`, a layer count `k`, or a comma-separated list of 1-based layer ids.
    #[arg(long, default_value = "all", value_parser = parse_layers)]
    pub layers: String,
    #[arg(long, default_value = "fft", value_parser = parse_core::<FeatureSource>)]
    #[serde(serialize_with = "display")]
    pub source: FeatureSource,
    /// With a layer count: take evenly spaced layers instead of a random subset.
    #[arg(long)]
    pub strided: bool,
}

fn parse_layers(s: &str) -> Result<String, String> {
    layer_selection(s, 0, false).map(|_| s.to_string())
}

/// `all` | `k` | `i,j,...`. A single id is written with a trailing comma.
fn layer_selection(s: &str, seed: u64, strided: bool) -> Result<LayerSelection, String> {
    let s = s.trim();
    if s == "all" {
        return Ok(LayerSelection::All);
    }
    if s.contains(',') {
        let ids = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<u32>().map_err(|_| format!("bad layer id `{p}`")))
            .collect::<Result<Vec<_>, _>>()?;
        if ids.is_empty() {
            return Err("empty layer list".into());
        }
        if ids.contains(&0) {
            return Err("layer ids start at 1".into());
        }
        return Ok(LayerSelection::Explicit(ids));
    }
    let count: u32 = s.parse().map_err(|_| format!("expected `all`, a count or a list, found `{s}`"))?;
    if count == 0 {
        return Err("layer count must be at least 1".into());
    }
    Ok(if strided {
        LayerSelection::Strided { count }
    } else {
        LayerSelection::Random { count, seed }
    })
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub select: SelectionArgs,
    /// Seed for random layer subsets.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LabelingArgs {
    /// Similarity threshold; similarity ≤ tau is labeled a hallucination.
    #[arg(long, default_value_t = hsad_core::labeler::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value = "external", value_parser = parse_core::<Scorer>)]
    #[serde(serialize_with = "display")]
    pub scorer: Scorer,
}

impl LabelingArgs {
    fn config(&self) -> LabelConfig {
        LabelConfig {
            tau: self.tau,
            scorer: self.scorer,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LabelArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub labeling: LabelingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectorArgs {
    /// Hidden widths; the last must be 256.
    #[arg(long, value_delimiter = ',', default_values_t = [1024usize, 512, 256])]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// L1 weight on the first layer.
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Initialization, shuffling and dropout seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DetectorArgs {
    fn config(&self, input_dim: usize) -> DetectorConfig {
        DetectorConfig {
            input_dim,
            hidden_dims: self.hidden.clone(),
            dropout_rate: self.dropout,
            lambda_l1: self.lambda,
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Split the pooled examples instead of each class separately.
    #[arg(long)]
    pub no_stratify: bool,
}

impl SplitArgs {
    fn spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.split_seed,
            stratified: !self.no_stratify,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Feature vectors to use instead of the ones stored with the labels,
    /// matched by example id.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Train on every example instead of the training split.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    Test,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_enum, default_value = "test")]
    pub subset: Subset,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_core::<AblationMode>)]
    #[serde(serialize_with = "serialize_mode")]
    pub mode: AblationMode,
    #[command(flatten)]
    pub select: SelectionArgs,
    /// Seed for the base random layer subset.
    #[arg(long, default_value_t = 0)]
    pub layer_seed: u64,
    /// Layer counts for layer sampling (default 1, 2, 4, … and l).
    #[arg(long, value_delimiter = ',')]
    pub layer_grid: Option<Vec<u32>>,
    /// Layer-subset seeds per count in layer sampling.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[command(flatten)]
    pub labeling: LabelingArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn serialize_mode<S: Serializer>(m: &AblationMode, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(m.name())
}

#[derive(Debug, Args, Serialize)]
pub struct InspectArgs {
    pub path: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    /// A run_manifest.json, or the directory holding one.
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let argv = match args.iter().skip(1).map(|a| a.to_str().map(String::from)).collect::<Option<Vec<_>>>() {
        Some(v) => v,
        None => {
            let _ = writeln!(stderr, "error: arguments must be valid UTF-8");
            return EXIT_USAGE;
        }
    };
    let cwd = std::env::current_dir().map(|p| p.display().to_string()).unwrap_or_default();
    match dispatch(cli.command, argv, cwd, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Data(msg)) = &e;
            let _ = writeln!(stderr, "error: {msg}");
            e.exit_code()
        }
    }
}

fn dispatch(mut command: Command, argv: Vec<String>, cwd: String, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    match &command {
        Command::Inspect(a) => return inspect(&a.path, stdout),
        Command::Replay(a) => return replay(&a.manifest, a.out.as_deref(), stdout, stderr),
        _ => {}
    }
    let inputs = {
        let (inputs, _) = command.paths_mut();
        inputs
            .into_iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?
    };
    let out = command.paths_mut().1.map(|p| p.clone()).expect("command has an output directory");
    fs::create_dir_all(&out).map_err(|e| FormatError::io(&out, e))?;
    let outputs = match &command {
        Command::Synth(a) => synth(a)?,
        Command::Features(a) => features(a)?,
        Command::Label(a) => label(a, stderr)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Eval(a) => eval(a, stdout)?,
        Command::Ablate(a) => ablate(a, stdout)?,
        Command::Inspect(_) | Command::Replay(_) => unreachable!(),
    };
    let outputs = outputs
        .into_iter()
        .map(|name| {
            Ok(FileDigest {
                sha256: sha256_file(&out.join(name))?,
                path: name.to_string(),
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let manifest = RunManifest {
        tool: "hsad".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        cwd,
        command: command.name().into(),
        seed: command.seed(),
        config: serde_json::to_value(&command).expect("flags serialize"),
        inputs,
        outputs,
    };
    manifest.write(&out)?;
    Ok(())
}

/// Two-tone defaults. At larger widths the time-max baseline also separates
/// the classes, through the order statistics of the noise.
pub const TWO_TONE_L: u32 = 8;
pub const TWO_TONE_D: u32 = 2;

fn synth(a: &SynthArgs) -> CliResult<Vec<&'static str>> {
    let (traces, metas) = match a.classes {
        Classes::TwoTone => {
            let (l, d) = (a.l.unwrap_or(TWO_TONE_L), a.d.unwrap_or(TWO_TONE_D));
            let base = SyntheticSpec::two_tone(l);
            let spec = SyntheticSpec {
                class_a_bin: a.class_a_bin.unwrap_or(base.class_a_bin),
                class_b_bin: a.class_b_bin.unwrap_or(base.class_b_bin),
                noise_std: a.noise,
                n_per_class: a.per_class,
                seed: a.seed,
                m: a.m,
                n: a.n,
            };
            generate_synthetic_traces(&spec, d, l)?
        }
        Classes::Toy => {
            let defaults = ToyConfig::default();
            let cfg = ToyConfig {
                l: a.l.map_or(defaults.l, |v| v as usize),
                d: a.d.map_or(defaults.d, |v| v as usize),
                n_heads: a.heads,
                vocab: a.vocab,
                seed: a.model_seed,
            };
            let scope = match a.capture {
                Capture::All => CaptureScope::All,
                Capture::Answer => CaptureScope::Answer,
                Capture::ObservationPoints => CaptureScope::ObservationPoints,
            };
            generate_toy_dataset(&cfg, a.examples, a.m as usize, a.n as usize, a.seed, scope)?
        }
    };
    write_trace_file(&traces, &a.out.join("traces.hsadtrc"))?;
    write_manifest(&entries_from_metas(metas), &a.out.join("manifest.jsonl"))?;
    Ok(vec!["traces.hsadtrc", "manifest.jsonl"])
}

fn features(a: &FeaturesArgs) -> CliResult<Vec<&'static str>> {
    let traces = read_trace_file(&a.traces)?;
    let selection = layer_selection(&a.select.layers, a.seed, a.select.strided).map_err(CliError::Usage)?;
    let map = compute_features(&traces, a.select.observation, &selection, a.select.source)?;
    // keep the trace file's order
    let rows = traces.iter().map(|t| (&t.example_id, &map[&t.example_id]));
    let set = FeatureSet::from_features(rows)?;
    write_feature_file(&set, &a.out.join("features.hsadfea"))?;
    Ok(vec!["features.hsadfea"])
}

fn label(a: &LabelArgs, stderr: &mut dyn Write) -> CliResult<Vec<&'static str>> {
    let features = read_feature_file(&a.features)?;
    let metas: Vec<_> = read_manifest(&a.manifest)?.into_iter().map(|e| e.meta).collect();
    let cfg = a.labeling.config();
    let outcome = label_dataset(&metas, &features.to_map(), &cfg).map_err(|e| e.at(Stage::Labeler, None))?;
    for w in &outcome.warnings {
        let LabelWarning::PresetLabelIgnored {
            example_id,
            preset,
            computed,
        } = w;
        let _ = writeln!(stderr, "warning: `{example_id}` preset label {preset} replaced by {computed}");
    }
    if outcome.balance.is_single_class() {
        let _ = writeln!(
            stderr,
            "warning: single-class labels ({} positive, {} negative)",
            outcome.balance.positives, outcome.balance.negatives
        );
    }
    let set = LabelSet::from_examples(&outcome.examples, cfg)?;
    write_label_file(&set, &a.out.join("labels.hsadlbl"))?;
    Ok(vec!["labels.hsadlbl"])
}

/// Labeled examples, with feature vectors replaced from `--features` if given.
fn load_examples(data: &DataArgs, stage: Stage) -> CliResult<(LabelSet, Vec<LabeledExample>)> {
    let set = read_label_file(&data.labels)?;
    let mut examples = set.examples();
    if let Some(path) = &data.features {
        let features = read_feature_file(path)?;
        let by_id: BTreeMap<&str, &[f64]> = features.rows.iter().map(|(id, v)| (id.as_str(), v.as_slice())).collect();
        for e in &mut examples {
            let values = by_id
                .get(e.example_id.as_str())
                .ok_or_else(|| Error::MissingFeature(e.example_id.clone()).at(stage, Some(&e.example_id)))?;
            e.feature = features.feature(values.to_vec());
        }
    }
    Ok((set, examples))
}

fn train_cmd(a: &TrainArgs) -> CliResult<Vec<&'static str>> {
    let (_, examples) = load_examples(&a.data, Stage::Train)?;
    let train_set = if a.all {
        examples
    } else {
        split_stage(&examples, &a.split.spec())?.0
    };
    let input_dim = train_set.first().map_or(0, |e| e.feature.dim());
    let model = DetectorModel::init(&a.detector.config(input_dim)).map_err(|e| e.at(Stage::Train, None))?;
    let (x, y) = examples_to_matrix(&train_set).map_err(|e| e.at(Stage::Train, None))?;
    let outcome = train(model, &x, &y).map_err(|e| e.at(Stage::Train, None))?;
    write_model_file(&outcome.model, &a.out.join("model.hsadmdl"))?;
    let mut tsv = String::from("epoch\tloss\n");
    for (i, loss) in outcome.loss_trace.iter().enumerate() {
        tsv.push_str(&format!("{}\t{loss:.17e}\n", i + 1));
    }
    let path = a.out.join("loss.tsv");
    fs::write(&path, tsv).map_err(|e| FormatError::io(&path, e))?;
    Ok(vec!["model.hsadmdl", "loss.tsv"])
}

#[derive(Serialize)]
struct ReportJson {
    auroc: f64,
    n_pos: usize,
    n_neg: usize,
    n_train: usize,
    subset: Subset,
    observation: String,
    source: String,
    layer_count: u32,
    tau: f64,
    scorer: String,
    hidden_dims: Vec<usize>,
    epochs: usize,
    learning_rate: f64,
    detector_seed: u64,
    train_fraction: f64,
    split_seed: u64,
    stratified: bool,
}

fn eval(a: &EvalArgs, stdout: &mut dyn Write) -> CliResult<Vec<&'static str>> {
    let model = read_model_file(&a.model)?;
    let (set, examples) = load_examples(&a.data, Stage::Predict)?;
    let spec = a.split.spec();
    let (scored, n_train) = match a.subset {
        Subset::All => (examples, 0),
        Subset::Test => {
            let (tr, te) = split_stage(&examples, &spec)?;
            (te, tr.len())
        }
    };
    let (scores, auroc) = score_stage(&model, &scored)?;
    let n_pos = scored.iter().filter(|e| e.label).count();
    let first = &scored[0].feature;
    let report = ReportJson {
        auroc,
        n_pos,
        n_neg: scored.len() - n_pos,
        n_train,
        subset: a.subset,
        observation: first.observation.to_string(),
        source: first.source.to_string(),
        layer_count: first.layer_count,
        tau: set.label_config.tau,
        scorer: set.label_config.scorer.to_string(),
        hidden_dims: model.config.hidden_dims.clone(),
        epochs: model.config.epochs,
        learning_rate: model.config.learning_rate,
        detector_seed: model.config.seed,
        train_fraction: spec.train_fraction,
        split_seed: spec.seed,
        stratified: spec.stratified,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    let path = a.out.join("report.json");
    fs::write(&path, json).map_err(|e| FormatError::io(&path, e))?;
    let mut tsv = String::from("example_id\tlabel\tscore\n");
    for (e, s) in scored.iter().zip(&scores) {
        tsv.push_str(&format!("{}\t{}\t{s:.17e}\n", e.example_id, u8::from(e.label)));
    }
    let path = a.out.join("scores.tsv");
    fs::write(&path, tsv).map_err(|e| FormatError::io(&path, e))?;
    let _ = writeln!(stdout, "auroc\t{auroc:.6}\tn_pos\t{}\tn_neg\t{}", report.n_pos, report.n_neg);
    Ok(vec!["report.json", "scores.tsv"])
}

fn ablate(a: &AblateArgs, stdout: &mut dyn Write) -> CliResult<Vec<&'static str>> {
    let traces = read_trace_file(&a.traces)?;
    let metas: Vec<_> = read_manifest(&a.manifest)?.into_iter().map(|e| e.meta).collect();
    let layers = layer_selection(&a.select.layers, a.layer_seed, a.select.strided).map_err(CliError::Usage)?;
    let base = PipelineConfig {
        observation: a.select.observation,
        layers,
        source: a.select.source,
        label: a.labeling.config(),
        detector: a.detector.config(0),
        split: a.split.spec(),
    };
    let settings = AblationSettings {
        layer_grid: a.layer_grid.clone(),
        seeds: a.seeds,
        strided: a.select.strided,
    };
    let rows = run_ablation_parallel(&traces, &metas, a.mode, &base, &settings, threads_from_env())?;
    let summary = ablation_text(&rows);
    for (name, text) in [("results.tsv", ablation_tsv(&rows)), ("summary.txt", summary.clone())] {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| FormatError::io(&path, e))?;
    }
    let _ = stdout.write_all(summary.as_bytes());
    Ok(vec!["results.tsv", "summary.txt"])
}

fn inspect(path: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    let magic = bytes.get(..8).unwrap_or(&[]);
    let mut text = String::new();
    let mut line = |s: String| {
        text.push_str(&s);
        text.push('\n');
    };
    if magic == TRACE_MAGIC {
        let traces = read_trace_file(path)?;
        line(format!("format\tHSADTRC1\ntraces\t{}", traces.len()));
        for t in &traces {
            line(format!(
                "{}\tmodel={}\tl={}\td={}\tm={}\tn={}\tcaptures={}",
                t.example_id,
                t.model_name,
                t.l,
                t.d,
                t.m,
                t.n,
                t.captures.len()
            ));
        }
    } else if magic == FEATURE_MAGIC {
        let set = read_feature_file(path)?;
        line(format!(
            "format\tHSADFEA1\nexamples\t{}\nd\t{}\nsource\t{}\nobservation\t{}\nlayer_count\t{}",
            set.rows.len(),
            set.d,
            set.source,
            set.observation,
            set.layer_count
        ));
    } else if magic == LABEL_MAGIC {
        let set = read_label_file(path)?;
        let pos = set.labels.iter().filter(|&&l| l).count();
        let f = &set.features;
        line(format!(
            "format\tHSADLBL1\nexamples\t{}\npositives\t{pos}\nnegatives\t{}\nd\t{}\nsource\t{}\nobservation\t{}\nlayer_count\t{}\nscorer\t{}\ntau\t{}",
            f.rows.len(),
            f.rows.len() - pos,
            f.d,
            f.source,
            f.observation,
            f.layer_count,
            set.label_config.scorer,
            set.label_config.tau
        ));
    } else if magic == MODEL_MAGIC {
        let m = read_model_file(path)?;
        let c = &m.config;
        line(format!(
            "format\tHSADMDL1\ninput_dim\t{}\nhidden_dims\t{:?}\nparameters\t{}\ndropout\t{}\nlambda_l1\t{}\nlearning_rate\t{}\nepochs\t{}\nbatch_size\t{}\nseed\t{}",
            c.input_dim,
            c.hidden_dims,
            m.param_count(),
            c.dropout_rate,
            c.lambda_l1,
            c.learning_rate,
            c.epochs,
            c.batch_size,
            c.seed
        ));
    } else if bytes.first() == Some(&b'{') && path.file_name().is_some_and(|n| n == RUN_MANIFEST_NAME) {
        let m = RunManifest::read(path)?;
        line(format!("format\trun manifest\ncommand\t{}\nargv\t{}", m.command, m.argv.join(" ")));
        for d in &m.outputs {
            line(format!("output\t{}\t{}", d.path, d.sha256));
        }
    } else if bytes.first() == Some(&b'{') {
        let entries = read_manifest(path)?;
        let scored = entries.iter().filter(|e| e.meta.similarity_score.is_some()).count();
        let labeled = entries.iter().filter(|e| e.meta.label.is_some()).count();
        line(format!(
            "format\tmanifest\nexamples\t{}\nwith_score\t{scored}\nwith_label\t{labeled}",
            entries.len()
        ));
    } else {
        return Err(CliError::Data(format!("{}: unrecognized file format", path.display())));
    }
    let _ = stdout.write_all(text.as_bytes());
    Ok(())
}

fn rebase(path: &mut PathBuf, cwd: &Path) {
    if path.is_relative() {
        *path = cwd.join(&*path);
    }
}

fn replay(manifest: &Path, out: Option<&Path>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let manifest_path = if manifest.is_dir() {
        manifest.join(RUN_MANIFEST_NAME)
    } else {
        manifest.to_path_buf()
    };
    let recorded = RunManifest::read(&manifest_path)?;
    let mut args = vec![String::from("hsad")];
    args.extend(recorded.argv.iter().cloned());
    let mut cli = Cli::try_parse_from(&args).map_err(|e| CliError::Data(format!("recorded command does not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_) | Command::Inspect(_)) {
        return Err(CliError::Data("recorded command cannot be replayed".into()));
    }
    let cwd = PathBuf::from(&recorded.cwd);
    let (inputs, out_dir) = cli.command.paths_mut();
    for (path, digest) in inputs.into_iter().zip(&recorded.inputs) {
        rebase(path, &cwd);
        let found = sha256_file(path)?;
        if found != digest.sha256 {
            return Err(CliError::Data(format!("input {} changed since the recorded run", path.display())));
        }
    }
    let out_dir = out_dir.expect("command has an output directory");
    match out {
        Some(o) => *out_dir = o.to_path_buf(),
        None => rebase(out_dir, &cwd),
    }
    let out_dir = out_dir.clone();
    let argv = rewrite_argv(&recorded.argv, &cli.command);
    let here = std::env::current_dir().map(|p| p.display().to_string()).unwrap_or_default();
    dispatch(cli.command, argv, here, stdout, stderr)?;
    for digest in &recorded.outputs {
        let found = sha256_file(&out_dir.join(&digest.path))?;
        if found != digest.sha256 {
            return Err(CliError::Data(format!("output {} differs from the recorded run", digest.path)));
        }
    }
    let _ = writeln!(stdout, "replayed {} into {}: {} outputs identical", recorded.command, out_dir.display(), recorded.outputs.len());
    Ok(())
}

/// The recorded arguments with path flags replaced by the rebased paths.
fn rewrite_argv(argv: &[String], command: &Command) -> Vec<String> {
    let mut flags: BTreeMap<&str, String> = BTreeMap::new();
    let path = |p: &PathBuf| p.display().to_string();
    match command {
        Command::Synth(a) => {
            flags.insert("--out", path(&a.out));
        }
        Command::Features(a) => {
            flags.insert("--traces", path(&a.traces));
            flags.insert("--out", path(&a.out));
        }
        Command::Label(a) => {
            flags.insert("--features", path(&a.features));
            flags.insert("--manifest", path(&a.manifest));
            flags.insert("--out", path(&a.out));
        }
        Command::Train(a) => {
            flags.insert("--labels", path(&a.data.labels));
            if let Some(f) = &a.data.features {
                flags.insert("--features", path(f));
            }
            flags.insert("--out", path(&a.out));
        }
        Command::Eval(a) => {
            flags.insert("--model", path(&a.model));
            flags.insert("--labels", path(&a.data.labels));
            if let Some(f) = &a.data.features {
                flags.insert("--features", path(f));
            }
            flags.insert("--out", path(&a.out));
        }
        Command::Ablate(a) => {
            flags.insert("--traces", path(&a.traces));
            flags.insert("--manifest", path(&a.manifest));
            flags.insert("--out", path(&a.out));
        }
        Command::Inspect(_) | Command::Replay(_) => {}
    }
    let mut out = Vec::with_capacity(argv.len());
    let mut iter = argv.iter();
    while let Some(arg) = iter.next() {
        if let Some((flag, _)) = arg.split_once('=') {
            if let Some(v) = flags.get(flag) {
                out.push(format!("{flag}={v}"));
                continue;
            }
        }
        out.push(arg.clone());
        if let Some(v) = flags.get(arg.as_str()) {
            iter.next();
            out.push(v.clone());
        }
    }
    out
}
