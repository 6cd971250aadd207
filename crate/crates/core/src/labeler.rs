//! Ground-truth hallucination labels from answer/reference similarity.
//!
//! An answer is labeled as a hallucination (1) when its similarity to the
//! reference is at most the threshold `tau`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::spectral::SpectralFeature;
use crate::trace::ExampleMeta;

/// Default threshold for externally supplied similarity scores.
pub const DEFAULT_TAU: f64 = 0.5;

/// Where similarity scores come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    /// `similarity_score` field of the manifest.
    External,
    /// Token-F1 between generated and reference answers.
    Lexical,
}

impl Scorer {
    pub fn name(self) -> &'static str {
        match self {
            Scorer::External => "external",
            Scorer::Lexical => "lexical",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(Scorer::External),
            "lexical" => Ok(Scorer::Lexical),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown scorer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    pub tau: f64,
    pub scorer: Scorer,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            scorer: Scorer::External,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() {
            bail!(InvalidConfig, "tau must be finite");
        }
        if self.scorer == Scorer::Lexical && !(0.0..=1.0).contains(&self.tau) {
            bail!(InvalidConfig, "tau {} outside [0, 1] for the lexical scorer", self.tau);
        }
        Ok(())
    }
}

/// 1 (hallucination) when `sim_score <= tau`.
pub fn judge(sim_score: f64, tau: f64) -> Result<bool> {
    if !sim_score.is_finite() || !tau.is_finite() {
        bail!(InvalidArgument, "judge needs finite inputs, got score {sim_score} and tau {tau}");
    }
    Ok(sim_score <= tau)
}

fn normalized_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(String::from).collect()
}

/// Unigram token F1 after lowercasing and punctuation removal.
pub fn lexical_similarity(answer: &str, reference: &str) -> Result<f64> {
    let a = normalized_tokens(answer);
    let r = normalized_tokens(reference);
    if a.is_empty() || r.is_empty() {
        bail!(InvalidArgument, "lexical similarity needs non-empty texts");
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &a {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return Ok(0.0);
    }
    let precision = common as f64 / a.len() as f64;
    let recall = common as f64 / r.len() as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// A feature vector paired with its label (`true` = hallucination).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub example_id: String,
    pub feature: SpectralFeature,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassBalance {
    pub positives: usize,
    pub negatives: usize,
}

impl ClassBalance {
    pub fn of<'a>(labels: impl IntoIterator<Item = &'a bool>) -> Self {
        let mut b = Self::default();
        for &l in labels {
            if l {
                b.positives += 1;
            } else {
                b.negatives += 1;
            }
        }
        b
    }

    pub fn is_single_class(&self) -> bool {
        self.positives == 0 || self.negatives == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelWarning {
    /// The manifest carried a label that was overridden by the score.
    PresetLabelIgnored { example_id: String, preset: bool, computed: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    pub examples: Vec<LabeledExample>,
    pub balance: ClassBalance,
    pub warnings: Vec<LabelWarning>,
}

/// Similarity score of one manifest record under `scorer`.
pub fn score_meta(meta: &ExampleMeta, scorer: Scorer) -> Result<f64> {
    match scorer {
        Scorer::External => meta
            .similarity_score
            .ok_or_else(|| Error::MissingScore(meta.example_id.clone())),
        Scorer::Lexical => {
            if meta.generated_answer.trim().is_empty() || meta.reference_answer.trim().is_empty() {
                return Err(Error::MissingText(meta.example_id.clone()));
            }
            lexical_similarity(&meta.generated_answer, &meta.reference_answer)
        }
    }
}

/// Labels every manifest record, in manifest order.
pub fn label_dataset(
    metas: &[ExampleMeta],
    features: &BTreeMap<String, SpectralFeature>,
    cfg: &LabelConfig,
) -> Result<LabelOutcome> {
    cfg.validate()?;
    let mut examples = Vec::with_capacity(metas.len());
    let mut warnings = Vec::new();
    let mut dim = None;
    for meta in metas {
        let feature = features
            .get(&meta.example_id)
            .ok_or_else(|| Error::MissingFeature(meta.example_id.clone()))?;
        match dim {
            None => dim = Some(feature.dim()),
            Some(d) if d != feature.dim() => {
                return Err(Error::WidthMismatch {
                    expected: d,
                    found: feature.dim(),
                })
            }
            _ => {}
        }
        let score = score_meta(meta, cfg.scorer)?;
        let label = judge(score, cfg.tau)?;
        if let Some(preset) = meta.label {
            warnings.push(LabelWarning::PresetLabelIgnored {
                example_id: meta.example_id.clone(),
                preset,
                computed: label,
            });
        }
        examples.push(LabeledExample {
            example_id: meta.example_id.clone(),
            feature: feature.clone(),
            label,
        });
    }
    let balance = ClassBalance::of(examples.iter().map(|e| &e.label));
    Ok(LabelOutcome {
        examples,
        balance,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ObservationPoint;
    use crate::spectral::FeatureSource;
    use alloc::vec;

    fn feat() -> SpectralFeature {
        SpectralFeature {
            f: vec![1.0, 2.0],
            source: FeatureSource::FftMaxNonDc,
            observation: ObservationPoint::AEnd,
            layer_count: 2,
            peak_bins: None,
        }
    }

    fn meta(id: &str, score: Option<f64>) -> ExampleMeta {
        ExampleMeta {
            example_id: id.into(),
            similarity_score: score,
            ..Default::default()
        }
    }

    #[test]
    fn judge_threshold() {
        assert!(judge(0.5, 0.5).unwrap());
        assert!(!judge(0.51, 0.5).unwrap());
        assert!(judge(-1.0, 0.5).unwrap());
        assert!(judge(f64::NAN, 0.5).is_err());
        assert!(judge(0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn token_f1() {
        assert_eq!(lexical_similarity("Paris", "Paris").unwrap(), 1.0);
        assert_eq!(lexical_similarity("red apple", "green pear").unwrap(), 0.0);
        let v = lexical_similarity("the red apple", "red apple pie").unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lexical_similarity("Paris!", "paris").unwrap(), 1.0);
        assert!(lexical_similarity("  ", "paris").is_err());
        assert!(lexical_similarity("...", "paris").is_err());
    }

    #[test]
    fn repeated_tokens_use_multiset_overlap() {
        // answer: a a b (3), reference: a b b c (4), common = min(2,1)+min(1,2) = 2
        let v = lexical_similarity("a a b", "a b b c").unwrap();
        let (p, r) = (2.0 / 3.0, 2.0 / 4.0);
        assert!((v - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert_eq!(v, lexical_similarity("a b b c", "a a b").unwrap());
    }

    #[test]
    fn labels_elementwise() {
        let metas = vec![meta("a", Some(0.2)), meta("b", Some(0.5)), meta("c", Some(0.9))];
        let features: BTreeMap<_, _> = ["a", "b", "c"].iter().map(|id| (String::from(*id), feat())).collect();
        let out = label_dataset(&metas, &features, &LabelConfig::default()).unwrap();
        let labels: Vec<bool> = out.examples.iter().map(|e| e.label).collect();
        assert_eq!(labels, vec![true, true, false]);
        assert_eq!(out.balance, ClassBalance { positives: 2, negatives: 1 });
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn score_overrides_preset_label() {
        let mut m = meta("a", Some(0.9));
        m.label = Some(true);
        let features: BTreeMap<_, _> = [(String::from("a"), feat())].into_iter().collect();
        let out = label_dataset(&[m], &features, &LabelConfig::default()).unwrap();
        assert!(!out.examples[0].label);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn missing_inputs_name_the_example() {
        let features: BTreeMap<_, _> = [(String::from("a"), feat())].into_iter().collect();
        let err = label_dataset(&[meta("zz", Some(0.1))], &features, &LabelConfig::default()).unwrap_err();
        assert_eq!(err, Error::MissingFeature("zz".into()));
        let err = label_dataset(&[meta("a", None)], &features, &LabelConfig::default()).unwrap_err();
        assert_eq!(err, Error::MissingScore("a".into()));
        let cfg = LabelConfig {
            tau: 0.5,
            scorer: Scorer::Lexical,
        };
        let err = label_dataset(&[meta("a", None)], &features, &cfg).unwrap_err();
        assert_eq!(err, Error::MissingText("a".into()));
    }

    #[test]
    fn config_validation() {
        assert!(LabelConfig { tau: f64::NAN, scorer: Scorer::External }.validate().is_err());
        assert!(LabelConfig { tau: 1.5, scorer: Scorer::Lexical }.validate().is_err());
        assert!(LabelConfig { tau: -2.0, scorer: Scorer::External }.validate().is_ok());
    }
}
