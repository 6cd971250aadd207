//! Frequency-domain features of hidden-layer temporal signals.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::fft::FftPlan;
use crate::signal::{ObservationPoint, SignalMatrix};

/// Unnormalized DFT magnitudes for bins `0..=N/2` of a real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpectrum {
    pub amplitudes: Vec<f64>,
    /// Signal length.
    pub n: usize,
}

/// `|Σ_t x[t]·exp(−2πi·kt/N)|` for `k = 0..=N/2`. No window, detrend or scaling.
pub fn amplitude_spectrum(x: &[f64]) -> Result<AmplitudeSpectrum> {
    amplitude_spectrum_with(&FftPlan::new(x.len().max(1)), x)
}

fn amplitude_spectrum_with(plan: &FftPlan, x: &[f64]) -> Result<AmplitudeSpectrum> {
    if x.len() < 2 {
        bail!(InvalidArgument, "signal length {} is below 2", x.len());
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        bail!(InvalidArgument, "signal entry {i} is not finite");
    }
    let spectrum = plan.forward_real(x);
    let half = x.len() / 2;
    Ok(AmplitudeSpectrum {
        amplitudes: spectrum[..=half].iter().map(|c| c.norm()).collect(),
        n: x.len(),
    })
}

/// Bin index and amplitude of the largest non-DC bin; ties go to the lowest bin.
pub fn strongest_non_dc(spec: &AmplitudeSpectrum) -> Result<(usize, f64)> {
    if spec.amplitudes.len() < 2 {
        bail!(InvalidArgument, "spectrum has no non-DC bin");
    }
    let mut best = (1, spec.amplitudes[1]);
    for (k, &a) in spec.amplitudes.iter().enumerate().skip(2) {
        if a > best.1 {
            best = (k, a);
        }
    }
    Ok(best)
}

/// How a feature vector was derived from the signal matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSource {
    /// Strongest non-DC amplitude per hidden dimension.
    FftMaxNonDc,
    /// Maximum raw value per hidden dimension (ablation baseline).
    TimeMax,
}

impl FeatureSource {
    pub fn to_tag(self) -> u8 {
        match self {
            FeatureSource::FftMaxNonDc => 0,
            FeatureSource::TimeMax => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FeatureSource::FftMaxNonDc),
            1 => Some(FeatureSource::TimeMax),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSource::FftMaxNonDc => "fft",
            FeatureSource::TimeMax => "time-max",
        }
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fft" | "fft-max-non-dc" => Ok(FeatureSource::FftMaxNonDc),
            "time-max" => Ok(FeatureSource::TimeMax),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown feature source `{s}`"))),
        }
    }
}

/// Per-dimension feature vector for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFeature {
    pub f: Vec<f64>,
    pub source: FeatureSource,
    pub observation: ObservationPoint,
    pub layer_count: u32,
    /// Winning bin per dimension (FFT source only). Not part of `f`.
    pub peak_bins: Option<Vec<usize>>,
}

impl SpectralFeature {
    pub fn dim(&self) -> usize {
        self.f.len()
    }
}

/// Strongest non-DC amplitude of every column of `t`.
pub fn extract_spectral_features(t: &SignalMatrix) -> Result<SpectralFeature> {
    let plan = FftPlan::new(t.rows());
    let mut f = Vec::with_capacity(t.dim());
    let mut bins = Vec::with_capacity(t.dim());
    for col in 0..t.dim() {
        let spec = amplitude_spectrum_with(&plan, &t.column(col))?;
        let (bin, amp) = strongest_non_dc(&spec)?;
        f.push(amp);
        bins.push(bin);
    }
    Ok(SpectralFeature {
        f,
        source: FeatureSource::FftMaxNonDc,
        observation: t.observation,
        layer_count: t.layer_ids.len() as u32,
        peak_bins: Some(bins),
    })
}

/// Column-wise maximum of `t`.
pub fn time_max_features(t: &SignalMatrix) -> SpectralFeature {
    let mut f = t.row(0).to_vec();
    for r in 1..t.rows() {
        for (acc, &v) in f.iter_mut().zip(t.row(r)) {
            if v > *acc {
                *acc = v;
            }
        }
    }
    SpectralFeature {
        f,
        source: FeatureSource::TimeMax,
        observation: t.observation,
        layer_count: t.layer_ids.len() as u32,
        peak_bins: None,
    }
}

/// Dispatches on `source`.
pub fn extract_features(t: &SignalMatrix, source: FeatureSource) -> Result<SpectralFeature> {
    match source {
        FeatureSource::FftMaxNonDc => extract_spectral_features(t),
        FeatureSource::TimeMax => Ok(time_max_features(t)),
    }
}
