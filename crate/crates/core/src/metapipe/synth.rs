//! Synthetic multi-study expression data with known age effects.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::ExpressionStudy;
use crate::error::{Error, Result};
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Concordance {
    /// Positive age effect in every signal study.
    ConcordantPos,
    /// Negative age effect in every signal study.
    ConcordantNeg,
    /// Alternating signs across signal studies.
    Discordant,
    Null,
}

impl Concordance {
    pub fn as_str(self) -> &'static str {
        match self {
            Concordance::ConcordantPos => "concordant+",
            Concordance::ConcordantNeg => "concordant-",
            Concordance::Discordant => "discordant",
            Concordance::Null => "null",
        }
    }
}

impl fmt::Display for Concordance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Concordance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concordant+" | "concordant" | "pos" => Ok(Concordance::ConcordantPos),
            "concordant-" | "neg" => Ok(Concordance::ConcordantNeg),
            "discordant" => Ok(Concordance::Discordant),
            "null" => Ok(Concordance::Null),
            _ => Err(Error::InvalidParameter(format!("unknown concordance mode '{s}'"))),
        }
    }
}

/// Signal pattern of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureSignal {
    pub mode: Concordance,
    /// Fraction of studies with a nonzero age effect.
    pub study_fraction: f64,
    /// Absolute age coefficient in signal studies.
    pub magnitude: f64,
}

impl FeatureSignal {
    pub const NULL: FeatureSignal =
        FeatureSignal { mode: Concordance::Null, study_fraction: 0.0, magnitude: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n_studies: usize,
    pub subjects_per_study: usize,
    /// One entry per feature.
    pub signals: Vec<FeatureSignal>,
    pub noise_sd: f64,
    /// Subject ages are drawn uniformly from this range.
    pub age_range: (f64, f64),
    pub seed: u64,
}

impl SynthConfig {
    /// `n_features` features of which the first `n_signal` follow `signal`.
    pub fn with_block(
        n_features: usize,
        n_signal: usize,
        signal: FeatureSignal,
        n_studies: usize,
        subjects_per_study: usize,
        seed: u64,
    ) -> Self {
        let signals = (0..n_features)
            .map(|i| if i < n_signal { signal } else { FeatureSignal::NULL })
            .collect();
        Self { n_studies, subjects_per_study, signals, noise_sd: 1.0, age_range: (1.0, 24.0), seed }
    }

    /// Named presets: `null`, `concordant`, `discordant` and `mixed`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let strong = |mode| FeatureSignal { mode, study_fraction: 0.5, magnitude: 0.15 };
        Ok(match name {
            "null" => Self::with_block(500, 0, FeatureSignal::NULL, 8, 12, seed),
            "concordant" => Self::with_block(500, 100, strong(Concordance::ConcordantPos), 8, 12, seed),
            "discordant" => Self::with_block(
                500,
                100,
                FeatureSignal { mode: Concordance::Discordant, study_fraction: 0.5, magnitude: 0.1 },
                8,
                12,
                seed,
            ),
            "mixed" => {
                let mut c = Self::with_block(600, 0, FeatureSignal::NULL, 8, 12, seed);
                for (i, s) in c.signals.iter_mut().enumerate().take(300) {
                    *s = match i % 3 {
                        0 => strong(Concordance::ConcordantPos),
                        1 => strong(Concordance::ConcordantNeg),
                        _ => strong(Concordance::Discordant),
                    };
                }
                c
            }
            _ => return Err(Error::InvalidParameter(format!("unknown synth preset '{name}'"))),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_studies == 0 || self.signals.is_empty() {
            return Err(Error::Empty);
        }
        if self.subjects_per_study < 4 {
            return Err(Error::InvalidParameter("at least 4 subjects per study are needed".into()));
        }
        if !(self.noise_sd > 0.0) || !(self.age_range.1 > self.age_range.0) {
            return Err(Error::InvalidParameter("noise sd and age range must be positive".into()));
        }
        for s in &self.signals {
            if !(0.0..=1.0).contains(&s.study_fraction) || !s.magnitude.is_finite() {
                return Err(Error::InvalidParameter(format!("invalid feature signal {s:?}")));
            }
        }
        Ok(())
    }
}

/// True age coefficient of one feature in one study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRow {
    pub feature_id: String,
    pub mode: Concordance,
    pub study_id: String,
    pub beta_age: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub studies: Vec<ExpressionStudy>,
    pub truth: Vec<TruthRow>,
}

pub fn feature_id(i: usize) -> String {
    format!("f{i:05}")
}

pub fn study_id(j: usize) -> String {
    format!("s{j:02}")
}

/// Age coefficients of feature `i` across studies. Signal studies are a
/// contiguous run, rotated by the feature index so every study carries
/// signal for some features.
fn betas(i: usize, signal: &FeatureSignal, n_studies: usize) -> Vec<f64> {
    let count = (signal.study_fraction * n_studies as f64).round() as usize;
    let mut out = vec![0.0; n_studies];
    if signal.mode == Concordance::Null || count == 0 {
        return out;
    }
    for r in 0..count {
        let j = (i + r) % n_studies;
        out[j] = match signal.mode {
            Concordance::ConcordantPos => signal.magnitude,
            Concordance::ConcordantNeg => -signal.magnitude,
            Concordance::Discordant if r % 2 == 0 => signal.magnitude,
            Concordance::Discordant => -signal.magnitude,
            Concordance::Null => 0.0,
        };
    }
    out
}

/// Simulates `y = b0 + beta_age * age + b_sex * sex + noise` for every
/// feature and study. Sex alternates across subjects so every design has
/// full rank; intercepts and sex effects are drawn per feature and study.
pub fn synth_studies(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let m = config.subjects_per_study;
    let (lo, hi) = config.age_range;
    let n_features = config.signals.len();
    let all_betas: Vec<Vec<f64>> = config
        .signals
        .iter()
        .enumerate()
        .map(|(i, s)| betas(i, s, config.n_studies))
        .collect();
    let mut studies = Vec::with_capacity(config.n_studies);
    for j in 0..config.n_studies {
        let mut design = rng::stream(config.seed, domain::SYNTH, (j as u64) << 32);
        let age: Vec<f64> = (0..m).map(|_| lo + (hi - lo) * design.uniform()).collect();
        let sex: Vec<f64> = (0..m).map(|s| (s % 2) as f64).collect();
        let response = (0..n_features)
            .map(|i| {
                let mut st = rng::stream(config.seed, domain::SYNTH, ((j as u64) << 32) | (i as u64 + 1));
                let b0 = 5.0 + st.normal();
                let b_sex = 0.5 * st.normal();
                let beta = all_betas[i][j];
                (0..m)
                    .map(|s| b0 + beta * age[s] + b_sex * sex[s] + config.noise_sd * st.normal())
                    .collect()
            })
            .collect();
        studies.push(ExpressionStudy {
            study_id: study_id(j),
            feature_ids: (0..n_features).map(feature_id).collect(),
            subject_ids: (0..m).map(|s| format!("{}_m{s:03}", study_id(j))).collect(),
            response,
            age,
            sex,
        });
    }
    let truth = config
        .signals
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            let betas = &all_betas[i];
            (0..config.n_studies).map(move |j| TruthRow {
                feature_id: feature_id(i),
                mode: s.mode,
                study_id: study_id(j),
                beta_age: betas[j],
            })
        })
        .collect();
    Ok(SynthOutput { studies, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let cfg = SynthConfig::preset("mixed", 7).unwrap();
        let a = synth_studies(&cfg).unwrap();
        assert_eq!(a, synth_studies(&cfg).unwrap());
        assert_eq!(a.studies.len(), 8);
        assert_eq!(a.studies[0].response.len(), 600);
        assert_eq!(a.truth.len(), 600 * 8);
        for s in &a.studies {
            s.validate().unwrap();
        }
    }

    #[test]
    fn signal_patterns() {
        let pos = FeatureSignal { mode: Concordance::ConcordantPos, study_fraction: 0.5, magnitude: 1.0 };
        assert_eq!(betas(0, &pos, 4), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(betas(3, &pos, 4), vec![1.0, 0.0, 0.0, 1.0]);
        let dis = FeatureSignal { mode: Concordance::Discordant, ..pos };
        assert_eq!(betas(1, &dis, 4), vec![0.0, 1.0, -1.0, 0.0]);
        assert_eq!(betas(1, &FeatureSignal::NULL, 4), vec![0.0; 4]);
    }

    #[test]
    fn unknown_preset() {
        assert!(SynthConfig::preset("nope", 1).is_err());
    }
}
