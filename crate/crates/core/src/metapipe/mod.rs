//! Feature-by-study meta-analysis.
//!
//! Each study regresses every feature on age and sex. The per-study age
//! p-values are combined across studies per feature, adjusted for multiple
//! testing with BH q-values, and summarized with signed association measures.

mod io;
mod qvalue;
mod regression;
mod synth;

pub use io::{
    load_studies, read_design, read_study_matrix, write_e_matrix, write_results, write_studies,
    write_truth, DesignRow, E_MATRIX_HEADER, RESULTS_HEADER,
};
pub use qvalue::bh_qvalues;
pub use regression::{fit_feature_regression, RegressionFit};
pub use synth::{synth_studies, Concordance, FeatureSignal, SynthConfig, SynthOutput, TruthRow};

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{Engine, Prepared};
use crate::error::{Error, Result};
use crate::pvalue::{
    validate, MethodSpec, Observation, OneSidedPair, SignedAssociation, DEFAULT_FLOOR,
};

/// One study: a features-by-subjects response matrix and subject covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionStudy {
    pub study_id: String,
    pub feature_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    /// `response[f][s]` for feature f and subject s.
    pub response: Vec<Vec<f64>>,
    pub age: Vec<f64>,
    /// 0/1 coding.
    pub sex: Vec<f64>,
}

impl ExpressionStudy {
    pub fn validate(&self) -> Result<()> {
        let m = self.subject_ids.len();
        if m < 4 {
            return Err(Error::InvalidParameter(format!(
                "study {} has {m} subjects; at least 4 are needed",
                self.study_id
            )));
        }
        if self.age.len() != m || self.sex.len() != m {
            return Err(Error::Mismatch(format!("study {}: covariate length differs from subjects", self.study_id)));
        }
        if self.response.len() != self.feature_ids.len() {
            return Err(Error::Mismatch(format!("study {}: one response row per feature", self.study_id)));
        }
        for (row, id) in self.response.iter().zip(&self.feature_ids) {
            if row.len() != m {
                return Err(Error::Mismatch(format!(
                    "study {}: feature {id} has {} values for {m} subjects",
                    self.study_id,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "study {}: feature {id} has a missing or non-finite value",
                    self.study_id
                )));
            }
        }
        Ok(())
    }
}

/// Per-study summary of one feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyAssociation {
    pub study_id: String,
    pub fit: RegressionFit,
    pub association: SignedAssociation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMetaResult {
    pub feature_id: String,
    pub studies: Vec<StudyAssociation>,
    /// Keyed by method key.
    pub combined_p: BTreeMap<String, f64>,
    pub q_value: BTreeMap<String, f64>,
    pub s_sign: i32,
}

/// A feature left out of combination, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFeature {
    pub feature_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaOutput {
    /// Method keys in request order.
    pub methods: Vec<String>,
    /// Sorted by feature id.
    pub features: Vec<FeatureMetaResult>,
    pub skipped: Vec<SkippedFeature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetaConfig {
    /// One-sided threshold counted by the sign score.
    pub sign_threshold: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self { sign_threshold: 0.05 }
    }
}

/// `-sign(beta) log10(min(p_left, p_right))`.
pub fn association_measure(beta_sign: i8, p_left: f64, p_right: f64) -> f64 {
    let e = -(beta_sign as f64) * p_left.min(p_right).log10();
    if e == 0.0 {
        0.0
    } else {
        e
    }
}

/// `sum_k sign(beta_k) 1{min(p_left, p_right) <= threshold}`.
pub fn sign_score(studies: &[SignedAssociation], threshold: f64) -> i32 {
    studies
        .iter()
        .filter(|s| s.p_left.min(s.p_right) <= threshold)
        .map(|s| s.beta_sign as i32)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignClass {
    Positive,
    Negative,
}

/// Positive iff the sign score is strictly positive.
pub fn classify_sign(s_sign: i32) -> SignClass {
    if s_sign > 0 {
        SignClass::Positive
    } else {
        SignClass::Negative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Category {
    OnlyA,
    Both,
    OnlyB,
}

/// Features significant under method A, B or both at `q <= cutoff`. Features
/// significant under neither are left out.
pub fn categorize_genes(
    feature_ids: &[String],
    q_a: &[f64],
    q_b: &[f64],
    q_cutoff: f64,
) -> Result<BTreeMap<String, Category>> {
    if feature_ids.len() != q_a.len() || q_a.len() != q_b.len() {
        return Err(Error::Mismatch("feature ids and q-value lists differ in length".into()));
    }
    Ok(feature_ids
        .iter()
        .zip(q_a.iter().zip(q_b))
        .filter_map(|(id, (&a, &b))| {
            let cat = match (a <= q_cutoff, b <= q_cutoff) {
                (true, true) => Category::Both,
                (true, false) => Category::OnlyA,
                (false, true) => Category::OnlyB,
                (false, false) => return None,
            };
            Some((id.clone(), cat))
        })
        .collect())
}

/// Combined p-value of every prepared method for one feature.
///
/// Two-sided methods receive the per-study two-sided p-values; one-sided
/// methods receive the `(p_left, p_right)` pair.
pub fn combine_feature(prepared: &[Prepared], fits: &[RegressionFit]) -> Result<Vec<f64>> {
    if fits.is_empty() {
        return Err(Error::MissingInput { method: "meta".into(), what: "per-study fits" });
    }
    let two = validate(fits.iter().map(|f| f.p_two).collect(), DEFAULT_FLOOR)?;
    let left = validate(fits.iter().map(|f| f.p_left).collect(), DEFAULT_FLOOR)?;
    let right = validate(fits.iter().map(|f| f.p_right).collect(), DEFAULT_FLOOR)?;
    let obs = Observation::both(two, OneSidedPair::new(left, right)?)?;
    prepared.iter().map(|p| Ok(p.combine(&obs)?.pvalue)).collect()
}

/// Runs the full pipeline. Features missing from a study or failing a fit in
/// any study are skipped; the rest are combined across all studies.
pub fn run_meta(
    engine: &Engine,
    studies: &[ExpressionStudy],
    methods: &[MethodSpec],
    config: &MetaConfig,
) -> Result<MetaOutput> {
    if studies.is_empty() {
        return Err(Error::Empty);
    }
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no combination methods requested".into()));
    }
    for s in studies {
        s.validate()?;
    }
    let k = studies.len();
    let prepared = methods.iter().map(|m| engine.prepare(m, k)).collect::<Result<Vec<_>>>()?;

    let indexes: Vec<BTreeMap<&str, usize>> = studies
        .iter()
        .map(|s| s.feature_ids.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect())
        .collect();
    let all_ids: BTreeSet<&str> = indexes.iter().flat_map(|ix| ix.keys().copied()).collect();

    let outcomes: Vec<std::result::Result<FeatureMetaResult, SkippedFeature>> = all_ids
        .par_iter()
        .map(|&fid| {
            let skip = |reason: String| {
                log::info!("skipping feature {fid}: {reason}");
                SkippedFeature { feature_id: fid.to_string(), reason }
            };
            let mut per_study = Vec::with_capacity(k);
            for (study, ix) in studies.iter().zip(&indexes) {
                let Some(&row) = ix.get(fid) else {
                    return Err(skip(format!("missing from study {}", study.study_id)));
                };
                match fit_feature_regression(&study.response[row], &study.age, &study.sex) {
                    Ok(fit) => per_study.push(StudyAssociation {
                        study_id: study.study_id.clone(),
                        association: SignedAssociation::new(fit.beta_age, fit.p_left, fit.p_right),
                        fit,
                    }),
                    Err(e) => return Err(skip(format!("study {}: {e}", study.study_id))),
                }
            }
            let fits: Vec<RegressionFit> = per_study.iter().map(|s| s.fit).collect();
            let combined = combine_feature(&prepared, &fits).map_err(|e| skip(e.to_string()))?;
            let assoc: Vec<SignedAssociation> = per_study.iter().map(|s| s.association).collect();
            Ok(FeatureMetaResult {
                feature_id: fid.to_string(),
                s_sign: sign_score(&assoc, config.sign_threshold),
                studies: per_study,
                combined_p: methods.iter().map(|m| m.key()).zip(combined).collect(),
                q_value: BTreeMap::new(),
            })
        })
        .collect();

    let mut features = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(f) => features.push(f),
            Err(s) => skipped.push(s),
        }
    }
    let keys: Vec<String> = methods.iter().map(|m| m.key()).collect();
    for key in &keys {
        let p: Vec<f64> = features.iter().map(|f| f.combined_p[key]).collect();
        for (f, q) in features.iter_mut().zip(bh_qvalues(&p)) {
            f.q_value.insert(key.clone(), q);
        }
    }
    Ok(MetaOutput { methods: keys, features, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TableSettings;
    use crate::pvalue::Method;

    #[test]
    fn association_examples() {
        assert!((association_measure(1, 0.001, 0.999) - 3.0).abs() < 1e-12);
        assert!((association_measure(-1, 0.99, 0.01) + 2.0).abs() < 1e-12);
        assert_eq!(association_measure(1, 1.0, 1.0), 0.0);
        assert!(association_measure(-1, 1.0, 1.0).is_sign_positive());
    }

    #[test]
    fn sign_score_examples() {
        let pass = |b: f64| SignedAssociation::new(b, 0.01, 0.99);
        let fail = SignedAssociation::new(1.0, 0.3, 0.7);
        assert_eq!(sign_score(&[fail, fail], 0.05), 0);
        assert_eq!(classify_sign(0), SignClass::Negative);
        let mut v: Vec<_> = (0..5).map(|_| pass(1.0)).collect();
        v.extend((0..2).map(|_| pass(-1.0)));
        v.push(fail);
        assert_eq!(sign_score(&v, 0.05), 3);
        assert_eq!(sign_score(&vec![pass(2.0); 16], 0.05), 16);
        assert_eq!(classify_sign(16), SignClass::Positive);
    }

    #[test]
    fn categories() {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let cats = categorize_genes(&ids, &[0.01, 0.01, 0.2, 0.2], &[0.2, 0.01, 0.2, 0.04], 0.05).unwrap();
        assert_eq!(cats.get("a"), Some(&Category::OnlyA));
        assert_eq!(cats.get("b"), Some(&Category::Both));
        assert_eq!(cats.get("c"), None);
        assert_eq!(cats.get("d"), Some(&Category::OnlyB));
    }

    fn fit(p_two: f64, p_left: f64) -> RegressionFit {
        RegressionFit { beta_age: 0.0, se: 1.0, t: 0.0, df: 5, p_two, p_left, p_right: 1.0 - p_left }
    }

    #[test]
    fn combine_feature_examples() {
        let engine = Engine::new(TableSettings::new(2_000, 1));
        let fisher = [engine.prepare(&MethodSpec::new(Method::Fisher), 2).unwrap()];
        let ones = combine_feature(&fisher, &[fit(1.0, 0.5), fit(1.0, 0.5)]).unwrap();
        assert!((ones[0] - 1.0).abs() < 1e-12);
        let p = combine_feature(&fisher, &[fit(0.1, 0.05), fit(0.5, 0.25)]).unwrap();
        assert!((p[0] - 0.19979).abs() < 1e-5);
        let fecs = [engine.prepare(&MethodSpec::new(Method::FECS), 1).unwrap()];
        let half = combine_feature(&fecs, &[fit(1.0, 0.5)]).unwrap();
        assert!((half[0] - 0.5).abs() < 0.02);
    }
}
