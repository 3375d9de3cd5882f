//! CSV input and output of the meta-analysis pipeline.
//!
//! Input is one `<study_id>.csv` per study, with a `feature_id` column and one
//! column per subject, plus a design file `study_id,subject_id,age,sex`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExpressionStudy, MetaOutput, TruthRow};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str = "feature_id,method,combined_p,q_value,s_sign";
pub const E_MATRIX_HEADER: &str = "feature_id,study_id,beta_sign,e_measure";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub study_id: String,
    pub subject_id: String,
    pub age: f64,
    #[serde(deserialize_with = "parse_sex")]
    pub sex: f64,
}

fn parse_sex<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "0" | "f" | "female" => Ok(0.0),
        "1" | "m" | "male" => Ok(1.0),
        other => Err(serde::de::Error::custom(format!("sex must be 0/1 or M/F, got '{other}'"))),
    }
}

pub fn read_design(path: &Path) -> Result<Vec<DesignRow>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<DesignRow>, _>>()?;
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: design file has no rows", path.display())));
    }
    Ok(rows)
}

/// Reads a `feature_id,<subject>...` matrix. Returns subject ids, feature ids
/// and rows.
pub fn read_study_matrix(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("feature_id") {
        return Err(Error::Parse(format!("{}: first column must be feature_id", path.display())));
    }
    let subjects: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut features = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::Parse(format!(
                        "{}: row {} (feature {id}) has a missing or non-numeric cell '{v}'",
                        path.display(),
                        line + 2
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != subjects.len() {
            return Err(Error::Parse(format!("{}: row {} has the wrong number of cells", path.display(), line + 2)));
        }
        features.push(id);
        rows.push(values);
    }
    Ok((subjects, features, rows))
}

/// Loads every study named in the design file from `expr_dir`, in study-id
/// order.
pub fn load_studies(expr_dir: &Path, design: &Path) -> Result<Vec<ExpressionStudy>> {
    let rows = read_design(design)?;
    let mut by_study: BTreeMap<String, BTreeMap<String, (f64, f64)>> = BTreeMap::new();
    for r in rows {
        let dup = by_study
            .entry(r.study_id.clone())
            .or_default()
            .insert(r.subject_id.clone(), (r.age, r.sex));
        if dup.is_some() {
            return Err(Error::Parse(format!("duplicate design row {}/{}", r.study_id, r.subject_id)));
        }
    }
    by_study
        .into_iter()
        .map(|(study_id, subjects)| {
            let path = expr_dir.join(format!("{study_id}.csv"));
            let (subject_ids, feature_ids, response) = read_study_matrix(&path)?;
            let mut age = Vec::with_capacity(subject_ids.len());
            let mut sex = Vec::with_capacity(subject_ids.len());
            for s in &subject_ids {
                let (a, x) = subjects.get(s).ok_or_else(|| {
                    Error::Parse(format!("{}: subject {s} not in the design file", path.display()))
                })?;
                age.push(*a);
                sex.push(*x);
            }
            let study = ExpressionStudy { study_id, feature_ids, subject_ids, response, age, sex };
            study.validate()?;
            Ok(study)
        })
        .collect()
}

/// Writes study matrices and `design.csv` in the layout read by
/// [`load_studies`].
pub fn write_studies(dir: &Path, studies: &[ExpressionStudy]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut design = csv::Writer::from_path(dir.join("design.csv"))?;
    design.write_record(["study_id", "subject_id", "age", "sex"])?;
    for s in studies {
        for ((subj, age), sex) in s.subject_ids.iter().zip(&s.age).zip(&s.sex) {
            design.write_record([s.study_id.as_str(), subj, &format!("{age}"), &format!("{sex}")])?;
        }
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", s.study_id)))?;
        let mut header = vec!["feature_id".to_string()];
        header.extend(s.subject_ids.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in s.feature_ids.iter().zip(&s.response) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    design.flush()?;
    Ok(())
}

pub fn write_truth<W: Write>(out: W, truth: &[TruthRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature_id", "mode", "study_id", "beta_age"])?;
    for t in truth {
        w.write_record([t.feature_id.as_str(), t.mode.as_str(), &t.study_id, &format!("{}", t.beta_age)])?;
    }
    w.flush()?;
    Ok(())
}

/// `feature_id,method,combined_p,q_value,s_sign`, features in id order and
/// methods in request order.
pub fn write_results<W: Write>(out: W, output: &MetaOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER.split(','))?;
    for f in &output.features {
        for m in &output.methods {
            w.write_record([
                f.feature_id.as_str(),
                m,
                &format!("{}", f.combined_p[m]),
                &format!("{}", f.q_value[m]),
                &f.s_sign.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_e_matrix<W: Write>(out: W, output: &MetaOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(E_MATRIX_HEADER.split(','))?;
    for f in &output.features {
        for s in &f.studies {
            w.write_record([
                f.feature_id.as_str(),
                &s.study_id,
                &s.association.beta_sign.to_string(),
                &format!("{}", s.association.e_measure),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metapipe::{synth_studies, SynthConfig};

    #[test]
    fn studies_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::preset("concordant", 3).unwrap();
        let out = synth_studies(&cfg).unwrap();
        write_studies(dir.path(), &out.studies).unwrap();
        let back = load_studies(dir.path(), &dir.path().join("design.csv")).unwrap();
        assert_eq!(back, out.studies);
    }

    #[test]
    fn missing_cells_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "feature_id,a,b\ng1,1.0,\n").unwrap();
        assert!(matches!(read_study_matrix(&p), Err(Error::Parse(_))));
    }

    #[test]
    fn design_sex_codes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "study_id,subject_id,age,sex\nA,x,3,M\nA,y,4,0\n").unwrap();
        let rows = read_design(&p).unwrap();
        assert_eq!(rows[0].sex, 1.0);
        assert_eq!(rows[1].sex, 0.0);
        fs::write(&p, "study_id,subject_id,age,sex\nA,x,3,Q\n").unwrap();
        assert!(read_design(&p).is_err());
    }
}
