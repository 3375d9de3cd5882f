use std::fs::{self, File};
use std::path::PathBuf;

use pcombine_core::metapipe::{
    categorize_genes, load_studies, run_meta, write_e_matrix, write_results, Category, MetaConfig,
};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{write_manifest, RunClock};
use crate::methods::MethodArgs;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Directory with one <study_id>.csv per study
    #[arg(long)]
    pub expr_dir: PathBuf,

    /// Design CSV: study_id,subject_id,age,sex
    #[arg(long)]
    pub design: PathBuf,

    #[command(flatten)]
    pub methods: MethodArgs,

    #[arg(long, default_value_t = 0.05)]
    pub q_cutoff: f64,

    /// One-sided level counted by the sign score
    #[arg(long, default_value_t = 0.05)]
    pub sign_threshold: f64,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args, settings: &Settings) -> Result<(), CliError> {
    let clock = RunClock::start();
    let specs = args.methods.specs(settings)?;
    let studies = load_studies(&args.expr_dir, &args.design)?;
    let engine = settings.engine();
    let output = run_meta(&engine, &studies, &specs, &MetaConfig { sign_threshold: args.sign_threshold })?;

    fs::create_dir_all(&args.out)?;
    write_results(File::create(args.out.join("results.csv"))?, &output)?;
    write_e_matrix(File::create(args.out.join("e_matrix.csv"))?, &output)?;
    let mut skipped = csv::Writer::from_path(args.out.join("skipped.csv"))?;
    skipped.write_record(["feature_id", "reason"])?;
    for s in &output.skipped {
        skipped.write_record([&s.feature_id, &s.reason])?;
    }
    skipped.flush()?;

    println!(
        "{} studies, {} features combined, {} skipped",
        studies.len(),
        output.features.len(),
        output.skipped.len()
    );
    for key in &output.methods {
        let hits = output.features.iter().filter(|f| f.q_value[key] <= args.q_cutoff).count();
        println!("{key}: {hits} features with q <= {}", args.q_cutoff);
    }
    let find = |name: &str| output.methods.iter().find(|k| k.starts_with(name));
    if let (Some(fe), Some(fecs)) = (find("fe("), find("fecs(")) {
        let ids: Vec<String> = output.features.iter().map(|f| f.feature_id.clone()).collect();
        let qa: Vec<f64> = output.features.iter().map(|f| f.q_value[fe]).collect();
        let qb: Vec<f64> = output.features.iter().map(|f| f.q_value[fecs]).collect();
        let cats = categorize_genes(&ids, &qa, &qb, args.q_cutoff)?;
        let count = |c: Category| cats.values().filter(|v| **v == c).count();
        println!(
            "FE only: {}, both: {}, FE_CS only: {}",
            count(Category::OnlyA),
            count(Category::Both),
            count(Category::OnlyB)
        );
    }
    let manifest = clock.manifest(settings, args, engine.cache().keys())?;
    write_manifest(&args.out, &manifest)?;
    Ok(())
}
