use std::fs::File;
use std::path::PathBuf;

use pcombine_core::metapipe::{synth_studies, write_studies, write_truth, SynthConfig};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{write_manifest, RunClock};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// null, concordant, discordant or mixed
    #[arg(long, default_value = "mixed")]
    pub preset: String,

    #[arg(long)]
    pub studies: Option<usize>,

    #[arg(long)]
    pub subjects: Option<usize>,

    #[arg(long)]
    pub noise_sd: Option<f64>,

    /// Output directory for study CSVs, design.csv and truth.csv
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args, settings: &Settings) -> Result<(), CliError> {
    let clock = RunClock::start();
    let mut config = SynthConfig::preset(&args.preset, settings.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(s) = args.studies {
        config.n_studies = s;
    }
    if let Some(m) = args.subjects {
        config.subjects_per_study = m;
    }
    if let Some(sd) = args.noise_sd {
        config.noise_sd = sd;
    }
    let out = synth_studies(&config)?;
    write_studies(&args.out, &out.studies)?;
    write_truth(File::create(args.out.join("truth.csv"))?, &out.truth)?;
    println!(
        "wrote {} studies x {} features to {}",
        out.studies.len(),
        config.signals.len(),
        args.out.display()
    );
    let manifest = clock.manifest(settings, args, Vec::new())?;
    write_manifest(&args.out, &manifest)?;
    Ok(())
}
