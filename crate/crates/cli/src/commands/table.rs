use std::io::{self, Write};
use std::path::PathBuf;

use pcombine_core::nulldist::{critical_value, MIN_TAIL_COUNT};
use pcombine_core::{Error, TableCache};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{write_manifest, RunClock};
use crate::methods::MethodArgs;

pub const DEFAULT_TABLE_DIR: &str = "pcombine-tables";

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[command(flatten)]
    pub methods: MethodArgs,

    /// Number of combined p-values
    #[arg(long = "K", visible_alias = "k")]
    pub k: usize,

    /// Levels at which to print critical values
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.01")]
    pub alpha: Vec<f64>,
}

pub fn run(args: &Args, settings: &Settings) -> Result<(), CliError> {
    let clock = RunClock::start();
    let specs = args.methods.specs(settings)?;
    for &a in &args.alpha {
        if !(a > 0.0 && a <= 0.5) {
            return Err(CliError::Usage(format!("alpha = {a} must lie in (0, 0.5]")));
        }
        if (settings.b as f64) * a < MIN_TAIL_COUNT as f64 {
            return Err(Error::UnstableTail { b: settings.b, alpha: a, min_tail: MIN_TAIL_COUNT }.into());
        }
    }
    let mut settings = settings.clone();
    let dir = settings.table_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_TABLE_DIR));
    settings.table_dir = Some(dir.clone());
    let engine = settings.engine();

    let mut out = io::stdout().lock();
    writeln!(out, "method,K,B,seed,alpha,critical_value")?;
    for spec in &specs {
        let hit = engine.cache().get(spec, args.k, settings.b, settings.seed).is_some();
        let table = engine.table(spec, args.k)?;
        let file = dir.join(TableCache::file_name(spec, args.k, settings.b, settings.seed));
        eprintln!("{} {}", if hit { "cache hit:" } else { "wrote" }, file.display());
        for &a in &args.alpha {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                spec.key(),
                args.k,
                settings.b,
                settings.seed,
                a,
                critical_value(&table, a)?
            )?;
        }
    }
    let manifest = clock.manifest(&settings, args, engine.cache().keys())?;
    write_manifest(&dir, &manifest)?;
    Ok(())
}
