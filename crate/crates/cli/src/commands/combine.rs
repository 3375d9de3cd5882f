use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pcombine_core::pvalue::{validate, DEFAULT_FLOOR};
use pcombine_core::{Engine, InputKind, Observation, OneSidedPair, Prepared};
use serde::Serialize;

use super::{fmt_opt, parent_dir};
use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{write_manifest, RunClock};
use crate::methods::MethodArgs;

/// Rows hold two-sided p-values, or left-tail one-sided p-values with
/// `--one-sided`. One-sided methods (pearson, fecs) always read rows as
/// left-tail p-values with right = 1 - left.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[command(flatten)]
    pub methods: MethodArgs,

    /// CSV of p-values, one vector per row; an optional leading non-numeric
    /// column is used as the row id and a non-numeric first row is a header
    #[arg(long)]
    pub input: PathBuf,

    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Rows are left-tail one-sided p-values
    #[arg(long)]
    pub one_sided: bool,
}

pub const HEADER: [&str; 6] = ["id", "method", "statistic", "pvalue", "calibration", "j_star"];

struct Row {
    id: String,
    values: Vec<f64>,
}

fn read_rows(path: &Path) -> Result<Vec<Row>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let (id, numbers) = match fields[0].parse::<f64>() {
            Ok(_) => ((rows.len() + 1).to_string(), &fields[..]),
            Err(_) => (fields[0].to_string(), &fields[1..]),
        };
        if numbers.is_empty() {
            return Err(CliError::Data(format!("{}:{line}: row has no p-values", path.display())));
        }
        let values = numbers
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| CliError::Data(format!("{}:{line}: '{f}' is not a number", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { id, values });
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no p-value rows", path.display())));
    }
    Ok(rows)
}

fn observation(values: &[f64], one_sided: bool, kind: InputKind, line: &str) -> Result<Observation, CliError> {
    let data_err = |e: pcombine_core::Error| CliError::Data(format!("row {line}: {e}"));
    let left = validate(values.to_vec(), DEFAULT_FLOOR).map_err(data_err)?;
    if kind == InputKind::OneSided {
        return Ok(Observation::one_sided(OneSidedPair::from_left(left).map_err(data_err)?));
    }
    if one_sided {
        let two = values.iter().map(|&p| (2.0 * p.min(1.0 - p)).min(1.0)).collect();
        Ok(Observation::two_sided(validate(two, DEFAULT_FLOOR).map_err(data_err)?))
    } else {
        Ok(Observation::two_sided(left))
    }
}

pub fn run(args: &Args, settings: &Settings) -> Result<(), CliError> {
    let clock = RunClock::start();
    let specs = args.methods.specs(settings)?;
    let rows = read_rows(&args.input)?;
    let engine: Engine = settings.engine();
    let mut prepared: HashMap<(usize, usize), Prepared> = HashMap::new();

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(File::create(p).map_err(|e| CliError::Data(format!("cannot create {}: {e}", p.display())))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(HEADER)?;
    for row in &rows {
        let k = row.values.len();
        for (si, spec) in specs.iter().enumerate() {
            if !prepared.contains_key(&(si, k)) {
                prepared.insert((si, k), engine.prepare(spec, k)?);
            }
            let obs = observation(&row.values, args.one_sided, spec.method.input_kind(), &row.id)?;
            let r = prepared[&(si, k)].combine(&obs)?;
            w.write_record([
                row.id.clone(),
                spec.key(),
                format!("{}", r.statistic),
                format!("{}", r.pvalue),
                r.calibration.as_str().to_string(),
                fmt_opt(r.j_star),
            ])?;
        }
    }
    w.flush()?;
    if let Some(out) = &args.out {
        let manifest = clock.manifest(settings, args, engine.cache().keys())?;
        write_manifest(&parent_dir(out), &manifest)?;
    }
    Ok(())
}
