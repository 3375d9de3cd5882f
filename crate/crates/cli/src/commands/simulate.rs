use std::fs::{self, File};
use std::path::PathBuf;

use pcombine_core::powersim::{default_mu0_grid, run_power_grid, write_power_csv, GridCell, PowerGrid, Sidedness};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{write_manifest, RunClock};
use crate::methods::parse_specs;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// fig1, fig2, fig3 or null; explicit flags override preset values
    #[arg(long)]
    pub preset: Option<String>,

    /// Methods, comma separated
    #[arg(long = "methods", visible_alias = "method", value_delimiter = ',')]
    pub methods: Option<Vec<String>>,

    #[arg(long)]
    pub tau: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,

    #[arg(long)]
    pub delta: Option<f64>,

    #[arg(long)]
    pub gamma: Option<f64>,

    /// Numbers of combined p-values
    #[arg(long = "K", visible_alias = "k", value_delimiter = ',')]
    pub k: Option<Vec<usize>>,

    /// Signal frequencies ell/K
    #[arg(long, value_delimiter = ',')]
    pub ell_fracs: Option<Vec<f64>>,

    /// Candidate signal means (default 0.5, 0.65, ..., 5)
    #[arg(long, value_delimiter = ',')]
    pub mu0: Option<Vec<f64>>,

    /// Power the best method must reach at the chosen mean
    #[arg(long)]
    pub target_power: Option<f64>,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub reps: Option<usize>,

    /// two-sided or one-sided
    #[arg(long)]
    pub sidedness: Option<String>,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

struct Preset {
    methods: &'static [&'static str],
    alpha: f64,
    target: f64,
    sidedness: Sidedness,
    mu0: Option<Vec<f64>>,
    k: Vec<usize>,
}

fn preset(name: Option<&str>) -> Result<Preset, CliError> {
    let fracs_k = vec![10, 20, 40, 80];
    Ok(match name {
        None => Preset {
            methods: &["fisher", "afp", "fe"],
            alpha: 0.05,
            target: 0.5,
            sidedness: Sidedness::TwoSided,
            mu0: None,
            k: vec![10],
        },
        Some("fig1") => Preset {
            methods: &["fisher", "stouffer", "afp", "afz", "otfhard", "otfsoft"],
            alpha: 0.01,
            target: 0.5,
            sidedness: Sidedness::TwoSided,
            mu0: None,
            k: fracs_k,
        },
        Some("fig2") => Preset {
            methods: &["fisher", "afp", "fe"],
            alpha: 0.01,
            target: 0.5,
            sidedness: Sidedness::TwoSided,
            mu0: None,
            k: fracs_k,
        },
        Some("fig3") => Preset {
            methods: &["fecs", "pearson", "fe"],
            alpha: 0.001,
            target: 0.6,
            sidedness: Sidedness::OneSided,
            mu0: None,
            k: fracs_k,
        },
        Some("null") => Preset {
            methods: &["fisher", "stouffer", "afp", "fe", "fecs", "pearson"],
            alpha: 0.05,
            target: 0.0,
            sidedness: Sidedness::TwoSided,
            mu0: Some(vec![0.0]),
            k: vec![10],
        },
        Some(other) => return Err(CliError::Usage(format!("unknown preset '{other}' (fig1, fig2, fig3, null)"))),
    })
}

fn summary_line(cell: &GridCell) -> String {
    let mut ranked: Vec<_> = cell.estimates.iter().collect();
    ranked.sort_by(|a, b| b.power.total_cmp(&a.power));
    let parts: Vec<String> = ranked
        .iter()
        .map(|e| format!("{} {:.4} ({:.4})", e.method.key(), e.power, e.mc_se))
        .collect();
    format!(
        "K={} ell={} mu0={:.2}{}: {}",
        cell.k,
        cell.ell,
        cell.mu0,
        if cell.reached_target { "" } else { " (target not reached)" },
        parts.join(" > ")
    )
}

pub fn run(args: &Args, settings: &Settings) -> Result<(), CliError> {
    let clock = RunClock::start();
    let p = preset(args.preset.as_deref())?;
    let names: Vec<String> = match &args.methods {
        Some(m) => m.clone(),
        None => p.methods.iter().map(|s| s.to_string()).collect(),
    };
    let specs = parse_specs(&names, args.tau, args.taus.clone(), settings.delta(args.delta), args.gamma)?;
    let sidedness = match &args.sidedness {
        Some(s) => s.parse().map_err(|e: pcombine_core::Error| CliError::Usage(e.to_string()))?,
        None => p.sidedness,
    };
    let grid = PowerGrid {
        k_list: args.k.clone().unwrap_or(p.k),
        ell_fracs: args
            .ell_fracs
            .clone()
            .unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]),
        mu0_grid: args.mu0.clone().or(p.mu0).unwrap_or_else(default_mu0_grid),
        target_power: args.target_power.unwrap_or(p.target),
        alpha: settings.alpha(args.alpha, p.alpha),
        sidedness,
        reps: settings.reps(args.reps, 10_000),
        seed: settings.seed,
    };
    if grid.k_list.is_empty() || grid.ell_fracs.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(CliError::Usage("invalid grid: need K values and ell/K fractions in (0, 1]".into()));
    }
    let engine = settings.engine();
    let cells = run_power_grid(&engine, &specs, &grid)?;

    fs::create_dir_all(&args.out)?;
    let estimates: Vec<_> = cells.iter().flat_map(|c| c.estimates.iter().cloned()).collect();
    write_power_csv(File::create(args.out.join("power.csv"))?, &estimates)?;
    let summary: Vec<String> = cells.iter().map(summary_line).collect();
    for line in &summary {
        println!("{line}");
    }
    fs::write(args.out.join("summary.txt"), summary.join("\n") + "\n")?;
    let manifest = clock.manifest(settings, args, engine.cache().keys())?;
    write_manifest(&args.out, &manifest)?;
    Ok(())
}
