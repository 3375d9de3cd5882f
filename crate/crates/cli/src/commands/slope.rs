use std::fs::{self, File};
use std::path::PathBuf;

use pcombine_core::powersim::{estimate_exact_slope, write_slope_csv, SlopeConfig, SlopeTest};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{write_manifest, RunClock};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// ztest, fisher, stouffer, minp or afp
    #[arg(long, default_value = "ztest")]
    pub test: String,

    /// Effect size of the signal studies
    #[arg(long)]
    pub mu: f64,

    /// Largest sample size; the grid is 100, 1000, ... up to it
    #[arg(long, default_value_t = 10_000)]
    pub nmax: usize,

    /// Explicit sample-size grid, overrides --nmax
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,

    /// Studies combined (ignored by ztest)
    #[arg(long = "K", visible_alias = "k", default_value_t = 5)]
    pub k: usize,

    /// Signal studies among the K
    #[arg(long, default_value_t = 2)]
    pub ell: usize,

    /// Sample-size ratios, summing to K (default all 1)
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,

    #[arg(long)]
    pub reps: Option<usize>,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn decade_grid(nmax: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = 100;
    while n < nmax {
        grid.push(n);
        n *= 10;
    }
    grid.push(nmax);
    grid
}

pub fn run(args: &Args, settings: &Settings) -> Result<(), CliError> {
    let clock = RunClock::start();
    let test: SlopeTest = args.test.parse().map_err(|e: pcombine_core::Error| CliError::Usage(e.to_string()))?;
    if args.ell > args.k {
        return Err(CliError::Usage(format!("--ell {} exceeds --K {}", args.ell, args.k)));
    }
    let n_grid = args.n_grid.clone().unwrap_or_else(|| decade_grid(args.nmax));
    let mut config = SlopeConfig::equal(args.k, args.ell, args.mu, n_grid, settings.reps(args.reps, 200), settings.seed);
    if test == SlopeTest::ZTest {
        config.thetas = vec![args.mu];
        config.lambdas = vec![1.0];
    }
    if let Some(l) = &args.lambdas {
        config.lambdas = l.clone();
    }
    let trace = estimate_exact_slope(test, &config)?;
    for ((n, est), se) in trace.n_grid.iter().zip(&trace.slope_estimates).zip(&trace.slope_se) {
        println!("n={n} slope={est:.5} se={se:.5}");
    }
    if let Some(c) = trace.c_theory {
        println!("theoretical slope {c}");
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_slope_csv(File::create(out.join("slope.csv"))?, std::slice::from_ref(&trace))?;
        let manifest = clock.manifest(settings, args, Vec::new())?;
        write_manifest(out, &manifest)?;
    }
    Ok(())
}
