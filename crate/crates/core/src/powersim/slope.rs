//! Empirical exact slopes, `-(2/n) ln p` at growing sample sizes.
//!
//! Study i has `n_i = lambda_i * n` observations with mean `theta_i`; its
//! sample mean is drawn directly as `N(theta_i, 1/n_i)`. Every p-value is kept
//! on the log scale since it underflows long before n reaches 10^4.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::combiners::afp_objective;
use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::special::{ln_chi2_sf, ln_normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CombinedMethod {
    Fisher,
    Stouffer,
    MinP,
    /// Uses the minimum over j of the partial-sum p-values. The calibrated AFp
    /// p-value lies between that minimum and K times it, so the slope is the
    /// same.
    AFp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlopeTest {
    /// One-sided z-test of a single study.
    ZTest,
    Combined(CombinedMethod),
}

impl fmt::Display for SlopeTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlopeTest::ZTest => "ztest",
            SlopeTest::Combined(CombinedMethod::Fisher) => "fisher",
            SlopeTest::Combined(CombinedMethod::Stouffer) => "stouffer",
            SlopeTest::Combined(CombinedMethod::MinP) => "minp",
            SlopeTest::Combined(CombinedMethod::AFp) => "afp",
        })
    }
}

impl std::str::FromStr for SlopeTest {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ztest" | "z" => SlopeTest::ZTest,
            "fisher" => SlopeTest::Combined(CombinedMethod::Fisher),
            "stouffer" => SlopeTest::Combined(CombinedMethod::Stouffer),
            "minp" => SlopeTest::Combined(CombinedMethod::MinP),
            "afp" => SlopeTest::Combined(CombinedMethod::AFp),
            _ => return Err(Error::InvalidParameter(format!("unknown slope test '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeConfig {
    /// Per-study means; the z-test uses only the first.
    pub thetas: Vec<f64>,
    /// Sample-size ratios, summing to the number of studies.
    pub lambdas: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl SlopeConfig {
    /// `k` studies of equal size, the first `ell` with mean `mu`.
    pub fn equal(k: usize, ell: usize, mu: f64, n_grid: Vec<usize>, reps: usize, seed: u64) -> Self {
        let thetas = (0..k).map(|i| if i < ell { mu } else { 0.0 }).collect();
        Self { thetas, lambdas: vec![1.0; k], n_grid, reps, seed }
    }

    fn validate(&self, test: SlopeTest) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(Error::Empty);
        }
        if test != SlopeTest::ZTest {
            if self.lambdas.len() != self.thetas.len() {
                return Err(Error::Mismatch("one lambda per study is required".into()));
            }
            let total: f64 = self.lambdas.iter().sum();
            if self.lambdas.iter().any(|&l| !(l > 0.0)) || (total - self.lambdas.len() as f64).abs() > 1e-9 {
                return Err(Error::InvalidParameter(
                    "lambdas must be positive and sum to the number of studies".into(),
                ));
            }
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n grid must be positive and strictly increasing".into()));
        }
        if self.reps < 2 {
            return Err(Error::InvalidParameter("at least two replicates are needed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeTrace {
    pub test: SlopeTest,
    /// Largest study mean.
    pub theta: f64,
    pub lambdas: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// Mean of `-(2/n) ln p` over replicates at each n.
    pub slope_estimates: Vec<f64>,
    /// Standard error of each mean.
    pub slope_se: Vec<f64>,
    pub c_theory: Option<f64>,
}

/// Theoretical exact slope for one-sided z-tests with `c_i = theta_i^2`.
pub fn theoretical_slope(test: SlopeTest, thetas: &[f64], lambdas: &[f64]) -> Option<f64> {
    if thetas.iter().any(|&t| t < 0.0) {
        return None;
    }
    let k = thetas.len() as f64;
    Some(match test {
        SlopeTest::ZTest => thetas[0] * thetas[0],
        SlopeTest::Combined(CombinedMethod::Fisher | CombinedMethod::AFp) => {
            thetas.iter().zip(lambdas).map(|(t, l)| l * t * t).sum()
        }
        SlopeTest::Combined(CombinedMethod::Stouffer) => {
            let s: f64 = thetas.iter().zip(lambdas).map(|(t, l)| (l * t * t).sqrt()).sum();
            s * s / k
        }
        SlopeTest::Combined(CombinedMethod::MinP) => {
            thetas.iter().zip(lambdas).map(|(t, l)| l * t * t).fold(0.0, f64::max)
        }
    })
}

/// `ln(1 - (1 - p)^K)` from `ln p`.
fn ln_minp_pvalue(ln_min: f64, k: usize) -> f64 {
    if ln_min < -30.0 {
        // 1 - (1 - p)^K = K p (1 + O(K p))
        return (k as f64).ln() + ln_min;
    }
    (-(k as f64 * (-ln_min.exp()).ln_1p()).exp_m1()).ln()
}

/// Log combined p-value from per-study z-scores.
fn ln_combined(method: CombinedMethod, z: &[f64]) -> f64 {
    let k = z.len();
    match method {
        CombinedMethod::Fisher => {
            let t: f64 = z.iter().map(|&x| -2.0 * ln_normal_sf(x)).sum();
            ln_chi2_sf(t, 2 * k as u32)
        }
        CombinedMethod::Stouffer => ln_normal_sf(z.iter().sum::<f64>() / (k as f64).sqrt()),
        CombinedMethod::MinP => {
            let m = z.iter().map(|&x| ln_normal_sf(x)).fold(f64::INFINITY, f64::min);
            ln_minp_pvalue(m, k)
        }
        CombinedMethod::AFp => {
            let mut neglog: Vec<f64> = z.iter().map(|&x| -ln_normal_sf(x)).collect();
            neglog.sort_by(|a, b| b.total_cmp(a));
            -afp_objective(&neglog).into_iter().fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

fn replicate_index(n_index: usize, rep: usize) -> u64 {
    ((n_index as u64) << 32) | rep as u64
}

/// Averages `-(2/n) ln p` over replicates for each n in the grid.
pub fn estimate_exact_slope(test: SlopeTest, config: &SlopeConfig) -> Result<SlopeTrace> {
    config.validate(test)?;
    let (thetas, lambdas): (Vec<f64>, Vec<f64>) = match test {
        SlopeTest::ZTest => (vec![config.thetas[0]], vec![1.0]),
        SlopeTest::Combined(_) => (config.thetas.clone(), config.lambdas.clone()),
    };
    let mut estimates = Vec::with_capacity(config.n_grid.len());
    let mut ses = Vec::with_capacity(config.n_grid.len());
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let nf = n as f64;
        let values: Vec<f64> = (0..config.reps)
            .into_par_iter()
            .map(|r| {
                let mut stream = rng::stream(config.seed, domain::SLOPE, replicate_index(ni, r));
                let z: Vec<f64> = thetas
                    .iter()
                    .zip(&lambdas)
                    .map(|(&t, &l)| (l * nf).sqrt() * t + stream.normal())
                    .collect();
                let ln_p = match test {
                    SlopeTest::ZTest => ln_normal_sf(z[0]),
                    SlopeTest::Combined(m) => ln_combined(m, &z),
                };
                -2.0 * ln_p / nf
            })
            .collect();
        let reps = values.len() as f64;
        let mean = values.iter().sum::<f64>() / reps;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
        estimates.push(mean);
        ses.push((var / reps).sqrt());
    }
    Ok(SlopeTrace {
        test,
        theta: thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        c_theory: theoretical_slope(test, &thetas, &lambdas),
        lambdas,
        n_grid: config.n_grid.clone(),
        slope_estimates: estimates,
        slope_se: ses,
    })
}

pub const SLOPE_CSV_HEADER: &str = "test,theta,n,slope_estimate,c_theory";

pub fn write_slope_csv<W: Write>(out: W, traces: &[SlopeTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SLOPE_CSV_HEADER.split(','))?;
    for t in traces {
        for (n, est) in t.n_grid.iter().zip(&t.slope_estimates) {
            w.write_record([
                t.test.to_string(),
                format!("{}", t.theta),
                n.to_string(),
                format!("{est}"),
                t.c_theory.map(|c| format!("{c}")).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyConfig {
    pub k: usize,
    pub ell: usize,
    pub mu: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyPoint {
    pub n: usize,
    pub agreement: f64,
}

/// Fraction of replicates in which the AFp-selected studies are exactly the
/// signal studies, for each n. Studies have n observations each and the
/// first `ell` have mean `mu`; p-values are two-sided. Replicate r uses the
/// same standard normal noise at every n.
pub fn afp_consistency_check(config: &ConsistencyConfig, n_grid: &[usize]) -> Result<Vec<ConsistencyPoint>> {
    let ConsistencyConfig { k, ell, mu, reps, seed } = *config;
    if ell == 0 || ell > k {
        return Err(Error::InvalidParameter(format!("need 1 <= ell <= K, got ell={ell}, K={k}")));
    }
    if mu == 0.0 {
        return Err(Error::InvalidParameter("signal studies need a nonzero mean".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("no replicates".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let hits: usize = (0..reps)
                .into_par_iter()
                .map(|r| {
                    // same noise at every n
                    let mut stream = rng::stream(seed ^ 0xaf, domain::SLOPE, r as u64);
                    let shift = (n as f64).sqrt() * mu;
                    let neglog: Vec<f64> = (0..k)
                        .map(|i| {
                            let z = stream.normal() + if i < ell { shift } else { 0.0 };
                            -(std::f64::consts::LN_2 + ln_normal_sf(z.abs())).min(0.0)
                        })
                        .collect();
                    selects_exactly_signals(&neglog, ell) as usize
                })
                .sum();
            Ok(ConsistencyPoint { n, agreement: hits as f64 / reps as f64 })
        })
        .collect()
}

/// Whether the AFp scan on `-ln p` picks exactly the first `ell` studies.
fn selects_exactly_signals(neglog: &[f64], ell: usize) -> bool {
    let mut order: Vec<usize> = (0..neglog.len()).collect();
    order.sort_by(|&a, &b| neglog[b].total_cmp(&neglog[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| neglog[i]).collect();
    let obj = afp_objective(&sorted);
    let mut best = 0;
    for (j, v) in obj.iter().enumerate() {
        if *v > obj[best] {
            best = j;
        }
    }
    best + 1 == ell && order[..ell].iter().all(|&i| i < ell)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minp_log_pvalue_matches_direct_formula() {
        for &p in &[0.3f64, 0.01, 1e-8] {
            let direct = (1.0 - (1.0 - p).powi(5)).ln();
            assert!((ln_minp_pvalue(p.ln(), 5) - direct).abs() < 1e-6);
        }
        let tiny = ln_minp_pvalue(-500.0, 5);
        assert!((tiny - (5f64.ln() - 500.0)).abs() < 1e-12);
    }

    #[test]
    fn theoretical_slopes() {
        let t = [1.0, 1.0, 0.0, 0.0, 0.0];
        let l = [1.0; 5];
        let fisher = theoretical_slope(SlopeTest::Combined(CombinedMethod::Fisher), &t, &l).unwrap();
        let stouffer = theoretical_slope(SlopeTest::Combined(CombinedMethod::Stouffer), &t, &l).unwrap();
        assert_eq!(fisher, 2.0);
        assert!((stouffer - 0.8).abs() < 1e-12);
        assert_eq!(theoretical_slope(SlopeTest::ZTest, &[1.5], &[1.0]), Some(2.25));
    }

    #[test]
    fn ztest_slope_is_deterministic() {
        let cfg = SlopeConfig::equal(1, 1, 1.0, vec![100, 1000], 50, 3);
        let a = estimate_exact_slope(SlopeTest::ZTest, &cfg).unwrap();
        assert_eq!(a, estimate_exact_slope(SlopeTest::ZTest, &cfg).unwrap());
        assert!(a.slope_estimates.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn config_checks() {
        let mut cfg = SlopeConfig::equal(3, 1, 1.0, vec![10, 5], 10, 1);
        assert!(estimate_exact_slope(SlopeTest::ZTest, &cfg).is_err());
        cfg.n_grid = vec![5, 10];
        cfg.lambdas = vec![1.0, 1.0, 2.0];
        assert!(estimate_exact_slope(SlopeTest::Combined(CombinedMethod::Fisher), &cfg).is_err());
    }

    #[test]
    fn all_signals_are_selected_at_large_n() {
        let cfg = ConsistencyConfig { k: 4, ell: 4, mu: 1.0, reps: 200, seed: 2 };
        let pts = afp_consistency_check(&cfg, &[1_000]).unwrap();
        assert_eq!(pts[0].agreement, 1.0);
    }

    #[test]
    fn consistency_needs_signals() {
        let cfg = ConsistencyConfig { k: 4, ell: 0, mu: 1.0, reps: 10, seed: 2 };
        assert!(afp_consistency_check(&cfg, &[100]).is_err());
    }
}
