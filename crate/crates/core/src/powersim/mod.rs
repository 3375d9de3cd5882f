//! Power and size simulation under independent Gaussian studies.

mod slope;

pub use slope::{
    afp_consistency_check, estimate_exact_slope, theoretical_slope, write_slope_csv, CombinedMethod,
    ConsistencyConfig, ConsistencyPoint, SlopeConfig, SlopeTest, SlopeTrace, SLOPE_CSV_HEADER,
};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{Engine, Evaluator, RejectionRule};
use crate::error::{Error, Result};
use crate::nulldist::MIN_TAIL_COUNT;
use crate::pvalue::{validate, InputKind, MethodSpec, Observation, OneSidedPair, PValueVector, DEFAULT_FLOOR};
use crate::rng::{self, domain, Stream};
use crate::special::{normal_cdf, normal_sf};

pub const MIN_REPS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sidedness {
    TwoSided,
    OneSided,
}

impl Sidedness {
    pub fn as_str(self) -> &'static str {
        match self {
            Sidedness::TwoSided => "two-sided",
            Sidedness::OneSided => "one-sided",
        }
    }
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sidedness {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "two-sided" | "twosided" | "two" => Ok(Sidedness::TwoSided),
            "one-sided" | "onesided" | "one" => Ok(Sidedness::OneSided),
            _ => Err(Error::InvalidParameter(format!("unknown sidedness '{s}'"))),
        }
    }
}

/// K independent N(mu_i, 1) studies, the first `ell` with mean `mu0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimScenario {
    pub k: usize,
    pub ell: usize,
    pub mu0: f64,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub reps: usize,
    pub seed: u64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.ell > self.k {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= ell <= K and K >= 1, got ell={}, K={}",
                self.ell, self.k
            )));
        }
        if self.reps < MIN_REPS {
            return Err(Error::InvalidParameter(format!(
                "at least {MIN_REPS} replicates required, got {}",
                self.reps
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if !self.mu0.is_finite() {
            return Err(Error::InvalidParameter("mu0 must be finite".into()));
        }
        Ok(())
    }

    pub fn with_mu0(mut self, mu0: f64) -> Self {
        self.mu0 = mu0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub scenario: SimScenario,
    pub method: MethodSpec,
    pub power: f64,
    pub mc_se: f64,
}

/// Binomial standard error of a rejection rate.
pub fn mc_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Simulated p-values of one replicate: two-sided `2(1 - Phi(|X|))`, left
/// `1 - Phi(X)` and right `Phi(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDraw {
    pub two_sided: PValueVector,
    pub left: PValueVector,
    pub right: PValueVector,
}

impl GaussianDraw {
    pub fn from_z(z: &[f64]) -> Self {
        let floor = DEFAULT_FLOOR;
        let two = z.iter().map(|&x| (2.0 * normal_sf(x.abs())).min(1.0)).collect();
        let left = z.iter().map(|&x| normal_sf(x)).collect();
        let right = z.iter().map(|&x| normal_cdf(x)).collect();
        Self {
            two_sided: validate(two, floor).expect("normal tails lie in [0, 1]"),
            left: validate(left, floor).expect("normal tails lie in [0, 1]"),
            right: validate(right, floor).expect("normal tails lie in [0, 1]"),
        }
    }

    /// Observation carrying both the two-sided vector and the one-sided pair.
    pub fn observation(&self) -> Observation {
        let pair = OneSidedPair::new(self.left.clone(), self.right.clone())
            .expect("left and right normal tails are complementary");
        Observation::both(self.two_sided.clone(), pair).expect("equal lengths")
    }
}

fn gaussian_z(scenario: &SimScenario, stream: &mut Stream) -> Vec<f64> {
    (0..scenario.k)
        .map(|i| stream.normal() + if i < scenario.ell { scenario.mu0 } else { 0.0 })
        .collect()
}

/// P-values of replicate `replicate`. The standard normal draws depend only on
/// `(seed, replicate)`, so scenarios that differ in `mu0` or `ell` share them.
pub fn gen_gaussian_pvalues(scenario: &SimScenario, replicate: u64) -> GaussianDraw {
    let mut stream = rng::stream(scenario.seed, domain::POWER, replicate);
    GaussianDraw::from_z(&gaussian_z(scenario, &mut stream))
}

/// Power of one prepared evaluator against a fixed rejection rule.
pub fn estimate_power_with(
    evaluator: &Evaluator,
    rule: &RejectionRule,
    scenario: &SimScenario,
) -> Result<PowerEstimate> {
    scenario.validate()?;
    if evaluator.k() != scenario.k {
        return Err(Error::Mismatch(format!(
            "evaluator prepared for K={} but scenario has K={}",
            evaluator.k(),
            scenario.k
        )));
    }
    let hits: Result<Vec<bool>> = (0..scenario.reps as u64)
        .into_par_iter()
        .map(|r| {
            let obs = gen_gaussian_pvalues(scenario, r).observation();
            Ok(rule.rejects(evaluator.statistic(&obs)?))
        })
        .collect();
    let power = hits?.into_iter().filter(|h| *h).count() as f64 / scenario.reps as f64;
    Ok(PowerEstimate {
        scenario: *scenario,
        method: evaluator.spec().clone(),
        power,
        mc_se: mc_se(power, scenario.reps),
    })
}

/// Power of `spec` using the engine's level-alpha rejection rule at K.
pub fn estimate_power(engine: &Engine, spec: &MethodSpec, scenario: &SimScenario) -> Result<PowerEstimate> {
    scenario.validate()?;
    let evaluator = engine.evaluator(spec, scenario.k)?;
    let rule = engine.rejection_rule(spec, scenario.k, scenario.alpha)?;
    estimate_power_with(&evaluator, &rule, scenario)
}

/// Power of several methods on the same replicates. Every method sees the
/// same simulated studies, so pairwise differences have reduced variance.
pub fn estimate_power_many(
    engine: &Engine,
    specs: &[MethodSpec],
    scenario: &SimScenario,
) -> Result<Vec<PowerEstimate>> {
    let prepared = prepare_rules(engine, specs, scenario.k, scenario.alpha)?;
    power_with_rules(&prepared, scenario)
}

fn prepare_rules(
    engine: &Engine,
    specs: &[MethodSpec],
    k: usize,
    alpha: f64,
) -> Result<Vec<(Evaluator, RejectionRule)>> {
    specs
        .iter()
        .map(|s| Ok((engine.evaluator(s, k)?, engine.rejection_rule(s, k, alpha)?)))
        .collect()
}

fn power_with_rules(
    prepared: &[(Evaluator, RejectionRule)],
    scenario: &SimScenario,
) -> Result<Vec<PowerEstimate>> {
    scenario.validate()?;
    let m = prepared.len();
    let counts = (0..scenario.reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<usize>> {
            let obs = gen_gaussian_pvalues(scenario, r).observation();
            prepared
                .iter()
                .map(|(ev, rule)| Ok(rule.rejects(ev.statistic(&obs)?) as usize))
                .collect()
        })
        .try_reduce(|| vec![0; m], |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()))?;
    Ok(prepared
        .iter()
        .zip(counts)
        .map(|((ev, _), c)| {
            let power = c as f64 / scenario.reps as f64;
            PowerEstimate {
                scenario: *scenario,
                method: ev.spec().clone(),
                power,
                mc_se: mc_se(power, scenario.reps),
            }
        })
        .collect())
}

/// The signal-mean grid 0.5, 0.65, ..., 5.
pub fn default_mu0_grid() -> Vec<f64> {
    (0..=30).map(|i| 0.5 + 0.15 * i as f64).collect()
}

/// Factorial sweep over K and signal frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerGrid {
    pub k_list: Vec<usize>,
    pub ell_fracs: Vec<f64>,
    /// Candidate signal means in increasing order.
    pub mu0_grid: Vec<f64>,
    /// The smallest grid mean at which the best method reaches this power is
    /// used for the cell.
    pub target_power: f64,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub reps: usize,
    pub seed: u64,
}

impl PowerGrid {
    /// Number of signals for a frequency, at least one.
    pub fn ell_for(k: usize, frac: f64) -> usize {
        ((frac * k as f64).round() as usize).clamp(1, k)
    }
}

/// One grid cell: the selected mean and every method's power there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub k: usize,
    pub ell: usize,
    pub mu0: f64,
    pub reached_target: bool,
    pub estimates: Vec<PowerEstimate>,
}

/// Runs the sweep. For every (K, ell) the signal mean is the smallest grid
/// value at which the most powerful method attains `target_power`; if none
/// does, the largest grid value is used.
pub fn run_power_grid(engine: &Engine, specs: &[MethodSpec], grid: &PowerGrid) -> Result<Vec<GridCell>> {
    if grid.mu0_grid.is_empty() || grid.mu0_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("mu0 grid must be non-empty and increasing".into()));
    }
    if specs.is_empty() {
        return Err(Error::InvalidParameter("no methods requested".into()));
    }
    let mut cells = Vec::new();
    for &k in &grid.k_list {
        let prepared = prepare_rules(engine, specs, k, grid.alpha)?;
        for &frac in &grid.ell_fracs {
            let ell = PowerGrid::ell_for(k, frac);
            let mut chosen = None;
            for &mu0 in &grid.mu0_grid {
                let scenario = SimScenario {
                    k,
                    ell,
                    mu0,
                    alpha: grid.alpha,
                    sidedness: grid.sidedness,
                    reps: grid.reps,
                    seed: grid.seed,
                };
                let estimates = power_with_rules(&prepared, &scenario)?;
                let best = estimates.iter().map(|e| e.power).fold(0.0, f64::max);
                log::debug!("K={k} ell={ell} mu0={mu0:.2} best power {best:.4}");
                let reached = best >= grid.target_power;
                chosen = Some(GridCell { k, ell, mu0, reached_target: reached, estimates });
                if reached {
                    break;
                }
            }
            cells.push(chosen.expect("grid is non-empty"));
        }
    }
    Ok(cells)
}

pub const POWER_CSV_HEADER: &str = "method,K,ell,mu0,alpha,sidedness,reps,power,mc_se,seed";

/// Long-format power CSV.
pub fn write_power_csv<W: Write>(out: W, estimates: &[PowerEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POWER_CSV_HEADER.split(','))?;
    for e in estimates {
        let s = &e.scenario;
        w.write_record([
            e.method.key(),
            s.k.to_string(),
            s.ell.to_string(),
            format!("{}", s.mu0),
            format!("{}", s.alpha),
            s.sidedness.to_string(),
            s.reps.to_string(),
            format!("{}", e.power),
            format!("{}", e.mc_se),
            s.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Empirical rejection rate at level alpha under the global null, using the
/// method's own p-value path.
pub fn estimate_type1(
    engine: &Engine,
    spec: &MethodSpec,
    k: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    Ok(estimate_type1_many(engine, std::slice::from_ref(spec), k, alpha, reps, seed)?[0])
}

/// [`estimate_type1`] for several methods on shared null replicates.
pub fn estimate_type1_many(
    engine: &Engine,
    specs: &[MethodSpec],
    k: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    if (reps as f64) * alpha < MIN_TAIL_COUNT as f64 {
        return Err(Error::UnstableTail { b: reps, alpha, min_tail: MIN_TAIL_COUNT });
    }
    let prepared = specs.iter().map(|s| engine.prepare(s, k)).collect::<Result<Vec<_>>>()?;
    let m = prepared.len();
    let counts = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<usize>> {
            let mut stream = rng::stream(seed, domain::TYPE1, r);
            let u = stream.uniforms(k);
            prepared
                .iter()
                .map(|p| {
                    let obs = null_from_uniforms(p.evaluator().spec(), &u);
                    let stat = p.evaluator().statistic(&obs)?;
                    Ok((p.pvalue(stat) <= alpha) as usize)
                })
                .collect()
        })
        .try_reduce(|| vec![0; m], |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()))?;
    Ok(counts.into_iter().map(|c| c as f64 / reps as f64).collect())
}

fn null_from_uniforms(spec: &MethodSpec, u: &[f64]) -> Observation {
    let floor = DEFAULT_FLOOR;
    match spec.method.input_kind() {
        InputKind::TwoSided => Observation::two_sided(validate(u.to_vec(), floor).expect("uniforms")),
        InputKind::OneSided => {
            let left = validate(u.to_vec(), floor).expect("uniforms");
            let right = validate(u.iter().map(|x| 1.0 - x).collect(), floor).expect("uniforms");
            Observation::one_sided(OneSidedPair::new(left, right).expect("complementary pair"))
        }
    }
}
