//! Null distributions: closed-form survival functions where they exist and
//! sorted Monte Carlo reference tables for everything else.

mod cache;

pub use cache::TableCache;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::combiners::{tfhard_stat, tfsoft_stat};
use crate::error::{Error, Result};
use crate::pvalue::{
    validate, CombineResult, Calibration, Direction, InputKind, Method, MethodSpec, Observation,
    OneSidedPair, PValueVector, DEFAULT_FLOOR,
};
use crate::rng::Stream;
use crate::special::{cauchy_sf, ln_chi2_sf, normal_sf};

/// Smallest table size accepted by [`build_null_table`].
pub const MIN_REPLICATES: usize = 1_000;

/// Minimum expected number of table entries beyond a critical value.
pub const MIN_TAIL_COUNT: usize = 100;

/// Chi-square survival function. Absolute error below 1e-12 on `[0, 200]`
/// for `df <= 400`.
pub fn chi2_sf(x: f64, df: u32) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter(format!("chi-square argument {x} must be >= 0")));
    }
    if df == 0 {
        return Err(Error::InvalidParameter("chi-square needs df >= 1".into()));
    }
    Ok(ln_chi2_sf(x, df).exp())
}

/// Closed-form null p-value for Fisher, Stouffer, minP and Cauchy.
pub fn analytic_pvalue(method: Method, stat: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Empty);
    }
    let p = match method {
        Method::Fisher => ln_chi2_sf(stat.max(0.0), 2 * k as u32).exp(),
        Method::Stouffer => normal_sf(stat / (k as f64).sqrt()),
        Method::MinP => -(k as f64 * (-stat.clamp(0.0, 1.0)).ln_1p()).exp_m1(),
        Method::Cauchy => cauchy_sf(stat),
        other => {
            return Err(Error::InvalidParameter(format!(
                "method {other} has no closed-form null distribution"
            )))
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Sorted Monte Carlo sample of a statistic under the global null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullTable {
    pub method: MethodSpec,
    pub k: usize,
    pub b: usize,
    pub seed: u64,
    pub direction: Direction,
    stats: Vec<f64>,
}

impl AsRef<NullTable> for NullTable {
    fn as_ref(&self) -> &NullTable {
        self
    }
}

impl NullTable {
    /// Wraps an arbitrary sample, sorting it ascending.
    pub fn from_stats(
        method: MethodSpec,
        k: usize,
        seed: u64,
        direction: Direction,
        mut stats: Vec<f64>,
    ) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::Empty);
        }
        if stats.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidParameter("null table contains NaN".into()));
        }
        stats.sort_by(f64::total_cmp);
        Ok(Self { method, k, b: stats.len(), seed, direction, stats })
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    /// Number of entries at least as extreme as `stat`.
    pub fn count_as_extreme(&self, stat: f64) -> usize {
        match self.direction {
            Direction::LargeIsSignificant => {
                self.b - self.stats.partition_point(|&x| x < stat)
            }
            Direction::SmallIsSignificant => self.stats.partition_point(|&x| x <= stat),
        }
    }

    /// Empirical survival `P(T >= x)` of the sample, ignoring direction.
    pub fn empirical_sf(&self, x: f64) -> f64 {
        (self.b - self.stats.partition_point(|&s| s < x)) as f64 / self.b as f64
    }

    /// Ceiling-rank quantile without the tail-size guard: the
    /// `ceil((1 - alpha) B)`-th order statistic for large-is-significant
    /// tables, the `ceil(alpha B)`-th for small-is-significant ones.
    pub fn critical_value_unchecked(&self, alpha: f64) -> f64 {
        let b = self.b as f64;
        let rank = match self.direction {
            Direction::LargeIsSignificant => self.b - (alpha * b + 1e-9).floor() as usize,
            Direction::SmallIsSignificant => (alpha * b - 1e-9).ceil() as usize,
        };
        self.stats[rank.clamp(1, self.b) - 1]
    }
}

/// Monte Carlo p-value `(1 + #{as extreme}) / (B + 1)`, always in (0, 1].
pub fn mc_pvalue(stat: f64, table: &NullTable) -> f64 {
    (1 + table.count_as_extreme(stat)) as f64 / (table.b + 1) as f64
}

/// Critical value at level `alpha`; requires `B * alpha >= 100`.
///
/// A statistic rejects when strictly beyond the returned value.
pub fn critical_value(table: &NullTable, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 0.5]")));
    }
    if (table.b as f64) * alpha + 1e-9 < MIN_TAIL_COUNT as f64 {
        return Err(Error::UnstableTail { b: table.b, alpha, min_tail: MIN_TAIL_COUNT });
    }
    Ok(table.critical_value_unchecked(alpha))
}

/// Whether `stat` lies strictly beyond `crit` in the significant direction.
pub fn is_beyond(stat: f64, crit: f64, direction: Direction) -> bool {
    match direction {
        Direction::LargeIsSignificant => stat > crit,
        Direction::SmallIsSignificant => stat < crit,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfVariant {
    Hard,
    Soft,
}

impl TfVariant {
    pub fn statistic(self, p: &PValueVector, tau: f64) -> f64 {
        match self {
            TfVariant::Hard => tfhard_stat(p, tau),
            TfVariant::Soft => tfsoft_stat(p, tau),
        }
    }

    pub fn single(self) -> Method {
        match self {
            TfVariant::Hard => Method::TFhard,
            TfVariant::Soft => Method::TFsoft,
        }
    }

    pub fn omnibus(self) -> Method {
        match self {
            TfVariant::Hard => Method::OTFhard,
            TfVariant::Soft => Method::OTFsoft,
        }
    }
}

/// `min over tau of mc_pvalue(tf(p, tau), table_tau)`.
pub(crate) fn omnibus_min_pvalue(
    variant: TfVariant,
    p: &PValueVector,
    tau_set: &[f64],
    tables: &[impl AsRef<NullTable>],
) -> f64 {
    tau_set
        .iter()
        .zip(tables)
        .map(|(&tau, t)| mc_pvalue(variant.statistic(p, tau), t.as_ref()))
        .fold(1.0, f64::min)
}

/// Omnibus truncated Fisher test. The per-threshold p-values come from
/// `tables` and their minimum is calibrated by `minstat_table`.
pub fn omnibus_tf_pvalue(
    variant: TfVariant,
    p: &PValueVector,
    tau_set: &[f64],
    tables: &[NullTable],
    minstat_table: &NullTable,
) -> Result<CombineResult> {
    if tau_set.is_empty() || tau_set.len() != tables.len() {
        return Err(Error::Mismatch(format!(
            "{} thresholds but {} tables",
            tau_set.len(),
            tables.len()
        )));
    }
    for (tau, t) in tau_set.iter().zip(tables) {
        if t.method.method != variant.single() || t.method.tau != Some(*tau) || t.k != p.len() {
            return Err(Error::Mismatch(format!(
                "table {} (K={}) does not match tau={tau}, K={}",
                t.method,
                t.k,
                p.len()
            )));
        }
    }
    if minstat_table.direction != Direction::SmallIsSignificant || minstat_table.k != p.len() {
        return Err(Error::Mismatch("min-statistic table must be small-is-significant at the same K".into()));
    }
    let statistic = omnibus_min_pvalue(variant, p, tau_set, tables);
    Ok(CombineResult {
        statistic,
        pvalue: mc_pvalue(statistic, minstat_table),
        calibration: Calibration::MonteCarlo,
        selected_weights: None,
        j_star: None,
    })
}

/// Draws a global-null observation: K uniforms, or for one-sided methods the
/// pair `(u, 1 - u)`.
pub(crate) fn null_observation(kind: InputKind, k: usize, stream: &mut Stream) -> Observation {
    let u = stream.uniforms(k);
    match kind {
        InputKind::TwoSided => {
            Observation::two_sided(validate(u, DEFAULT_FLOOR).expect("uniforms lie in (0, 1)"))
        }
        InputKind::OneSided => {
            let right = u.iter().map(|x| 1.0 - x).collect();
            let left = validate(u, DEFAULT_FLOOR).expect("uniforms lie in (0, 1)");
            let right = validate(right, DEFAULT_FLOOR).expect("uniforms lie in (0, 1)");
            Observation::one_sided(OneSidedPair::new(left, right).expect("complementary pair"))
        }
    }
}

/// Builds the reference table of `method` at `K` from `B` null replicates.
///
/// Replicate `r` draws from the counter-based stream `(seed, r)`, so the
/// result is identical for any number of worker threads.
pub fn build_null_table(method: &MethodSpec, k: usize, b: usize, seed: u64) -> Result<NullTable> {
    let engine = crate::engine::Engine::new(crate::engine::TableSettings::new(b, seed));
    engine.build_table(method, k)
}

/// Evaluates `f` on replicates `0..b` in parallel, preserving replicate order.
pub(crate) fn par_replicates<T, F>(b: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..b as u64).into_par_iter().map(f).collect()
}

/// Upper `alpha` quantile of the standard Cauchy, `tan(pi (1/2 - alpha))`.
pub fn cauchy_critical_value(alpha: f64) -> f64 {
    (PI * (0.5 - alpha)).tan()
}
