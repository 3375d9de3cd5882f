//! Dispatch from a [`MethodSpec`] to its statistic and its calibrated p-value.
//!
//! Statistics that are themselves built from calibrated p-values (the omnibus
//! truncated Fisher tests, FE and FE_CS) pull their inner reference tables from
//! the engine's cache; their own tables are drawn from a separate stream domain
//! so the outer layer never reuses the inner layer's replicates.

use std::sync::Arc;

use crate::combiners::{
    afp_selected_weights, afp_stat, afz_stat, bj_stat, cauchy_stat, fisher_stat,
    harmonic_mean_stat, hc_stat, minp_stat, stouffer_stat, tfhard_stat, tfsoft_stat,
    trunc_cauchy_stat,
};
use crate::ensemble::{fe_stat, fecs_stat, fisher_analytic_pvalue, pearson_stat, rv_ensemble_stat};
use crate::error::{Error, Result};
use crate::nulldist::{
    analytic_pvalue, cauchy_critical_value, critical_value, is_beyond, mc_pvalue,
    null_observation, omnibus_min_pvalue, par_replicates, NullTable, TableCache, TfVariant,
    MIN_REPLICATES,
};
use crate::pvalue::{
    Calibration, CombineResult, Direction, Method, MethodSpec, Observation, OneSidedPair,
    PValueVector,
};
use crate::rng::{self, domain};
use crate::special::cauchy_sf;

/// Default cap on `B * K` for a single table.
pub const DEFAULT_MAX_CELLS: u128 = 20_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableSettings {
    pub b: usize,
    pub seed: u64,
    pub max_cells: u128,
}

impl TableSettings {
    pub fn new(b: usize, seed: u64) -> Self {
        Self { b, seed, max_cells: DEFAULT_MAX_CELLS }
    }

    pub fn with_max_cells(mut self, max_cells: u128) -> Self {
        self.max_cells = max_cells;
        self
    }
}

impl Default for TableSettings {
    fn default() -> Self {
        Self::new(100_000, 1)
    }
}

/// How FE and FE_CS p-values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnsembleCalibration {
    /// Standard Cauchy tail, with the documented `(1 + delta)^L` size bound.
    #[default]
    CauchyApprox,
    /// Monte Carlo table of the ensemble statistic itself.
    MonteCarlo,
}

#[derive(Debug, Default)]
pub struct Engine {
    settings: TableSettings,
    cache: TableCache,
    ensemble: EnsembleCalibration,
}

#[derive(Debug, Clone)]
enum Inner {
    Direct,
    Afp(Arc<NullTable>),
    Omnibus(TfVariant, Vec<Arc<NullTable>>),
}

/// Computes one method's statistic at a fixed K.
#[derive(Debug, Clone)]
pub struct Evaluator {
    spec: MethodSpec,
    k: usize,
    inner: Inner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub statistic: f64,
    pub j_star: Option<usize>,
    pub selected_weights: Option<Vec<bool>>,
}

#[derive(Debug, Clone)]
enum PValuePath {
    Analytic,
    CauchyApprox,
    Table(Arc<NullTable>),
}

/// An evaluator plus the null distribution used to turn statistics into
/// p-values.
#[derive(Debug, Clone)]
pub struct Prepared {
    evaluator: Evaluator,
    path: PValuePath,
}

/// Fixed-level rejection region `stat` strictly beyond `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionRule {
    pub threshold: f64,
    pub direction: Direction,
    pub calibration: Calibration,
}

impl RejectionRule {
    pub fn rejects(&self, stat: f64) -> bool {
        is_beyond(stat, self.threshold, self.direction)
    }
}

impl Engine {
    pub fn new(settings: TableSettings) -> Self {
        Self { settings, cache: TableCache::in_memory(), ensemble: EnsembleCalibration::default() }
    }

    pub fn with_cache(settings: TableSettings, cache: TableCache) -> Self {
        Self { settings, cache, ensemble: EnsembleCalibration::default() }
    }

    pub fn with_ensemble_calibration(mut self, ensemble: EnsembleCalibration) -> Self {
        self.ensemble = ensemble;
        self
    }

    pub fn settings(&self) -> TableSettings {
        self.settings
    }

    pub fn cache(&self) -> &TableCache {
        &self.cache
    }

    pub fn ensemble_calibration(&self) -> EnsembleCalibration {
        self.ensemble
    }

    /// Cached reference table of `spec` at `k`, built on first use.
    pub fn table(&self, spec: &MethodSpec, k: usize) -> Result<Arc<NullTable>> {
        let TableSettings { b, seed, .. } = self.settings;
        if let Some(t) = self.cache.get(spec, k, b, seed) {
            return Ok(t);
        }
        let table = self.build_table(spec, k)?;
        self.cache.insert(table)
    }

    /// Draws a fresh table without consulting or filling the cache.
    pub fn build_table(&self, spec: &MethodSpec, k: usize) -> Result<NullTable> {
        spec.validate()?;
        let TableSettings { b, seed, max_cells } = self.settings;
        if k == 0 {
            return Err(Error::Empty);
        }
        if b < MIN_REPLICATES {
            return Err(Error::InvalidParameter(format!(
                "null tables need at least {MIN_REPLICATES} replicates, got {b}"
            )));
        }
        let requested = b as u128 * k as u128;
        if requested > max_cells {
            return Err(Error::Budget { requested, budget: max_cells });
        }
        let evaluator = self.evaluator(spec, k)?;
        let stream_domain =
            if evaluator.is_nested() { domain::NESTED_TABLE } else { domain::NULL_TABLE };
        let kind = spec.method.input_kind();
        log::debug!("building null table {spec} K={k} B={b} seed={seed}");
        let stats = par_replicates(b, |r| {
            let mut stream = rng::stream(seed, stream_domain, r);
            evaluator.statistic(&null_observation(kind, k, &mut stream))
        })?;
        NullTable::from_stats(spec.clone(), k, seed, spec.direction(), stats)
    }

    /// Statistic evaluator for `spec` at `k`, with any inner tables resolved.
    pub fn evaluator(&self, spec: &MethodSpec, k: usize) -> Result<Evaluator> {
        spec.validate()?;
        let inner = match spec.method {
            Method::FE | Method::FECS => Inner::Afp(self.table(&MethodSpec::new(Method::AFp), k)?),
            Method::OTFhard | Method::OTFsoft => {
                let variant =
                    if spec.method == Method::OTFhard { TfVariant::Hard } else { TfVariant::Soft };
                let tables = spec
                    .tau_set
                    .iter()
                    .map(|&tau| self.table(&MethodSpec::new(variant.single()).with_tau(tau), k))
                    .collect::<Result<Vec<_>>>()?;
                Inner::Omnibus(variant, tables)
            }
            _ => Inner::Direct,
        };
        Ok(Evaluator { spec: spec.clone(), k, inner })
    }

    /// Evaluator plus p-value path for `spec` at `k`.
    pub fn prepare(&self, spec: &MethodSpec, k: usize) -> Result<Prepared> {
        let evaluator = self.evaluator(spec, k)?;
        let path = if spec.method.has_analytic_null() {
            PValuePath::Analytic
        } else if matches!(spec.method, Method::FE | Method::FECS)
            && self.ensemble == EnsembleCalibration::CauchyApprox
        {
            PValuePath::CauchyApprox
        } else {
            PValuePath::Table(self.table(spec, k)?)
        };
        Ok(Prepared { evaluator, path })
    }

    pub fn combine(&self, spec: &MethodSpec, obs: &Observation) -> Result<CombineResult> {
        self.prepare(spec, obs.k())?.combine(obs)
    }

    /// Level-`alpha` critical region. Monte Carlo critical values are used for
    /// every method except Cauchy-calibrated ensembles.
    pub fn rejection_rule(&self, spec: &MethodSpec, k: usize, alpha: f64) -> Result<RejectionRule> {
        if matches!(spec.method, Method::FE | Method::FECS)
            && self.ensemble == EnsembleCalibration::CauchyApprox
        {
            if !(alpha > 0.0 && alpha < 0.5) {
                return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 0.5)")));
            }
            return Ok(RejectionRule {
                threshold: cauchy_critical_value(alpha),
                direction: Direction::LargeIsSignificant,
                calibration: Calibration::CauchyApprox,
            });
        }
        let table = self.table(spec, k)?;
        Ok(RejectionRule {
            threshold: critical_value(&table, alpha)?,
            direction: table.direction,
            calibration: Calibration::MonteCarlo,
        })
    }
}

fn two_sided<'a>(spec: &MethodSpec, obs: &'a Observation) -> Result<&'a PValueVector> {
    obs.two_sided_values().ok_or_else(|| Error::MissingInput {
        method: spec.method.to_string(),
        what: "two-sided p-values",
    })
}

fn one_sided<'a>(spec: &MethodSpec, obs: &'a Observation) -> Result<&'a OneSidedPair> {
    obs.one_sided_pair().ok_or_else(|| Error::MissingInput {
        method: spec.method.to_string(),
        what: "left and right one-sided p-values",
    })
}

impl Evaluator {
    pub fn spec(&self) -> &MethodSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn is_nested(&self) -> bool {
        !matches!(self.inner, Inner::Direct)
    }

    pub fn statistic(&self, obs: &Observation) -> Result<f64> {
        self.evaluate_with(obs, false).map(|e| e.statistic)
    }

    pub fn evaluate(&self, obs: &Observation) -> Result<Evaluated> {
        self.evaluate_with(obs, true)
    }

    fn evaluate_with(&self, obs: &Observation, weights: bool) -> Result<Evaluated> {
        if obs.k() != self.k {
            return Err(Error::Mismatch(format!(
                "evaluator prepared for K={} got {} p-values",
                self.k,
                obs.k()
            )));
        }
        let spec = &self.spec;
        let plain = |statistic| Evaluated { statistic, j_star: None, selected_weights: None };
        let out = match spec.method {
            Method::Fisher => plain(fisher_stat(two_sided(spec, obs)?)),
            Method::Stouffer => plain(stouffer_stat(two_sided(spec, obs)?)),
            Method::MinP => plain(minp_stat(two_sided(spec, obs)?)),
            Method::AFp | Method::AFz => {
                let p = two_sided(spec, obs)?;
                let s = if spec.method == Method::AFp { afp_stat(p) } else { afz_stat(p) };
                Evaluated {
                    statistic: s.statistic,
                    j_star: Some(s.j_star),
                    selected_weights: weights.then(|| afp_selected_weights(&s.trace, s.j_star)),
                }
            }
            Method::TFhard => plain(tfhard_stat(two_sided(spec, obs)?, tau(spec)?)),
            Method::TFsoft => plain(tfsoft_stat(two_sided(spec, obs)?, tau(spec)?)),
            Method::Cauchy => plain(cauchy_stat(two_sided(spec, obs)?)),
            Method::TruncCauchy => plain(trunc_cauchy_stat(two_sided(spec, obs)?, spec.delta)),
            Method::HarmonicMean => plain(harmonic_mean_stat(two_sided(spec, obs)?)),
            Method::ParetoRV => plain(rv_ensemble_stat(
                two_sided(spec, obs)?.values(),
                spec.gamma,
                Some(spec.delta),
            )),
            Method::BJ => plain(bj_stat(two_sided(spec, obs)?)),
            Method::HC => plain(hc_stat(two_sided(spec, obs)?)),
            Method::Pearson => plain(pearson_stat(one_sided(spec, obs)?)),
            Method::OTFhard | Method::OTFsoft => {
                let Inner::Omnibus(variant, tables) = &self.inner else {
                    unreachable!("omnibus evaluator without tables")
                };
                plain(omnibus_min_pvalue(*variant, two_sided(spec, obs)?, &spec.tau_set, tables))
            }
            Method::FE => {
                let p = two_sided(spec, obs)?;
                let p_afp = self.afp_pvalue(p);
                plain(fe_stat(fisher_analytic_pvalue(p), p_afp, spec.delta))
            }
            Method::FECS => {
                let pair = one_sided(spec, obs)?;
                plain(fecs_stat(
                    fisher_analytic_pvalue(pair.left()),
                    fisher_analytic_pvalue(pair.right()),
                    self.afp_pvalue(pair.left()),
                    self.afp_pvalue(pair.right()),
                    spec.delta,
                ))
            }
        };
        Ok(out)
    }

    fn afp_pvalue(&self, p: &PValueVector) -> f64 {
        let Inner::Afp(table) = &self.inner else { unreachable!("ensemble evaluator without AFp table") };
        mc_pvalue(afp_stat(p).statistic, table)
    }
}

fn tau(spec: &MethodSpec) -> Result<f64> {
    spec.tau
        .ok_or_else(|| Error::MissingInput { method: spec.method.to_string(), what: "tau" })
}

impl Prepared {
    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn calibration(&self) -> Calibration {
        match self.path {
            PValuePath::Analytic => Calibration::Analytic,
            PValuePath::CauchyApprox => Calibration::CauchyApprox,
            PValuePath::Table(_) => Calibration::MonteCarlo,
        }
    }

    /// Reference table backing the p-value, if Monte Carlo calibrated.
    pub fn table(&self) -> Option<&NullTable> {
        match &self.path {
            PValuePath::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn pvalue(&self, stat: f64) -> f64 {
        match &self.path {
            PValuePath::Analytic => {
                analytic_pvalue(self.evaluator.spec.method, stat, self.evaluator.k)
                    .expect("analytic path only for closed-form methods")
            }
            PValuePath::CauchyApprox => cauchy_sf(stat),
            PValuePath::Table(t) => mc_pvalue(stat, t),
        }
    }

    pub fn combine(&self, obs: &Observation) -> Result<CombineResult> {
        let e = self.evaluator.evaluate(obs)?;
        Ok(CombineResult {
            statistic: e.statistic,
            pvalue: self.pvalue(e.statistic),
            calibration: self.calibration(),
            selected_weights: e.selected_weights,
            j_star: e.j_star,
        })
    }
}
