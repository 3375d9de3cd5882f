//! Shared domain types: validated p-value vectors, one-sided pairs, method
//! specifications and combination results.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to p-values equal to zero before any log or tangent transform.
pub const DEFAULT_FLOOR: f64 = 1e-15;

/// Default truncation level of the truncated Cauchy transform.
pub const DEFAULT_DELTA: f64 = 0.01;

/// Default threshold set of the omnibus truncated Fisher tests.
pub const DEFAULT_TAU_SET: [f64; 4] = [0.01, 0.05, 0.5, 1.0];

/// A validated vector of K >= 1 p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueVector {
    values: Vec<f64>,
    id: Option<String>,
    clamped: usize,
    floor: f64,
}

impl PValueVector {
    /// Validates `values` with the default floor.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate(values, DEFAULT_FLOOR)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    /// Number of entries that were raised from 0 to the floor.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Indices of the values in ascending order. Ties keep their original order.
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        order
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Checks every value is a number in [0, 1] and raises exact zeros to `floor`.
///
/// Idempotent: a vector that already passed validation is returned unchanged.
pub fn validate(mut values: Vec<f64>, floor: f64) -> Result<PValueVector> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::InvalidParameter(format!("clamp floor {floor} must lie in (0, 1)")));
    }
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut clamped = 0;
    for (index, v) in values.iter_mut().enumerate() {
        if !(0.0..=1.0).contains(v) {
            return Err(Error::InvalidPValue { index, value: *v });
        }
        if *v == 0.0 {
            *v = floor;
            clamped += 1;
        }
    }
    Ok(PValueVector { values, id: None, clamped, floor })
}

/// Left and right one-sided p-values of the same K statistics.
///
/// Left is small for large positive statistics (`1 - Phi(x)`), right is small
/// for large negative ones (`Phi(x)`).
#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedPair {
    left: PValueVector,
    right: PValueVector,
}

/// Tolerance on `p_left + p_right = 1`.
pub const ONE_SIDED_TOLERANCE: f64 = 1e-9;

impl OneSidedPair {
    pub fn new(left: PValueVector, right: PValueVector) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::Mismatch(format!(
                "left has {} p-values, right has {}",
                left.len(),
                right.len()
            )));
        }
        for (i, (l, r)) in left.values().iter().zip(right.values()).enumerate() {
            // a clamped zero sits at the floor, so allow for it
            let slack = ONE_SIDED_TOLERANCE + left.floor().max(right.floor());
            if (l + r - 1.0).abs() > slack {
                return Err(Error::Mismatch(format!(
                    "one-sided p-values at position {i} sum to {} instead of 1",
                    l + r
                )));
            }
        }
        Ok(Self { left, right })
    }

    /// Builds the pair from left-tail p-values, taking `right = 1 - left`.
    pub fn from_left(left: PValueVector) -> Result<Self> {
        let right = PValueVector::new(left.values().iter().map(|p| 1.0 - p).collect())?;
        Self::new(left, right)
    }

    pub fn left(&self) -> &PValueVector {
        &self.left
    }

    pub fn right(&self) -> &PValueVector {
        &self.right
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// Two-sided p-values `2 min(left, right)`.
    pub fn two_sided(&self) -> Result<PValueVector> {
        PValueVector::new(
            self.left
                .values()
                .iter()
                .zip(self.right.values())
                .map(|(l, r)| (2.0 * l.min(*r)).min(1.0))
                .collect(),
        )
    }
}

/// The p-values available for one feature or one simulated replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    two_sided: Option<PValueVector>,
    one_sided: Option<OneSidedPair>,
}

impl Observation {
    pub fn two_sided(p: PValueVector) -> Self {
        Self { two_sided: Some(p), one_sided: None }
    }

    pub fn one_sided(pair: OneSidedPair) -> Self {
        Self { two_sided: None, one_sided: Some(pair) }
    }

    pub fn both(two_sided: PValueVector, pair: OneSidedPair) -> Result<Self> {
        if two_sided.len() != pair.len() {
            return Err(Error::Mismatch("two-sided and one-sided vectors differ in length".into()));
        }
        Ok(Self { two_sided: Some(two_sided), one_sided: Some(pair) })
    }

    pub fn k(&self) -> usize {
        self.two_sided
            .as_ref()
            .map(PValueVector::len)
            .or_else(|| self.one_sided.as_ref().map(OneSidedPair::len))
            .unwrap_or(0)
    }

    pub fn two_sided_values(&self) -> Option<&PValueVector> {
        self.two_sided.as_ref()
    }

    pub fn one_sided_pair(&self) -> Option<&OneSidedPair> {
        self.one_sided.as_ref()
    }
}

/// Which side of the null distribution counts as evidence against the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    LargeIsSignificant,
    SmallIsSignificant,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::LargeIsSignificant => "large",
            Direction::SmallIsSignificant => "small",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(Direction::LargeIsSignificant),
            "small" => Ok(Direction::SmallIsSignificant),
            other => Err(Error::Parse(format!("unknown direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Fisher,
    Stouffer,
    MinP,
    AFp,
    AFz,
    TFhard,
    TFsoft,
    OTFhard,
    OTFsoft,
    Cauchy,
    TruncCauchy,
    HarmonicMean,
    ParetoRV,
    BJ,
    HC,
    Pearson,
    FE,
    FECS,
}

/// What kind of p-values a method consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    TwoSided,
    OneSided,
}

impl Method {
    pub const ALL: [Method; 18] = [
        Method::Fisher,
        Method::Stouffer,
        Method::MinP,
        Method::AFp,
        Method::AFz,
        Method::TFhard,
        Method::TFsoft,
        Method::OTFhard,
        Method::OTFsoft,
        Method::Cauchy,
        Method::TruncCauchy,
        Method::HarmonicMean,
        Method::ParetoRV,
        Method::BJ,
        Method::HC,
        Method::Pearson,
        Method::FE,
        Method::FECS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fisher => "fisher",
            Method::Stouffer => "stouffer",
            Method::MinP => "minp",
            Method::AFp => "afp",
            Method::AFz => "afz",
            Method::TFhard => "tfhard",
            Method::TFsoft => "tfsoft",
            Method::OTFhard => "otfhard",
            Method::OTFsoft => "otfsoft",
            Method::Cauchy => "cauchy",
            Method::TruncCauchy => "trunccauchy",
            Method::HarmonicMean => "hm",
            Method::ParetoRV => "pareto",
            Method::BJ => "bj",
            Method::HC => "hc",
            Method::Pearson => "pearson",
            Method::FE => "fe",
            Method::FECS => "fecs",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Method::MinP
            | Method::HarmonicMean
            | Method::Pearson
            | Method::OTFhard
            | Method::OTFsoft => Direction::SmallIsSignificant,
            _ => Direction::LargeIsSignificant,
        }
    }

    pub fn input_kind(self) -> InputKind {
        match self {
            Method::Pearson | Method::FECS => InputKind::OneSided,
            _ => InputKind::TwoSided,
        }
    }

    pub fn has_analytic_null(self) -> bool {
        matches!(self, Method::Fisher | Method::Stouffer | Method::MinP | Method::Cauchy)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let alias = match lower.as_str() {
            "harmonic" | "harmonicmean" => "hm",
            "ca" => "cauchy",
            "fe_cs" | "fe-cs" => "fecs",
            "paretorv" | "rv" => "pareto",
            other => other,
        };
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == alias)
            .ok_or_else(|| Error::Parse(format!("unknown method '{s}'")))
    }
}

/// A combination method together with its tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    /// Threshold for TFhard / TFsoft.
    pub tau: Option<f64>,
    /// Threshold set for the omnibus tests.
    pub tau_set: Vec<f64>,
    /// Truncation level of the truncated Cauchy / RV transforms.
    pub delta: f64,
    /// Tail index of the regularly varying transform.
    pub gamma: f64,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            tau: None,
            tau_set: DEFAULT_TAU_SET.to_vec(),
            delta: DEFAULT_DELTA,
            gamma: 1.0,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_tau_set(mut self, taus: Vec<f64>) -> Self {
        self.tau_set = taus;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |t: f64| t > 0.0 && t <= 1.0;
        match self.method {
            Method::TFhard | Method::TFsoft => match self.tau {
                Some(t) if in_unit(t) => {}
                Some(t) => {
                    return Err(Error::InvalidParameter(format!("tau = {t} must lie in (0, 1]")))
                }
                None => {
                    return Err(Error::MissingInput { method: self.method.to_string(), what: "tau" })
                }
            },
            Method::OTFhard | Method::OTFsoft => {
                if self.tau_set.is_empty() {
                    return Err(Error::InvalidParameter("tau set is empty".into()));
                }
                if !self.tau_set.iter().all(|&t| in_unit(t)) {
                    return Err(Error::InvalidParameter("tau set values must lie in (0, 1]".into()));
                }
                if self.tau_set.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter(
                        "tau set must be strictly increasing".into(),
                    ));
                }
            }
            _ => {}
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {} must be positive", self.gamma)));
        }
        Ok(())
    }

    /// Canonical string naming the method and the parameters that affect its
    /// statistic. Used as the table cache key.
    pub fn key(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        match self.method {
            Method::TFhard | Method::TFsoft => {
                format!("{}(tau={})", self.method, self.tau.unwrap_or(f64::NAN))
            }
            Method::OTFhard | Method::OTFsoft => {
                format!("{}(taus={})", self.method, join(&self.tau_set))
            }
            Method::TruncCauchy | Method::FE | Method::FECS => {
                format!("{}(delta={})", self.method, self.delta)
            }
            Method::ParetoRV => format!("{}(gamma={};delta={})", self.method, self.gamma, self.delta),
            m => m.to_string(),
        }
    }

    pub fn direction(&self) -> Direction {
        self.method.direction()
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// How a combined p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Calibration {
    Analytic,
    MonteCarlo,
    CauchyApprox,
}

impl Calibration {
    pub fn as_str(self) -> &'static str {
        match self {
            Calibration::Analytic => "analytic",
            Calibration::MonteCarlo => "montecarlo",
            Calibration::CauchyApprox => "cauchy_approx",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombineResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub calibration: Calibration,
    /// Indicator of the `j_star` smallest p-values (AFp / AFz only).
    pub selected_weights: Option<Vec<bool>>,
    pub j_star: Option<usize>,
}

/// Direction and strength of one study's association.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignedAssociation {
    pub beta_sign: i8,
    pub p_left: f64,
    pub p_right: f64,
    pub e_measure: f64,
}

impl SignedAssociation {
    /// `beta_sign` is +1 for non-negative coefficients and -1 otherwise.
    pub fn new(beta: f64, p_left: f64, p_right: f64) -> Self {
        let beta_sign = if beta < 0.0 { -1 } else { 1 };
        let e_measure = crate::metapipe::association_measure(beta_sign, p_left, p_right);
        Self { beta_sign, p_left, p_right, e_measure }
    }
}
