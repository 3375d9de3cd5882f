//! Ensembles of combination tests: the Fisher ensemble (Fisher + AFp), its
//! concordant-signal version over one-sided p-values, the Pearson test and the
//! general regularly varying ensemble.

use crate::combiners::{fisher_stat, pareto_rv_transform, trunc_cauchy_transform};
use crate::error::{Error, Result};
use crate::pvalue::OneSidedPair;
use crate::special::{cauchy_sf, ln_chi2_sf};

/// Constituent p-values of an ensemble with their names.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleInput {
    pub component_pvalues: Vec<f64>,
    pub delta: f64,
    pub labels: Vec<String>,
}

impl EnsembleInput {
    pub fn new(component_pvalues: Vec<f64>, delta: f64, labels: Vec<String>) -> Result<Self> {
        if component_pvalues.len() < 2 {
            return Err(Error::InvalidParameter("an ensemble needs at least two components".into()));
        }
        if labels.len() != component_pvalues.len() {
            return Err(Error::Mismatch("one label per component is required".into()));
        }
        if let Some(p) = component_pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("component p-value {p} outside [0, 1]")));
        }
        Ok(Self { component_pvalues, delta, labels })
    }

    /// Mean truncated Cauchy score of the components.
    pub fn truncated_cauchy_mean(&self) -> f64 {
        let n = self.component_pvalues.len() as f64;
        self.component_pvalues
            .iter()
            .map(|&p| trunc_cauchy_transform(p, self.delta))
            .sum::<f64>()
            / n
    }
}

/// `[h_delta(p_fisher) + h_delta(p_afp)] / 2`.
pub fn fe_stat(p_fisher: f64, p_afp: f64, delta: f64) -> f64 {
    0.5 * (trunc_cauchy_transform(p_fisher, delta) + trunc_cauchy_transform(p_afp, delta))
}

/// Standard Cauchy tail of the FE statistic. True size is at most
/// `(1 + delta)^2` times the nominal level.
pub fn fe_pvalue(stat: f64) -> f64 {
    cauchy_sf(stat)
}

/// Mean truncated Cauchy score of the left/right Fisher and AFp p-values.
pub fn fecs_stat(p_fisher_l: f64, p_fisher_r: f64, p_afp_l: f64, p_afp_r: f64, delta: f64) -> f64 {
    0.25 * [p_fisher_l, p_fisher_r, p_afp_l, p_afp_r]
        .iter()
        .map(|&p| trunc_cauchy_transform(p, delta))
        .sum::<f64>()
}

/// Standard Cauchy tail of the FE_CS statistic; size inflation at most
/// `(1 + delta)^4`.
pub fn fecs_pvalue(stat: f64) -> f64 {
    cauchy_sf(stat)
}

/// Inflation factor bounding the true size of a Cauchy-calibrated ensemble of
/// `components` truncated scores.
pub fn size_inflation_bound(delta: f64, components: i32) -> f64 {
    (1.0 + delta).powi(components)
}

/// Fisher p-value from the chi-square(2K) null.
pub fn fisher_analytic_pvalue(p: &crate::pvalue::PValueVector) -> f64 {
    ln_chi2_sf(fisher_stat(p), 2 * p.len() as u32).exp()
}

/// Pearson statistic: the smaller of the left and right Fisher p-values.
/// Small values are significant; the two Fisher p-values are dependent so the
/// statistic itself is calibrated by simulation.
pub fn pearson_stat(pair: &OneSidedPair) -> f64 {
    fisher_analytic_pvalue(pair.left()).min(fisher_analytic_pvalue(pair.right()))
}

/// `sum_i g_gamma(p_i)` with the Pareto transform. With `truncate_at =
/// Some(delta)` each input is capped at `1 - delta` first, which bounds every
/// term below by `g_gamma(1 - delta)`.
pub fn rv_ensemble_stat(component_pvalues: &[f64], gamma: f64, truncate_at: Option<f64>) -> f64 {
    let cap = truncate_at.map_or(1.0, |d| 1.0 - d);
    component_pvalues
        .iter()
        .map(|&p| pareto_rv_transform(p.min(cap), gamma))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pvalue::PValueVector;
    use crate::special::cauchy_transform;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn fe_examples() {
        close(fe_stat(0.5, 0.5, 0.01), 0.0, 1e-15);
        let s = fe_stat(0.01, 0.02, 0.01);
        close(s, 23.8575, 1e-4);
        close(fe_stat(1.0, 0.5, 0.01), -15.9103, 1e-4);
        close(fe_pvalue(0.0), 0.5, 1e-16);
        close(fe_pvalue(s), 0.013334, 1e-6);
        assert_eq!(fe_pvalue(f64::INFINITY), 0.0);
    }

    #[test]
    fn fecs_examples() {
        close(fecs_stat(0.5, 0.5, 0.5, 0.5, 0.01), 0.0, 1e-15);
        close(fecs_stat(0.01, 0.99, 0.01, 0.99, 0.01), 0.0, 1e-12);
        let expected = (2.0 * cauchy_transform(0.001) + 2.0 * cauchy_transform(0.99)) / 4.0;
        let got = fecs_stat(0.001, 1.0, 0.001, 1.0, 0.01);
        close(got, expected, 1e-9);
        close(got, 143.2442, 1e-3);
        close(fecs_pvalue(0.0), 0.5, 1e-16);
        let x = 1e6;
        close(fecs_pvalue(x) * std::f64::consts::PI * x, 1.0, 1e-9);
        let floor = fecs_stat(1.0, 1.0, 1.0, 1.0, 0.01);
        assert!(fecs_pvalue(floor) < 1.0);
        close(floor, cauchy_transform(0.99), 1e-12);
    }

    #[test]
    fn pearson_examples() {
        let half = PValueVector::new(vec![0.5; 4]).unwrap();
        let pair = OneSidedPair::new(half.clone(), half.clone()).unwrap();
        close(pearson_stat(&pair), fisher_analytic_pvalue(&half), 1e-15);

        let l = PValueVector::new(vec![0.01]).unwrap();
        let r = PValueVector::new(vec![0.99]).unwrap();
        close(pearson_stat(&OneSidedPair::new(l, r).unwrap()), 0.01, 1e-14);
    }

    #[test]
    fn rv_ensemble_examples() {
        close(rv_ensemble_stat(&[0.1], 1.0, None), 10.0, 1e-12);
        close(rv_ensemble_stat(&[1.0, 1.0, 1.0], 1.0, None), 3.0, 0.0);
        close(rv_ensemble_stat(&[0.01, 0.5], 1.0, Some(0.01)), 102.0, 1e-9);
        close(rv_ensemble_stat(&[1.0], 1.0, Some(0.01)), 1.0 / 0.99, 1e-12);
    }

    #[test]
    fn ensemble_input_checks() {
        assert!(EnsembleInput::new(vec![0.1], 0.01, vec!["a".into()]).is_err());
        let e = EnsembleInput::new(vec![0.01, 0.02], 0.01, vec!["fisher".into(), "afp".into()])
            .unwrap();
        close(e.truncated_cauchy_mean(), fe_stat(0.01, 0.02, 0.01), 1e-12);
    }

    proptest! {
        #[test]
        fn fe_symmetric_and_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, shrink in 0.0f64..1.0) {
            prop_assert_eq!(fe_stat(a, b, 0.01), fe_stat(b, a, 0.01));
            prop_assert!(fe_stat(a * shrink, b, 0.01) >= fe_stat(a, b, 0.01) - 1e-9);
            let floor = cauchy_transform(0.99);
            prop_assert!(fe_stat(a, b, 0.01) >= floor - 1e-9);
            prop_assert!(fe_pvalue(fe_stat(a, b, 0.01)) < 1.0);
        }

        #[test]
        fn fecs_exchange_symmetry(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, d in 0.0f64..=1.0) {
            let x = fecs_stat(a, b, c, d, 0.01);
            let y = fecs_stat(c, d, a, b, 0.01);
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            prop_assert!(x >= cauchy_transform(0.99) - 1e-9);
        }

        #[test]
        fn fe_pvalue_strictly_decreasing(x in -1e3f64..1e3, dx in 1e-3f64..10.0) {
            prop_assert!(fe_pvalue(x + dx) < fe_pvalue(x));
        }

        #[test]
        fn small_delta_matches_plain_cauchy(a in 0.0001f64..0.9, b in 0.0001f64..0.9) {
            let plain = 0.5 * (cauchy_transform(a) + cauchy_transform(b));
            prop_assert_eq!(fe_stat(a, b, 1e-6), plain);
        }
    }
}
