//! Combination statistics computed from a validated p-value vector.
//!
//! All logs are natural logs. Values of exactly 1 are kept as is; zeros were
//! raised to the validation floor, so every transform here is finite.

use crate::pvalue::PValueVector;
use crate::special::{cauchy_transform, ln_chi2_sf_even, normal_upper_quantile};

/// Order statistics and per-j objective values of an adaptive Fisher scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumTrace {
    /// Ascending p-values.
    pub ordered_p: Vec<f64>,
    /// `order[r]` is the input position of the r-th smallest p-value.
    pub order: Vec<usize>,
    /// Objective at j = 1..=K.
    pub partial_stats: Vec<f64>,
}

/// Statistic and maximizing index of an adaptive scan.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveStat {
    pub statistic: f64,
    /// 1-based number of smallest p-values selected.
    pub j_star: usize,
    pub trace: PartialSumTrace,
}

pub fn fisher_stat(p: &PValueVector) -> f64 {
    p.values().iter().map(|&v| -2.0 * v.ln()).fold(0.0, |acc, x| acc + x)
}

/// Sum of `Phi^{-1}(1 - p_i)`; inputs are kept inside `[floor, 1 - floor]`.
pub fn stouffer_stat(p: &PValueVector) -> f64 {
    let lo = p.floor();
    p.values()
        .iter()
        .map(|&v| normal_upper_quantile(v.clamp(lo, 1.0 - lo)))
        .sum()
}

pub fn minp_stat(p: &PValueVector) -> f64 {
    p.values().iter().copied().fold(f64::INFINITY, f64::min)
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = j;
        }
    }
    best
}

/// Adaptive Fisher scan over `-ln` of the ordered p-values.
///
/// `neglog_desc` must be sorted descending (most significant first). Returns
/// the per-j objective `-ln SF_{chi2(2j)}(2 sum_{i<=j} neglog_i)`.
pub fn afp_objective(neglog_desc: &[f64]) -> Vec<f64> {
    let mut cumulative = 0.0;
    neglog_desc
        .iter()
        .enumerate()
        .map(|(i, s)| {
            cumulative += s;
            -ln_chi2_sf_even(2.0 * cumulative, i + 1)
        })
        .collect()
}

/// AFp statistic `max_j -ln SF_{chi2(2j)}(-2 sum_{i<=j} ln p_(i))`.
///
/// Ties in the maximum resolve to the smallest j.
pub fn afp_stat(p: &PValueVector) -> AdaptiveStat {
    let order = p.ascending_order();
    let ordered_p: Vec<f64> = order.iter().map(|&i| p.values()[i]).collect();
    let neglog: Vec<f64> = ordered_p.iter().map(|v| -v.ln()).collect();
    let partial_stats = afp_objective(&neglog);
    let best = argmax_first(&partial_stats);
    AdaptiveStat {
        statistic: partial_stats[best],
        j_star: best + 1,
        trace: PartialSumTrace { ordered_p, order, partial_stats },
    }
}

/// Binary weights marking the `j_star` smallest p-values in input order.
pub fn afp_selected_weights(trace: &PartialSumTrace, j_star: usize) -> Vec<bool> {
    let mut w = vec![false; trace.order.len()];
    for &i in trace.order.iter().take(j_star) {
        w[i] = true;
    }
    w
}

/// Centering and scale constants `A_j`, `B_j` of AFz for j = 1..=K, using
/// `w(i, j) = min(1, j/i)` summed over i = 1..=K.
pub fn afz_constants(k: usize) -> (Vec<f64>, Vec<f64>) {
    // suffix sums of 1/i and 1/i^2 over i = j+1..=K
    let mut tail1 = vec![0.0; k + 1];
    let mut tail2 = vec![0.0; k + 1];
    for i in (1..=k).rev() {
        let fi = i as f64;
        tail1[i - 1] = tail1[i] + 1.0 / fi;
        tail2[i - 1] = tail2[i] + 1.0 / (fi * fi);
    }
    let mut a = Vec::with_capacity(k);
    let mut b = Vec::with_capacity(k);
    for j in 1..=k {
        let fj = j as f64;
        a.push(fj + fj * tail1[j]);
        b.push((fj + fj * fj * tail2[j]).sqrt());
    }
    (a, b)
}

/// AFz statistic `max_j (-sum_{i<=j} ln p_(i) - A_j) / B_j`.
pub fn afz_stat(p: &PValueVector) -> AdaptiveStat {
    let order = p.ascending_order();
    let ordered_p: Vec<f64> = order.iter().map(|&i| p.values()[i]).collect();
    let (a, b) = afz_constants(ordered_p.len());
    let mut cumulative = 0.0;
    let partial_stats: Vec<f64> = ordered_p
        .iter()
        .enumerate()
        .map(|(j, v)| {
            cumulative -= v.ln();
            (cumulative - a[j]) / b[j]
        })
        .collect();
    let best = argmax_first(&partial_stats);
    AdaptiveStat {
        statistic: partial_stats[best],
        j_star: best + 1,
        trace: PartialSumTrace { ordered_p, order, partial_stats },
    }
}

/// Truncated Fisher with hard thresholding: `sum (-2 ln p_i) 1{p_i <= tau}`.
pub fn tfhard_stat(p: &PValueVector, tau: f64) -> f64 {
    p.values()
        .iter()
        .filter(|&&v| v <= tau)
        .map(|&v| -2.0 * v.ln())
        .fold(0.0, |acc, x| acc + x)
}

/// Truncated Fisher with soft thresholding: `sum (-2 ln p_i + 2 ln tau)_+`.
pub fn tfsoft_stat(p: &PValueVector, tau: f64) -> f64 {
    let shift = 2.0 * tau.ln();
    p.values()
        .iter()
        .map(|&v| (-2.0 * v.ln() + shift).max(0.0))
        .fold(0.0, |acc, x| acc + x)
}

/// Mean of `tan(pi (1/2 - p_i))`.
pub fn cauchy_stat(p: &PValueVector) -> f64 {
    let lo = p.floor();
    let total: f64 = p
        .values()
        .iter()
        .map(|&v| cauchy_transform(v.clamp(lo, 1.0 - lo)))
        .sum();
    total / p.len() as f64
}

/// `h(p)` for `p < 1 - delta`, pinned at `h(1 - delta)` above.
pub fn trunc_cauchy_transform(p: f64, delta: f64) -> f64 {
    cauchy_transform(p.min(1.0 - delta))
}

/// Mean of the truncated Cauchy transforms.
pub fn trunc_cauchy_stat(p: &PValueVector, delta: f64) -> f64 {
    let total: f64 = p.values().iter().map(|&v| trunc_cauchy_transform(v, delta)).sum();
    total / p.len() as f64
}

/// Equal-weight harmonic mean `K / sum 1/p_i`.
pub fn harmonic_mean_stat(p: &PValueVector) -> f64 {
    p.len() as f64 / p.values().iter().map(|v| 1.0 / v).sum::<f64>()
}

/// Pareto quantile `p^{-1/gamma}`, the `(1 - p)` quantile of a Pareto law
/// with tail index `gamma` on `[1, inf)`.
pub fn pareto_rv_transform(p: f64, gamma: f64) -> f64 {
    p.powf(-1.0 / gamma)
}

/// One-sided higher criticism over all order statistics.
///
/// Terms with `p_(i) = 1` are skipped; returns negative infinity if none remain.
pub fn hc_stat(p: &PValueVector) -> f64 {
    let sorted = p.sorted();
    let k = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0 && v < 1.0)
        .map(|(i, &v)| k.sqrt() * ((i + 1) as f64 / k - v) / (v * (1.0 - v)).sqrt())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Bernoulli Kullback-Leibler divergence with `0 ln 0 = 0`.
fn bernoulli_kl(a: f64, b: f64) -> f64 {
    let first = if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    let second = if a < 1.0 { (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln() } else { 0.0 };
    first + second
}

/// One-sided Berk-Jones `max_{i: p_(i) < i/K} K KL(i/K || p_(i))`, or 0.
pub fn bj_stat(p: &PValueVector) -> f64 {
    let sorted = p.sorted();
    let k = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| {
            let a = (i + 1) as f64 / k;
            (v < a).then(|| k * bernoulli_kl(a, v))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> PValueVector {
        PValueVector::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn fisher_examples() {
        close(fisher_stat(&pv(&[1.0, 1.0, 1.0])), 0.0, 0.0);
        close(fisher_stat(&pv(&[0.1, 0.5])), -2.0 * (0.1f64.ln() + 0.5f64.ln()), 1e-12);
        close(fisher_stat(&pv(&[0.1, 0.5])), 5.99146, 1e-5);
        close(fisher_stat(&pv(&[0.01, 0.04, 0.15, 0.25, 0.5])), 23.6012, 1e-4);
    }

    #[test]
    fn stouffer_examples() {
        close(stouffer_stat(&pv(&[0.5, 0.5])), 0.0, 1e-15);
        close(stouffer_stat(&pv(&[0.0228, 0.5])), 2.0, 2e-3);
        close(stouffer_stat(&pv(&[0.9772, 0.0228])), 0.0, 1e-12);
        assert!(stouffer_stat(&pv(&[1.0, 0.0])).is_finite());
    }

    #[test]
    fn minp_examples() {
        assert_eq!(minp_stat(&pv(&[0.5, 0.2, 0.9])), 0.2);
        assert_eq!(minp_stat(&pv(&[1.0, 1.0])), 1.0);
        assert_eq!(minp_stat(&pv(&[0.01, 0.01])), 0.01);
    }

    #[test]
    fn afp_examples() {
        let one = afp_stat(&pv(&[0.1]));
        close(one.statistic, 2.302585, 1e-6);
        assert_eq!(one.j_star, 1);

        let two = afp_stat(&pv(&[0.1, 0.5]));
        close(two.statistic, 2.302585, 1e-6);
        assert_eq!(two.j_star, 1);
        close(two.trace.partial_stats[1], 1.6105, 1e-4);

        let flat = afp_stat(&pv(&[1.0, 1.0]));
        close(flat.statistic, 0.0, 0.0);
        assert_eq!(flat.j_star, 1);
    }

    #[test]
    fn afp_first_objective_is_neglog_min() {
        let s = afp_stat(&pv(&[0.3, 0.02, 0.7]));
        assert_eq!(s.trace.partial_stats[0], -(0.02f64.ln()));
    }

    #[test]
    fn afp_weights_map_back_to_positions() {
        let a = afp_stat(&pv(&[0.1, 0.5]));
        assert_eq!(afp_selected_weights(&a.trace, a.j_star), vec![true, false]);
        let b = afp_stat(&pv(&[0.5, 0.1]));
        assert_eq!(afp_selected_weights(&b.trace, b.j_star), vec![false, true]);
        assert_eq!(afp_selected_weights(&b.trace, 2), vec![true, true]);
    }

    #[test]
    fn afz_examples() {
        let two = afz_stat(&pv(&[0.1, 0.5]));
        // (2.302585 - 1.5) / sqrt(1.25)
        close(two.statistic, 0.717854, 1e-6);
        assert_eq!(two.j_star, 1);
        close(two.trace.partial_stats[1], 0.70409, 1e-5);

        let one = afz_stat(&pv(&[0.5]));
        close(one.statistic, -0.30685, 1e-5);

        let ones = afz_stat(&pv(&[1.0; 4]));
        let (a, b) = afz_constants(4);
        let expected = (0..4).map(|j| -a[j] / b[j]).fold(f64::NEG_INFINITY, f64::max);
        close(ones.statistic, expected, 1e-15);
    }

    #[test]
    fn afz_constants_match_direct_sums() {
        for k in [1usize, 2, 7, 30] {
            let (a, b) = afz_constants(k);
            for j in 1..=k {
                let w = |i: usize| (j as f64 / i as f64).min(1.0);
                let da: f64 = (1..=k).map(w).sum();
                let db: f64 = (1..=k).map(|i| w(i) * w(i)).sum::<f64>().sqrt();
                close(a[j - 1], da, 1e-12);
                close(b[j - 1], db, 1e-12);
            }
        }
    }

    #[test]
    fn truncated_fisher_examples() {
        let p = pv(&[0.01, 0.2, 0.5]);
        close(tfhard_stat(&p, 1.0), fisher_stat(&p), 1e-12);
        close(tfhard_stat(&p, 0.05), 9.21034, 1e-5);
        assert_eq!(tfhard_stat(&p, 0.005), 0.0);
        close(tfsoft_stat(&p, 1.0), fisher_stat(&p), 1e-12);
        close(tfsoft_stat(&p, 0.05), 2.0 * 5.0f64.ln(), 1e-12);
        close(tfsoft_stat(&p, 0.05), 3.21888, 1e-5);
        assert_eq!(tfsoft_stat(&pv(&[0.3, 0.3]), 0.3), 0.0);
    }

    #[test]
    fn cauchy_examples() {
        close(cauchy_stat(&pv(&[0.5, 0.5])), 0.0, 1e-15);
        close(cauchy_stat(&pv(&[0.25, 0.75])), 0.0, 1e-12);
        close(cauchy_stat(&pv(&[0.01])), 31.8205, 1e-4);
        assert!(cauchy_stat(&pv(&[1.0, 0.2])).is_finite());
    }

    #[test]
    fn trunc_cauchy_examples() {
        close(trunc_cauchy_transform(0.5, 0.01), 0.0, 1e-15);
        close(trunc_cauchy_transform(0.995, 0.01), -31.8205, 1e-4);
        close(trunc_cauchy_transform(1.0, 0.01), -31.8205, 1e-4);
        // identical to h below 1 - delta
        for &p in &[0.001, 0.2, 0.7, 0.9899] {
            assert_eq!(trunc_cauchy_transform(p, 0.01), cauchy_transform(p));
        }
    }

    #[test]
    fn harmonic_mean_examples() {
        close(harmonic_mean_stat(&pv(&[0.5, 0.5])), 0.5, 1e-15);
        close(harmonic_mean_stat(&pv(&[0.1, 0.9])), 0.18, 1e-12);
        close(harmonic_mean_stat(&pv(&[1.0, 1.0])), 1.0, 0.0);
    }

    #[test]
    fn pareto_examples() {
        close(pareto_rv_transform(0.1, 1.0), 10.0, 1e-12);
        close(pareto_rv_transform(1.0, 1.0), 1.0, 0.0);
        close(pareto_rv_transform(0.01, 2.0), 10.0, 1e-12);
    }

    #[test]
    fn hc_examples() {
        close(hc_stat(&pv(&[0.25, 0.75])), 0.81650, 1e-5);
        close(hc_stat(&pv(&[0.5])), 1.0, 1e-12);
        // p_(i) = i/(K+1) at K = 5, brute force over i
        let k = 5usize;
        let p: Vec<f64> = (1..=k).map(|i| i as f64 / (k + 1) as f64).collect();
        let brute = (1..=k)
            .map(|i| {
                let q = i as f64 / 6.0;
                (k as f64).sqrt() * (i as f64 / k as f64 - q) / (q * (1.0 - q)).sqrt()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let got = hc_stat(&pv(&p));
        close(got, brute, 1e-12);
        close(got, 1.0, 1e-12);
        assert_eq!(hc_stat(&pv(&[1.0])), f64::NEG_INFINITY);
    }

    #[test]
    fn bj_examples() {
        close(bj_stat(&pv(&[0.1])), 10.0f64.ln(), 1e-12);
        assert_eq!(bj_stat(&pv(&[0.5, 1.0])), 0.0);
        let expected = 2.0 * (0.5 * 10.0f64.ln() + 0.5 * (0.5f64 / 0.95).ln());
        close(bj_stat(&pv(&[0.05, 0.8])), expected, 1e-12);
    }

    fn stat_all(p: &PValueVector) -> Vec<f64> {
        vec![
            fisher_stat(p),
            stouffer_stat(p),
            minp_stat(p),
            afp_stat(p).statistic,
            afz_stat(p).statistic,
            tfhard_stat(p, 0.05),
            tfsoft_stat(p, 0.05),
            cauchy_stat(p),
            harmonic_mean_stat(p),
            hc_stat(p),
            bj_stat(p),
        ]
    }

    fn pvec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0005f64..0.9995, 1..12)
    }

    proptest! {
        #[test]
        fn statistics_are_permutation_invariant(v in pvec_strategy(), rot in 0usize..12) {
            let p = pv(&v);
            let mut w = v.clone();
            let r = rot % w.len();
            w.rotate_left(r);
            w.reverse();
            let q = pv(&w);
            for (a, b) in stat_all(&p).into_iter().zip(stat_all(&q)) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
            }
        }

        #[test]
        fn statistics_are_monotone(v in pvec_strategy(), idx in 0usize..12, shrink in 0.05f64..0.95) {
            let p = pv(&v);
            let mut w = v.clone();
            let i = idx % w.len();
            w[i] *= shrink;
            let q = pv(&w);
            let before = stat_all(&p);
            let after = stat_all(&q);
            let tol = |x: f64| 1e-9 * (1.0 + x.abs());
            // indices 2 (minP) and 8 (HM) decrease, the rest increase
            for (n, (b, a)) in before.iter().zip(&after).enumerate() {
                if n == 2 || n == 8 {
                    prop_assert!(*a <= *b + tol(*b), "stat {}: {} -> {}", n, b, a);
                } else if n != 4 {
                    prop_assert!(*a >= *b - tol(*b), "stat {}: {} -> {}", n, b, a);
                }
            }
        }

        #[test]
        fn truncated_fisher_ordering(v in pvec_strategy(), tau in 0.001f64..1.0) {
            let p = pv(&v);
            let soft = tfsoft_stat(&p, tau);
            let hard = tfhard_stat(&p, tau);
            let full = fisher_stat(&p);
            prop_assert!(soft <= hard + 1e-12);
            prop_assert!(hard <= full + 1e-12);
        }
    }
}
