/// Benjamini-Hochberg adjusted p-values, in input order.
///
/// `q_(i) = min_{j >= i} min(1, m p_(j) / j)` over the ascending order.
pub fn bh_qvalues(pvalues: &[f64]) -> Vec<f64> {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(m as f64 * pvalues[i] / (rank + 1) as f64);
        q[i] = running;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(bh_qvalues(&[0.3]), vec![0.3]);
        let q = bh_qvalues(&[0.01, 0.02, 0.03, 0.04]);
        for v in q {
            assert!((v - 0.04).abs() < 1e-15);
        }
        assert_eq!(bh_qvalues(&[1.0, 1.0, 1.0]), vec![1.0; 3]);
        assert!(bh_qvalues(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn ranking_is_preserved(p in prop::collection::vec(0.0f64..=1.0, 1..50)) {
            let q = bh_qvalues(&p);
            for i in 0..p.len() {
                prop_assert!(q[i] >= p[i] - 1e-15 && q[i] <= 1.0);
                for j in 0..p.len() {
                    if p[i] < p[j] {
                        prop_assert!(q[i] <= q[j]);
                    }
                }
            }
        }
    }
}
