use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::student_t_sf;

/// OLS fit of `y ~ 1 + age + sex`, reporting the age coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub beta_age: f64,
    pub se: f64,
    pub t: f64,
    pub df: usize,
    pub p_two: f64,
    /// `P(T >= t)`.
    pub p_left: f64,
    /// `P(T <= t)`.
    pub p_right: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Fits the three-parameter model by least squares on centered covariates.
///
/// Tails use Student's t with `m - 3` degrees of freedom. A zero coefficient
/// always gives `t = 0`, including the degenerate zero-residual case.
pub fn fit_feature_regression(y: &[f64], age: &[f64], sex: &[f64]) -> Result<RegressionFit> {
    let m = y.len();
    if age.len() != m || sex.len() != m {
        return Err(Error::Mismatch(format!(
            "response has {m} values but covariates have {} and {}",
            age.len(),
            sex.len()
        )));
    }
    if m < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 subjects, got {m}")));
    }
    if y.iter().chain(age).chain(sex).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value in regression input".into()));
    }
    let (ma, ms, my) = (mean(age), mean(sex), mean(y));
    let (mut saa, mut sss, mut sas, mut say, mut ssy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m {
        let (a, s, v) = (age[i] - ma, sex[i] - ms, y[i] - my);
        saa += a * a;
        sss += s * s;
        sas += a * s;
        say += a * v;
        ssy += s * v;
    }
    let det = saa * sss - sas * sas;
    if !(saa > 0.0 && sss > 0.0) || det <= 1e-12 * saa * sss {
        return Err(Error::RankDeficient("design [1, age, sex] is not of full column rank".into()));
    }
    let beta_age = (sss * say - sas * ssy) / det;
    let beta_sex = (saa * ssy - sas * say) / det;
    let rss: f64 = (0..m)
        .map(|i| {
            let r = (y[i] - my) - beta_age * (age[i] - ma) - beta_sex * (sex[i] - ms);
            r * r
        })
        .sum();
    let df = m - 3;
    let sigma2 = rss / df as f64;
    let se = (sigma2 * sss / det).sqrt();
    let t = if beta_age == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY.copysign(beta_age)
    } else {
        beta_age / se
    };
    let p_left = student_t_sf(t, df as f64);
    let p_right = 1.0 - p_left;
    let p_two = (2.0 * p_left.min(p_right)).min(1.0);
    Ok(RegressionFit { beta_age, se, t, df, p_two, p_left, p_right })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_response() {
        let age = [1.0, 2.0, 3.0, 4.0, 5.0];
        let sex = [0.0, 1.0, 0.0, 1.0, 1.0];
        let f = fit_feature_regression(&[3.0; 5], &age, &sex).unwrap();
        assert_eq!(f.beta_age, 0.0);
        assert_eq!(f.t, 0.0);
        assert_eq!(f.p_two, 1.0);
        assert_eq!((f.p_left, f.p_right), (0.5, 0.5));
    }

    #[test]
    fn perfect_fit() {
        let age = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let sex = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let y: Vec<f64> = age.iter().map(|a| 2.0 * a).collect();
        let f = fit_feature_regression(&y, &age, &sex).unwrap();
        assert!((f.beta_age - 2.0).abs() < 1e-12);
        assert!(f.p_two < 1e-10);
        assert!(f.p_left < 1e-10);
    }

    #[test]
    fn rank_deficiency() {
        let age = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            fit_feature_regression(&[1.0, 2.0, 0.0, 1.0], &age, &[1.0; 4]),
            Err(Error::RankDeficient(_))
        ));
        let sex = [0.0, 0.0, 1.0, 1.0];
        let collinear: Vec<f64> = sex.iter().map(|s| 3.0 * s + 1.0).collect();
        assert!(fit_feature_regression(&[1.0, 2.0, 0.0, 1.0], &collinear, &sex).is_err());
        assert!(fit_feature_regression(&[1.0, 2.0, 0.0], &age[..3], &sex[..3]).is_err());
    }
}
