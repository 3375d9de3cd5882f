//! Special functions used by the calibration code: chi-square survival via the
//! regularized upper incomplete gamma function, log-scale normal tails and
//! Student-t tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::beta::beta_reg;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// `ln Q(a, x)`, the log of the regularized upper incomplete gamma function.
///
/// Requires `a > 0` and `x >= 0`. Stays finite far into the tail where `Q`
/// itself underflows.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let ln_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let p = (ln_prefactor + series_p(a, x).ln()).exp();
        (-p).ln_1p()
    } else {
        ln_prefactor + continued_fraction_q(a, x).ln()
    }
}

/// Series for `P(a, x)` without the prefactor.
fn series_p(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)` without
/// the prefactor.
fn continued_fraction_q(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `ln P(Poisson(y) < j)`, i.e. the log survival of a chi-square with `2j`
/// degrees of freedom at `x = 2y`.
///
/// Sums the Poisson terms outward from the largest one so no term overflows.
pub fn ln_chi2_sf_even(x: f64, j: usize) -> f64 {
    debug_assert!(j >= 1 && x >= 0.0);
    let y = 0.5 * x;
    if y == 0.0 {
        return 0.0;
    }
    if j == 1 {
        return -y;
    }
    let top = j - 1;
    let mode = (y.floor() as usize).min(top);
    let ln_mode = mode as f64 * y.ln() - ln_gamma(mode as f64 + 1.0);
    let mut sum = 1.0;
    let mut t = 1.0;
    for k in (1..=mode).rev() {
        t *= k as f64 / y;
        sum += t;
        if t < sum * EPS {
            break;
        }
    }
    t = 1.0;
    for k in mode + 1..=top {
        t *= y / k as f64;
        sum += t;
        if t < sum * EPS {
            break;
        }
    }
    -y + ln_mode + sum.ln()
}

/// Log survival function of the chi-square distribution, `x >= 0`.
pub fn ln_chi2_sf(x: f64, df: u32) -> f64 {
    debug_assert!(df > 0);
    if x <= 0.0 {
        return 0.0;
    }
    if df % 2 == 0 {
        ln_chi2_sf_even(x, (df / 2) as usize)
    } else {
        ln_gamma_q(0.5 * df as f64, 0.5 * x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Phi(z)`, accurate for large `z`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `ln(1 - Phi(z))` without underflow for arbitrarily large `z`.
pub fn ln_normal_sf(z: f64) -> f64 {
    if z < 5.0 {
        return normal_sf(z).ln();
    }
    // Laplace continued fraction: SF(z) = phi(z) / (z + 1/(z + 2/(z + 3/(z + ...))))
    let mut tail = z;
    for k in (1..=60).rev() {
        tail = z + k as f64 / tail;
    }
    -0.5 * z * z - 0.5 * (2.0 * PI).ln() - tail.ln()
}

/// Standard normal quantile `Phi^{-1}(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Halley step on the accurate CDF
    let (target, value) = if x < 0.0 { (p, normal_cdf(x)) } else { (1.0 - p, normal_sf(x)) };
    let sign = if x < 0.0 { 1.0 } else { -1.0 };
    let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    if density == 0.0 {
        return x;
    }
    let step = sign * (value - target) / density;
    x - step / (1.0 + 0.5 * x * step)
}

/// `Phi^{-1}(1 - p)` computed without forming `1 - p`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    -normal_quantile(p)
}

/// Upper tail `P(T >= t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = df / (df + t * t);
    let half_tail = 0.5 * beta_reg(0.5 * df, 0.5, x);
    if t >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

/// Standard Cauchy survival function `1/2 - arctan(x)/pi`.
pub fn cauchy_sf(x: f64) -> f64 {
    if x > 0.0 {
        (1.0 / x).atan() / PI
    } else {
        0.5 - x.atan() / PI
    }
}

/// The Cauchy transform `tan(pi (1/2 - p))`, i.e. `cot(pi p)`.
pub fn cauchy_transform(p: f64) -> f64 {
    if p <= 0.5 {
        1.0 / (PI * p).tan()
    } else {
        -1.0 / (PI * (1.0 - p)).tan()
    }
}
