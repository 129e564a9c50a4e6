//! Significance tests used to compare sweep points: a pooled two-proportion
//! z-test and Welch's unequal-variance t-test, both two-sided.
//!
//! Normal tail: `erf` by its Maclaurin series for |x| < 3 and `erfc` by the
//! Laplace continued fraction beyond, accurate to about 1e-13 absolute.
//! Student-t tail: the regularized incomplete beta function evaluated with
//! the modified Lentz continued fraction, with `ln Γ` from the Lanczos
//! approximation (g = 7, 9 coefficients).

use serde::{Deserialize, Serialize};

const SERIES_LIMIT: f64 = 3.0;
const TINY: f64 = 1e-300;
const EPS: f64 = 1e-15;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_LIMIT {
        return 1.0 - erf_series(x);
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = 0.0;
    for n in (1..=80).rev() {
        tail = (n as f64 / 2.0) / (x + tail);
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + tail)
}

pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x2 / n;
        let add = term / (2.0 * n + 1.0);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fastest for x < (a+1)/(a+b+2); use symmetry otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
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

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `df`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
}

/// Pooled two-proportion z-test. Returns `p = 1` when the pooled proportion
/// is 0 or 1 (no variance).
pub fn z_test_proportions(successes1: usize, n1: usize, successes2: usize, n2: usize) -> ZTest {
    assert!(n1 >= 1 && n2 >= 1, "sample sizes must be positive");
    let (s1, n1, s2, n2) = (successes1 as f64, n1 as f64, successes2 as f64, n2 as f64);
    let pooled = (s1 + s2) / (n1 + n2);
    let var = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2);
    if !(var > 0.0) {
        return ZTest {
            z: 0.0,
            p_value: 1.0,
        };
    }
    let z = (s1 / n1 - s2 / n2) / var.sqrt();
    ZTest {
        z,
        p_value: erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Welch's t-test with Welch–Satterthwaite degrees of freedom. `None` when a
/// sample has fewer than two values or both samples have zero variance.
pub fn welch_t_test(sample1: &[f64], sample2: &[f64]) -> Option<WelchTest> {
    if sample1.len() < 2 || sample2.len() < 2 {
        return None;
    }
    let (m1, v1) = mean_var(sample1);
    let (m2, v2) = mean_var(sample2);
    let (n1, n2) = (sample1.len() as f64, sample2.len() as f64);
    let (a, b) = (v1 / n1, v2 / n2);
    let se2 = a + b;
    if !(se2 > 0.0) {
        return None;
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
    Some(WelchTest {
        t,
        df,
        p_value: student_t_two_sided(t, df).min(1.0),
    })
}

/// Mean and unbiased (n - 1) variance.
fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_points() {
        // Values from standard tables.
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-13);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-13);
        assert!((erfc(2.0) - 0.004_677_734_981_047_266).abs() < 1e-13);
        assert!((erfc(3.5) - 7.430_983_723_414_128e-7).abs() < 1e-18);
        assert!((erfc(-1.0) - 1.842_700_792_949_715).abs() < 1e-13);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
    }

    #[test]
    fn z_test_examples() {
        let same = z_test_proportions(30, 60, 30, 60);
        assert_eq!(same.p_value, 1.0);
        let r = z_test_proportions(80, 100, 60, 100);
        // pooled 0.7, se = sqrt(0.21 * 0.02)
        let z = 0.2 / (0.21f64 * 0.02).sqrt();
        assert!((r.z - z).abs() < 1e-12);
        assert!((r.z - 3.086).abs() < 1e-3);
        assert!((r.p_value - 0.0020).abs() < 1e-4);
        assert_eq!(z_test_proportions(50, 100, 5, 10).p_value, 1.0);
        assert_eq!(z_test_proportions(0, 10, 0, 20).p_value, 1.0);
        assert_eq!(z_test_proportions(10, 10, 20, 20).p_value, 1.0);
    }

    #[test]
    fn welch_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(welch_t_test(&a, &a).unwrap().p_value, 1.0);
        let r = welch_t_test(&a, &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p_value - 0.3466).abs() < 1e-3);
        assert!(welch_t_test(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).is_none());
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn t_tail_with_one_degree_is_cauchy() {
        // P(|T| > 1) for df = 1 is 1/2.
        assert!((student_t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-12);
    }
}
