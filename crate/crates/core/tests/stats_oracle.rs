use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use xcf::eval::stats::{erf, erfc, ln_gamma, regularized_incomplete_beta, student_t_two_sided};
use xcf::eval::{welch_t_test, z_test_proportions};

/// Two-proportion z-test from the pooled-variance formula.
fn z_reference(s1: usize, n1: usize, s2: usize, n2: usize) -> f64 {
    let (p1, p2) = (s1 as f64 / n1 as f64, s2 as f64 / n2 as f64);
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return 1.0;
    }
    let z = (p1 - p2) / se;
    2.0 * (1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z.abs()))
}

/// Welch's t-test from the unequal-variance formula and the
/// Welch-Satterthwaite degrees of freedom.
fn welch_reference(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (
            m,
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0),
            n,
        )
    };
    let (m1, v1, n1) = stats(a);
    let (m2, v2, n2) = stats(b);
    let se2 = v1 / n1 + v2 / n2;
    let t = (m1 - m2) / se2.sqrt();
    let df = se2.powi(2) / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0));
    let p = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()));
    (t, df, p)
}

#[test]
fn z_test_matches_reference_on_random_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n1 = rng.random_range(5..400);
        let n2 = rng.random_range(5..400);
        let s1 = rng.random_range(0..=n1);
        let s2 = rng.random_range(0..=n2);
        let got = z_test_proportions(s1, n1, s2, n2).p_value;
        let want = z_reference(s1, n1, s2, n2);
        assert!(
            (got - want).abs() < 1e-6,
            "{s1}/{n1} vs {s2}/{n2}: {got} vs {want}"
        );
    }
}

#[test]
fn welch_matches_reference_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let shift: f64 = rng.random_range(-1.0..1.0);
        let spread: f64 = rng.random_range(0.2..3.0);
        let a: Vec<f64> = (0..rng.random_range(2..60))
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let b: Vec<f64> = (0..rng.random_range(2..60))
            .map(|_| shift + spread * rng.random_range(0.0..1.0))
            .collect();
        let got = welch_t_test(&a, &b).unwrap();
        let (t, df, p) = welch_reference(&a, &b);
        assert!((got.t - t).abs() < 1e-9 * t.abs().max(1.0));
        assert!((got.df - df).abs() < 1e-9 * df);
        assert!((got.p_value - p).abs() < 1e-6, "{} vs {p}", got.p_value);
    }
}

#[test]
fn special_functions_match_statrs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x: f64 = rng.random_range(-6.0..6.0);
        // statrs' erf is itself only good to about 1e-10.
        assert!(
            (erf(x) - statrs::function::erf::erf(x)).abs() < 1e-9,
            "erf({x})"
        );
        let e = statrs::function::erf::erfc(x);
        assert!((erfc(x) - e).abs() <= 1e-9 * e, "erfc({x})");
        let g: f64 = rng.random_range(0.05..50.0);
        assert!(
            (ln_gamma(g) - statrs::function::gamma::ln_gamma(g)).abs() < 1e-10,
            "ln_gamma({g})"
        );
        let (a, b, u): (f64, f64, f64) = (
            rng.random_range(0.1..40.0),
            rng.random_range(0.1..40.0),
            rng.random(),
        );
        let want = statrs::function::beta::beta_reg(a, b, u);
        assert!(
            (regularized_incomplete_beta(a, b, u) - want).abs() < 1e-10,
            "I_{u}({a}, {b})"
        );
        let df: f64 = rng.random_range(1.0..200.0);
        let t: f64 = rng.random_range(-8.0..8.0);
        let want = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()));
        assert!(
            (student_t_two_sided(t, df) - want).abs() < 1e-9,
            "t {t} df {df}"
        );
    }
}
