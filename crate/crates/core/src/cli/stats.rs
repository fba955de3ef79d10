use statrs::distribution::{Binomial, DiscreteCDF};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean, sample standard deviation over sqrt(n),
/// accumulated in one pass.
pub fn sem(xs: &[f64]) -> f64 {
    let (mut n, mut m, mut m2) = (0f64, 0f64, 0f64);
    for &x in xs {
        n += 1.0;
        let d = x - m;
        m += d / n;
        m2 += d * (x - m);
    }
    if n < 2.0 {
        return 0.0;
    }
    (m2 / (n - 1.0)).sqrt() / n.sqrt()
}

/// Textbook two-pass version of [`sem`].
pub fn sem_two_pass(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1.0)).sqrt() / n.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SignTest {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// Two-sided exact binomial p-value over the non-tied pairs.
    pub p_two_sided: f64,
    /// One-sided p-value for "a is better than b".
    pub p_greater: f64,
}

/// Paired sign test of `a` against `b`.
pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    assert_eq!(a.len(), b.len(), "sign test needs paired samples");
    let mut wins = 0u64;
    let mut losses = 0u64;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            wins += 1;
        } else if x < y {
            losses += 1;
        }
    }
    let ties = a.len() as u64 - wins - losses;
    let n = wins + losses;
    if n == 0 {
        return SignTest { wins, losses, ties, p_two_sided: 1.0, p_greater: 1.0 };
    }
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    let k = wins.min(losses);
    let p_two_sided = (2.0 * bin.cdf(k)).min(1.0);
    // P(X >= wins) = 1 - P(X <= wins - 1)
    let p_greater = if wins == 0 { 1.0 } else { bin.sf(wins - 1) };
    SignTest { wins, losses, ties, p_two_sided, p_greater }
}
