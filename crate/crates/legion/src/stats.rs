//! Small statistical helpers for the sensitivity harness and the
//! paired benchmark comparisons: a paired two-tailed Student's t-test
//! and a paired one-sided sign test.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

/// Paired two-tailed t-test. Returns (mean difference, p-value).
/// Degenerate inputs (fewer than two pairs, or zero variance) give
/// p = 1.0 when the mean difference is zero and p = 0.0 otherwise,
/// matching the limit behaviour of the statistic.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "paired test needs equal-length samples");
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 1.0);
    }
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        return (mean, if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid t distribution");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    (mean, p.clamp(0.0, 1.0))
}

/// Paired one-sided sign test for "a < b": p-value of seeing at least
/// `wins` successes (a_i < b_i) in `wins + losses` fair coin flips.
/// Ties are dropped, the standard treatment.
pub fn sign_test_less(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired test needs equal-length samples");
    let mut wins = 0u64;
    let mut n = 0u64;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            wins += 1;
            n += 1;
        } else if x > y {
            n += 1;
        }
    }
    if n == 0 {
        return 1.0;
    }
    let dist = Binomial::new(0.5, n).expect("valid binomial");
    // P[X >= wins] under the null.
    if wins == 0 {
        1.0
    } else {
        (1.0 - dist.cdf(wins - 1)).clamp(0.0, 1.0)
    }
}
