//! Log-domain accumulation helpers shared across the crate.

/// `log(exp(a) + exp(b))` without overflow, via the max-shifted form.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum_i w_i exp(l_i))` for nonnegative weights, max-shifted so that huge
/// log-wealth values never overflow. Returns negative infinity for an empty or
/// all-zero-weight sum.
pub(crate) fn weighted_log_sum_exp(logs: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(logs.len(), weights.len());
    let mut m = f64::NEG_INFINITY;
    for (&l, &w) in logs.iter().zip(weights) {
        if w > 0.0 && l > m {
            m = l;
        }
    }
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for (&l, &w) in logs.iter().zip(weights) {
        if w > 0.0 {
            sum += w * (l - m).exp();
        }
    }
    m + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct_evaluation() {
        let got = log_add_exp(0.3_f64.ln(), 0.7_f64.ln());
        assert!((got - 0.0).abs() < 1e-14, "got {got}");
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.5), 2.5);
        assert_eq!(log_add_exp(2.5, f64::NEG_INFINITY), 2.5);
    }

    #[test]
    fn log_add_exp_survives_large_magnitudes() {
        let got = log_add_exp(1000.0, 1000.0);
        assert!((got - (1000.0 + 2.0_f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn weighted_sum_handles_extreme_spread() {
        let logs = [800.0, -800.0, 799.0];
        let weights = [0.5, 0.25, 0.25];
        let got = weighted_log_sum_exp(&logs, &weights);
        let expect = 800.0 + (0.5 + 0.25 * (-1.0_f64).exp()).ln();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn weighted_sum_empty_is_log_zero() {
        assert_eq!(weighted_log_sum_exp(&[], &[]), f64::NEG_INFINITY);
    }
}
