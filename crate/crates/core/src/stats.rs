//! Small shared numeric helpers.

/// Ceiling that tolerates floating-point dust: `0.05 * 100` must index the
/// 5th order statistic, not the 6th, even though the product rounds to
/// `5.000000000000001`.
pub(crate) fn ceil_index(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Type-1 empirical quantile: ascending sort, element at 1-based index
/// `ceil(tau * n)` (left-continuous inverse CDF).
pub fn type1_quantile(values: &[f64], tau: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ceil_index(tau * n as f64).clamp(1, n);
    sorted[k - 1]
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the (n-1) denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Sum after sorting, making the result invariant to input permutation.
/// Used where a statistic must be *exactly* order-independent.
pub(crate) fn sorted_sum(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}
