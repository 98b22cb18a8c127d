//! Small numeric helpers shared by the ensembling and scoring paths.
//!
//! Sums use pairwise recursion and means shift by the first element before
//! summing deviations. The shift keeps the mean of k identical values exactly
//! equal to that value (every deviation is literally `0.0`), which the
//! ensembler relies on to reproduce inputs bit for bit in degenerate cases.

/// Pairwise summation. Error grows O(log n) instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Arithmetic mean. Empty input yields `0.0`; callers guard non-emptiness.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let shift = values[0];
    let deviations: Vec<f64> = values.iter().map(|v| v - shift).collect();
    shift + pairwise_sum(&deviations) / values.len() as f64
}

/// Population standard deviation (divisor n, not n - 1). Zero for a single
/// value and exactly zero whenever all values are identical.
pub fn population_std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let squared: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&squared) / values.len() as f64).sqrt()
}

/// Median of the values. Even counts take the midpoint of the two central
/// elements. Empty input yields `0.0`; callers guard non-emptiness.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let lo = sorted[n / 2 - 1];
        let hi = sorted[n / 2];
        lo + (hi - lo) / 2.0
    }
}
