//! Fixed-order floating point reductions.
//!
//! All integrals over chart points and all sums over path segments go through
//! these functions, so a result never depends on how many workers produced
//! the summands.

const LEAF: usize = 8;

/// Pairwise (tree) summation with a fixed split rule: halves at `len / 2`,
/// sequential below eight terms.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sum whose value is bitwise identical for `values` and its reversal.
///
/// Terms `k` and `len - 1 - k` are added first (commutative, hence exact
/// under reversal), then the folded half is summed pairwise.
pub fn mirror_sum(values: &[f64]) -> f64 {
    let len = values.len();
    let folded: Vec<f64> = (0..len.div_ceil(2))
        .map(|k| {
            let j = len - 1 - k;
            if j == k {
                values[k]
            } else {
                values[k] + values[j]
            }
        })
        .collect();
    pairwise_sum(&folded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_small_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn mirror_sum_is_reversal_exact() {
        let v: Vec<f64> = (0..37)
            .map(|k| (k as f64 * 0.731).sin() * 1e-3 + 1.0 / (k as f64 + 3.0))
            .collect();
        let mut r = v.clone();
        r.reverse();
        assert_eq!(mirror_sum(&v).to_bits(), mirror_sum(&r).to_bits());
        assert!((mirror_sum(&v) - pairwise_sum(&v)).abs() < 1e-13);
    }

    #[test]
    fn pairwise_beats_naive_on_ill_conditioned_input() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-16, 1 << 16));
        let naive: f64 = v.iter().sum();
        let exact = 1.0 + (1u64 << 16) as f64 * 1e-16;
        assert!((pairwise_sum(&v) - exact).abs() < (naive - exact).abs());
    }
}
