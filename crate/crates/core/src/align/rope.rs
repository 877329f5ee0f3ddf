//! Rotary-embedding frequency schedule.

use crate::align::losses::AlignError;

/// Frequencies `base^(-2j / head_dim)` for `j` in `0..head_dim/2`. Raising
/// the base (for example 10k to 100k) shrinks every rotation angle past
/// j = 0, stretching the positional wavelengths for longer contexts.
pub fn rope_frequencies(head_dim: usize, base: f64) -> Result<Vec<f64>, AlignError> {
    if !head_dim.is_multiple_of(2) {
        return Err(AlignError::OddHeadDim(head_dim));
    }
    if base.is_nan() || base <= 0.0 {
        return Err(AlignError::Invalid("rope base must be positive".to_string()));
    }
    Ok((0..head_dim / 2)
        .map(|j| base.powf(-2.0 * j as f64 / head_dim as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_frequency_is_one_for_any_base() {
        for base in [10.0, 10_000.0, 100_000.0] {
            assert_eq!(rope_frequencies(8, base).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn head_dim_four_base_ten_thousand_closed_form() {
        let freqs = rope_frequencies(4, 10_000.0).unwrap();
        assert_eq!(freqs.len(), 2);
        assert!((freqs[0] - 1.0).abs() < 1e-15);
        assert!((freqs[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn larger_base_never_rotates_faster() {
        let low = rope_frequencies(128, 10_000.0).unwrap();
        let high = rope_frequencies(128, 100_000.0).unwrap();
        assert_eq!(high[0], low[0]);
        for j in 1..low.len() {
            assert!(high[j] < low[j], "j={j}: {} !< {}", high[j], low[j]);
        }
    }

    #[test]
    fn odd_head_dim_is_rejected() {
        assert_eq!(rope_frequencies(7, 10_000.0).unwrap_err(), AlignError::OddHeadDim(7));
    }
}
