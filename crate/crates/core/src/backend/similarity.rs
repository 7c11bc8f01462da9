use crate::error::{Error, Result};

use super::Embedding;

/// Cosine similarity of two raw vectors, clamped to `[-1, 1]`.
pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    cosine_slices(a.vector(), b.vector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(cosine_slices(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_slices(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let h = 1.0 / 2f64.sqrt();
        let c = cosine_slices(&[1.0, 0.0], &[h, h]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn zero_vector_is_undefined() {
        assert!(matches!(
            cosine_slices(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::UndefinedSimilarity)
        ));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            cosine_slices(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_scale_free(
            a in prop::collection::vec(-10.0f64..10.0, 8),
            b in prop::collection::vec(-10.0f64..10.0, 8),
            s in 0.01f64..100.0,
        ) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
            let ab = cosine_slices(&a, &b).unwrap();
            let ba = cosine_slices(&b, &a).unwrap();
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
            prop_assert!((-1.0..=1.0).contains(&ab));
            let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
            prop_assert!((cosine_slices(&scaled, &b).unwrap() - ab).abs() < 1e-12);
        }
    }
}
