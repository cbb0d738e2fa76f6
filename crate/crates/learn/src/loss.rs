//! Binary cross-entropy on probabilities clamped away from 0 and 1.

use crate::{LearnError, Real};

pub const BCE_EPS: f64 = 1e-7;

/// Mean of `−[y·ln p + (1−y)·ln(1−p)]` with `p` clamped to `[ε, 1−ε]`, accumulated in f64.
pub fn bce_loss(p: &[Real], y: &[Real]) -> Result<f64, LearnError> {
    if p.len() != y.len() || p.is_empty() {
        return Err(LearnError::ShapeMismatch(format!("bce: {} predictions, {} labels", p.len(), y.len())));
    }
    let sum: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = (p as f64).clamp(BCE_EPS, 1.0 - BCE_EPS);
            let y = y as f64;
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / p.len() as f64)
}

/// Per-sample derivative of the loss with respect to the logit, `p − y`.
///
/// This is the unclamped logistic gradient; it differs from the clamped loss only where
/// `p` is within `ε` of 0 or 1, and it keeps confidently wrong predictions learning.
pub fn bce_grad_logit(p: Real, y: Real) -> Real {
    p - y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction() {
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() <= 1e-6);
    }

    #[test]
    fn half_is_ln2() {
        let l = bce_loss(&[0.5; 8], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Vec<Real> = (0..64).map(|_| rng.random_range(0.01..0.99)).collect();
        let y: Vec<Real> = (0..64).map(|_| rng.random_bool(0.5) as u8 as Real).collect();
        let mut direct = 0.0f64;
        for i in 0..64 {
            let (pi, yi) = (p[i] as f64, y[i] as f64);
            direct += if yi == 1.0 { -pi.ln() } else { -(1.0 - pi).ln() };
        }
        assert!((bce_loss(&p, &y).unwrap() - direct / 64.0).abs() < 1e-7);
    }

    #[test]
    fn clamped_extremes_are_finite() {
        let l = bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((l - -(BCE_EPS.ln())).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(bce_loss(&[0.5], &[1.0, 0.0]), Err(LearnError::ShapeMismatch(_))));
    }

    #[test]
    fn no_signal_at_target() {
        assert_eq!(bce_grad_logit(1.0, 1.0), 0.0);
        assert_eq!(bce_grad_logit(0.0, 0.0), 0.0);
    }
}
