//! Sign-invariant error measures and the trial success predicate.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, SgnError};
use crate::vecops::norm;

/// Default success threshold on the relative error.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-3;

/// `min(‖x̂ − x‖, ‖x̂ + x‖)`.
pub fn dist(xhat: &[f64], x: &[f64]) -> Result<f64> {
    check_len("dist operands", x.len(), xhat.len())?;
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in xhat.iter().zip(x) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    Ok(minus.min(plus).sqrt())
}

/// `dist(x̂, x) / ‖x‖`.
pub fn rel_error(xhat: &[f64], x: &[f64]) -> Result<f64> {
    let nx = norm(x);
    if nx == 0.0 {
        return Err(SgnError::Domain(
            "relative error is undefined for a zero ground truth".into(),
        ));
    }
    Ok(dist(xhat, x)? / nx)
}

/// True iff the nonzero patterns of `xhat` and `x` coincide.
pub fn support_match(xhat: &[f64], x: &[f64]) -> bool {
    support_match_tol(xhat, x, 0.0)
}

/// Like [`support_match`], treating `|v| ≤ tol` as zero.
pub fn support_match_tol(xhat: &[f64], x: &[f64], tol: f64) -> bool {
    xhat.len() == x.len()
        && xhat
            .iter()
            .zip(x)
            .all(|(a, b)| (a.abs() > tol) == (b.abs() > tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub rel_error: f64,
    pub dist: f64,
    pub iterations: usize,
    pub support_exact: bool,
    pub success: bool,
    /// Seconds. Not part of any deterministic output.
    pub wall_time: f64,
}

impl TrialOutcome {
    pub fn evaluate(
        xhat: &[f64],
        x: &[f64],
        iterations: usize,
        success_threshold: f64,
        wall_time: f64,
    ) -> Result<Self> {
        let d = dist(xhat, x)?;
        let rel = rel_error(xhat, x)?;
        Ok(Self {
            rel_error: rel,
            dist: d,
            iterations,
            support_exact: support_match(xhat, x),
            success: rel < success_threshold,
            wall_time,
        })
    }

    /// A trial whose solver failed before producing a usable estimate.
    pub fn failed(iterations: usize, wall_time: f64) -> Self {
        Self {
            rel_error: f64::INFINITY,
            dist: f64::INFINITY,
            iterations,
            support_exact: false,
            success: false,
            wall_time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dist_examples() {
        assert_eq!(dist(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(dist(&[1.0, 1.0], &[1.0, -1.0]).unwrap(), 2.0);
        assert_eq!(dist(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(dist(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rel_error_examples() {
        let x = [0.5, -2.0, 0.0, 1.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let dbl: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(rel_error(&x, &x).unwrap(), 0.0);
        assert_eq!(rel_error(&neg, &x).unwrap(), 0.0);
        assert!((rel_error(&dbl, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(rel_error(&x, &[0.0; 4]), Err(SgnError::Domain(_))));
    }

    #[test]
    fn support_examples() {
        let x = [0.0, 1.0, -2.0];
        assert!(support_match(&[0.0, 3.0, 1.0], &x));
        assert!(!support_match(&[0.0; 3], &x));
        assert!(support_match(&[0.0, -1.0, 2.0], &x));
        assert!(support_match_tol(&[1e-12, -1.0, 2.0], &x, 1e-9));
        assert!(!support_match(&[1e-12, -1.0, 2.0], &x));
    }

    #[test]
    fn success_predicate() {
        let x = [1.0, 0.0];
        let t = TrialOutcome::evaluate(&[1.0005, 0.0], &x, 3, 1e-3, 0.0).unwrap();
        assert!(t.success && t.support_exact);
        let t = TrialOutcome::evaluate(&[1.002, 0.0], &x, 3, 1e-3, 0.0).unwrap();
        assert!(!t.success);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 3)
    }

    proptest! {
        #[test]
        fn dist_symmetries(a in vec3(), b in vec3()) {
            let d = dist(&a, &b).unwrap();
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            prop_assert!((d - dist(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((d - dist(&neg, &b).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn dist_triangle(a in vec3(), b in vec3(), c in vec3()) {
            let ab: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            prop_assert!(dist(&a, &c).unwrap() <= ab + dist(&b, &c).unwrap() + 1e-12);
        }
    }
}
