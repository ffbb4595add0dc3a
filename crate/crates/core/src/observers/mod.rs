//! Adaptive observers.
//!
//! - [`ReducedObserver`]: copy of the internal dynamics driven by the measured voltage.
//! - [`RlsObserver`]: joint voltage/parameter observer implementing recursive
//!   least squares with forgetting.
//! - [`AugmentedObserver`]: additionally estimates kinetic constants `eta`,
//!   in equation-error or output-error form.
//! - [`NetworkObserver`]: one independent augmented observer per neuron.
//!
//! All observers implement [`crate::integrator::Estimator`] and carry their
//! state as a flat vector; the layouts are documented on each state type.

mod augmented;
mod network;
mod reduced;
mod rls;
mod saturation;

pub use augmented::{AugmentedObserver, AugmentedObserverState, ObserverVariant};
pub use network::NetworkObserver;
pub use reduced::ReducedObserver;
pub use rls::{RlsObserver, RlsObserverState};
pub use saturation::{ObserverSaturation, SaturationBox, DEFAULT_MARGIN_FRACTION};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::ObserverError;

/// Observer gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Forgetting rate (1/ms).
    pub alpha: f64,
    /// Covariance inflation.
    pub beta: f64,
    /// Injection gain and filter bandwidth (1/ms).
    pub gamma: f64,
    /// `P(0) = p0 I`.
    pub p0: f64,
}

impl Hyperparameters {
    pub fn new(alpha: f64, beta: f64, gamma: f64, p0: f64) -> Result<Self, ObserverError> {
        let h = Self {
            alpha,
            beta,
            gamma,
            p0,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), ObserverError> {
        let bad = |what: &str| Err(ObserverError::InvalidHyperparameters(what.to_string()));
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad("alpha must be positive");
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta must be non-negative");
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad("gamma must be positive");
        }
        if !(self.p0 > 0.0) || !self.p0.is_finite() {
            return bad("P(0) must be positive definite");
        }
        Ok(())
    }
}

/// Smallest eigenvalue tolerated for `P` before a conditioning error.
pub const MIN_P_EIGENVALUE: f64 = 1e-12;

/// `(P + P^T) / 2`, in place on a row-major `n x n` block.
pub fn symmetrize_in_place(p: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (p[i * n + j] + p[j * n + i]);
            p[i * n + j] = m;
            p[j * n + i] = m;
        }
    }
}

pub fn symmetrize_p(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

/// Cholesky test of `P - shift I` on a row-major block, using `work` (len `n*n`).
pub fn is_positive_definite(p: &[f64], n: usize, shift: f64, work: &mut [f64]) -> bool {
    work[..n * n].copy_from_slice(&p[..n * n]);
    for i in 0..n {
        work[i * n + i] -= shift;
    }
    for j in 0..n {
        let mut d = work[j * n + j];
        for k in 0..j {
            d -= work[j * n + k] * work[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        work[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = work[i * n + j];
            for k in 0..j {
                s -= work[i * n + k] * work[j * n + k];
            }
            work[i * n + j] = s / d;
        }
    }
    true
}

/// Smallest eigenvalue of a symmetric row-major block.
pub fn min_eigenvalue(p: &[f64], n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let m = DMatrix::from_row_slice(n, n, &p[..n * n]);
    m.symmetric_eigenvalues().min()
}

/// Symmetrizes `P` and checks its positive definiteness.
pub(crate) fn condition_p(p: &mut [f64], n: usize, t: f64, work: &mut [f64]) -> Result<(), ObserverError> {
    symmetrize_in_place(p, n);
    if p.iter().any(|x| !x.is_finite()) || !is_positive_definite(p, n, MIN_P_EIGENVALUE, work) {
        let min_eig = if p.iter().all(|x| x.is_finite()) {
            min_eigenvalue(p, n)
        } else {
            f64::NAN
        };
        return Err(ObserverError::Conditioning { t, min_eig });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_examples() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(symmetrize_p(&s), s);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(symmetrize_p(&a), DMatrix::zeros(2, 2));
    }

    #[test]
    fn pd_check() {
        let mut work = vec![0.0; 4];
        assert!(is_positive_definite(&[2.0, 1.0, 1.0, 2.0], 2, 0.0, &mut work));
        assert!(!is_positive_definite(&[1.0, 2.0, 2.0, 1.0], 2, 0.0, &mut work));
        assert!(!is_positive_definite(&[1.0, 0.0, 0.0, 0.0], 2, 1e-12, &mut work));
        assert!((min_eigenvalue(&[2.0, 1.0, 1.0, 2.0], 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(Hyperparameters::new(0.1, 1.0, 1.0, 1.0).is_ok());
        assert!(Hyperparameters::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Hyperparameters::new(0.1, -1.0, 1.0, 1.0).is_err());
        assert!(Hyperparameters::new(0.1, 1.0, 0.0, 1.0).is_err());
        assert!(Hyperparameters::new(0.1, 1.0, 1.0, 0.0).is_err());
    }
}
