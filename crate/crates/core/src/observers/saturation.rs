use serde::{Deserialize, Serialize};

/// Componentwise smooth saturation onto a box.
///
/// Inside `[lo, hi]` the map is the identity. Beyond the upper bound, with
/// `d = x - hi` and `L = 3 margin`, it follows `hi + (L/3)(1 - (1 - d/L)^3)`
/// up to `d = L` and stays at `hi + margin` afterwards, so the derivative
/// `(1 - d/L)^2` decays continuously from 1 to 0. The lower side mirrors it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub margin: Vec<f64>,
}

impl SaturationBox {
    /// Box with a margin equal to `margin_fraction` of each component's width.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, margin_fraction: f64) -> Self {
        assert_eq!(lo.len(), hi.len());
        let margin = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (margin_fraction * (h - l)).max(f64::MIN_POSITIVE))
            .collect();
        Self { lo, hi, margin }
    }

    /// The same interval for every one of `n` components.
    pub fn uniform(n: usize, lo: f64, hi: f64, margin_fraction: f64) -> Self {
        Self::new(vec![lo; n], vec![hi; n], margin_fraction)
    }

    /// A box that never saturates.
    pub fn unbounded(n: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
            margin: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| x >= l && x <= h)
    }

    #[inline]
    fn component(&self, i: usize, x: f64) -> (f64, f64) {
        let (lo, hi) = (self.lo[i], self.hi[i]);
        if x >= lo && x <= hi {
            return (x, 1.0);
        }
        let len = 3.0 * self.margin[i];
        let (d, edge, sign) = if x > hi { (x - hi, hi, 1.0) } else { (lo - x, lo, -1.0) };
        if d >= len {
            (edge + sign * self.margin[i], 0.0)
        } else {
            let r = 1.0 - d / len;
            (edge + sign * (len / 3.0) * (1.0 - r * r * r), r * r)
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.component(i, x[i]).0;
        }
    }

    /// Diagonal of the Jacobian.
    pub fn derivative(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.component(i, x[i]).1;
        }
    }

    pub fn apply_with_derivative(&self, x: &[f64], out: &mut [f64], dout: &mut [f64]) {
        for i in 0..x.len() {
            let (s, d) = self.component(i, x[i]);
            out[i] = s;
            dout[i] = d;
        }
    }

    pub fn saturate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply(x, &mut out);
        out
    }
}

/// Saturation boxes used by the augmented observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverSaturation {
    pub theta: SaturationBox,
    pub w: SaturationBox,
    /// Available for configurations that want it; the observer equations do
    /// not saturate `eta`.
    pub eta: Option<SaturationBox>,
}

/// Default margin: 5% of the box width.
pub const DEFAULT_MARGIN_FRACTION: f64 = 0.05;

impl ObserverSaturation {
    /// `theta` in `[0, 10 theta_hat(0)]`, `w` in `[-0.05, 1.05]`, half-activations in `[-100, 0]`.
    pub fn default_for(theta0: &[f64], n_w: usize, n_eta: usize) -> Self {
        let lo: Vec<f64> = theta0.iter().map(|t| (10.0 * t).min(0.0)).collect();
        let hi: Vec<f64> = theta0.iter().map(|t| (10.0 * t).max(0.0)).collect();
        let hi = hi
            .iter()
            .zip(&lo)
            .map(|(&h, &l)| if h > l { h } else { l + 1.0 })
            .collect();
        Self {
            theta: SaturationBox::new(lo, hi, DEFAULT_MARGIN_FRACTION),
            w: SaturationBox::uniform(n_w, -0.05, 1.05, DEFAULT_MARGIN_FRACTION),
            eta: Some(SaturationBox::uniform(n_eta, -100.0, 0.0, DEFAULT_MARGIN_FRACTION)),
        }
    }

    pub fn unbounded(n_theta: usize, n_w: usize) -> Self {
        Self {
            theta: SaturationBox::unbounded(n_theta),
            w: SaturationBox::unbounded(n_w),
            eta: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_inside() {
        let b = SaturationBox::uniform(3, 0.0, 1.0, 0.05);
        let x = [0.0, 0.37, 1.0];
        assert_eq!(b.saturate(&x), x.to_vec());
    }

    #[test]
    fn limit_is_bound_plus_margin() {
        let b = SaturationBox::uniform(2, 0.0, 2.0, 0.05);
        let s = b.saturate(&[1e9, -1e9]);
        assert_eq!(s, vec![2.1, -0.1]);
    }

    #[test]
    fn derivative_continuous_at_edges() {
        let b = SaturationBox::uniform(1, 0.0, 1.0, 0.05);
        let h = 1e-7;
        for edge in [1.0, 1.15, 0.0, -0.15] {
            let mut d_left = [0.0];
            let mut d_right = [0.0];
            b.derivative(&[edge - h], &mut d_left);
            b.derivative(&[edge + h], &mut d_right);
            assert!((d_left[0] - d_right[0]).abs() < 1e-5, "edge {edge}");
        }
    }
}
