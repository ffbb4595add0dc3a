//! Voltage-dependent gating kinetics.
//!
//! Intrinsic gates relax towards a sigmoid steady state with a bell-shaped
//! voltage-dependent time constant. Synaptic gates are driven by the
//! presynaptic voltage through a sigmoid with rate constants `a` and `b`.
//! Units: mV for voltages, ms for time constants.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Steady-state activation `1 / (1 + exp(-(v - rho) / kappa))`.
pub fn sigmoid(v: f64, rho: f64, kappa: f64) -> Result<f64, ModelError> {
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(ModelError::InvalidKinetics(format!(
            "sigmoid slope must be finite and non-zero, got {kappa}"
        )));
    }
    Ok(sigmoid_unchecked(v, rho, kappa))
}

#[inline]
pub(crate) fn sigmoid_unchecked(v: f64, rho: f64, kappa: f64) -> f64 {
    1.0 / (1.0 + (-(v - rho) / kappa).exp())
}

/// Bell-shaped time constant evaluated for `kin`.
pub fn bell_tau(v: f64, kin: &GatingKinetics) -> f64 {
    kin.time_constant(v)
}

/// Rate of change of an intrinsic gate with value `x`.
pub fn gating_rate(x: f64, v: f64, kin: &GatingKinetics) -> f64 {
    (kin.activation(v) - x) / kin.time_constant(v)
}

/// Rate of change of a synaptic gate driven by presynaptic voltage `v_pre`.
pub fn synaptic_gating_rate(s: f64, v_pre: f64, kin: &SynapticKinetics) -> f64 {
    let tau = kin.time_constant(v_pre);
    (-s + kin.a * tau * kin.activation(v_pre)) / tau
}

/// Parameters of one intrinsic gating variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatingKinetics {
    /// Half-activation voltage (mV).
    pub rho: f64,
    /// Slope (mV); positive for activation, negative for inactivation.
    pub kappa: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Centre of the time-constant bell (mV).
    pub zeta: f64,
    /// Width of the time-constant bell (mV).
    pub chi: f64,
}

impl GatingKinetics {
    pub fn new(
        rho: f64,
        kappa: f64,
        tau_min: f64,
        tau_max: f64,
        zeta: f64,
        chi: f64,
    ) -> Result<Self, ModelError> {
        let kin = Self {
            rho,
            kappa,
            tau_min,
            tau_max,
            zeta,
            chi,
        };
        kin.validate()?;
        Ok(kin)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            self.rho,
            self.kappa,
            self.tau_min,
            self.tau_max,
            self.zeta,
            self.chi,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidKinetics("non-finite constant".into()));
        }
        if self.kappa == 0.0 {
            return Err(ModelError::InvalidKinetics("kappa must be non-zero".into()));
        }
        if self.chi == 0.0 {
            return Err(ModelError::InvalidKinetics("chi must be non-zero".into()));
        }
        if !(self.tau_min > 0.0) || self.tau_max < self.tau_min {
            return Err(ModelError::InvalidKinetics(format!(
                "need 0 < tau_min <= tau_max, got ({}, {})",
                self.tau_min, self.tau_max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn activation(&self, v: f64) -> f64 {
        sigmoid_unchecked(v, self.rho, self.kappa)
    }

    #[inline]
    pub fn time_constant(&self, v: f64) -> f64 {
        let d = (v - self.zeta) / self.chi;
        self.tau_min + (self.tau_max - self.tau_min) * (-d * d).exp()
    }

    pub fn get(&self, p: KineticParam) -> f64 {
        match p {
            KineticParam::Rho => self.rho,
            KineticParam::Kappa => self.kappa,
            KineticParam::Zeta => self.zeta,
            KineticParam::Chi => self.chi,
        }
    }

    pub fn set(&mut self, p: KineticParam, value: f64) {
        match p {
            KineticParam::Rho => self.rho = value,
            KineticParam::Kappa => self.kappa = value,
            KineticParam::Zeta => self.zeta = value,
            KineticParam::Chi => self.chi = value,
        }
    }

    /// Partial derivative of `(sigma(v) - x) / tau(v)` with respect to `p`.
    pub(crate) fn rate_sensitivity(&self, x: f64, v: f64, p: KineticParam) -> f64 {
        let sigma = self.activation(v);
        let tau = self.time_constant(v);
        match p {
            KineticParam::Rho => -sigma * (1.0 - sigma) / self.kappa / tau,
            KineticParam::Kappa => {
                -sigma * (1.0 - sigma) * (v - self.rho) / (self.kappa * self.kappa) / tau
            }
            KineticParam::Zeta | KineticParam::Chi => {
                let dv = v - self.zeta;
                let bell = (-(dv * dv) / (self.chi * self.chi)).exp();
                let span = self.tau_max - self.tau_min;
                let dtau = if p == KineticParam::Zeta {
                    span * bell * 2.0 * dv / (self.chi * self.chi)
                } else {
                    span * bell * 2.0 * dv * dv / (self.chi * self.chi * self.chi)
                };
                -(sigma - x) * dtau / (tau * tau)
            }
        }
    }
}

/// Kinetic constants that may be designated as uncertain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KineticParam {
    Rho,
    Kappa,
    Zeta,
    Chi,
}

impl KineticParam {
    pub fn as_str(self) -> &'static str {
        match self {
            KineticParam::Rho => "rho",
            KineticParam::Kappa => "kappa",
            KineticParam::Zeta => "zeta",
            KineticParam::Chi => "chi",
        }
    }
}

/// Parameters of a synaptic gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapticKinetics {
    pub rho: f64,
    pub kappa: f64,
    /// Rise rate constant (1/ms).
    pub a: f64,
    /// Decay rate constant (1/ms).
    pub b: f64,
}

impl SynapticKinetics {
    pub fn new(rho: f64, kappa: f64, a: f64, b: f64) -> Result<Self, ModelError> {
        let kin = Self { rho, kappa, a, b };
        kin.validate()?;
        Ok(kin)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if [self.rho, self.kappa, self.a, self.b]
            .iter()
            .any(|x| !x.is_finite())
        {
            return Err(ModelError::InvalidKinetics("non-finite constant".into()));
        }
        if !(self.kappa > 0.0) || !(self.a > 0.0) || !(self.b > 0.0) {
            return Err(ModelError::InvalidKinetics(
                "synaptic kappa, a and b must be positive".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn activation(&self, v_pre: f64) -> f64 {
        sigmoid_unchecked(v_pre, self.rho, self.kappa)
    }

    /// `1 / (a sigma(v) + b)`, bounded in `[1/(a+b), 1/b]`.
    #[inline]
    pub fn time_constant(&self, v_pre: f64) -> f64 {
        1.0 / (self.a * self.activation(v_pre) + self.b)
    }

    pub fn get(&self, p: KineticParam) -> Option<f64> {
        match p {
            KineticParam::Rho => Some(self.rho),
            KineticParam::Kappa => Some(self.kappa),
            _ => None,
        }
    }

    pub fn set(&mut self, p: KineticParam, value: f64) {
        match p {
            KineticParam::Rho => self.rho = value,
            KineticParam::Kappa => self.kappa = value,
            _ => {}
        }
    }

    /// Partial derivative of `a sigma (1 - s) - b s` with respect to `p`.
    pub(crate) fn rate_sensitivity(&self, s: f64, v_pre: f64, p: KineticParam) -> f64 {
        let sigma = self.activation(v_pre);
        let dsigma = match p {
            KineticParam::Rho => -sigma * (1.0 - sigma) / self.kappa,
            KineticParam::Kappa => {
                -sigma * (1.0 - sigma) * (v_pre - self.rho) / (self.kappa * self.kappa)
            }
            _ => 0.0,
        };
        self.a * dsigma * (1.0 - s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hh_m_na() -> GatingKinetics {
        GatingKinetics::new(-40.0, 9.0, 0.04, 0.50, -38.0, 30.0).unwrap()
    }

    #[test]
    fn sigmoid_midpoint_and_limits() {
        assert_eq!(sigmoid(-40.0, -40.0, 9.0).unwrap(), 0.5);
        assert!((sigmoid(1e6, -40.0, 9.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(sigmoid(-1e6, -40.0, 9.0).unwrap().abs() < 1e-15);
        let s = sigmoid(-31.0, -40.0, 9.0).unwrap();
        assert!((s - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_rejects_zero_slope() {
        assert!(matches!(
            sigmoid(0.0, 0.0, 0.0),
            Err(ModelError::InvalidKinetics(_))
        ));
    }

    #[test]
    fn sigmoid_monotone_with_sign_of_kappa() {
        let up: Vec<f64> = (-10..10)
            .map(|k| sigmoid(k as f64 * 10.0, -40.0, 9.0).unwrap())
            .collect();
        assert!(up.windows(2).all(|w| w[1] > w[0] || w[1] == 1.0));
        let down: Vec<f64> = (-10..10)
            .map(|k| sigmoid(k as f64 * 10.0, -62.0, -7.0).unwrap())
            .collect();
        assert!(down.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bell_values() {
        let kin = hh_m_na();
        assert_eq!(bell_tau(-38.0, &kin), 0.50);
        assert!((bell_tau(1e4, &kin) - 0.04).abs() < 1e-15);
        assert!((bell_tau(-1e4, &kin) - 0.04).abs() < 1e-15);
        let expected = 0.04 + 0.46 * (-1.0f64).exp();
        assert!((bell_tau(-8.0, &kin) - expected).abs() < 1e-15);
        assert!((expected - 0.20923).abs() < 1e-5);
    }

    #[test]
    fn gating_rate_values() {
        let kin = hh_m_na();
        let v = -55.0;
        assert_eq!(gating_rate(kin.activation(v), v, &kin), 0.0);
        assert!((gating_rate(0.0, kin.rho, &kin) - 0.5 / kin.time_constant(kin.rho)).abs() < 1e-15);
        let r = gating_rate(1.0, -40.0, &kin);
        assert!((r - (-0.5 / bell_tau(-40.0, &kin))).abs() < 1e-15);
        assert!((bell_tau(-40.0, &kin) - 0.497_960_092_042_222_7).abs() < 1e-15);
        assert!((r + 1.004_096_528_999_766).abs() < 1e-12);
    }

    #[test]
    fn synaptic_rate_values() {
        let kin = SynapticKinetics::new(-45.0, 2.0, 2.0, 0.1).unwrap();
        // far below threshold the gate decays at rate b
        let r = synaptic_gating_rate(0.3, -1e4, &kin);
        assert!((r + 0.3 * 0.1).abs() < 1e-12);
        let v = -44.0;
        let s_eq = kin.a * kin.time_constant(v) * kin.activation(v);
        assert!(synaptic_gating_rate(s_eq, v, &kin).abs() < 1e-15);
        assert!((synaptic_gating_rate(0.0, -45.0, &kin) - 1.0).abs() < 1e-14);
        assert!((kin.time_constant(-45.0) - 1.0 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn synaptic_time_constant_bounds() {
        let kin = SynapticKinetics::new(-45.0, 2.0, 2.0, 0.1).unwrap();
        for k in 0..=400 {
            let v = -200.0 + k as f64;
            let tau = kin.time_constant(v);
            assert!(tau >= 1.0 / (kin.a + kin.b) - 1e-15 && tau <= 1.0 / kin.b + 1e-12);
        }
    }

    #[test]
    fn invalid_kinetics_rejected() {
        assert!(GatingKinetics::new(0.0, 0.0, 1.0, 2.0, 0.0, 1.0).is_err());
        assert!(GatingKinetics::new(0.0, 1.0, 0.0, 2.0, 0.0, 1.0).is_err());
        assert!(GatingKinetics::new(0.0, 1.0, 3.0, 2.0, 0.0, 1.0).is_err());
        assert!(SynapticKinetics::new(0.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn sensitivity_at_midpoint() {
        let kin = hh_m_na();
        let d = kin.rate_sensitivity(0.2, kin.rho, KineticParam::Rho);
        let expected = -(1.0 / (4.0 * kin.kappa)) / kin.time_constant(kin.rho);
        assert!((d - expected).abs() < 1e-15);
    }
}
