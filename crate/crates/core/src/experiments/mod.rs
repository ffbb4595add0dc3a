//! Config-driven scenarios: plant, input, noise, schedules, mismatch,
//! observer and diagnostics described in one TOML file.
//!
//! Keys carry their units (`t_end_ms`, `alpha_per_ms`, `sigma_mv`, ...).
//! A scenario resolves to a plant simulation, optionally with an observer
//! running alongside or followed by an output-error landscape study.

mod run;

pub use run::{diagnose_trajectory, run_scenario, summary_from_files, RunMode, ScenarioResult, Summary, SPIKE_REFRACTORY_MS, SPIKE_THRESHOLD_MV};

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::DiagnosticsOptions;
use crate::error::Error;
use crate::integrator::{InputSignal, Logistic, MeasurementHold, ParameterSchedule};
use crate::model::{GateKind, NetworkSpec, Parametrization};
use crate::observers::ObserverVariant;
use crate::presets;

/// A complete, serializable description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// `hh` or `hco`; ignored when `spec_file` is set.
    #[serde(default)]
    pub preset: Option<String>,
    /// Network spec in TOML, relative to the config file.
    #[serde(default)]
    pub spec_file: Option<PathBuf>,
    /// Defaults to the preset's parametrization.
    #[serde(default)]
    pub parametrization: Option<Parametrization>,
    pub t_end_ms: f64,
    pub dt_ms: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Seed of the measurement noise.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma_mv: f64,
    #[serde(default)]
    pub hold: MeasurementHold,
    pub plant: PlantConfig,
    /// One signal per neuron, or one for all.
    pub input: Vec<InputSignal>,
    #[serde(default, skip_serializing_if = "ParameterSchedule::is_empty")]
    pub schedule: ParameterSchedule,
    #[serde(default)]
    pub mismatch: Option<MismatchConfig>,
    #[serde(default)]
    pub observer: Option<ObserverConfig>,
    #[serde(default)]
    pub landscape: Option<LandscapeConfig>,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsOptions>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub v0_mv: Vec<f64>,
    pub w0: Vec<f64>,
    /// Simulated on the nominal spec (no schedule, no mismatch) before the
    /// run; the end state replaces `(v0, w0)`.
    #[serde(default)]
    pub burn_in_ms: f64,
}

/// Uniform relative perturbation of every internal-dynamics constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchConfig {
    /// Largest relative change, e.g. `0.01` for 1%.
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    /// Known internal dynamics; `eta_hat0_mv` must be empty.
    Rls,
    Augmented,
    /// One augmented observer per neuron.
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub kind: ObserverKind,
    #[serde(default)]
    pub variant: ObserverVariant,
    pub alpha_per_ms: f64,
    pub beta: f64,
    pub gamma_per_ms: f64,
    /// `P(0) = p0 I`.
    pub p0: f64,
    /// Initial estimates. For a network observer each vector holds either
    /// one member's values (shared by all members) or all members' values
    /// concatenated.
    pub v_hat0_mv: Vec<f64>,
    pub w_hat0: Vec<f64>,
    pub theta_hat0: Vec<f64>,
    #[serde(default)]
    pub eta_hat0_mv: Vec<f64>,
    #[serde(default = "yes")]
    pub record_internals: bool,
}

fn yes() -> bool {
    true
}

/// One-dimensional output-error cost sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    /// Name of the swept `theta` component, e.g. `mu_Na/c`.
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub horizon_ms: f64,
    /// Remaining components; the true values when absent.
    #[serde(default)]
    pub base: Option<Vec<f64>>,
}

impl LandscapeConfig {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.from + k as f64 * self.step).collect()
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, Error> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; a relative `spec_file` is resolved against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(f), Some(dir)) = (cfg.spec_file.as_mut(), path.parent()) {
            if f.is_relative() {
                *f = dir.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.name)));
        if !(self.dt_ms > 0.0) || !(self.t_end_ms > 0.0) || self.dt_ms > self.t_end_ms {
            return bad(format!("need 0 < dt_ms <= t_end_ms, got {} and {}", self.dt_ms, self.t_end_ms));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.noise_sigma_mv >= 0.0) {
            return bad("noise_sigma_mv must be non-negative".into());
        }
        if self.preset.is_none() && self.spec_file.is_none() {
            return bad("set either `preset` or `spec_file`".into());
        }
        if self.input.is_empty() {
            return bad("at least one input signal is required".into());
        }
        if !(self.plant.burn_in_ms >= 0.0) {
            return bad("burn_in_ms must be non-negative".into());
        }
        if let Some(m) = &self.mismatch {
            if !(m.fraction >= 0.0 && m.fraction < 1.0) {
                return bad("mismatch fraction must lie in [0, 1)".into());
            }
        }
        if let Some(l) = &self.landscape {
            if !(l.step > 0.0) || l.to < l.from || !(l.horizon_ms > 0.0) {
                return bad("landscape needs step > 0, to >= from and a positive horizon".into());
            }
        }
        Ok(())
    }

    /// Nominal network spec and parametrization.
    pub fn resolve_model(&self) -> Result<(NetworkSpec, Parametrization), Error> {
        let (spec, default_par) = match (&self.spec_file, &self.preset) {
            (Some(f), _) => (presets::load_spec(f)?, Parametrization::default()),
            (None, Some(p)) => presets::preset(p)?,
            (None, None) => return Err(Error::Config("no model given".into())),
        };
        Ok((spec, self.parametrization.clone().unwrap_or(default_par)))
    }
}

/// Time course of the calcium conductance under neuromodulation:
/// `0.11 + 0.07 / (1 + exp(-(t - T_f / 2) / 1250))`, `t` in ms.
pub fn calcium_profile(t_final_ms: f64) -> Logistic {
    Logistic {
        base: 0.11,
        amplitude: 0.07,
        midpoint_ms: 0.5 * t_final_ms,
        width_ms: 1250.0,
    }
}

pub fn calcium_schedule(t_ms: f64, t_final_ms: f64) -> f64 {
    calcium_profile(t_final_ms).value(t_ms)
}

/// Multiplies every kinetic constant of every gate by `1 + U(-fraction, fraction)`.
///
/// Membrane constants (capacitance, conductances, reversal potentials) are
/// left alone. Draws come from their own seeded stream in gate layout order.
pub fn apply_mismatch(spec: &NetworkSpec, fraction: f64, seed: u64) -> NetworkSpec {
    let mut out = spec.clone();
    if fraction == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |x: &mut f64| *x *= 1.0 + rng.random_range(-fraction..=fraction);
    for g in spec.gate_layout() {
        let n = &mut out.neurons[g.neuron];
        match g.kind {
            GateKind::Synaptic { synapse } => {
                let k = &mut n.synapses[synapse].kinetics;
                for x in [&mut k.rho, &mut k.kappa, &mut k.a, &mut k.b] {
                    draw(x);
                }
            }
            kind => {
                let k = n.intrinsic_kinetics_mut(kind).expect("intrinsic gate");
                for x in [&mut k.rho, &mut k.kappa, &mut k.tau_min, &mut k.tau_max, &mut k.zeta, &mut k.chi] {
                    draw(x);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calcium_values() {
        assert!((calcium_schedule(5000.0, 10_000.0) - 0.145).abs() < 1e-15);
        let start = 0.11 + 0.07 / (1.0 + 4f64.exp());
        assert!((calcium_schedule(0.0, 10_000.0) - start).abs() < 1e-15);
        assert!((calcium_schedule(0.0, 10_000.0) - 0.11126).abs() < 1e-5);
        assert!((calcium_schedule(10_000.0, 10_000.0) - 0.17874).abs() < 1e-5);
    }

    #[test]
    fn mismatch_bounds_and_determinism() {
        let spec = presets::hco();
        assert_eq!(apply_mismatch(&spec, 0.0, 3), spec);
        let a = apply_mismatch(&spec, 0.01, 3);
        assert_eq!(a, apply_mismatch(&spec, 0.01, 3));
        assert_ne!(a, apply_mismatch(&spec, 0.01, 4));
        for (n0, n1) in spec.neurons.iter().zip(&a.neurons) {
            assert_eq!((n0.c, n0.mu_leak, n0.nu_leak), (n1.c, n1.mu_leak, n1.nu_leak));
            for (c0, c1) in n0.currents.iter().zip(&n1.currents) {
                assert_eq!((c0.mu, c0.nu), (c1.mu, c1.nu));
                for (k0, k1) in [(c0.m_kin, c1.m_kin), (c0.h_kin, c1.h_kin)] {
                    if let (Some(k0), Some(k1)) = (k0, k1) {
                        let before = [k0.rho, k0.kappa, k0.tau_min, k0.tau_max, k0.zeta, k0.chi];
                        let after = [k1.rho, k1.kappa, k1.tau_min, k1.tau_max, k1.zeta, k1.chi];
                        for (x0, x1) in before.iter().zip(after) {
                            let r = x1 / x0 - 1.0;
                            assert!(r.abs() <= 0.01 + 1e-15, "moved by {r}");
                            assert_ne!(*x0, x1);
                        }
                    }
                }
            }
        }
        a.validate().unwrap();
    }
}
