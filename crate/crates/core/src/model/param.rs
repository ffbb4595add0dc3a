use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::kinetics::KineticParam;
use crate::model::spec::{GateKind, NetworkSpec};

/// Which membrane constants are collected into the linear parameter vector.
///
/// Per neuron, with `g_k` the gating product of term `k`:
/// - `MaxConductances`: `theta = (mu_k)`, columns `-g_k (v - nu_k) / c`, drift `u / c`.
/// - `InverseCapacitance`: `theta = (1, mu_k) / c`, columns `(u, -g_k (v - nu_k))`, no drift.
/// - `InverseCapacitanceWithReversal`: `theta = (1, mu_k, mu_k nu_k) / c`,
///   columns `(u, -g_k v, g_k)`, no drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaLayout {
    MaxConductances,
    #[default]
    InverseCapacitance,
    InverseCapacitanceWithReversal,
}

/// One kinetic constant promoted to the uncertain parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaTarget {
    #[serde(default)]
    pub neuron: usize,
    /// Gate label such as `m_Na`, `h_Na` or `s_G`.
    pub gate: String,
    pub param: KineticParam,
}

impl EtaTarget {
    pub fn new(neuron: usize, gate: &str, param: KineticParam) -> Self {
        Self {
            neuron,
            gate: gate.to_string(),
            param,
        }
    }
}

/// Split of the model constants into `theta`, `eta` and fixed constants.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Parametrization {
    #[serde(default)]
    pub layout: ThetaLayout,
    #[serde(default)]
    pub eta: Vec<EtaTarget>,
}

/// Role of a model constant under a parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantRole {
    Theta,
    Eta,
    Fixed,
}

impl Parametrization {
    pub fn new(layout: ThetaLayout) -> Self {
        Self {
            layout,
            eta: Vec::new(),
        }
    }

    pub fn with_eta(mut self, eta: Vec<EtaTarget>) -> Self {
        self.eta = eta;
        self
    }

    /// Half-activations of every intrinsic gate of every neuron.
    pub fn all_half_activations(spec: &NetworkSpec) -> Vec<EtaTarget> {
        spec.neurons
            .iter()
            .enumerate()
            .flat_map(|(i, n)| {
                n.gate_kinds()
                    .into_iter()
                    .filter(|k| !matches!(k, GateKind::Synaptic { .. }))
                    .map(move |k| EtaTarget::new(i, &n.gate_label(k), KineticParam::Rho))
            })
            .collect()
    }

    /// Resolves every eta target to `(network gate index, parameter)`.
    pub fn resolve_eta(&self, spec: &NetworkSpec) -> Result<Vec<(usize, KineticParam)>, ModelError> {
        let offsets = spec.gate_offsets();
        let mut out = Vec::with_capacity(self.eta.len());
        for target in &self.eta {
            let neuron = spec.neurons.get(target.neuron).ok_or_else(|| {
                ModelError::InvalidSpec(format!("eta target references missing neuron {}", target.neuron))
            })?;
            let kinds = neuron.gate_kinds();
            let local = kinds
                .iter()
                .position(|&k| neuron.gate_label(k) == target.gate)
                .ok_or_else(|| {
                    ModelError::InvalidSpec(format!(
                        "neuron {} has no gate `{}`",
                        target.neuron, target.gate
                    ))
                })?;
            if matches!(kinds[local], GateKind::Synaptic { .. })
                && matches!(target.param, KineticParam::Zeta | KineticParam::Chi)
            {
                return Err(ModelError::InvalidSpec(format!(
                    "synaptic gate `{}` has no {} constant",
                    target.gate,
                    target.param.as_str()
                )));
            }
            let idx = offsets[target.neuron] + local;
            if out.contains(&(idx, target.param)) {
                return Err(ModelError::InvalidSpec(format!(
                    "eta lists {}.{} twice",
                    target.gate,
                    target.param.as_str()
                )));
            }
            out.push((idx, target.param));
        }
        Ok(out)
    }

    /// Every named constant of `spec` with its role. Names are
    /// `neuron.object.constant`, e.g. `0.Na.mu` or `1.m_Ca.rho`.
    pub fn constant_roles(&self, spec: &NetworkSpec) -> Result<Vec<(String, ConstantRole)>, ModelError> {
        let eta = self.resolve_eta(spec)?;
        let layout = spec.gate_layout();
        let mut out = Vec::new();
        let mut gate_idx = 0;
        for (i, n) in spec.neurons.iter().enumerate() {
            let theta_c = self.layout != ThetaLayout::MaxConductances;
            let theta_nu = self.layout == ThetaLayout::InverseCapacitanceWithReversal;
            out.push((format!("{i}.c"), role(theta_c)));
            for t in n.terms() {
                let name = n.term_name(t);
                out.push((format!("{i}.{name}.mu"), ConstantRole::Theta));
                out.push((format!("{i}.{name}.nu"), role(theta_nu)));
            }
            for kind in n.gate_kinds() {
                debug_assert_eq!(layout[gate_idx].kind, kind);
                let label = n.gate_label(kind);
                let params: &[&str] = match kind {
                    GateKind::Synaptic { .. } => &["rho", "kappa", "a", "b"],
                    _ => &["rho", "kappa", "tau_min", "tau_max", "zeta", "chi"],
                };
                for p in params {
                    let is_eta = eta
                        .iter()
                        .any(|&(g, kp)| g == gate_idx && kp.as_str() == *p);
                    let r = if is_eta { ConstantRole::Eta } else { ConstantRole::Fixed };
                    out.push((format!("{i}.{label}.{p}"), r));
                }
                gate_idx += 1;
            }
        }
        Ok(out)
    }
}

fn role(theta: bool) -> ConstantRole {
    if theta {
        ConstantRole::Theta
    } else {
        ConstantRole::Fixed
    }
}
