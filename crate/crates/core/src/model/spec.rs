use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::kinetics::{GatingKinetics, SynapticKinetics};

/// An ohmic ionic current `mu m^p h^q (v - nu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonicCurrentSpec {
    pub name: String,
    /// Maximal conductance (mS/cm^2).
    pub mu: f64,
    /// Reversal potential (mV).
    pub nu: f64,
    #[serde(default)]
    pub p_exp: u32,
    #[serde(default)]
    pub q_exp: u32,
    #[serde(default)]
    pub m_kin: Option<GatingKinetics>,
    #[serde(default)]
    pub h_kin: Option<GatingKinetics>,
}

/// A synaptic current onto the owning neuron from `presynaptic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseSpec {
    pub name: String,
    pub presynaptic: usize,
    pub mu: f64,
    pub nu: f64,
    pub kinetics: SynapticKinetics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSpec {
    /// Membrane capacitance (uF/cm^2).
    pub c: f64,
    pub mu_leak: f64,
    pub nu_leak: f64,
    #[serde(default)]
    pub currents: Vec<IonicCurrentSpec>,
    #[serde(default)]
    pub synapses: Vec<SynapseSpec>,
}

/// A network of neurons; a single neuron is a network of size one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub neurons: Vec<NeuronSpec>,
}

/// Which gating variable a component of `w` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Activation { current: usize },
    Inactivation { current: usize },
    Synaptic { synapse: usize },
}

/// A gate of a specific neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GateRef {
    pub neuron: usize,
    pub kind: GateKind,
}

/// A conductance term of the membrane equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Ionic(usize),
    Synaptic(usize),
    Leak,
}

impl NeuronSpec {
    /// Gates in layout order: `(m, h)` per current in declaration order
    /// (absent when the exponent is zero), then one gate per synapse.
    pub fn gate_kinds(&self) -> Vec<GateKind> {
        let mut out = Vec::new();
        for (j, cur) in self.currents.iter().enumerate() {
            if cur.p_exp > 0 {
                out.push(GateKind::Activation { current: j });
            }
            if cur.q_exp > 0 {
                out.push(GateKind::Inactivation { current: j });
            }
        }
        for j in 0..self.synapses.len() {
            out.push(GateKind::Synaptic { synapse: j });
        }
        out
    }

    pub fn n_gates(&self) -> usize {
        self.currents
            .iter()
            .map(|c| (c.p_exp > 0) as usize + (c.q_exp > 0) as usize)
            .sum::<usize>()
            + self.synapses.len()
    }

    /// Conductance terms: ionic currents, then synapses, then leak.
    pub fn terms(&self) -> Vec<Term> {
        (0..self.currents.len())
            .map(Term::Ionic)
            .chain((0..self.synapses.len()).map(Term::Synaptic))
            .chain(std::iter::once(Term::Leak))
            .collect()
    }

    pub fn term_name(&self, t: Term) -> &str {
        match t {
            Term::Ionic(j) => &self.currents[j].name,
            Term::Synaptic(j) => &self.synapses[j].name,
            Term::Leak => "L",
        }
    }

    pub fn term_constants(&self, t: Term) -> (f64, f64) {
        match t {
            Term::Ionic(j) => (self.currents[j].mu, self.currents[j].nu),
            Term::Synaptic(j) => (self.synapses[j].mu, self.synapses[j].nu),
            Term::Leak => (self.mu_leak, self.nu_leak),
        }
    }

    pub fn find_term(&self, name: &str) -> Option<Term> {
        self.terms().into_iter().find(|&t| self.term_name(t) == name)
    }

    pub fn find_current(&self, name: &str) -> Option<usize> {
        self.currents.iter().position(|c| c.name == name)
    }

    /// Human-readable gate label such as `m_Na` or `s_G`.
    pub fn gate_label(&self, kind: GateKind) -> String {
        match kind {
            GateKind::Activation { current } => format!("m_{}", self.currents[current].name),
            GateKind::Inactivation { current } => format!("h_{}", self.currents[current].name),
            GateKind::Synaptic { synapse } => format!("s_{}", self.synapses[synapse].name),
        }
    }

    pub fn intrinsic_kinetics(&self, kind: GateKind) -> Option<&GatingKinetics> {
        match kind {
            GateKind::Activation { current } => self.currents[current].m_kin.as_ref(),
            GateKind::Inactivation { current } => self.currents[current].h_kin.as_ref(),
            GateKind::Synaptic { .. } => None,
        }
    }

    pub fn intrinsic_kinetics_mut(&mut self, kind: GateKind) -> Option<&mut GatingKinetics> {
        match kind {
            GateKind::Activation { current } => self.currents[current].m_kin.as_mut(),
            GateKind::Inactivation { current } => self.currents[current].h_kin.as_mut(),
            GateKind::Synaptic { .. } => None,
        }
    }
}

impl NetworkSpec {
    pub fn single(neuron: NeuronSpec) -> Self {
        Self {
            neurons: vec![neuron],
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn n_gates(&self) -> usize {
        self.neurons.iter().map(NeuronSpec::n_gates).sum()
    }

    /// Offset of each neuron's gates inside the network `w` vector.
    pub fn gate_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.neurons.len());
        let mut acc = 0;
        for n in &self.neurons {
            off.push(acc);
            acc += n.n_gates();
        }
        off
    }

    /// Network gate layout: the concatenation of per-neuron layouts.
    pub fn gate_layout(&self) -> Vec<GateRef> {
        self.neurons
            .iter()
            .enumerate()
            .flat_map(|(i, n)| {
                n.gate_kinds()
                    .into_iter()
                    .map(move |kind| GateRef { neuron: i, kind })
            })
            .collect()
    }

    pub fn gate_label(&self, g: GateRef) -> String {
        let base = self.neurons[g.neuron].gate_label(g.kind);
        if self.neurons.len() > 1 {
            format!("{base}[{}]", g.neuron)
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.neurons.is_empty() {
            return Err(ModelError::InvalidSpec("network has no neurons".into()));
        }
        for (i, n) in self.neurons.iter().enumerate() {
            if !(n.c > 0.0) {
                return Err(ModelError::InvalidSpec(format!(
                    "neuron {i}: capacitance must be positive"
                )));
            }
            if !(n.mu_leak > 0.0) {
                return Err(ModelError::InvalidSpec(format!(
                    "neuron {i}: leak conductance must be positive"
                )));
            }
            for cur in &n.currents {
                if !(cur.mu > 0.0) {
                    return Err(ModelError::InvalidSpec(format!(
                        "neuron {i}: current {} must have positive conductance",
                        cur.name
                    )));
                }
                if (cur.p_exp > 0) != cur.m_kin.is_some() || (cur.q_exp > 0) != cur.h_kin.is_some()
                {
                    return Err(ModelError::InvalidSpec(format!(
                        "neuron {i}: current {} has exponents inconsistent with its kinetics",
                        cur.name
                    )));
                }
                for kin in cur.m_kin.iter().chain(cur.h_kin.iter()) {
                    kin.validate()?;
                }
            }
            for syn in &n.synapses {
                if syn.presynaptic >= self.neurons.len() {
                    return Err(ModelError::InvalidSpec(format!(
                        "neuron {i}: synapse {} references missing neuron {}",
                        syn.name, syn.presynaptic
                    )));
                }
                if !(syn.mu > 0.0) {
                    return Err(ModelError::InvalidSpec(format!(
                        "neuron {i}: synapse {} must have positive conductance",
                        syn.name
                    )));
                }
                syn.kinetics.validate()?;
            }
        }
        Ok(())
    }
}

/// Voltages and gating states of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl SystemState {
    pub fn to_vec(&self) -> Vec<f64> {
        self.v.iter().chain(self.w.iter()).copied().collect()
    }

    pub fn from_slice(x: &[f64], n_v: usize) -> Self {
        Self {
            v: x[..n_v].to_vec(),
            w: x[n_v..].to_vec(),
        }
    }
}
