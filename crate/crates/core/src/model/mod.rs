//! Conductance-based neuron and network models.
//!
//! [`NetworkSpec`] holds the biophysical description. [`Model`] compiles a
//! spec and a [`Parametrization`] into the regressor form used by the
//! observers. The free functions in this module evaluate the membrane and
//! gating equations straight from the spec; they drive the plant simulation
//! and serve as the reference for the compiled form.

mod compiled;
mod param;
mod spec;

pub use compiled::Model;
pub use param::{ConstantRole, EtaTarget, Parametrization, ThetaLayout};
pub use spec::{
    GateKind, GateRef, IonicCurrentSpec, NetworkSpec, NeuronSpec, SynapseSpec, SystemState, Term,
};

use crate::kinetics::{gating_rate, synaptic_gating_rate};

/// `dv/dt` of every neuron from Kirchhoff's law:
/// `c dv/dt = -sum_ion I_ion - sum_syn I_syn - I_L + u`.
pub fn membrane_rhs(spec: &NetworkSpec, v: &[f64], w: &[f64], u: &[f64], out: &mut [f64]) {
    let mut offset = 0;
    for (i, n) in spec.neurons.iter().enumerate() {
        let vi = v[i];
        let mut current = n.mu_leak * (vi - n.nu_leak);
        let mut k = offset;
        for cur in &n.currents {
            let mut g = cur.mu;
            if cur.p_exp > 0 {
                g *= w[k].powi(cur.p_exp as i32);
                k += 1;
            }
            if cur.q_exp > 0 {
                g *= w[k].powi(cur.q_exp as i32);
                k += 1;
            }
            current += g * (vi - cur.nu);
        }
        for syn in &n.synapses {
            current += syn.mu * w[k] * (vi - syn.nu);
            k += 1;
        }
        out[i] = (u[i] - current) / n.c;
        offset = k;
    }
}

/// `dw/dt` of every gate, evaluated gate by gate.
pub fn gating_rhs(spec: &NetworkSpec, v: &[f64], w: &[f64], out: &mut [f64]) {
    let mut k = 0;
    for (i, n) in spec.neurons.iter().enumerate() {
        for cur in &n.currents {
            if let Some(kin) = cur.m_kin.as_ref().filter(|_| cur.p_exp > 0) {
                out[k] = gating_rate(w[k], v[i], kin);
                k += 1;
            }
            if let Some(kin) = cur.h_kin.as_ref().filter(|_| cur.q_exp > 0) {
                out[k] = gating_rate(w[k], v[i], kin);
                k += 1;
            }
        }
        for syn in &n.synapses {
            out[k] = synaptic_gating_rate(w[k], v[syn.presynaptic], &syn.kinetics);
            k += 1;
        }
    }
}

/// Voltage bounds of the positively invariant set for inputs `|u| <= u_bar`.
///
/// Reversal potentials of synapses are included with the ionic ones. For a
/// network the bounds are the envelope over neurons.
pub fn invariant_bounds(spec: &NetworkSpec, u_bar: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in &spec.neurons {
        for nu in n
            .currents
            .iter()
            .map(|c| c.nu)
            .chain(n.synapses.iter().map(|s| s.nu))
        {
            lo = lo.min(nu);
            hi = hi.max(nu);
        }
        hi = hi.max(u_bar / n.mu_leak + n.nu_leak);
        lo = lo.min(-u_bar / n.mu_leak + n.nu_leak);
    }
    (lo, hi)
}
