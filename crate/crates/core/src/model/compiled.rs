use nalgebra::DMatrix;

use crate::error::ModelError;
use crate::kinetics::{GatingKinetics, KineticParam, SynapticKinetics};
use crate::model::param::{Parametrization, ThetaLayout};
use crate::model::spec::{GateKind, NetworkSpec, Term};

#[derive(Debug, Clone, Copy)]
enum GateDyn {
    Intrinsic(GatingKinetics),
    Synaptic(SynapticKinetics),
}

#[derive(Debug, Clone)]
struct Gate {
    /// Index into the driver-voltage vector.
    driver: usize,
    dynamics: GateDyn,
    eta_start: usize,
    eta_end: usize,
}

#[derive(Debug, Clone, Copy)]
struct TermEval {
    row: usize,
    nu: f64,
    inv_c: f64,
    m: Option<(usize, i32)>,
    h: Option<(usize, i32)>,
    col: usize,
    col_rev: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
enum ColumnKind {
    Input,
    Conductance { mu: f64 },
    ConductanceReversal { mu: f64, nu: f64 },
}

#[derive(Debug, Clone)]
struct Column {
    row: usize,
    inv_c: f64,
    kind: ColumnKind,
    name: String,
}

/// A network (or a subset of its neurons) compiled into the regressor form
///
/// `dv/dt = Phi(v, w, u) theta + a(v, w, u)`, `dw/dt = A(v, eta) w + b(v, eta)`.
///
/// Every column of `Phi` has exactly one non-zero row (the neuron owning the
/// parameter), so `Phi` is evaluated in compact form: entry `j` of the compact
/// vector is `Phi[row(j), j]`.
///
/// Internal dynamics are driven by a vector of *driver* voltages indexed by
/// network neuron. For a model of the full network the drivers are the
/// outputs themselves; for a single-neuron model extracted from a network
/// they also carry presynaptic voltages.
#[derive(Debug, Clone)]
pub struct Model {
    layout: ThetaLayout,
    outputs: Vec<usize>,
    n_drivers: usize,
    row_inv_c: Vec<f64>,
    gates: Vec<Gate>,
    gate_labels: Vec<String>,
    /// `(eta index, parameter)` grouped by gate.
    eta_slots: Vec<(usize, KineticParam)>,
    eta_names: Vec<String>,
    eta_true: Vec<f64>,
    terms: Vec<TermEval>,
    columns: Vec<Column>,
}

impl Model {
    pub fn new(spec: &NetworkSpec, par: &Parametrization) -> Result<Self, ModelError> {
        let all: Vec<usize> = (0..spec.n_neurons()).collect();
        Self::for_neurons(spec, par, &all)
    }

    /// Model of the neurons in `neurons` only, with the rest of the network
    /// entering through the driver voltages of synaptic gates.
    pub fn for_neurons(
        spec: &NetworkSpec,
        par: &Parametrization,
        neurons: &[usize],
    ) -> Result<Self, ModelError> {
        spec.validate()?;
        if neurons.is_empty() || neurons.iter().any(|&i| i >= spec.n_neurons()) {
            return Err(ModelError::InvalidSpec("invalid neuron subset".into()));
        }
        let eta_resolved = par.resolve_eta(spec)?;
        let layout_all = spec.gate_layout();
        let multi = spec.n_neurons() > 1;
        let suffix = |i: usize| if multi { format!("[{i}]") } else { String::new() };

        let mut gates = Vec::new();
        let mut gate_labels = Vec::new();
        let mut eta_slots = Vec::new();
        let mut net_to_local = vec![usize::MAX; layout_all.len()];

        // eta indices are local: order of `par.eta` restricted to the subset
        let kept: Vec<(usize, KineticParam)> = eta_resolved
            .iter()
            .copied()
            .filter(|&(g, _)| neurons.contains(&layout_all[g].neuron))
            .collect();
        let mut eta_names = Vec::with_capacity(kept.len());
        let mut eta_true = Vec::with_capacity(kept.len());
        for &(g, p) in &kept {
            let gref = layout_all[g];
            let n = &spec.neurons[gref.neuron];
            eta_names.push(format!(
                "{}_{}{}",
                p.as_str(),
                n.gate_label(gref.kind),
                suffix(gref.neuron)
            ));
            let value = match gref.kind {
                GateKind::Synaptic { synapse } => n.synapses[synapse]
                    .kinetics
                    .get(p)
                    .expect("validated synaptic parameter"),
                kind => n.intrinsic_kinetics(kind).expect("intrinsic kinetics").get(p),
            };
            eta_true.push(value);
        }

        for &i in neurons {
            let n = &spec.neurons[i];
            for (net_idx, gref) in layout_all.iter().enumerate() {
                if gref.neuron != i {
                    continue;
                }
                let (driver, dynamics) = match gref.kind {
                    GateKind::Synaptic { synapse } => {
                        let syn = &n.synapses[synapse];
                        (syn.presynaptic, GateDyn::Synaptic(syn.kinetics))
                    }
                    kind => (i, GateDyn::Intrinsic(*n.intrinsic_kinetics(kind).unwrap())),
                };
                let eta_start = eta_slots.len();
                for (e, &(g, p)) in kept.iter().enumerate() {
                    if g == net_idx {
                        eta_slots.push((e, p));
                    }
                }
                net_to_local[net_idx] = gates.len();
                gates.push(Gate {
                    driver,
                    dynamics,
                    eta_start,
                    eta_end: eta_slots.len(),
                });
                gate_labels.push(spec.gate_label(*gref));
            }
        }

        let offsets = spec.gate_offsets();
        let mut terms = Vec::new();
        let mut columns = Vec::new();
        let mut row_inv_c = Vec::new();
        for (row, &i) in neurons.iter().enumerate() {
            let n = &spec.neurons[i];
            let inv_c = 1.0 / n.c;
            row_inv_c.push(inv_c);
            let sfx = suffix(i);
            let kinds = n.gate_kinds();
            let local_gate = |kind: GateKind| {
                let pos = kinds.iter().position(|&k| k == kind).unwrap();
                net_to_local[offsets[i] + pos]
            };
            if layout_uses_input(par.layout) {
                columns.push(Column {
                    row,
                    inv_c,
                    kind: ColumnKind::Input,
                    name: format!("1/c{sfx}"),
                });
            }
            let term_list = n.terms();
            let mut pending_rev = Vec::new();
            for t in term_list {
                let (mu, nu) = n.term_constants(t);
                let name = n.term_name(t);
                let (m, h) = match t {
                    Term::Ionic(j) => {
                        let cur = &n.currents[j];
                        let m = (cur.p_exp > 0)
                            .then(|| (local_gate(GateKind::Activation { current: j }), cur.p_exp as i32));
                        let h = (cur.q_exp > 0)
                            .then(|| (local_gate(GateKind::Inactivation { current: j }), cur.q_exp as i32));
                        (m, h)
                    }
                    Term::Synaptic(j) => (Some((local_gate(GateKind::Synaptic { synapse: j }), 1)), None),
                    Term::Leak => (None, None),
                };
                let col = columns.len();
                columns.push(Column {
                    row,
                    inv_c,
                    kind: ColumnKind::Conductance { mu },
                    name: match par.layout {
                        ThetaLayout::MaxConductances => format!("mu_{name}{sfx}"),
                        _ => format!("mu_{name}/c{sfx}"),
                    },
                });
                terms.push(TermEval {
                    row,
                    nu,
                    inv_c,
                    m,
                    h,
                    col,
                    col_rev: None,
                });
                pending_rev.push((terms.len() - 1, mu, nu, name.to_string()));
            }
            if par.layout == ThetaLayout::InverseCapacitanceWithReversal {
                for (ti, mu, nu, name) in pending_rev {
                    terms[ti].col_rev = Some(columns.len());
                    columns.push(Column {
                        row,
                        inv_c,
                        kind: ColumnKind::ConductanceReversal { mu, nu },
                        name: format!("mu_{name}*nu_{name}/c{sfx}"),
                    });
                }
            }
        }

        Ok(Self {
            layout: par.layout,
            outputs: neurons.to_vec(),
            n_drivers: spec.n_neurons(),
            row_inv_c,
            gates,
            gate_labels,
            eta_slots,
            eta_names,
            eta_true,
            terms,
            columns,
        })
    }

    pub fn layout(&self) -> ThetaLayout {
        self.layout
    }

    pub fn n_v(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_w(&self) -> usize {
        self.gates.len()
    }

    pub fn n_theta(&self) -> usize {
        self.columns.len()
    }

    pub fn n_eta(&self) -> usize {
        self.eta_names.len()
    }

    pub fn n_drivers(&self) -> usize {
        self.n_drivers
    }

    /// Network neuron index of each output.
    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    /// Output row that owns each `theta` component.
    pub fn theta_rows(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.row).collect()
    }

    pub fn theta_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn eta_names(&self) -> &[String] {
        &self.eta_names
    }

    pub fn gate_labels(&self) -> &[String] {
        &self.gate_labels
    }

    /// Driver index of each gate (postsynaptic neuron for intrinsic gates,
    /// presynaptic neuron for synaptic gates).
    pub fn gate_drivers(&self) -> Vec<usize> {
        self.gates.iter().map(|g| g.driver).collect()
    }

    /// Whether each gate is synaptic.
    pub fn gate_is_synaptic(&self) -> Vec<bool> {
        self.gates
            .iter()
            .map(|g| matches!(g.dynamics, GateDyn::Synaptic(_)))
            .collect()
    }

    /// Upper bound of the time constant of each gate: `tau_max` for intrinsic
    /// gates, `1/b` for synaptic ones.
    pub fn gate_tau_upper(&self) -> Vec<f64> {
        self.gates
            .iter()
            .map(|g| match g.dynamics {
                GateDyn::Intrinsic(k) => k.tau_max,
                GateDyn::Synaptic(k) => 1.0 / k.b,
            })
            .collect()
    }

    /// `theta` evaluated on the constants the model was compiled from.
    pub fn theta_true(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match (self.layout, c.kind) {
                (_, ColumnKind::Input) => c.inv_c,
                (ThetaLayout::MaxConductances, ColumnKind::Conductance { mu }) => mu,
                (_, ColumnKind::Conductance { mu }) => mu * c.inv_c,
                (_, ColumnKind::ConductanceReversal { mu, nu }) => mu * nu * c.inv_c,
            })
            .collect()
    }

    pub fn eta_true(&self) -> Vec<f64> {
        self.eta_true.clone()
    }

    pub fn check_dims(&self, v: &[f64], w: &[f64], u: &[f64]) -> Result<(), ModelError> {
        check("v", self.n_v(), v.len())?;
        check("w", self.n_w(), w.len())?;
        check("u", self.n_v(), u.len())
    }

    /// Compact regressor: `out[j] = Phi[row(j), j]`.
    pub fn phi_compact(&self, v: &[f64], w: &[f64], u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_theta());
        for (j, c) in self.columns.iter().enumerate() {
            if let ColumnKind::Input = c.kind {
                out[j] = u[c.row];
            }
        }
        for t in &self.terms {
            let g = gating_product(t, w);
            let v = v[t.row];
            match self.layout {
                ThetaLayout::MaxConductances => out[t.col] = -g * (v - t.nu) * t.inv_c,
                ThetaLayout::InverseCapacitance => out[t.col] = -g * (v - t.nu),
                ThetaLayout::InverseCapacitanceWithReversal => {
                    out[t.col] = -g * v;
                    out[t.col_rev.unwrap()] = g;
                }
            }
        }
    }

    /// Dense `n_v x n_theta` regressor.
    pub fn phi(&self, v: &[f64], w: &[f64], u: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        self.check_dims(v, w, u)?;
        let mut compact = vec![0.0; self.n_theta()];
        self.phi_compact(v, w, u, &mut compact);
        let mut m = DMatrix::zeros(self.n_v(), self.n_theta());
        for (j, c) in self.columns.iter().enumerate() {
            m[(c.row, j)] = compact[j];
        }
        Ok(m)
    }

    /// Terms of the membrane equation not multiplied by `theta`.
    pub fn drift(&self, _v: &[f64], _w: &[f64], u: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = match self.layout {
                ThetaLayout::MaxConductances => u[r] * self.row_inv_c[r],
                _ => 0.0,
            };
        }
    }

    /// `Phi(v, w, u) theta + a(v, w, u)`.
    pub fn output_rhs(&self, v: &[f64], w: &[f64], u: &[f64], theta: &[f64], out: &mut [f64]) {
        self.drift(v, w, u, out);
        for (j, c) in self.columns.iter().enumerate() {
            if let ColumnKind::Input = c.kind {
                out[c.row] += theta[j] * u[c.row];
            }
        }
        for t in &self.terms {
            let g = gating_product(t, w);
            out[t.row] += g * self.term_coefficient(t, v[t.row], theta);
        }
    }

    /// Factor `K` such that the contribution of term `t` is `g(w) K(v, theta)`.
    #[inline]
    fn term_coefficient(&self, t: &TermEval, v: f64, theta: &[f64]) -> f64 {
        match self.layout {
            ThetaLayout::MaxConductances => -theta[t.col] * (v - t.nu) * t.inv_c,
            ThetaLayout::InverseCapacitance => -theta[t.col] * (v - t.nu),
            ThetaLayout::InverseCapacitanceWithReversal => {
                -theta[t.col] * v + theta[t.col_rev.unwrap()]
            }
        }
    }

    #[inline]
    fn term_coefficient_dv(&self, t: &TermEval, theta: &[f64]) -> f64 {
        match self.layout {
            ThetaLayout::MaxConductances => -theta[t.col] * t.inv_c,
            _ => -theta[t.col],
        }
    }

    /// `d/dw [Phi theta + a]`, written into the `n_v x n_w` matrix `out`.
    pub fn jacobian_output_w_into(
        &self,
        v: &[f64],
        w: &[f64],
        _u: &[f64],
        theta: &[f64],
        out: &mut DMatrix<f64>,
    ) {
        out.fill(0.0);
        for t in &self.terms {
            let k = self.term_coefficient(t, v[t.row], theta);
            match (t.m, t.h) {
                (Some((mi, p)), Some((hi, q))) => {
                    let (m, h) = (w[mi], w[hi]);
                    out[(t.row, mi)] += p as f64 * m.powi(p - 1) * h.powi(q) * k;
                    out[(t.row, hi)] += q as f64 * m.powi(p) * h.powi(q - 1) * k;
                }
                (Some((gi, p)), None) | (None, Some((gi, p))) => {
                    out[(t.row, gi)] += p as f64 * w[gi].powi(p - 1) * k;
                }
                (None, None) => {}
            }
        }
    }

    pub fn jacobian_output_w(
        &self,
        v: &[f64],
        w: &[f64],
        u: &[f64],
        theta: &[f64],
    ) -> Result<DMatrix<f64>, ModelError> {
        self.check_dims(v, w, u)?;
        check("theta", self.n_theta(), theta.len())?;
        let mut out = DMatrix::zeros(self.n_v(), self.n_w());
        self.jacobian_output_w_into(v, w, u, theta, &mut out);
        Ok(out)
    }

    /// Diagonal of `d/dv [Phi theta + a]`; the Jacobian is diagonal because
    /// row `i` depends on `v_i` only.
    pub fn jacobian_output_v_diag(
        &self,
        _v: &[f64],
        w: &[f64],
        _u: &[f64],
        theta: &[f64],
        out: &mut [f64],
    ) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            out[t.row] += gating_product(t, w) * self.term_coefficient_dv(t, theta);
        }
    }

    pub fn jacobian_output_v(
        &self,
        v: &[f64],
        w: &[f64],
        u: &[f64],
        theta: &[f64],
    ) -> Result<DMatrix<f64>, ModelError> {
        self.check_dims(v, w, u)?;
        check("theta", self.n_theta(), theta.len())?;
        let mut diag = vec![0.0; self.n_v()];
        self.jacobian_output_v_diag(v, w, u, theta, &mut diag);
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    #[inline]
    fn gate_dynamics(&self, g: &Gate, eta: &[f64]) -> GateDyn {
        let mut d = g.dynamics;
        for &(e, p) in &self.eta_slots[g.eta_start..g.eta_end] {
            match &mut d {
                GateDyn::Intrinsic(k) => k.set(p, eta[e]),
                GateDyn::Synaptic(k) => k.set(p, eta[e]),
            }
        }
        d
    }

    /// Diagonal of `A(v, eta)` and the vector `b(v, eta)`.
    pub fn internal(&self, drivers: &[f64], eta: &[f64], a_diag: &mut [f64], b: &mut [f64]) {
        debug_assert_eq!(drivers.len(), self.n_drivers);
        for (i, g) in self.gates.iter().enumerate() {
            let vd = drivers[g.driver];
            match self.gate_dynamics(g, eta) {
                GateDyn::Intrinsic(k) => {
                    let rate = 1.0 / k.time_constant(vd);
                    a_diag[i] = -rate;
                    b[i] = k.activation(vd) * rate;
                }
                GateDyn::Synaptic(k) => {
                    let drive = k.a * k.activation(vd);
                    a_diag[i] = -(drive + k.b);
                    b[i] = drive;
                }
            }
        }
    }

    /// `A(v, eta) w + b(v, eta)`.
    pub fn internal_rhs(&self, drivers: &[f64], eta: &[f64], w: &[f64], out: &mut [f64]) {
        for (i, g) in self.gates.iter().enumerate() {
            let vd = drivers[g.driver];
            out[i] = match self.gate_dynamics(g, eta) {
                GateDyn::Intrinsic(k) => (k.activation(vd) - w[i]) / k.time_constant(vd),
                GateDyn::Synaptic(k) => {
                    let drive = k.a * k.activation(vd);
                    drive * (1.0 - w[i]) - k.b * w[i]
                }
            };
        }
    }

    /// Checked dense form of [`Model::internal`].
    pub fn internal_dynamics(
        &self,
        drivers: &[f64],
        eta: &[f64],
    ) -> Result<(DMatrix<f64>, Vec<f64>), ModelError> {
        check("drivers", self.n_drivers, drivers.len())?;
        check("eta", self.n_eta(), eta.len())?;
        let mut a = vec![0.0; self.n_w()];
        let mut b = vec![0.0; self.n_w()];
        self.internal(drivers, eta, &mut a, &mut b);
        Ok((
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(a)),
            b,
        ))
    }

    /// `d/deta [A(v, eta) w + b(v, eta)]` into the `n_w x n_eta` matrix `out`.
    pub fn jacobian_internal_eta_into(
        &self,
        drivers: &[f64],
        eta: &[f64],
        w: &[f64],
        out: &mut DMatrix<f64>,
    ) {
        out.fill(0.0);
        for (i, g) in self.gates.iter().enumerate() {
            if g.eta_start == g.eta_end {
                continue;
            }
            let vd = drivers[g.driver];
            let dynamics = self.gate_dynamics(g, eta);
            for &(e, p) in &self.eta_slots[g.eta_start..g.eta_end] {
                out[(i, e)] = match dynamics {
                    GateDyn::Intrinsic(k) => k.rate_sensitivity(w[i], vd, p),
                    GateDyn::Synaptic(k) => k.rate_sensitivity(w[i], vd, p),
                };
            }
        }
    }

    pub fn jacobian_internal_eta(
        &self,
        drivers: &[f64],
        eta: &[f64],
        w: &[f64],
    ) -> Result<DMatrix<f64>, ModelError> {
        check("drivers", self.n_drivers, drivers.len())?;
        check("eta", self.n_eta(), eta.len())?;
        check("w", self.n_w(), w.len())?;
        let mut out = DMatrix::zeros(self.n_w(), self.n_eta());
        self.jacobian_internal_eta_into(drivers, eta, w, &mut out);
        Ok(out)
    }

    /// Embeds local output values into a driver vector (other entries kept).
    pub fn scatter_outputs(&self, v: &[f64], drivers: &mut [f64]) {
        for (k, &n) in self.outputs.iter().enumerate() {
            drivers[n] = v[k];
        }
    }
}

fn layout_uses_input(layout: ThetaLayout) -> bool {
    layout != ThetaLayout::MaxConductances
}

#[inline]
fn gating_product(t: &TermEval, w: &[f64]) -> f64 {
    let mut g = 1.0;
    if let Some((i, p)) = t.m {
        g *= w[i].powi(p);
    }
    if let Some((i, q)) = t.h {
        g *= w[i].powi(q);
    }
    g
}

fn check(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { what, expected, got })
    }
}
