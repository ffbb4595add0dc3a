use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ObserverError};
use crate::integrator::Estimator;
use crate::model::Model;
use crate::observers::rls::row_major;
use crate::observers::{condition_p, Hyperparameters, ObserverSaturation};

/// Where the measured voltage enters the observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverVariant {
    /// `Phi`, `a`, `A`, `b` evaluated at the measurement.
    #[default]
    EquationError,
    /// `Phi`, `a` evaluated at the voltage estimate; internal dynamics still
    /// driven by the measurement, and `Psi` gains the voltage Jacobian.
    OutputError,
}

/// State of [`AugmentedObserver`], with `n_p = n_theta + n_eta`.
///
/// Flat layout: `v_hat (n_v)`, `w_hat (n_w)`, `theta_hat (n_theta)`,
/// `eta_hat (n_eta)`, `psi_v (n_v x n_p)`, `psi_w (n_w x n_p)`,
/// `p (n_p x n_p)`, matrices row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedObserverState {
    pub v_hat: Vec<f64>,
    pub w_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub psi_v: DMatrix<f64>,
    pub psi_w: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl AugmentedObserverState {
    /// `Psi(0) = 0` and `P(0) = p0 I`.
    pub fn initial(v_hat: Vec<f64>, w_hat: Vec<f64>, theta_hat: Vec<f64>, eta_hat: Vec<f64>, p0: f64) -> Self {
        let n_p = theta_hat.len() + eta_hat.len();
        Self {
            psi_v: DMatrix::zeros(v_hat.len(), n_p),
            psi_w: DMatrix::zeros(w_hat.len(), n_p),
            p: DMatrix::identity(n_p, n_p) * p0,
            v_hat,
            w_hat,
            theta_hat,
            eta_hat,
        }
    }

    pub fn n_p(&self) -> usize {
        self.theta_hat.len() + self.eta_hat.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = Vec::new();
        x.extend_from_slice(&self.v_hat);
        x.extend_from_slice(&self.w_hat);
        x.extend_from_slice(&self.theta_hat);
        x.extend_from_slice(&self.eta_hat);
        x.extend(row_major(&self.psi_v));
        x.extend(row_major(&self.psi_w));
        x.extend(row_major(&self.p));
        x
    }

    pub fn from_slice(x: &[f64], n_v: usize, n_w: usize, n_t: usize, n_e: usize) -> Self {
        let n_p = n_t + n_e;
        let mut at = 0;
        let mut take = |k: usize| {
            let s = &x[at..at + k];
            at += k;
            s
        };
        Self {
            v_hat: take(n_v).to_vec(),
            w_hat: take(n_w).to_vec(),
            theta_hat: take(n_t).to_vec(),
            eta_hat: take(n_e).to_vec(),
            psi_v: DMatrix::from_row_slice(n_v, n_p, take(n_v * n_p)),
            psi_w: DMatrix::from_row_slice(n_w, n_p, take(n_w * n_p)),
            p: DMatrix::from_row_slice(n_p, n_p, take(n_p * n_p)),
        }
    }
}

/// Adaptive observer estimating `theta` and the kinetic constants `eta`.
///
/// With `e = y - v_hat`, `q = P Psi_v^T` and `z` the voltage at which the
/// regressor is evaluated (`y` for equation error, `v_hat` for output error):
///
/// ```text
/// dv_hat/dt = Phi(z, sw(w_hat), u) theta_hat + a + (gamma I + Psi_v q) e
/// dw_hat/dt = A(y, eta_hat) w_hat + b(y, eta_hat) + Psi_w q e
/// d(theta_hat, eta_hat)/dt = gamma q e
/// dPsi/dt = A_Psi Psi + gamma B_Psi
/// dP/dt = alpha P + beta I - q q^T
/// ```
///
/// `A_Psi = [[-gamma I + J_v, J_w], [0, A(z, eta_hat)]]` where `J_w` is the
/// gate Jacobian of `Phi st(theta_hat) + a` (through the gate saturation `sw`)
/// and `J_v` its voltage Jacobian in the output-error variant (zero
/// otherwise). `B_Psi = blkdiag(Phi, d/deta [A(y, eta_hat) sw(w_hat) + b])`.
#[derive(Debug, Clone)]
pub struct AugmentedObserver {
    model: Model,
    variant: ObserverVariant,
    hyper: Hyperparameters,
    sat: ObserverSaturation,
    init: AugmentedObserverState,
    prefix: String,
    record_internals: bool,
    rows: Vec<usize>,
    y_own: Vec<f64>,
    u_own: Vec<f64>,
    e: Vec<f64>,
    w_s: Vec<f64>,
    dw_s: Vec<f64>,
    theta_s: Vec<f64>,
    phi: Vec<f64>,
    out_v: Vec<f64>,
    q: Vec<f64>,
    qe: Vec<f64>,
    jw: DMatrix<f64>,
    jv: Vec<f64>,
    a22: Vec<f64>,
    b22: Vec<f64>,
    jeta: DMatrix<f64>,
    drivers_a: Vec<f64>,
    work: Vec<f64>,
}

impl AugmentedObserver {
    pub fn new(
        model: Model,
        variant: ObserverVariant,
        hyper: Hyperparameters,
        init: AugmentedObserverState,
        sat: ObserverSaturation,
    ) -> Result<Self, ObserverError> {
        hyper.validate()?;
        let (n_v, n_w, n_t, n_e) = (model.n_v(), model.n_w(), model.n_theta(), model.n_eta());
        let n_p = n_t + n_e;
        let dims = [
            ("v_hat", n_v, init.v_hat.len()),
            ("w_hat", n_w, init.w_hat.len()),
            ("theta_hat", n_t, init.theta_hat.len()),
            ("eta_hat", n_e, init.eta_hat.len()),
            ("psi_v rows", n_v, init.psi_v.nrows()),
            ("psi_w rows", n_w, init.psi_w.nrows()),
            ("P", n_p, init.p.nrows()),
            ("theta saturation", n_t, sat.theta.len()),
            ("w saturation", n_w, sat.w.len()),
        ];
        for (what, expected, got) in dims {
            if expected != got {
                return Err(ObserverError::InvalidHyperparameters(format!(
                    "{what} has length {got}, expected {expected}"
                )));
            }
        }
        let n_d = model.n_drivers();
        Ok(Self {
            rows: model.theta_rows(),
            y_own: vec![0.0; n_v],
            u_own: vec![0.0; n_v],
            e: vec![0.0; n_v],
            w_s: vec![0.0; n_w],
            dw_s: vec![0.0; n_w],
            theta_s: vec![0.0; n_t],
            phi: vec![0.0; n_t],
            out_v: vec![0.0; n_v],
            q: vec![0.0; n_p * n_v],
            qe: vec![0.0; n_p],
            jw: DMatrix::zeros(n_v, n_w),
            jv: vec![0.0; n_v],
            a22: vec![0.0; n_w],
            b22: vec![0.0; n_w],
            jeta: DMatrix::zeros(n_w, n_e),
            drivers_a: vec![0.0; n_d],
            work: vec![0.0; n_p * n_p],
            model,
            variant,
            hyper,
            sat,
            init,
            prefix: "obs0".into(),
            record_internals: false,
        })
    }

    pub fn with_prefix(mut self, prefix: &str) -> Self {
        self.prefix = prefix.to_string();
        self
    }

    /// Also record `Psi_v`, `Psi_w` and `P` in the trajectory.
    pub fn recording_internals(mut self, on: bool) -> Self {
        self.record_internals = on;
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn variant(&self) -> ObserverVariant {
        self.variant
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn saturation(&self) -> &ObserverSaturation {
        &self.sat
    }

    pub fn n_p(&self) -> usize {
        self.model.n_theta() + self.model.n_eta()
    }

    pub fn unpack(&self, x: &[f64]) -> AugmentedObserverState {
        AugmentedObserverState::from_slice(
            x,
            self.model.n_v(),
            self.model.n_w(),
            self.model.n_theta(),
            self.model.n_eta(),
        )
    }

    /// Derivative for network measurement `y` (all neurons) and input `u`
    /// (all neurons).
    pub fn derivative(&mut self, state: &AugmentedObserverState, y: &[f64], u: &[f64]) -> AugmentedObserverState {
        let x = state.to_vec();
        let mut dx = vec![0.0; x.len()];
        self.eval(&x, y, u, &mut dx);
        self.unpack(&dx)
    }

    pub(crate) fn eval(&mut self, x: &[f64], y: &[f64], u: &[f64], dx: &mut [f64]) {
        let m = &self.model;
        let (n_v, n_w, n_t, n_e) = (m.n_v(), m.n_w(), m.n_theta(), m.n_eta());
        let n_p = n_t + n_e;
        let g = self.hyper.gamma;
        let alpha = self.hyper.alpha;
        let beta = self.hyper.beta;

        let (v_hat, rest) = x.split_at(n_v);
        let (w_hat, rest) = rest.split_at(n_w);
        let (theta, rest) = rest.split_at(n_t);
        let (eta, rest) = rest.split_at(n_e);
        let (psi_v, rest) = rest.split_at(n_v * n_p);
        let (psi_w, p) = rest.split_at(n_w * n_p);

        let (dv, drest) = dx.split_at_mut(n_v);
        let (dw, drest) = drest.split_at_mut(n_w);
        let (dpar, drest) = drest.split_at_mut(n_p);
        let (dpsi_v, drest) = drest.split_at_mut(n_v * n_p);
        let (dpsi_w, dp) = drest.split_at_mut(n_w * n_p);

        for (k, &o) in m.outputs().iter().enumerate() {
            self.y_own[k] = y[o];
            self.u_own[k] = u[o];
            self.e[k] = y[o] - v_hat[k];
        }
        let output_error = self.variant == ObserverVariant::OutputError;
        let z: &[f64] = if output_error { v_hat } else { &self.y_own };

        self.sat.w.apply_with_derivative(w_hat, &mut self.w_s, &mut self.dw_s);
        self.sat.theta.apply(theta, &mut self.theta_s);
        m.phi_compact(z, &self.w_s, &self.u_own, &mut self.phi);
        m.output_rhs(z, &self.w_s, &self.u_own, theta, &mut self.out_v);

        // q = P Psi_v^T, qe = q e
        for i in 0..n_p {
            let mut acc = 0.0;
            for k in 0..n_v {
                let mut s = 0.0;
                for j in 0..n_p {
                    s += p[i * n_p + j] * psi_v[k * n_p + j];
                }
                self.q[i * n_v + k] = s;
                acc += s * self.e[k];
            }
            self.qe[i] = acc;
        }

        for k in 0..n_v {
            let mut corr = 0.0;
            for j in 0..n_p {
                corr += psi_v[k * n_p + j] * self.qe[j];
            }
            dv[k] = self.out_v[k] + g * self.e[k] + corr;
        }

        m.internal_rhs(y, eta, w_hat, dw);
        for r in 0..n_w {
            let mut corr = 0.0;
            for j in 0..n_p {
                corr += psi_w[r * n_p + j] * self.qe[j];
            }
            dw[r] += corr;
        }
        for i in 0..n_p {
            dpar[i] = g * self.qe[i];
        }

        m.jacobian_output_w_into(z, &self.w_s, &self.u_own, &self.theta_s, &mut self.jw);
        for r in 0..n_w {
            let d = self.dw_s[r];
            if d != 1.0 {
                for k in 0..n_v {
                    self.jw[(k, r)] *= d;
                }
            }
        }
        if output_error {
            m.jacobian_output_v_diag(v_hat, &self.w_s, &self.u_own, &self.theta_s, &mut self.jv);
            self.drivers_a.copy_from_slice(y);
            m.scatter_outputs(v_hat, &mut self.drivers_a);
            m.internal(&self.drivers_a, eta, &mut self.a22, &mut self.b22);
        } else {
            self.jv.iter_mut().for_each(|x| *x = 0.0);
            m.internal(y, eta, &mut self.a22, &mut self.b22);
        }
        if n_e > 0 {
            m.jacobian_internal_eta_into(y, eta, &self.w_s, &mut self.jeta);
        }

        for k in 0..n_v {
            let diag = -g + self.jv[k];
            for j in 0..n_p {
                let mut s = diag * psi_v[k * n_p + j];
                for r in 0..n_w {
                    s += self.jw[(k, r)] * psi_w[r * n_p + j];
                }
                let b = if j < n_t && self.rows[j] == k { self.phi[j] } else { 0.0 };
                dpsi_v[k * n_p + j] = s + g * b;
            }
        }
        for r in 0..n_w {
            for j in 0..n_p {
                let b = if j >= n_t { self.jeta[(r, j - n_t)] } else { 0.0 };
                dpsi_w[r * n_p + j] = self.a22[r] * psi_w[r * n_p + j] + g * b;
            }
        }
        for i in 0..n_p {
            for j in 0..n_p {
                let mut s = 0.0;
                for k in 0..n_v {
                    s += self.q[i * n_v + k] * self.q[j * n_v + k];
                }
                let infl = if i == j { beta } else { 0.0 };
                dp[i * n_p + j] = alpha * p[i * n_p + j] + infl - s;
            }
        }
    }

    pub(crate) fn column_names_with(&self, prefix: &str) -> Vec<String> {
        let m = &self.model;
        let outs = m.outputs();
        let mut names: Vec<String> = outs.iter().map(|i| format!("{prefix}.v_hat.{i}")).collect();
        names.extend(m.gate_labels().iter().map(|l| format!("{prefix}.w_hat.{l}")));
        names.extend(m.theta_names().iter().map(|n| format!("{prefix}.theta.{n}")));
        names.extend(m.eta_names().iter().map(|n| format!("{prefix}.eta.{n}")));
        if self.record_internals {
            let n_p = self.n_p();
            for k in 0..m.n_v() {
                names.extend((0..n_p).map(|j| format!("{prefix}.psi_v.{k}.{j}")));
            }
            for r in 0..m.n_w() {
                names.extend((0..n_p).map(|j| format!("{prefix}.psi_w.{r}.{j}")));
            }
            for i in 0..n_p {
                names.extend((0..n_p).map(|j| format!("{prefix}.P.{i}.{j}")));
            }
        }
        names
    }

    pub(crate) fn record_into(&self, x: &[f64], out: &mut Vec<f64>) {
        let m = &self.model;
        if self.record_internals {
            out.extend_from_slice(x);
        } else {
            out.extend_from_slice(&x[..m.n_v() + m.n_w() + m.n_theta() + m.n_eta()]);
        }
    }

    pub(crate) fn condition(&mut self, t: f64, x: &mut [f64]) -> Result<(), ObserverError> {
        let n_p = self.n_p();
        let start = x.len() - n_p * n_p;
        condition_p(&mut x[start..], n_p, t, &mut self.work)
    }
}

impl Estimator for AugmentedObserver {
    fn dim(&self) -> usize {
        let m = &self.model;
        let n_p = self.n_p();
        m.n_v() + m.n_w() + n_p + (m.n_v() + m.n_w()) * n_p + n_p * n_p
    }

    fn initial_state(&self) -> Vec<f64> {
        self.init.to_vec()
    }

    fn rhs(&mut self, _t: f64, x: &[f64], y: &[f64], u: &[f64], dx: &mut [f64]) {
        self.eval(x, y, u, dx);
    }

    fn post_step(&mut self, t: f64, x: &mut [f64]) -> Result<(), Error> {
        Ok(self.condition(t, x)?)
    }

    fn column_names(&self) -> Vec<String> {
        self.column_names_with(&self.prefix)
    }

    fn record(&self, x: &[f64], out: &mut Vec<f64>) {
        self.record_into(x, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parametrization;
    use crate::presets;

    fn hh_observer(variant: ObserverVariant) -> (AugmentedObserver, AugmentedObserverState) {
        let spec = presets::hh();
        let par = Parametrization::default().with_eta(Parametrization::all_half_activations(&spec));
        let model = Model::new(&spec, &par).unwrap();
        let theta0 = vec![2.0, 78.0, 78.0, 10.0];
        let init = AugmentedObserverState::initial(vec![-30.0], vec![0.0; 3], theta0.clone(), vec![-20.0; 3], 1.0);
        let sat = ObserverSaturation::default_for(&theta0, 3, 3);
        let obs = AugmentedObserver::new(
            model,
            variant,
            Hyperparameters::new(0.1, 1.0, 1.0, 1.0).unwrap(),
            init.clone(),
            sat,
        )
        .unwrap();
        (obs, init)
    }

    #[test]
    fn theta_block_of_psi_w_receives_no_input() {
        let (mut obs, mut state) = hh_observer(ObserverVariant::EquationError);
        state.psi_v[(0, 1)] = 0.7;
        state.psi_v[(0, 5)] = -0.2;
        state.psi_w[(1, 4)] = 0.3;
        let d = obs.derivative(&state, &[-20.0], &[0.5]);
        for r in 0..3 {
            for j in 0..4 {
                assert_eq!(d.psi_w[(r, j)], 0.0);
            }
        }
    }

    #[test]
    fn covariance_derivative_is_symmetric() {
        let (mut obs, mut state) = hh_observer(ObserverVariant::OutputError);
        for j in 0..7 {
            state.psi_v[(0, j)] = 0.1 * j as f64 - 0.3;
        }
        state.p[(0, 3)] = 0.2;
        state.p[(3, 0)] = 0.2;
        let d = obs.derivative(&state, &[-20.0], &[0.5]);
        assert_eq!(d.p, d.p.transpose());
    }
}
