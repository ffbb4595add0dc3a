use nalgebra::DMatrix;

use crate::error::{Error, ObserverError};
use crate::integrator::Estimator;
use crate::model::Model;
use crate::observers::{condition_p, Hyperparameters, SaturationBox};

/// State of [`RlsObserver`].
///
/// Flat layout: `v_hat (n_v)`, `w_hat (n_w)`, `theta_hat (n_theta)`,
/// `psi (n_v x n_theta, row-major)`, `p (n_theta x n_theta, row-major)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsObserverState {
    pub v_hat: Vec<f64>,
    pub w_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub psi: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl RlsObserverState {
    /// `Psi(0) = 0` and `P(0) = p0 I`.
    pub fn initial(v_hat: Vec<f64>, w_hat: Vec<f64>, theta_hat: Vec<f64>, p0: f64) -> Self {
        let n_v = v_hat.len();
        let n_t = theta_hat.len();
        Self {
            v_hat,
            w_hat,
            theta_hat,
            psi: DMatrix::zeros(n_v, n_t),
            p: DMatrix::identity(n_t, n_t) * p0,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = Vec::new();
        x.extend_from_slice(&self.v_hat);
        x.extend_from_slice(&self.w_hat);
        x.extend_from_slice(&self.theta_hat);
        x.extend(row_major(&self.psi));
        x.extend(row_major(&self.p));
        x
    }

    pub fn from_slice(x: &[f64], n_v: usize, n_w: usize, n_t: usize) -> Self {
        let mut at = 0;
        let mut take = |k: usize| {
            let s = &x[at..at + k];
            at += k;
            s
        };
        let v_hat = take(n_v).to_vec();
        let w_hat = take(n_w).to_vec();
        let theta_hat = take(n_t).to_vec();
        let psi = DMatrix::from_row_slice(n_v, n_t, take(n_v * n_t));
        let p = DMatrix::from_row_slice(n_t, n_t, take(n_t * n_t));
        Self {
            v_hat,
            w_hat,
            theta_hat,
            psi,
            p,
        }
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

/// Adaptive observer for known internal dynamics:
///
/// ```text
/// dv_hat/dt = Phi(v, w_hat, u) theta_hat + a + (gamma I + Psi P Psi^T)(v - v_hat)
/// dw_hat/dt = A(v) w_hat + b(v)
/// dtheta_hat/dt = gamma P Psi^T (v - v_hat)
/// dPsi/dt = -gamma Psi + gamma Phi(v, w_hat, u)
/// dP/dt = alpha P - P Psi^T Psi P
/// ```
///
/// `Phi` and `a` are evaluated at the saturated gate estimate. The `beta`
/// hyperparameter is ignored.
#[derive(Debug, Clone)]
pub struct RlsObserver {
    model: Model,
    hyper: Hyperparameters,
    w_sat: SaturationBox,
    eta: Vec<f64>,
    init: RlsObserverState,
    prefix: String,
    record_internals: bool,
    phi: Vec<f64>,
    rows: Vec<usize>,
    w_s: Vec<f64>,
    out_v: Vec<f64>,
    e: Vec<f64>,
    q: Vec<f64>,
    qe: Vec<f64>,
    work: Vec<f64>,
}

impl RlsObserver {
    pub fn new(
        model: Model,
        hyper: Hyperparameters,
        init: RlsObserverState,
        w_sat: SaturationBox,
    ) -> Result<Self, ObserverError> {
        hyper.validate()?;
        let (n_v, n_w, n_t) = (model.n_v(), model.n_w(), model.n_theta());
        check_len("v_hat", n_v, init.v_hat.len())?;
        check_len("w_hat", n_w, init.w_hat.len())?;
        check_len("theta_hat", n_t, init.theta_hat.len())?;
        check_len("w saturation", n_w, w_sat.len())?;
        Ok(Self {
            eta: model.eta_true(),
            rows: model.theta_rows(),
            phi: vec![0.0; n_t],
            w_s: vec![0.0; n_w],
            out_v: vec![0.0; n_v],
            e: vec![0.0; n_v],
            q: vec![0.0; n_t * n_v],
            qe: vec![0.0; n_t],
            work: vec![0.0; n_t * n_t],
            model,
            hyper,
            w_sat,
            init,
            prefix: "obs0".into(),
            record_internals: false,
        })
    }

    pub fn with_prefix(mut self, prefix: &str) -> Self {
        self.prefix = prefix.to_string();
        self
    }

    /// Also record `Psi` and `P` in the trajectory.
    pub fn recording_internals(mut self, on: bool) -> Self {
        self.record_internals = on;
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn unpack(&self, x: &[f64]) -> RlsObserverState {
        RlsObserverState::from_slice(x, self.model.n_v(), self.model.n_w(), self.model.n_theta())
    }

    /// Derivative of the observer state for measured voltage `v` and input `u`.
    pub fn derivative(&mut self, state: &RlsObserverState, v: &[f64], u: &[f64]) -> RlsObserverState {
        let x = state.to_vec();
        let mut dx = vec![0.0; x.len()];
        self.eval(&x, v, u, &mut dx);
        self.unpack(&dx)
    }

    fn eval(&mut self, x: &[f64], v: &[f64], u: &[f64], dx: &mut [f64]) {
        let (n_v, n_w, n_t) = (self.model.n_v(), self.model.n_w(), self.model.n_theta());
        let g = self.hyper.gamma;
        let alpha = self.hyper.alpha;
        let (v_hat, rest) = x.split_at(n_v);
        let (w_hat, rest) = rest.split_at(n_w);
        let (theta, rest) = rest.split_at(n_t);
        let (psi, p) = rest.split_at(n_v * n_t);

        let (dv, drest) = dx.split_at_mut(n_v);
        let (dw, drest) = drest.split_at_mut(n_w);
        let (dtheta, drest) = drest.split_at_mut(n_t);
        let (dpsi, dp) = drest.split_at_mut(n_v * n_t);

        for k in 0..n_v {
            self.e[k] = v[k] - v_hat[k];
        }
        self.w_sat.apply(w_hat, &mut self.w_s);
        self.model.phi_compact(v, &self.w_s, u, &mut self.phi);
        self.model.output_rhs(v, &self.w_s, u, theta, &mut self.out_v);

        // q = P Psi^T
        for i in 0..n_t {
            for k in 0..n_v {
                let mut s = 0.0;
                for j in 0..n_t {
                    s += p[i * n_t + j] * psi[k * n_t + j];
                }
                self.q[i * n_v + k] = s;
            }
        }
        for i in 0..n_t {
            let mut s = 0.0;
            for k in 0..n_v {
                s += self.q[i * n_v + k] * self.e[k];
            }
            self.qe[i] = s;
        }
        for k in 0..n_v {
            let mut corr = 0.0;
            for j in 0..n_t {
                corr += psi[k * n_t + j] * self.qe[j];
            }
            dv[k] = self.out_v[k] + g * self.e[k] + corr;
        }
        self.model.internal_rhs(v, &self.eta, w_hat, dw);
        for i in 0..n_t {
            dtheta[i] = g * self.qe[i];
        }
        for k in 0..n_v {
            for j in 0..n_t {
                let phi_kj = if self.rows[j] == k { self.phi[j] } else { 0.0 };
                dpsi[k * n_t + j] = -g * psi[k * n_t + j] + g * phi_kj;
            }
        }
        for i in 0..n_t {
            for j in 0..n_t {
                let mut s = 0.0;
                for k in 0..n_v {
                    s += self.q[i * n_v + k] * self.q[j * n_v + k];
                }
                dp[i * n_t + j] = alpha * p[i * n_t + j] - s;
            }
        }
    }
}

impl Estimator for RlsObserver {
    fn dim(&self) -> usize {
        let (n_v, n_w, n_t) = (self.model.n_v(), self.model.n_w(), self.model.n_theta());
        n_v + n_w + n_t + n_v * n_t + n_t * n_t
    }

    fn initial_state(&self) -> Vec<f64> {
        self.init.to_vec()
    }

    fn rhs(&mut self, _t: f64, x: &[f64], y: &[f64], u: &[f64], dx: &mut [f64]) {
        self.eval(x, y, u, dx);
    }

    fn post_step(&mut self, t: f64, x: &mut [f64]) -> Result<(), Error> {
        let n_t = self.model.n_theta();
        let start = x.len() - n_t * n_t;
        condition_p(&mut x[start..], n_t, t, &mut self.work)?;
        Ok(())
    }

    fn column_names(&self) -> Vec<String> {
        let p = &self.prefix;
        let mut names: Vec<String> = (0..self.model.n_v()).map(|i| format!("{p}.v_hat.{i}")).collect();
        names.extend(self.model.gate_labels().iter().map(|l| format!("{p}.w_hat.{l}")));
        names.extend(self.model.theta_names().iter().map(|n| format!("{p}.theta.{n}")));
        if self.record_internals {
            let n_t = self.model.n_theta();
            for k in 0..self.model.n_v() {
                names.extend((0..n_t).map(|j| format!("{p}.psi_v.{k}.{j}")));
            }
            for i in 0..n_t {
                names.extend((0..n_t).map(|j| format!("{p}.P.{i}.{j}")));
            }
        }
        names
    }

    fn record(&self, x: &[f64], out: &mut Vec<f64>) {
        let (n_v, n_w, n_t) = (self.model.n_v(), self.model.n_w(), self.model.n_theta());
        if self.record_internals {
            out.extend_from_slice(x);
        } else {
            out.extend_from_slice(&x[..n_v + n_w + n_t]);
        }
    }
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<(), ObserverError> {
    if expected == got {
        Ok(())
    } else {
        Err(ObserverError::InvalidHyperparameters(format!(
            "{what} has length {got}, expected {expected}"
        )))
    }
}
