use crate::integrator::Estimator;
use crate::model::Model;

/// `dw_hat/dt = A(v, eta) w_hat + b(v, eta)` with the measured voltage injected.
#[derive(Debug, Clone)]
pub struct ReducedObserver {
    model: Model,
    eta: Vec<f64>,
    w0: Vec<f64>,
}

impl ReducedObserver {
    /// Uses the kinetic constants the model was compiled from.
    pub fn new(model: Model, w0: Vec<f64>) -> Self {
        assert_eq!(w0.len(), model.n_w(), "initial gate estimate has wrong length");
        let eta = model.eta_true();
        Self { model, eta, w0 }
    }

    pub fn with_eta(mut self, eta: Vec<f64>) -> Self {
        assert_eq!(eta.len(), self.model.n_eta());
        self.eta = eta;
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Derivative of `w_hat` for the measured driver voltages `v`.
    pub fn rhs_at(&self, w_hat: &[f64], v: &[f64], out: &mut [f64]) {
        self.model.internal_rhs(v, &self.eta, w_hat, out);
    }
}

impl Estimator for ReducedObserver {
    fn dim(&self) -> usize {
        self.model.n_w()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.w0.clone()
    }

    fn rhs(&mut self, _t: f64, x: &[f64], y: &[f64], _u: &[f64], dx: &mut [f64]) {
        self.model.internal_rhs(y, &self.eta, x, dx);
    }

    fn column_names(&self) -> Vec<String> {
        self.model
            .gate_labels()
            .iter()
            .map(|l| format!("w_hat.{l}"))
            .collect()
    }

    fn record(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend_from_slice(x);
    }
}
