//! Offline estimation from recorded trajectories.
//!
//! Filtered least squares with exponential forgetting (the batch problem the
//! RLS observer solves recursively), and the output-error cost of a
//! free-running predictor, whose landscape is nearly discontinuous for
//! spiking models.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, EstimationError};
use crate::integrator::{count_spikes, format_value, rk4_step, InputSignal, MeasurementHold, Rk4Workspace, Trajectory};
use crate::model::Model;
use crate::observers::SaturationBox;

/// Output of `dx/dt = -gamma x + gamma s(t)`, `x(0) = x0`, on the grid of
/// `samples`, integrated with RK4 and the given hold between samples.
pub fn filter_first_order(samples: &[f64], gamma: f64, dt: f64, x0: f64, hold: MeasurementHold) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    if samples.is_empty() {
        return out;
    }
    let mut x = [x0];
    let mut ws = Rk4Workspace::new(1);
    let mut s = [0.0];
    out.push(x0);
    for k in 0..samples.len() - 1 {
        let t = k as f64 * dt;
        let (a, b) = ([samples[k]], [samples[k + 1]]);
        rk4_step(
            |tau, x, dx| {
                hold.interpolate(&a, &b, ((tau - t) / dt).clamp(0.0, 1.0), &mut s);
                dx[0] = -gamma * x[0] + gamma * s[0];
            },
            t,
            &mut x,
            dt,
            &mut ws,
        )
        .expect("linear filter with finite input stays finite");
        out.push(x[0]);
    }
    out
}

/// How the regressor filter is run over a trajectory.
#[derive(Debug, Clone)]
pub struct FilterSetup {
    pub gamma: f64,
    /// Initial estimate of the reduced-order observer.
    pub w_hat0: Vec<f64>,
    /// Gate saturation applied before evaluating the regressor.
    pub w_sat: SaturationBox,
    pub hold: MeasurementHold,
}

/// Filtered regression data `H(v') = Psi theta + H(a)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDataset {
    pub t: Vec<f64>,
    pub dt: f64,
    /// `n_v x n_theta` per sample, `Psi(0) = 0`.
    pub psi: Vec<DMatrix<f64>>,
    /// `H(v')` obtained as `gamma (y - H y)`, with the state of `H y`
    /// started at `y(0)` so that the identity is exact.
    pub hv_dot: Vec<Vec<f64>>,
    pub ha: Vec<Vec<f64>>,
    /// Reduced-order observer estimate used for the regressor.
    pub w_hat: Vec<Vec<f64>>,
    /// `dPsi/dt` at each sample.
    pub psi_dot: Vec<DMatrix<f64>>,
    /// One-sided time derivatives of the target `H(v') - H(a)` at each
    /// sample, from the step before and the step after. They differ because
    /// the interpolated measurement has a kink at every sample.
    pub target_dot_left: Vec<Vec<f64>>,
    pub target_dot_right: Vec<Vec<f64>>,
    pub hold: MeasurementHold,
}

impl FilteredDataset {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn n_theta(&self) -> usize {
        self.psi.first().map_or(0, |p| p.ncols())
    }

    /// `H(v') - H(a)` at sample `k`.
    pub fn target(&self, k: usize) -> Vec<f64> {
        self.hv_dot[k].iter().zip(&self.ha[k]).map(|(a, b)| a - b).collect()
    }

    pub fn index_of(&self, t: f64) -> Result<usize, EstimationError> {
        let k = (t / self.dt).round();
        if !(k >= 0.0) || k as usize >= self.t.len() || (k * self.dt - t).abs() > 1e-9 * self.dt.max(t.abs()) {
            return Err(EstimationError::HorizonOutOfRange(t));
        }
        Ok(k as usize)
    }
}

fn check_grid(traj: &Trajectory) -> Result<f64, EstimationError> {
    if traj.len() < 2 {
        return Err(EstimationError::MissingColumns("samples (need at least two)"));
    }
    if traj.y.is_empty() || traj.u.len() != traj.y.len() {
        return Err(EstimationError::MissingColumns("measured voltage and input"));
    }
    let dt = traj.dt();
    for (k, &t) in traj.t.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-6 * dt {
            return Err(EstimationError::InvalidInput(format!(
                "trajectory is not uniformly sampled (t[{k}] = {t})"
            )));
        }
    }
    Ok(dt)
}

fn column(series: &[Vec<f64>], k: usize, idx: &[usize], out: &mut [f64]) {
    for (o, &i) in out.iter_mut().zip(idx) {
        *o = series[i][k];
    }
}

/// Runs the reduced-order observer and the filters for `Psi`, `H y` and
/// `H a` over a recorded trajectory.
///
/// Uses the same RK4 step, grid and hold as [`crate::integrator::simulate`];
/// `Psi` therefore agrees with the internal `Psi` of an RLS observer started
/// from the same gate estimate.
pub fn build_filtered_dataset(traj: &Trajectory, model: &Model, setup: &FilterSetup) -> Result<FilteredDataset, EstimationError> {
    let dt = check_grid(traj)?;
    let (n_v, n_w, n_t) = (model.n_v(), model.n_w(), model.n_theta());
    let n_d = model.n_drivers();
    if traj.y.len() != n_d {
        return Err(EstimationError::MissingColumns("one measured voltage per neuron of the model network"));
    }
    if setup.w_hat0.len() != n_w || setup.w_sat.len() != n_w {
        return Err(EstimationError::InvalidInput(format!("gate estimate must have length {n_w}")));
    }
    let outs = model.outputs().to_vec();
    let all: Vec<usize> = (0..n_d).collect();
    let eta = model.eta_true();
    let rows = model.theta_rows();
    let g = setup.gamma;

    // state: w_hat, Psi (row-major n_v x n_t), H y, H a
    let n_psi = n_v * n_t;
    let dim = n_w + n_psi + 2 * n_v;
    let mut x = vec![0.0; dim];
    x[..n_w].copy_from_slice(&setup.w_hat0);
    for (k, &o) in outs.iter().enumerate() {
        x[n_w + n_psi + k] = traj.y[o][0];
    }

    let mut ds = FilteredDataset {
        t: Vec::with_capacity(traj.len()),
        dt,
        psi: Vec::with_capacity(traj.len()),
        hv_dot: Vec::with_capacity(traj.len()),
        ha: Vec::with_capacity(traj.len()),
        w_hat: Vec::with_capacity(traj.len()),
        psi_dot: Vec::with_capacity(traj.len()),
        target_dot_left: Vec::with_capacity(traj.len()),
        target_dot_right: Vec::with_capacity(traj.len()),
        hold: setup.hold,
    };
    let mut y_own = vec![0.0; n_v];
    let push = |ds: &mut FilteredDataset, k: usize, x: &[f64], y_own: &mut [f64]| {
        column(&traj.y, k, &outs, y_own);
        ds.t.push(k as f64 * dt);
        ds.w_hat.push(x[..n_w].to_vec());
        ds.psi.push(DMatrix::from_row_slice(n_v, n_t, &x[n_w..n_w + n_psi]));
        let hy = &x[n_w + n_psi..n_w + n_psi + n_v];
        ds.hv_dot.push(y_own.iter().zip(hy).map(|(y, h)| g * (y - h)).collect());
        ds.ha.push(x[n_w + n_psi + n_v..].to_vec());
    };
    push(&mut ds, 0, &x, &mut y_own);

    let mut ws = Rk4Workspace::new(dim);
    let (mut y0, mut y1, mut u0, mut u1) = (vec![0.0; n_d], vec![0.0; n_d], vec![0.0; n_d], vec![0.0; n_d]);
    let (mut ys, mut us) = (vec![0.0; n_d], vec![0.0; n_d]);
    let (mut yo, mut uo) = (vec![0.0; n_v], vec![0.0; n_v]);
    let mut w_s = vec![0.0; n_w];
    let mut phi = vec![0.0; n_t];
    let mut a = vec![0.0; n_v];
    for k in 0..traj.len() - 1 {
        column(&traj.y, k, &all, &mut y0);
        column(&traj.y, k + 1, &all, &mut y1);
        column(&traj.u, k, &all, &mut u0);
        column(&traj.u, k + 1, &all, &mut u1);
        let t = k as f64 * dt;
        rk4_step(
            |s, x, dx| {
                let frac = ((s - t) / dt).clamp(0.0, 1.0);
                setup.hold.interpolate(&y0, &y1, frac, &mut ys);
                setup.hold.interpolate(&u0, &u1, frac, &mut us);
                for (j, &o) in outs.iter().enumerate() {
                    yo[j] = ys[o];
                    uo[j] = us[o];
                }
                let (w_hat, rest) = x.split_at(n_w);
                let (psi, rest) = rest.split_at(n_psi);
                let (hy, ha) = rest.split_at(n_v);
                let (dw, drest) = dx.split_at_mut(n_w);
                let (dpsi, drest) = drest.split_at_mut(n_psi);
                let (dhy, dha) = drest.split_at_mut(n_v);
                setup.w_sat.apply(w_hat, &mut w_s);
                model.phi_compact(&yo, &w_s, &uo, &mut phi);
                model.drift(&yo, &w_s, &uo, &mut a);
                model.internal_rhs(&ys, &eta, w_hat, dw);
                for r in 0..n_v {
                    for j in 0..n_t {
                        let phi_rj = if rows[j] == r { phi[j] } else { 0.0 };
                        dpsi[r * n_t + j] = -g * psi[r * n_t + j] + g * phi_rj;
                    }
                    dhy[r] = -g * hy[r] + g * yo[r];
                    dha[r] = -g * ha[r] + g * a[r];
                }
            },
            t,
            &mut x,
            dt,
            &mut ws,
        )?;
        push(&mut ds, k + 1, &x, &mut y_own);
    }

    // derivatives at the samples, for the end-corrected quadrature
    let n = traj.len();
    let mut yo = vec![0.0; n_v];
    let mut uo = vec![0.0; n_v];
    let slope = |k: usize, i: usize| -> f64 {
        match setup.hold {
            MeasurementHold::Zero => 0.0,
            MeasurementHold::Linear => (traj.y[i][k + 1] - traj.y[i][k]) / dt,
        }
    };
    for k in 0..n {
        column(&traj.y, k, &outs, &mut yo);
        column(&traj.u, k, &outs, &mut uo);
        setup.w_sat.apply(&ds.w_hat[k], &mut w_s);
        model.phi_compact(&yo, &w_s, &uo, &mut phi);
        model.drift(&yo, &w_s, &uo, &mut a);
        let psi = &ds.psi[k];
        let mut psi_dot = DMatrix::zeros(n_v, n_t);
        for r in 0..n_v {
            for j in 0..n_t {
                let phi_rj = if rows[j] == r { phi[j] } else { 0.0 };
                psi_dot[(r, j)] = -g * psi[(r, j)] + g * phi_rj;
            }
        }
        ds.psi_dot.push(psi_dot);
        let mut left = vec![0.0; n_v];
        let mut right = vec![0.0; n_v];
        for (r, &o) in outs.iter().enumerate() {
            // H y = y - H(v')/gamma
            let hy = yo[r] - ds.hv_dot[k][r] / g;
            let hy_dot = -g * hy + g * yo[r];
            let ha_dot = -g * ds.ha[k][r] + g * a[r];
            let s_right = if k + 1 < n { slope(k, o) } else { slope(k - 1, o) };
            let s_left = if k > 0 { slope(k - 1, o) } else { s_right };
            left[r] = g * (s_left - hy_dot) - ha_dot;
            right[r] = g * (s_right - hy_dot) - ha_dot;
        }
        ds.target_dot_left.push(left);
        ds.target_dot_right.push(right);
    }
    Ok(ds)
}

/// Quadrature rule for the batch integrals on the data grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    Trapezoid,
    /// Trapezoid plus `h^2/12 (f'(a+) - f'(b-))` on every step, using the
    /// one-sided derivatives stored in the dataset. Fourth order for the
    /// piecewise-smooth integrands produced by a linear measurement hold.
    #[default]
    EndCorrectedTrapezoid,
}

/// Solution of the forgetting-weighted normal equation at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEntry {
    pub t_ms: f64,
    pub theta_hat: Vec<f64>,
    /// `R(T) = e^{-alpha T} P(0)^{-1} + int_0^T e^{-alpha (T - s)} Psi^T Psi ds`.
    pub information: DMatrix<f64>,
    pub min_eig_information: f64,
    /// Weighted squared residual at `theta_hat`, prior term included.
    pub residual_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    pub entries: Vec<BatchEntry>,
}

impl BatchSolution {
    /// Columns `T_ms`, one per parameter, `min_eig_R`.
    pub fn write_csv(&self, path: &Path, theta_names: &[String]) -> Result<(), Error> {
        let io = |e| Error::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut f = BufWriter::new(File::create(path).map_err(io)?);
        let mut header = vec!["T_ms".to_string()];
        header.extend(theta_names.iter().map(|n| format!("theta.{n}")));
        header.push("min_eig_R".into());
        writeln!(f, "{}", header.join(",")).map_err(io)?;
        for e in &self.entries {
            let mut row = vec![format_value(e.t_ms)];
            row.extend(e.theta_hat.iter().map(|&x| format_value(x)));
            row.push(format_value(e.min_eig_information));
            writeln!(f, "{}", row.join(",")).map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// Minimizes
///
/// ```text
/// e^{-alpha T} |theta - theta_prior|^2_{P(0)^{-1}}
///     + int_0^T e^{-alpha (T - s)} |H(v') - H(a) - Psi theta|^2 ds
/// ```
///
/// for each horizon, with the integrals taken on the data grid. A missing
/// prior means `theta_prior = 0`. With the prior set to the observer's
/// initial estimate this is the problem the RLS observer solves online.
pub fn batch_ls_solve(
    data: &FilteredDataset,
    alpha: f64,
    p0: &DMatrix<f64>,
    theta_prior: Option<&[f64]>,
    horizons_ms: &[f64],
    quadrature: Quadrature,
) -> Result<BatchSolution, EstimationError> {
    let n_t = data.n_theta();
    if p0.nrows() != n_t || p0.ncols() != n_t {
        return Err(EstimationError::InvalidInput(format!("P(0) must be {n_t} x {n_t}")));
    }
    if quadrature == Quadrature::EndCorrectedTrapezoid && data.hold != MeasurementHold::Linear {
        return Err(EstimationError::InvalidInput(
            "end-corrected quadrature needs a linear measurement hold".into(),
        ));
    }
    let p0_inv = p0
        .clone()
        .cholesky()
        .ok_or_else(|| EstimationError::InvalidInput("P(0) is not positive definite".into()))?
        .inverse();
    let prior = match theta_prior {
        Some(p) if p.len() != n_t => {
            return Err(EstimationError::InvalidInput(format!("prior must have length {n_t}")))
        }
        Some(p) => DVector::from_column_slice(p),
        None => DVector::zeros(n_t),
    };

    let mut entries = Vec::with_capacity(horizons_ms.len());
    for &t_end in horizons_ms {
        let kk = data.index_of(t_end)?;
        let t_end = data.t[kk];
        let decay = (-alpha * t_end).exp();
        let (ri, bi, zzi) = weighted_integrals(data, kk, alpha, quadrature);
        let r = &p0_inv * decay + ri;
        let rhs = &p0_inv * &prior * decay + bi;
        let zz = decay * prior.dot(&(&p0_inv * &prior)) + zzi;
        let r = (&r + r.transpose()) * 0.5;
        let min_eig = r.clone().symmetric_eigenvalues().min();
        let chol = r
            .clone()
            .cholesky()
            .filter(|_| min_eig > 0.0)
            .ok_or(EstimationError::NotExciting { t: t_end, min_eig })?;
        let theta = chol.solve(&rhs);
        // |z - Psi theta|^2 integrated = zz - 2 theta.rhs + theta.R.theta
        let residual = (zz - 2.0 * theta.dot(&rhs) + theta.dot(&(&r * &theta))).max(0.0);
        entries.push(BatchEntry {
            t_ms: t_end,
            theta_hat: theta.iter().copied().collect(),
            information: r,
            min_eig_information: min_eig,
            residual_cost: residual,
        });
    }
    Ok(BatchSolution { entries })
}

/// `int_0^T e^{-alpha (T - s)} (Psi^T Psi, Psi^T z, z^T z) ds` up to sample `kk`.
fn weighted_integrals(
    data: &FilteredDataset,
    kk: usize,
    alpha: f64,
    quadrature: Quadrature,
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let n_t = data.n_theta();
    let mut r = DMatrix::zeros(n_t, n_t);
    let mut b = DVector::zeros(n_t);
    let mut zz = 0.0;
    let h = data.dt;
    let t_end = data.t[kk];
    let corrected = quadrature == Quadrature::EndCorrectedTrapezoid;
    // values and one-sided derivatives of the unweighted integrands
    let eval = |k: usize, right: bool| {
        let psi = &data.psi[k];
        let z = DVector::from_vec(data.target(k));
        let gr = psi.transpose() * psi;
        let gb = psi.transpose() * &z;
        let gz = z.dot(&z);
        if !corrected {
            return (gr, gb, gz, None);
        }
        let pd = &data.psi_dot[k];
        let zd = DVector::from_column_slice(if right {
            &data.target_dot_right[k]
        } else {
            &data.target_dot_left[k]
        });
        let pdt_psi = pd.transpose() * psi;
        let dr = &pdt_psi + pdt_psi.transpose();
        let db = pd.transpose() * &z + psi.transpose() * &zd;
        let dz = 2.0 * z.dot(&zd);
        (gr, gb, gz, Some((dr, db, dz)))
    };
    for k in 0..kk {
        let ea = (-alpha * (t_end - data.t[k])).exp();
        let eb = (-alpha * (t_end - data.t[k + 1])).exp();
        let (ra, ba, za, da) = eval(k, true);
        let (rb, bb, zb, db) = eval(k + 1, false);
        r += (&ra * ea + &rb * eb) * (0.5 * h);
        b += (&ba * ea + &bb * eb) * (0.5 * h);
        zz += 0.5 * h * (za * ea + zb * eb);
        if let (Some((dra, dba, dza)), Some((drb, dbb, dzb))) = (da, db) {
            // d/ds [e^{-alpha (T - s)} g] = e^{...} (alpha g + g')
            let c = h * h / 12.0;
            r += ((&ra * alpha + dra) * ea - (&rb * alpha + drb) * eb) * c;
            b += ((&ba * alpha + dba) * ea - (&bb * alpha + dbb) * eb) * c;
            zz += c * ((alpha * za + dza) * ea - (alpha * zb + dzb) * eb);
        }
    }
    (r, b, zz)
}

/// Where the predictor takes its applied current from.
#[derive(Debug, Clone, Copy)]
pub enum InputSource<'a> {
    /// The recorded `u` column, interpolated between samples.
    Recorded(MeasurementHold),
    /// The generating signals (one per neuron, or one broadcast).
    Signals(&'a [InputSignal]),
}

/// Result of one free-running predictor simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorRun {
    /// `(1/T) int_0^T |y - v_hat|^2 dt` (mV^2), infinite when diverged.
    pub cost: f64,
    /// Upward crossings of 0 mV by the predicted voltage, summed over neurons.
    pub spikes: usize,
    pub diverged: bool,
    /// Predicted voltages, one series per neuron.
    pub v_hat: Vec<Vec<f64>>,
}

/// Output-error cost of `theta` over `[0, T]`.
///
/// The predictor is the model itself with the voltage not injected: the
/// gates are driven by the predicted voltage. It starts from the recorded
/// `(v(0), w(0))` and uses the true kinetic constants.
pub fn output_error_cost(
    model: &Model,
    theta: &[f64],
    traj: &Trajectory,
    t_end_ms: f64,
    input: InputSource<'_>,
) -> Result<PredictorRun, EstimationError> {
    let dt = check_grid(traj)?;
    let (n_v, n_w, n_t) = (model.n_v(), model.n_w(), model.n_theta());
    if theta.len() != n_t || theta.iter().any(|x| !x.is_finite()) {
        return Err(EstimationError::InvalidInput(format!("candidate must be {n_t} finite values")));
    }
    if n_v != traj.y.len() || n_w != traj.w.len() {
        return Err(EstimationError::MissingColumns("states of the full model network"));
    }
    if let InputSource::Signals(s) = input {
        if s.len() != 1 && s.len() != n_v {
            return Err(EstimationError::InvalidInput("need one input signal or one per neuron".into()));
        }
    }
    let kk = (t_end_ms / dt).round() as usize;
    if kk == 0 || kk >= traj.len() {
        return Err(EstimationError::HorizonOutOfRange(t_end_ms));
    }
    let eta = model.eta_true();
    let mut x: Vec<f64> = traj.v.iter().map(|s| s[0]).chain(traj.w.iter().map(|s| s[0])).collect();
    let mut ws = Rk4Workspace::new(x.len());
    let (mut u0, mut u1, mut us) = (vec![0.0; n_v], vec![0.0; n_v], vec![0.0; n_v]);
    let mut drivers = vec![0.0; model.n_drivers()];
    let mut v_hat: Vec<Vec<f64>> = (0..n_v).map(|i| vec![x[i]]).collect();

    let sq_err = |k: usize, x: &[f64]| -> f64 { (0..n_v).map(|i| (traj.y[i][k] - x[i]).powi(2)).sum() };
    let mut integral = 0.5 * sq_err(0, &x);
    let mut diverged = false;
    for k in 0..kk {
        let t = k as f64 * dt;
        column(&traj.u, k, &(0..n_v).collect::<Vec<_>>(), &mut u0);
        column(&traj.u, k + 1, &(0..n_v).collect::<Vec<_>>(), &mut u1);
        let step = rk4_step(
            |s, x, dx| {
                match input {
                    InputSource::Recorded(h) => h.interpolate(&u0, &u1, ((s - t) / dt).clamp(0.0, 1.0), &mut us),
                    InputSource::Signals(sig) => {
                        for (i, o) in us.iter_mut().enumerate() {
                            *o = sig[if sig.len() == 1 { 0 } else { i }].value(s);
                        }
                    }
                }
                let (v, w) = x.split_at(n_v);
                let (dv, dw) = dx.split_at_mut(n_v);
                model.output_rhs(v, w, &us, theta, dv);
                model.scatter_outputs(v, &mut drivers);
                model.internal_rhs(&drivers, &eta, w, dw);
            },
            t,
            &mut x,
            dt,
            &mut ws,
        );
        if step.is_err() {
            diverged = true;
            break;
        }
        for i in 0..n_v {
            v_hat[i].push(x[i]);
        }
        let f = sq_err(k + 1, &x);
        integral += if k + 1 == kk { 0.5 * f } else { f };
    }
    let t_used = kk as f64 * dt;
    let spikes = v_hat
        .iter()
        .map(|s| count_spikes(&traj.t[..s.len()], s, 0.0, 1.0))
        .sum();
    Ok(PredictorRun {
        cost: if diverged { f64::INFINITY } else { integral * dt / t_used },
        spikes,
        diverged,
        v_hat,
    })
}

/// One point of a one-dimensional cost landscape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeRow {
    pub value: f64,
    pub cost: f64,
    /// Central difference on the grid (one-sided at the ends).
    pub gradient: f64,
    pub spikes: usize,
    pub diverged: bool,
}

/// Output-error cost as parameter `index` of `base` sweeps over `values`.
pub fn cost_landscape(
    model: &Model,
    base: &[f64],
    index: usize,
    values: &[f64],
    traj: &Trajectory,
    t_end_ms: f64,
    input: InputSource<'_>,
) -> Result<Vec<LandscapeRow>, EstimationError> {
    if index >= base.len() {
        return Err(EstimationError::InvalidInput(format!("parameter index {index} out of range")));
    }
    let mut rows = Vec::with_capacity(values.len());
    let mut theta = base.to_vec();
    for &val in values {
        theta[index] = val;
        let run = output_error_cost(model, &theta, traj, t_end_ms, input)?;
        rows.push(LandscapeRow {
            value: val,
            cost: run.cost,
            gradient: 0.0,
            spikes: run.spikes,
            diverged: run.diverged,
        });
    }
    fill_gradients(&mut rows);
    Ok(rows)
}

/// Central differences of `cost` over `value`, one-sided at the ends.
pub fn fill_gradients(rows: &mut [LandscapeRow]) {
    let n = rows.len();
    for i in 0..n {
        let (a, b) = match (i, n) {
            (_, 1) => continue,
            (0, _) => (0, 1),
            (i, n) if i == n - 1 => (n - 2, n - 1),
            (i, _) => (i - 1, i + 1),
        };
        rows[i].gradient = (rows[b].cost - rows[a].cost) / (rows[b].value - rows[a].value);
    }
}

/// Index `i` maximizing `|cost[i+1] - cost[i]|`.
pub fn largest_jump(rows: &[LandscapeRow]) -> Option<usize> {
    (0..rows.len().saturating_sub(1)).max_by(|&a, &b| {
        let da = (rows[a + 1].cost - rows[a].cost).abs();
        let db = (rows[b + 1].cost - rows[b].cost).abs();
        da.total_cmp(&db)
    })
}

/// Bisects on the predictor spike count between `lo` (fewer spikes) and `hi`.
/// Returns the successive brackets, each contained in the previous one.
#[allow(clippy::too_many_arguments)]
pub fn bracket_spike_onset(
    model: &Model,
    base: &[f64],
    index: usize,
    mut lo: f64,
    mut hi: f64,
    iterations: usize,
    traj: &Trajectory,
    t_end_ms: f64,
    input: InputSource<'_>,
) -> Result<Vec<(f64, f64)>, EstimationError> {
    let mut theta = base.to_vec();
    let mut spikes_at = |x: f64| -> Result<usize, EstimationError> {
        theta[index] = x;
        Ok(output_error_cost(model, &theta, traj, t_end_ms, input)?.spikes)
    };
    let s_lo = spikes_at(lo)?;
    if spikes_at(hi)? == s_lo {
        return Err(EstimationError::InvalidInput(format!(
            "spike count is the same at {lo} and {hi}"
        )));
    }
    let mut out = vec![(lo, hi)];
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if spikes_at(mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        out.push((lo, hi));
    }
    Ok(out)
}

/// Columns `value`, `cost`, `gradient`, `spikes`.
pub fn write_landscape_csv(rows: &[LandscapeRow], name: &str, path: &Path) -> Result<(), Error> {
    let io = |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut f = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(f, "{name},cost,gradient,spikes").map_err(io)?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{}",
            format_value(r.value),
            format_value(r.cost),
            format_value(r.gradient),
            r.spikes
        )
        .map_err(io)?;
    }
    f.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_approaches_level_monotonically() {
        let x = filter_first_order(&vec![2.0; 2001], 1.0, 0.01, 0.0, MeasurementHold::Zero);
        assert!(x.windows(2).all(|w| w[1] >= w[0]));
        assert!((x[2000] - 2.0 * (1.0 - (-20.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn sine_steady_state_gain_and_phase() {
        let dt = 0.001;
        let n = 60_001;
        let s: Vec<f64> = (0..n).map(|k| (k as f64 * dt).sin()).collect();
        let x = filter_first_order(&s, 1.0, dt, 0.0, MeasurementHold::Linear);
        // steady state: sin(t - pi/4) / sqrt(2)
        let tail = n - 10_000..n;
        let err = tail
            .map(|k| {
                let t = k as f64 * dt;
                (x[k] - (t - std::f64::consts::FRAC_PI_4).sin() / 2f64.sqrt()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn scalar_regression_recovers_parameter() {
        let n = 1001;
        let ds = FilteredDataset {
            t: (0..n).map(|k| k as f64 * 0.1).collect(),
            dt: 0.1,
            psi: vec![DMatrix::from_element(1, 1, 1.0); n],
            hv_dot: vec![vec![3.5]; n],
            ha: vec![vec![0.0]; n],
            w_hat: vec![vec![]; n],
            psi_dot: vec![DMatrix::zeros(1, 1); n],
            target_dot_left: vec![vec![0.0]; n],
            target_dot_right: vec![vec![0.0]; n],
            hold: MeasurementHold::Linear,
        };
        let sol = batch_ls_solve(&ds, 1e-9, &DMatrix::from_element(1, 1, 1e12), None, &[50.0, 100.0], Quadrature::EndCorrectedTrapezoid).unwrap();
        for e in &sol.entries {
            assert!((e.theta_hat[0] - 3.5).abs() < 1e-9);
        }
        assert!(batch_ls_solve(&ds, 0.1, &DMatrix::from_element(1, 1, 1.0), None, &[200.0], Quadrature::Trapezoid).is_err());
    }

    #[test]
    fn zero_regressor_is_not_exciting_without_prior_weight() {
        let n = 11;
        let ds = FilteredDataset {
            t: (0..n).map(|k| k as f64).collect(),
            dt: 1.0,
            psi: vec![DMatrix::zeros(1, 1); n],
            hv_dot: vec![vec![0.0]; n],
            ha: vec![vec![0.0]; n],
            w_hat: vec![vec![]; n],
            psi_dot: vec![DMatrix::zeros(1, 1); n],
            target_dot_left: vec![vec![0.0]; n],
            target_dot_right: vec![vec![0.0]; n],
            hold: MeasurementHold::Linear,
        };
        let err = batch_ls_solve(&ds, 800.0, &DMatrix::from_element(1, 1, 1.0), None, &[10.0], Quadrature::Trapezoid).unwrap_err();
        assert!(matches!(err, EstimationError::NotExciting { .. }));
    }

    #[test]
    fn flat_landscape_has_zero_gradient() {
        let mut rows: Vec<LandscapeRow> = (0..5)
            .map(|i| LandscapeRow {
                value: i as f64,
                cost: 4.0,
                gradient: f64::NAN,
                spikes: 0,
                diverged: false,
            })
            .collect();
        fill_gradients(&mut rows);
        assert!(rows.iter().all(|r| r.gradient == 0.0));
    }
}
