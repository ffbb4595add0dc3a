//! Numerical checks of the convergence premises along recorded runs:
//! persistent excitation, covariance bounds, contraction rates and metric
//! bounds, and fitted convergence rates.
//!
//! Everything here is post-hoc: the functions read sampled trajectories and
//! never integrate the observers themselves, except
//! [`gate_contraction_fit`] which replays two copies of the internal
//! dynamics on recorded voltages.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::integrator::{rk4_step, MeasurementHold, Rk4Workspace, Trajectory};
use crate::model::{GateKind, Model, NetworkSpec};

/// Regressor and covariance series of one recorded observer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverSeries {
    pub t: Vec<f64>,
    /// Output rows of the regressor (`n_v x n_p`).
    pub psi_v: Vec<DMatrix<f64>>,
    /// Gate rows (`n_w x n_p`); absent for the linear observer.
    pub psi_w: Option<Vec<DMatrix<f64>>>,
    pub p: Vec<DMatrix<f64>>,
}

impl ObserverSeries {
    /// Reads the `{prefix}.psi_v.*`, `{prefix}.psi_w.*` and `{prefix}.P.*`
    /// columns written by an observer recording its internals.
    pub fn from_trajectory(traj: &Trajectory, prefix: &str) -> Result<Self, AnalysisError> {
        let dims = |block: &str| -> (usize, usize) {
            let head = format!("{prefix}.{block}.");
            let mut rows = 0;
            let mut cols = 0;
            for name in traj.extra_names.iter().filter_map(|n| n.strip_prefix(&head)) {
                if let Some((r, c)) = name.split_once('.') {
                    if let (Ok(r), Ok(c)) = (r.parse::<usize>(), c.parse::<usize>()) {
                        rows = rows.max(r + 1);
                        cols = cols.max(c + 1);
                    }
                }
            }
            (rows, cols)
        };
        let read = |block: &str, rows: usize, cols: usize| -> Result<Vec<DMatrix<f64>>, AnalysisError> {
            let mut series = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let name = format!("{prefix}.{block}.{r}.{c}");
                    series.push(traj.extra_column(&name).ok_or_else(|| {
                        AnalysisError::InvalidInput(format!("trajectory has no column {name}"))
                    })?);
                }
            }
            Ok((0..traj.len())
                .map(|k| DMatrix::from_row_iterator(rows, cols, series.iter().map(|s| s[k])))
                .collect())
        };

        let (n_v, n_p) = dims("psi_v");
        let (pr, pc) = dims("P");
        if n_v == 0 || n_p == 0 || pr != n_p || pc != n_p {
            return Err(AnalysisError::InvalidInput(format!(
                "no observer internals recorded under prefix `{prefix}`"
            )));
        }
        let (n_w, wc) = dims("psi_w");
        let psi_w = if n_w > 0 {
            if wc != n_p {
                return Err(AnalysisError::InvalidInput("inconsistent psi_w columns".into()));
            }
            Some(read("psi_w", n_w, n_p)?)
        } else {
            None
        };
        Ok(Self {
            t: traj.t.clone(),
            psi_v: read("psi_v", n_v, n_p)?,
            psi_w,
            p: read("P", n_p, n_p)?,
        })
    }

    pub fn n_p(&self) -> usize {
        self.p.first().map_or(0, |p| p.nrows())
    }

    pub fn n_v(&self) -> usize {
        self.psi_v.first().map_or(0, |p| p.nrows())
    }

    /// `col(Psi_v, Psi_w)` at sample `k`; gate rows are zero when
    /// `n_w` is given for an observer without `Psi_w`.
    pub fn psi_stacked(&self, k: usize, n_w: usize) -> DMatrix<f64> {
        let (n_v, n_p) = (self.n_v(), self.n_p());
        let mut out = DMatrix::zeros(n_v + n_w, n_p);
        out.rows_mut(0, n_v).copy_from(&self.psi_v[k]);
        if let Some(pw) = &self.psi_w {
            out.rows_mut(n_v, n_w).copy_from(&pw[k]);
        }
        out
    }
}

/// Spectral norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

fn uniform_step(t: &[f64]) -> Result<f64, AnalysisError> {
    if t.len() < 2 {
        return Err(AnalysisError::InvalidInput("need at least two samples".into()));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(AnalysisError::InvalidInput("time grid must be increasing".into()));
    }
    Ok(dt)
}

/// Sliding-window excitation of a regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeReport {
    pub window_ms: f64,
    pub stride_ms: f64,
    pub window_starts_ms: Vec<f64>,
    /// Smallest eigenvalue of `int Psi^T Psi` over each window.
    pub min_eigenvalues: Vec<f64>,
    /// Infimum over windows.
    pub delta: f64,
    /// `1e-6 * window * mean |Psi|^2`.
    pub threshold: f64,
    pub persistently_exciting: bool,
}

/// Relative cutoff of the excitation verdict.
pub const PE_RELATIVE_THRESHOLD: f64 = 1e-6;

/// Minimum eigenvalue of the trapezoidal Gramian `int_t^{t+T} Psi^T Psi`
/// for window starts `0, stride, 2 stride, ...`.
pub fn pe_gramian(
    t: &[f64],
    psi: &[DMatrix<f64>],
    window_ms: f64,
    stride_ms: f64,
) -> Result<PeReport, AnalysisError> {
    let dt = uniform_step(t)?;
    if psi.len() != t.len() {
        return Err(AnalysisError::InvalidInput("regressor and time grid differ in length".into()));
    }
    let span = t[t.len() - 1] - t[0];
    let nw = (window_ms / dt).round() as usize;
    if nw == 0 || nw >= t.len() {
        return Err(AnalysisError::WindowTooLong {
            window: window_ms,
            span,
        });
    }
    let stride = ((stride_ms / dt).round() as usize).max(1);
    let n_p = psi[0].ncols();

    let grams: Vec<DMatrix<f64>> = psi.iter().map(|m| m.transpose() * m).collect();
    let mean_sq = psi.iter().map(|m| spectral_norm(m).powi(2)).sum::<f64>() / psi.len() as f64;

    let mut starts = Vec::new();
    let mut mins = Vec::new();
    let mut k = 0;
    while k + nw < t.len() {
        let mut g = DMatrix::zeros(n_p, n_p);
        for j in k..=k + nw {
            let wgt = if j == k || j == k + nw { 0.5 * dt } else { dt };
            g += &grams[j] * wgt;
        }
        starts.push(t[k]);
        mins.push(g.symmetric_eigenvalues().min().max(0.0));
        k += stride;
    }
    let delta = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = PE_RELATIVE_THRESHOLD * window_ms * mean_sq;
    Ok(PeReport {
        window_ms,
        stride_ms: stride as f64 * dt,
        window_starts_ms: starts,
        min_eigenvalues: mins,
        delta,
        threshold,
        persistently_exciting: delta > threshold,
    })
}

/// Closed-form eigenvalue bounds on the covariance for `t >= T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PBounds {
    pub p_lo: f64,
    pub p_hi: f64,
}

/// ```text
/// p_lo = (|P(0)^-1| + c^2 / alpha)^-1
/// p_hi = exp(2 alpha T) / delta * (1 + beta exp(2 alpha T) c^4 / (delta alpha^3))
/// ```
///
/// `c_bar` bounds the regressor norm and `P(0) = p0 I`. With `beta = 0`
/// the upper bound reduces to `exp(2 alpha T) / delta`.
pub fn theoretical_p_bounds(
    alpha: f64,
    beta: f64,
    delta: f64,
    window_ms: f64,
    c_bar: f64,
    p0: f64,
) -> Result<PBounds, AnalysisError> {
    if !(delta > 0.0) {
        return Err(AnalysisError::NotExciting(delta));
    }
    if !(alpha > 0.0) || !(p0 > 0.0) || beta < 0.0 {
        return Err(AnalysisError::InvalidInput(
            "need alpha > 0, beta >= 0 and P(0) positive definite".into(),
        ));
    }
    let grow = (2.0 * alpha * window_ms).exp();
    let p_lo = 1.0 / (1.0 / p0 + c_bar * c_bar / alpha);
    let p_hi = grow / delta * (1.0 + beta * grow * c_bar.powi(4) / (delta * alpha.powi(3)));
    Ok(PBounds { p_lo, p_hi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PBoundsReport {
    /// Theoretical bounds; absent when the regressor is not exciting.
    pub p_lo: Option<f64>,
    pub p_hi: Option<f64>,
    /// Bounds are checked from this time on.
    pub from_ms: f64,
    pub empirical_min: f64,
    pub empirical_max: f64,
    /// Smallest eigenvalue over the whole run, including `t < T`.
    pub min_eigenvalue_all: f64,
    pub positive_definite: bool,
    pub pass: bool,
    pub first_violation_ms: Option<f64>,
}

/// Checks `p_lo I <= P(t) <= p_hi I` for `t >= t[0] + T`.
///
/// Without bounds only the eigenvalue extremes are collected and the check
/// does not pass.
pub fn verify_p_bounds(t: &[f64], p: &[DMatrix<f64>], bounds: Option<PBounds>, window_ms: f64) -> PBoundsReport {
    let from = t.first().copied().unwrap_or(0.0) + window_ms;
    let mut emp_min = f64::INFINITY;
    let mut emp_max = f64::NEG_INFINITY;
    let mut all_min = f64::INFINITY;
    let mut first_violation = None;
    for (k, pk) in p.iter().enumerate() {
        let eig = pk.clone().symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        all_min = all_min.min(lo);
        if t[k] + 1e-9 < from {
            continue;
        }
        emp_min = emp_min.min(lo);
        emp_max = emp_max.max(hi);
        let outside = bounds.is_some_and(|b| lo < b.p_lo || hi > b.p_hi);
        if first_violation.is_none() && (outside || !lo.is_finite()) {
            first_violation = Some(t[k]);
        }
    }
    PBoundsReport {
        p_lo: bounds.map(|b| b.p_lo),
        p_hi: bounds.map(|b| b.p_hi),
        from_ms: from,
        empirical_min: emp_min,
        empirical_max: emp_max,
        min_eigenvalue_all: all_min,
        positive_definite: all_min > 0.0,
        pass: bounds.is_some() && first_violation.is_none() && emp_min.is_finite(),
        first_violation_ms: first_violation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRate {
    pub gate: String,
    pub rate: f64,
}

/// Contraction rates of the internal dynamics in the identity metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalRates {
    pub gates: Vec<GateRate>,
    /// Minimum over gates.
    pub lambda_w: f64,
}

/// `2 / tau_max` per intrinsic gate and `2 b` per synaptic gate (whose time
/// constant never exceeds `1 / b`).
pub fn internal_contraction_rate(spec: &NetworkSpec) -> InternalRates {
    let gates: Vec<GateRate> = spec
        .gate_layout()
        .into_iter()
        .map(|g| {
            let n = &spec.neurons[g.neuron];
            let rate = match g.kind {
                GateKind::Synaptic { synapse } => 2.0 * n.synapses[synapse].kinetics.b,
                kind => 2.0 / n.intrinsic_kinetics(kind).expect("intrinsic gate").tau_max,
            };
            GateRate {
                gate: spec.gate_label(g),
                rate,
            }
        })
        .collect();
    let lambda_w = gates.iter().map(|g| g.rate).fold(f64::INFINITY, f64::min);
    InternalRates { gates, lambda_w }
}

/// `min_i 2 mu_L,i / c_i`: every conductance only adds damping to the leak.
pub fn voltage_contraction_rate(spec: &NetworkSpec) -> f64 {
    spec.neurons
        .iter()
        .map(|n| 2.0 * n.mu_leak / n.c)
        .fold(f64::INFINITY, f64::min)
}

/// `min_t -2 max_i d/dv_i [Phi theta + a]_i` along recorded states.
pub fn measured_voltage_contraction(model: &Model, v: &[Vec<f64>], w: &[Vec<f64>], theta: &[f64]) -> f64 {
    let n = v.first().map_or(0, Vec::len);
    let mut vk = vec![0.0; v.len()];
    let mut wk = vec![0.0; w.len()];
    let mut d = vec![0.0; v.len()];
    let u = vec![0.0; v.len()];
    let mut worst = f64::INFINITY;
    for k in 0..n {
        sample(v, k, &mut vk);
        sample(w, k, &mut wk);
        model.jacobian_output_v_diag(&vk, &wk, &u, theta, &mut d);
        for &x in &d {
            worst = worst.min(-2.0 * x);
        }
    }
    worst
}

/// `max_t |d/dw [Phi theta + a]|` along recorded states.
pub fn sup_gate_jacobian_norm(model: &Model, v: &[Vec<f64>], w: &[Vec<f64>], theta: &[f64]) -> f64 {
    let n = v.first().map_or(0, Vec::len);
    let mut vk = vec![0.0; v.len()];
    let mut wk = vec![0.0; w.len()];
    let u = vec![0.0; v.len()];
    let mut jac = DMatrix::zeros(model.n_v(), model.n_w());
    let mut sup: f64 = 0.0;
    for k in 0..n {
        sample(v, k, &mut vk);
        sample(w, k, &mut wk);
        model.jacobian_output_w_into(&vk, &wk, &u, theta, &mut jac);
        sup = sup.max(spectral_norm(&jac));
    }
    sup
}

fn sample(series: &[Vec<f64>], k: usize, out: &mut [f64]) {
    for (o, s) in out.iter_mut().zip(series) {
        *o = s[k];
    }
}

/// `eps = (1 - zeta)^2 (lambda_w - lambda)(gamma - lambda) lambda_min(M_w) / sup|J_w|^2`.
///
/// Without `zeta` the factor `(1 - zeta)^2` is dropped.
pub fn epsilon_formula(
    lambda: f64,
    lambda_w: f64,
    gamma: f64,
    m_w_min_eig: f64,
    sup_jacobian_norm: f64,
    zeta: Option<f64>,
) -> Result<f64, AnalysisError> {
    let limit = lambda_w.min(gamma);
    if !(lambda < limit) {
        return Err(AnalysisError::InfeasibleRate { lambda, limit });
    }
    if !(sup_jacobian_norm > 0.0) || !(m_w_min_eig > 0.0) {
        return Err(AnalysisError::InvalidInput(
            "Jacobian bound and lambda_min(M_w) must be positive".into(),
        ));
    }
    let shrink = match zeta {
        Some(z) if !(0.0..1.0).contains(&z) => {
            return Err(AnalysisError::InvalidInput("zeta must lie in [0, 1)".into()))
        }
        Some(z) => (1.0 - z).powi(2),
        None => 1.0,
    };
    Ok(shrink * (lambda_w - lambda) * (gamma - lambda) * m_w_min_eig / sup_jacobian_norm.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBounds {
    pub m_lo: f64,
    pub m_hi: f64,
    pub epsilon: f64,
}

/// Eigenvalue extremes of `M = T^T Mbar T` over the samples, with
///
/// ```text
/// T = [[I, -Psi / gamma], [0, I]]
/// Mbar = blkdiag(eps I, M_w, eps (gamma P)^-1)
/// ```
///
/// Each `psi` sample stacks the output rows (`n_v`) over the gate rows.
pub fn metric_eigen_bounds(
    psi: &[DMatrix<f64>],
    p: &[DMatrix<f64>],
    n_v: usize,
    gamma: f64,
    epsilon: f64,
    m_w: &DMatrix<f64>,
) -> Result<MetricBounds, AnalysisError> {
    if psi.len() != p.len() || psi.is_empty() {
        return Err(AnalysisError::InvalidInput("regressor and covariance series must align".into()));
    }
    let n_w = m_w.nrows();
    let n_x = n_v + n_w;
    let n_p = p[0].nrows();
    if psi[0].nrows() != n_x || psi[0].ncols() != n_p {
        return Err(AnalysisError::InvalidInput(format!(
            "regressor must be {n_x} x {n_p}, got {} x {}",
            psi[0].nrows(),
            psi[0].ncols()
        )));
    }
    let n = n_x + n_p;
    let mut tm = DMatrix::identity(n, n);
    let mut mbar = DMatrix::zeros(n, n);
    for i in 0..n_v {
        mbar[(i, i)] = epsilon;
    }
    mbar.view_mut((n_v, n_v), (n_w, n_w)).copy_from(m_w);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (ps, pk) in psi.iter().zip(p) {
        tm.view_mut((0, n_x), (n_x, n_p)).copy_from(&(ps * (-1.0 / gamma)));
        let inv = (pk * gamma)
            .clone()
            .cholesky()
            .ok_or_else(|| AnalysisError::InvalidInput("covariance sample is not positive definite".into()))?
            .inverse();
        mbar.view_mut((n_x, n_x), (n_p, n_p)).copy_from(&(inv * epsilon));
        let m = tm.transpose() * &mbar * &tm;
        let eig = m.symmetric_eigenvalues();
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
    }
    Ok(MetricBounds {
        m_lo: lo,
        m_hi: hi,
        epsilon,
    })
}

/// Least-squares exponential rate of a decaying error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `-slope` of `ln |e|` against time (1/ms).
    pub rate: f64,
    pub r_squared: f64,
    pub from_ms: f64,
    pub to_ms: f64,
    pub samples: usize,
}

/// Errors are clipped at this value before taking the logarithm.
pub const LOG_FLOOR: f64 = 1e-300;

/// Fits `ln |e(t)| ~ c - rate t` over `from_ms <= t <= to_ms`.
pub fn convergence_rate_fit(t: &[f64], err: &[f64], from_ms: f64, to_ms: f64) -> Result<RateFit, AnalysisError> {
    if t.len() != err.len() {
        return Err(AnalysisError::InvalidInput("time and error series differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(err)
        .filter(|(&tk, _)| tk >= from_ms && tk <= to_ms)
        .map(|(&tk, &e)| (tk, e.abs().max(LOG_FLOOR).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(AnalysisError::InvalidInput(format!(
            "fit window [{from_ms}, {to_ms}] ms holds fewer than two samples"
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(RateFit {
        rate: -slope,
        r_squared,
        from_ms: pts[0].0,
        to_ms: pts[pts.len() - 1].0,
        samples: pts.len(),
    })
}

/// Distance below which two replayed gate trajectories are treated as merged.
pub const MERGED_DISTANCE: f64 = 1e-9;

/// Runs the internal dynamics from `w_a` and `w_b` on the recorded drivers
/// and fits the decay rate of `|w_a(t) - w_b(t)|` over `[from_ms, to_ms]`,
/// stopping the window once the distance drops below [`MERGED_DISTANCE`].
pub fn gate_contraction_fit(
    model: &Model,
    traj: &Trajectory,
    w_a: &[f64],
    w_b: &[f64],
    from_ms: f64,
    to_ms: f64,
) -> Result<RateFit, AnalysisError> {
    let dt = uniform_step(&traj.t)?;
    let n_w = model.n_w();
    if w_a.len() != n_w || w_b.len() != n_w || traj.y.len() != model.n_drivers() {
        return Err(AnalysisError::InvalidInput("dimensions do not match the model".into()));
    }
    let eta = model.eta_true();
    let hold = MeasurementHold::Linear;
    let mut x: Vec<f64> = w_a.iter().chain(w_b).copied().collect();
    let mut ws = Rk4Workspace::new(2 * n_w);
    let n_d = traj.y.len();
    let (mut y0, mut y1, mut ys) = (vec![0.0; n_d], vec![0.0; n_d], vec![0.0; n_d]);
    let mut dist = vec![dist_of(&x, n_w)];
    for k in 0..traj.len() - 1 {
        let t = traj.t[k];
        if t >= to_ms {
            break;
        }
        sample(&traj.y, k, &mut y0);
        sample(&traj.y, k + 1, &mut y1);
        rk4_step(
            |s, x, dx| {
                hold.interpolate(&y0, &y1, ((s - t) / dt).clamp(0.0, 1.0), &mut ys);
                let (a, b) = x.split_at(n_w);
                let (da, db) = dx.split_at_mut(n_w);
                model.internal_rhs(&ys, &eta, a, da);
                model.internal_rhs(&ys, &eta, b, db);
            },
            t,
            &mut x,
            dt,
            &mut ws,
        )
        .map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
        dist.push(dist_of(&x, n_w));
    }
    let merged = dist
        .iter()
        .position(|&d| d < MERGED_DISTANCE)
        .map_or(f64::INFINITY, |k| traj.t[k]);
    convergence_rate_fit(&traj.t[..dist.len()], &dist, from_ms, to_ms.min(merged))
}

fn dist_of(x: &[f64], n: usize) -> f64 {
    (0..n).map(|i| (x[i] - x[n + i]).powi(2)).sum::<f64>().sqrt()
}

/// Tunables of [`diagnose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsOptions {
    pub window_ms: f64,
    pub stride_ms: f64,
    /// Target rate as a fraction of `min(alpha, lambda_w, gamma)`.
    pub rate_fraction: f64,
    pub zeta: Option<f64>,
    /// Fit window of the estimation-error rate; `None` skips the fit.
    pub fit_window_ms: Option<(f64, f64)>,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            window_ms: 10.0,
            stride_ms: 1.0,
            rate_fraction: 0.5,
            zeta: Some(0.5),
            fit_window_ms: None,
        }
    }
}

/// What [`diagnose`] needs to know about one recorded observer.
#[derive(Debug, Clone)]
pub struct ObserverUnderTest<'a> {
    pub prefix: String,
    /// The observer's model (one neuron of a network for member observers).
    pub model: &'a Model,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub gate_rates: Vec<GateRate>,
    pub lambda_w: f64,
    /// `2 mu_L / c` (identity metric on the voltages).
    pub lambda_v: f64,
    /// Worst voltage contraction seen along the run; the margin over
    /// `lambda_v` is `lambda_v_measured - lambda_v`.
    pub lambda_v_measured: f64,
    /// Per observer: target rate, Jacobian bound and metric bounds.
    pub metric: BTreeMap<String, MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub lambda: f64,
    pub sup_jacobian_norm: f64,
    pub bounds: MetricBounds,
    /// `m_hi / m_lo`, the robustness figure of the metric.
    pub condition: f64,
}

/// Combined per-scenario diagnostics, keyed by observer prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub pe: BTreeMap<String, PeReport>,
    pub p_bounds: BTreeMap<String, PBoundsReport>,
    pub contraction: ContractionReport,
    pub rate_fit: BTreeMap<String, RateFit>,
}

impl DiagnosticsReport {
    /// Every observer excited and inside its covariance bounds.
    pub fn all_pass(&self) -> bool {
        self.pe.values().all(|r| r.persistently_exciting) && self.p_bounds.values().all(|r| r.pass)
    }
}

/// Runs every check on a trajectory recorded with observer internals.
///
/// `spec` is the plant network; the regressor bound `c_bar` and the gate
/// Jacobian bound are the maxima seen along the run.
pub fn diagnose(
    traj: &Trajectory,
    spec: &NetworkSpec,
    observers: &[ObserverUnderTest<'_>],
    opts: &DiagnosticsOptions,
) -> Result<DiagnosticsReport, AnalysisError> {
    let rates = internal_contraction_rate(spec);
    let full = Model::new(spec, &Default::default()).map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
    let lambda_v_measured = measured_voltage_contraction(&full, &traj.v, &traj.w, &full.theta_true());

    let mut pe = BTreeMap::new();
    let mut p_bounds = BTreeMap::new();
    let mut metric = BTreeMap::new();
    let mut rate_fit = BTreeMap::new();
    for obs in observers {
        let series = ObserverSeries::from_trajectory(traj, &obs.prefix)?;
        let report = pe_gramian(&series.t, &series.psi_v, opts.window_ms, opts.stride_ms)?;
        let c_bar = series.psi_v.iter().map(spectral_norm).fold(0.0, f64::max);
        let bounds = match theoretical_p_bounds(obs.alpha, obs.beta, report.delta, opts.window_ms, c_bar, obs.p0) {
            Ok(b) => Some(b),
            Err(AnalysisError::NotExciting(_)) => None,
            Err(e) => return Err(e),
        };
        p_bounds.insert(obs.prefix.clone(), verify_p_bounds(&series.t, &series.p, bounds, opts.window_ms));
        pe.insert(obs.prefix.clone(), report);

        let m = obs.model;
        let column = |kind: &str, name: &str| -> Result<Vec<f64>, AnalysisError> {
            let col = format!("{}.{kind}.{name}", obs.prefix);
            traj.extra_column(&col)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| AnalysisError::InvalidInput(format!("trajectory has no column {col}")))
        };
        let y: Vec<Vec<f64>> = m.outputs().iter().map(|&i| traj.y[i].clone()).collect();
        let w_hat = m
            .gate_labels()
            .iter()
            .map(|l| column("w_hat", l).map(|c| c.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()))
            .collect::<Result<Vec<Vec<f64>>, _>>()?;
        let theta_names = m.theta_names();
        let theta_hat = theta_names
            .iter()
            .map(|n| column("theta", n))
            .collect::<Result<Vec<_>, _>>()?;
        let theta_last: Vec<f64> = theta_hat.iter().map(|c| c[c.len() - 1]).collect();
        let sup_j = sup_gate_jacobian_norm(m, &y, &w_hat, &theta_last);

        let lambda_w = local_lambda_w(&rates, m);
        let lambda = opts.rate_fraction * obs.alpha.min(lambda_w).min(obs.gamma);
        let eps = epsilon_formula(lambda, lambda_w, obs.gamma, 1.0, sup_j.max(f64::MIN_POSITIVE), opts.zeta)?;
        let n_w = m.n_w();
        let psi: Vec<DMatrix<f64>> = (0..series.t.len()).map(|k| series.psi_stacked(k, n_w)).collect();
        let bounds = metric_eigen_bounds(&psi, &series.p, series.n_v(), obs.gamma, eps, &DMatrix::identity(n_w, n_w))?;
        metric.insert(
            obs.prefix.clone(),
            MetricReport {
                lambda,
                sup_jacobian_norm: sup_j,
                bounds,
                condition: bounds.m_hi / bounds.m_lo,
            },
        );

        if let Some((from, to)) = opts.fit_window_ms {
            let mut err = vec![0.0; traj.len()];
            for (est, truth) in theta_hat.iter().zip(m.theta_true()) {
                err.iter_mut().zip(est).for_each(|(e, x)| *e += (x - truth).powi(2));
            }
            for (j, name) in m.eta_names().iter().enumerate() {
                let truth = m.eta_true()[j];
                let est = column("eta", name)?;
                err.iter_mut().zip(&est).for_each(|(e, x)| *e += (x - truth).powi(2));
            }
            err.iter_mut().for_each(|e| *e = e.sqrt());
            rate_fit.insert(obs.prefix.clone(), convergence_rate_fit(&traj.t, &err, from, to)?);
        }
    }
    Ok(DiagnosticsReport {
        pe,
        p_bounds,
        contraction: ContractionReport {
            gate_rates: rates.gates.clone(),
            lambda_w: rates.lambda_w,
            lambda_v: voltage_contraction_rate(spec),
            lambda_v_measured,
            metric,
        },
        rate_fit,
    })
}

/// Slowest rate among the gates the model actually carries (`1 / b` is the
/// time-constant bound of a synapse, so `2 / tau` covers both kinds).
fn local_lambda_w(rates: &InternalRates, model: &Model) -> f64 {
    let lw = model.gate_tau_upper().iter().map(|tau| 2.0 / tau).fold(f64::INFINITY, f64::min);
    if lw.is_finite() {
        lw
    } else {
        rates.lambda_w
    }
}
