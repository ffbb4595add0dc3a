//! Fixed-step RK4 integration of the plant, optionally coupled to an
//! estimator driven by noisy voltage measurements.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IntegrationError};
use crate::model::{gating_rhs, membrane_rhs, NetworkSpec, SystemState};

/// Scratch buffers for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn check_finite(d: &[f64], t: f64) -> Result<(), IntegrationError> {
    match d.iter().position(|x| !x.is_finite()) {
        Some(component) => Err(IntegrationError::NonFinite { component, t }),
        None => Ok(()),
    }
}

/// One classical Runge-Kutta step of `dx/dt = rhs(t, x)`, in place.
///
/// `rhs(t, x, dx)` writes the derivative into `dx`. Fails if any stage
/// derivative is not finite; `x` is left untouched in that case.
pub fn rk4_step<F>(
    mut rhs: F,
    t: f64,
    x: &mut [f64],
    dt: f64,
    ws: &mut Rk4Workspace,
) -> Result<(), IntegrationError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(IntegrationError::InvalidStep(dt));
    }
    let n = x.len();
    debug_assert_eq!(ws.k1.len(), n);
    let h2 = 0.5 * dt;

    rhs(t, x, &mut ws.k1);
    check_finite(&ws.k1, t)?;
    for i in 0..n {
        ws.tmp[i] = x[i] + h2 * ws.k1[i];
    }
    rhs(t + h2, &ws.tmp, &mut ws.k2);
    check_finite(&ws.k2, t + h2)?;
    for i in 0..n {
        ws.tmp[i] = x[i] + h2 * ws.k2[i];
    }
    rhs(t + h2, &ws.tmp, &mut ws.k3);
    check_finite(&ws.k3, t + h2)?;
    for i in 0..n {
        ws.tmp[i] = x[i] + dt * ws.k3[i];
    }
    rhs(t + dt, &ws.tmp, &mut ws.k4);
    check_finite(&ws.k4, t + dt)?;
    let h6 = dt / 6.0;
    for i in 0..n {
        x[i] += h6 * (ws.k1[i] + 2.0 * (ws.k2[i] + ws.k3[i]) + ws.k4[i]);
    }
    Ok(())
}

/// Applied current of one neuron (uA/cm^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    Constant {
        amplitude: f64,
    },
    /// `offset + amplitude sin(2 pi (t - delay) / period)`.
    Sine {
        amplitude: f64,
        period_ms: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        delay_ms: f64,
    },
    /// Rectangular pulses on top of a baseline.
    PulseTrain {
        #[serde(default)]
        baseline: f64,
        pulses: Vec<Pulse>,
    },
    /// Linear interpolation between `(t_ms, value)` points, held constant
    /// outside the covered range.
    PiecewiseLinear {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub start_ms: f64,
    pub width_ms: f64,
    pub amplitude: f64,
}

impl InputSignal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            InputSignal::Constant { amplitude } => *amplitude,
            InputSignal::Sine {
                amplitude,
                period_ms,
                offset,
                delay_ms,
            } => offset + amplitude * (2.0 * PI * (t - delay_ms) / period_ms).sin(),
            InputSignal::PulseTrain { baseline, pulses } => {
                baseline
                    + pulses
                        .iter()
                        .filter(|p| t >= p.start_ms && t < p.start_ms + p.width_ms)
                        .map(|p| p.amplitude)
                        .sum::<f64>()
            }
            InputSignal::PiecewiseLinear { points } => {
                if points.is_empty() {
                    return 0.0;
                }
                if t <= points[0][0] {
                    return points[0][1];
                }
                for pair in points.windows(2) {
                    let ([t0, u0], [t1, u1]) = (pair[0], pair[1]);
                    if t <= t1 {
                        return if t1 > t0 {
                            u0 + (u1 - u0) * (t - t0) / (t1 - t0)
                        } else {
                            u1
                        };
                    }
                }
                points[points.len() - 1][1]
            }
        }
    }

    /// Upper bound of `|u(t)|` over all `t`.
    pub fn bound(&self) -> f64 {
        match self {
            InputSignal::Constant { amplitude } => amplitude.abs(),
            InputSignal::Sine {
                amplitude, offset, ..
            } => offset.abs() + amplitude.abs(),
            InputSignal::PulseTrain { baseline, pulses } => {
                // the signal is piecewise constant and changes only at pulse starts and ends
                pulses
                    .iter()
                    .flat_map(|p| [p.start_ms, p.start_ms + p.width_ms])
                    .map(|t| self.value(t).abs())
                    .fold(baseline.abs(), f64::max)
            }
            InputSignal::PiecewiseLinear { points } => {
                points.iter().map(|p| p[1].abs()).fold(0.0, f64::max)
            }
        }
    }
}

/// Logistic time course `base + amplitude / (1 + exp(-(t - midpoint) / width))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub base: f64,
    pub amplitude: f64,
    pub midpoint_ms: f64,
    pub width_ms: f64,
}

impl Logistic {
    pub fn value(&self, t: f64) -> f64 {
        self.base + self.amplitude / (1.0 + (-(t - self.midpoint_ms) / self.width_ms).exp())
    }
}

/// A time-varying maximal conductance of the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledConductance {
    /// Target neuron; `None` applies to every neuron having the current.
    #[serde(default)]
    pub neuron: Option<usize>,
    /// Name of an ionic current or synapse.
    pub current: String,
    pub profile: Logistic,
}

/// Time-varying true parameters, evaluated at every RK4 stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSchedule {
    #[serde(default)]
    pub entries: Vec<ScheduledConductance>,
}

impl ParameterSchedule {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Overwrites the scheduled conductances of `spec` with their values at `t`.
    pub fn apply(&self, t: f64, spec: &mut NetworkSpec) {
        for e in &self.entries {
            let value = e.profile.value(t);
            for (i, n) in spec.neurons.iter_mut().enumerate() {
                if e.neuron.is_some_and(|k| k != i) {
                    continue;
                }
                for c in n.currents.iter_mut().filter(|c| c.name == e.current) {
                    c.mu = value;
                }
                for s in n.synapses.iter_mut().filter(|s| s.name == e.current) {
                    s.mu = value;
                }
            }
        }
    }

    /// Checks that every entry names an existing current.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<(), String> {
        for e in &self.entries {
            let found = spec.neurons.iter().enumerate().any(|(i, n)| {
                e.neuron.is_none_or(|k| k == i)
                    && (n.currents.iter().any(|c| c.name == e.current)
                        || n.synapses.iter().any(|s| s.name == e.current))
            });
            if !found {
                return Err(format!("schedule targets unknown current `{}`", e.current));
            }
        }
        Ok(())
    }
}

/// The true system: network spec, applied currents and parameter schedule.
#[derive(Debug, Clone)]
pub struct Plant {
    spec: NetworkSpec,
    scratch: NetworkSpec,
    inputs: Vec<InputSignal>,
    schedule: ParameterSchedule,
    u_buf: Vec<f64>,
}

impl Plant {
    /// `inputs` holds one signal per neuron, or a single signal applied to all.
    pub fn new(spec: NetworkSpec, inputs: Vec<InputSignal>, schedule: ParameterSchedule) -> Result<Self, Error> {
        spec.validate()?;
        let n = spec.n_neurons();
        let inputs = match inputs.len() {
            1 if n > 1 => vec![inputs[0].clone(); n],
            k if k == n => inputs,
            k => {
                return Err(Error::Config(format!(
                    "expected 1 or {n} input signals, got {k}"
                )))
            }
        };
        schedule.validate(&spec).map_err(Error::Config)?;
        Ok(Self {
            scratch: spec.clone(),
            spec,
            inputs,
            schedule,
            u_buf: vec![0.0; n],
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Spec with scheduled conductances evaluated at `t`.
    pub fn spec_at(&self, t: f64) -> NetworkSpec {
        let mut s = self.spec.clone();
        self.schedule.apply(t, &mut s);
        s
    }

    pub fn schedule(&self) -> &ParameterSchedule {
        &self.schedule
    }

    pub fn inputs(&self) -> &[InputSignal] {
        &self.inputs
    }

    pub fn n_v(&self) -> usize {
        self.spec.n_neurons()
    }

    pub fn n_w(&self) -> usize {
        self.spec.n_gates()
    }

    pub fn dim(&self) -> usize {
        self.n_v() + self.n_w()
    }

    pub fn input(&self, t: f64, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.inputs) {
            *o = s.value(t);
        }
    }

    /// Derivative of the stacked state `(v, w)`.
    pub fn rhs(&mut self, t: f64, x: &[f64], dx: &mut [f64]) {
        let n_v = self.n_v();
        if !self.schedule.is_empty() {
            self.schedule.apply(t, &mut self.scratch);
        }
        for (o, s) in self.u_buf.iter_mut().zip(&self.inputs) {
            *o = s.value(t);
        }
        let (v, w) = x.split_at(n_v);
        let (dv, dw) = dx.split_at_mut(n_v);
        membrane_rhs(&self.scratch, v, w, &self.u_buf, dv);
        gating_rhs(&self.scratch, v, w, dw);
    }
}

/// How sampled measurements are presented to the estimator between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementHold {
    /// Sample at the start of the step held over the step.
    Zero,
    /// Linear interpolation between the samples at both ends of the step.
    #[default]
    Linear,
}

impl MeasurementHold {
    /// Writes `a + s (b - a)` (linear) or `a` (zero order) into `out`,
    /// where `s in [0, 1]` is the position inside the step.
    #[inline]
    pub fn interpolate(self, a: &[f64], b: &[f64], s: f64, out: &mut [f64]) {
        match self {
            MeasurementHold::Zero => out.copy_from_slice(a),
            MeasurementHold::Linear => {
                for i in 0..out.len() {
                    out[i] = a[i] + s * (b[i] - a[i]);
                }
            }
        }
    }
}

/// Gaussian measurement noise, one draw per grid point and neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    pub sigma_mv: f64,
}

/// An ODE driven by the measured voltage and applied current.
pub trait Estimator {
    fn dim(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    /// Derivative at `t` given the measurement `y` and input `u` at that time.
    fn rhs(&mut self, t: f64, x: &[f64], y: &[f64], u: &[f64], dx: &mut [f64]);
    /// Called after every completed step (symmetrization, health checks).
    fn post_step(&mut self, _t: f64, _x: &mut [f64]) -> Result<(), Error> {
        Ok(())
    }
    /// Names of the recorded columns.
    fn column_names(&self) -> Vec<String>;
    /// Values of the recorded columns, appended to `out`.
    fn record(&self, x: &[f64], out: &mut Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub t_end_ms: f64,
    pub dt_ms: f64,
    pub noise: Option<NoiseSpec>,
    pub hold: MeasurementHold,
    /// Record every `record_every`-th grid point (the last one is always kept).
    pub record_every: usize,
}

impl SimulationOptions {
    pub fn new(t_end_ms: f64, dt_ms: f64) -> Self {
        Self {
            t_end_ms,
            dt_ms,
            noise: None,
            hold: MeasurementHold::Linear,
            record_every: 1,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end_ms / self.dt_ms).round() as usize
    }
}

/// Uniformly sampled record of a simulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// One series per neuron.
    pub v: Vec<Vec<f64>>,
    /// One series per gate.
    pub w: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// Measured voltages (equal to `v` without noise).
    pub y: Vec<Vec<f64>>,
    pub w_labels: Vec<String>,
    /// Estimator columns.
    pub extra_names: Vec<String>,
    pub extra: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn extra_column(&self, name: &str) -> Option<&[f64]> {
        self.extra_names
            .iter()
            .position(|n| n == name)
            .map(|k| self.extra[k].as_slice())
    }

    /// Index of the sample closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        match self.t.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.t.len() => self.t.len() - 1,
            Err(i) => {
                if (self.t[i] - t).abs() < (t - self.t[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..self.v.len()).map(|i| format!("v{i}")));
        h.extend(self.w_labels.iter().map(|l| format!("w.{l}")));
        h.extend((0..self.u.len()).map(|i| format!("u{i}")));
        h.extend((0..self.y.len()).map(|i| format!("y{i}")));
        h.extend(self.extra_names.iter().cloned());
        h
    }

    fn columns(&self) -> Vec<&[f64]> {
        let mut c: Vec<&[f64]> = vec![&self.t];
        for group in [&self.v, &self.w, &self.u, &self.y, &self.extra] {
            c.extend(group.iter().map(|s| s.as_slice()));
        }
        c
    }

    /// Writes the trajectory as CSV with 9 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<(), Error> {
        let io = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", self.header().join(",")).map_err(io)?;
        let cols = self.columns();
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            for (j, c) in cols.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format_value(c[k]));
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Reads a CSV written by [`Trajectory::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, Error> {
        let io = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io)?;
        let mut lines = BufReader::new(file).lines();
        let header: Vec<String> = match lines.next() {
            Some(l) => l.map_err(io)?.split(',').map(str::to_string).collect(),
            None => return Err(Error::Config(format!("{}: empty trajectory file", path.display()))),
        };
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Config(format!("{}: first column must be `t`", path.display())));
        }
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let mut count = 0;
            for (j, field) in line.split(',').enumerate() {
                let x: f64 = field.trim().parse().map_err(|_| {
                    Error::Config(format!(
                        "{}: line {}: invalid number `{field}`",
                        path.display(),
                        lineno + 2
                    ))
                })?;
                if j < data.len() {
                    data[j].push(x);
                }
                count += 1;
            }
            if count != header.len() {
                return Err(Error::Config(format!(
                    "{}: line {} has {count} fields, expected {}",
                    path.display(),
                    lineno + 2,
                    header.len()
                )));
            }
        }
        let mut traj = Trajectory::default();
        for (name, col) in header.into_iter().zip(data) {
            if name == "t" {
                traj.t = col;
            } else if let Some(l) = name.strip_prefix("w.") {
                traj.w_labels.push(l.to_string());
                traj.w.push(col);
            } else if is_indexed(&name, 'v') {
                traj.v.push(col);
            } else if is_indexed(&name, 'u') {
                traj.u.push(col);
            } else if is_indexed(&name, 'y') {
                traj.y.push(col);
            } else {
                traj.extra_names.push(name);
                traj.extra.push(col);
            }
        }
        Ok(traj)
    }
}

fn is_indexed(name: &str, prefix: char) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
}

/// Formats with 9 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{x:.8e}")
}

/// Rounds to the precision used in CSV output.
pub fn round_sig9(x: f64) -> f64 {
    format_value(x).parse().unwrap_or(x)
}

/// Number of upward crossings of `threshold`; crossings closer than
/// `refractory_ms` to the previous counted one are ignored.
pub fn count_spikes(t: &[f64], v: &[f64], threshold: f64, refractory_ms: f64) -> usize {
    spike_times(t, v, threshold, refractory_ms).len()
}

pub fn spike_times(t: &[f64], v: &[f64], threshold: f64, refractory_ms: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for k in 1..v.len().min(t.len()) {
        if v[k - 1] < threshold && v[k] >= threshold {
            if out.last().is_some_and(|&last| t[k] - last < refractory_ms) {
                continue;
            }
            out.push(t[k]);
        }
    }
    out
}

/// Integrates the plant and, when given, an estimator fed with the sampled
/// measurements `y_k = v(t_k) + e_k` and inputs `u(t_k)`.
///
/// The plant is stepped first so that both ends of the step are available to
/// the measurement hold; the estimator is then stepped with the same `dt`.
pub fn simulate(
    plant: &mut Plant,
    x0: &SystemState,
    mut estimator: Option<&mut dyn Estimator>,
    opts: &SimulationOptions,
) -> Result<Trajectory, Error> {
    let n_v = plant.n_v();
    let n_w = plant.n_w();
    if x0.v.len() != n_v || x0.w.len() != n_w {
        return Err(Error::Config(format!(
            "initial state has dimensions ({}, {}), plant needs ({n_v}, {n_w})",
            x0.v.len(),
            x0.w.len()
        )));
    }
    let dt = opts.dt_ms;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(IntegrationError::InvalidStep(dt).into());
    }
    let n_steps = opts.n_steps();
    let stride = opts.record_every.max(1);
    let n_rec = n_steps / stride + 1 + usize::from(!n_steps.is_multiple_of(stride));

    let mut rng = opts.noise.map(|n| ChaCha8Rng::seed_from_u64(n.seed));
    let normal = match opts.noise {
        Some(n) if n.sigma_mv > 0.0 => Some(
            Normal::new(0.0, n.sigma_mv)
                .map_err(|e| Error::Config(format!("invalid noise level: {e}")))?,
        ),
        Some(n) if n.sigma_mv < 0.0 => {
            return Err(Error::Config("noise sigma must be non-negative".into()))
        }
        _ => None,
    };
    let mut measure = |v: &[f64], y: &mut [f64]| {
        for i in 0..v.len() {
            y[i] = v[i];
            if let (Some(rng), Some(normal)) = (rng.as_mut(), normal.as_ref()) {
                y[i] += normal.sample(rng);
            }
        }
    };

    let mut x = x0.to_vec();
    let mut ws = Rk4Workspace::new(x.len());
    let mut y0 = vec![0.0; n_v];
    let mut y1 = vec![0.0; n_v];
    let mut u0 = vec![0.0; n_v];
    let mut u1 = vec![0.0; n_v];
    measure(&x[..n_v], &mut y0);
    plant.input(0.0, &mut u0);

    let mut est_x = estimator.as_ref().map(|e| e.initial_state()).unwrap_or_default();
    let mut est_ws = Rk4Workspace::new(est_x.len());
    let extra_names = estimator.as_ref().map(|e| e.column_names()).unwrap_or_default();
    let mut rec_buf = Vec::with_capacity(extra_names.len());
    let mut y_stage = vec![0.0; n_v];
    let mut u_stage = vec![0.0; n_v];

    let mut traj = Trajectory {
        t: Vec::with_capacity(n_rec),
        v: vec![Vec::with_capacity(n_rec); n_v],
        w: vec![Vec::with_capacity(n_rec); n_w],
        u: vec![Vec::with_capacity(n_rec); n_v],
        y: vec![Vec::with_capacity(n_rec); n_v],
        w_labels: plant
            .spec()
            .gate_layout()
            .into_iter()
            .map(|g| plant.spec().gate_label(g))
            .collect(),
        extra: vec![Vec::with_capacity(n_rec); extra_names.len()],
        extra_names,
    };

    let push = |traj: &mut Trajectory, t: f64, x: &[f64], u: &[f64], y: &[f64], est: &[f64], e: Option<&dyn Estimator>, buf: &mut Vec<f64>| {
        traj.t.push(t);
        for i in 0..n_v {
            traj.v[i].push(x[i]);
            traj.u[i].push(u[i]);
            traj.y[i].push(y[i]);
        }
        for j in 0..n_w {
            traj.w[j].push(x[n_v + j]);
        }
        if let Some(e) = e {
            buf.clear();
            e.record(est, buf);
            for (col, &val) in traj.extra.iter_mut().zip(buf.iter()) {
                col.push(val);
            }
        }
    };

    push(&mut traj, 0.0, &x, &u0, &y0, &est_x, estimator.as_deref(), &mut rec_buf);

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let t_next = (k + 1) as f64 * dt;
        rk4_step(|s, xs, dx| plant.rhs(s, xs, dx), t, &mut x, dt, &mut ws)?;
        measure(&x[..n_v], &mut y1);
        plant.input(t_next, &mut u1);

        if let Some(est) = estimator.as_deref_mut() {
            let hold = opts.hold;
            rk4_step(
                |s, xs, dx| {
                    let frac = ((s - t) / dt).clamp(0.0, 1.0);
                    hold.interpolate(&y0, &y1, frac, &mut y_stage);
                    hold.interpolate(&u0, &u1, frac, &mut u_stage);
                    est.rhs(s, xs, &y_stage, &u_stage, dx);
                },
                t,
                &mut est_x,
                dt,
                &mut est_ws,
            )?;
            est.post_step(t_next, &mut est_x)?;
        }

        if (k + 1) % stride == 0 || k + 1 == n_steps {
            push(&mut traj, t_next, &x, &u1, &y1, &est_x, estimator.as_deref(), &mut rec_buf);
        }
        std::mem::swap(&mut y0, &mut y1);
        std::mem::swap(&mut u0, &mut u1);
    }
    Ok(traj)
}
