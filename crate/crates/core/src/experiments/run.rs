use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{diagnose, DiagnosticsReport, ObserverUnderTest};
use crate::batch::{cost_landscape, write_landscape_csv, InputSource, LandscapeRow};
use crate::error::Error;
use crate::experiments::{apply_mismatch, ObserverConfig, ObserverKind, ScenarioConfig};
use crate::integrator::{count_spikes, simulate, Estimator, NoiseSpec, Plant, SimulationOptions, Trajectory};
use crate::model::{Model, NetworkSpec, Parametrization, SystemState};
use crate::observers::{
    AugmentedObserver, AugmentedObserverState, Hyperparameters, NetworkObserver, ObserverSaturation,
    RlsObserver, RlsObserverState, SaturationBox, DEFAULT_MARGIN_FRACTION,
};

/// What a scenario run produces besides the plant trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Plant only.
    Simulate,
    /// Plant with the configured observer.
    Estimate,
    /// Plant, then the output-error cost sweep.
    Landscape,
}

/// Headline numbers of a run, all recomputable from the trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub dt: f64,
    /// Keyed `{observer}.{parameter}`; values at the final time.
    pub params_true: BTreeMap<String, f64>,
    pub params_final: BTreeMap<String, f64>,
    pub rel_errors: BTreeMap<String, f64>,
    /// Upward crossings of 0 mV per neuron.
    pub spikes: Vec<usize>,
    pub diagnostics_path: Option<String>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub summary: Summary,
    pub trajectory: Trajectory,
    pub diagnostics: Option<DiagnosticsReport>,
    pub landscape: Option<Vec<LandscapeRow>>,
    /// Directory the files went to, when one was given.
    pub out_dir: Option<PathBuf>,
}

/// Spike threshold (mV) and refractory period (ms) used in summaries.
pub const SPIKE_THRESHOLD_MV: f64 = 0.0;
pub const SPIKE_REFRACTORY_MS: f64 = 1.0;

/// Runs `cfg` and, with `out_dir`, writes `out_dir/<name>/` containing
/// `trajectory.csv`, `summary.json`, the resolved `config.toml` and, when
/// produced, `diagnostics.json` and `landscape.csv`.
pub fn run_scenario(cfg: &ScenarioConfig, mode: RunMode, out_dir: Option<&Path>) -> Result<ScenarioResult, Error> {
    cfg.validate()?;
    let started = Instant::now();
    let (nominal, par) = cfg.resolve_model()?;
    let x0 = initial_state(cfg, &nominal)?;
    let plant_spec = match cfg.mismatch {
        Some(m) => apply_mismatch(&nominal, m.fraction, m.seed),
        None => nominal.clone(),
    };
    let mut plant = Plant::new(plant_spec, cfg.input.clone(), cfg.schedule.clone())?;
    let opts = SimulationOptions {
        t_end_ms: cfg.t_end_ms,
        dt_ms: cfg.dt_ms,
        noise: (cfg.noise_sigma_mv > 0.0).then_some(NoiseSpec {
            seed: cfg.seed,
            sigma_mv: cfg.noise_sigma_mv,
        }),
        hold: cfg.hold,
        record_every: cfg.record_every,
    };

    let dir = match out_dir {
        Some(d) => {
            let d = d.join(&cfg.name);
            fs::create_dir_all(&d).map_err(|source| Error::Io {
                path: d.display().to_string(),
                source,
            })?;
            Some(d)
        }
        None => None,
    };

    let mut built = match mode {
        RunMode::Estimate => {
            let oc = cfg
                .observer
                .as_ref()
                .ok_or_else(|| Error::Config(format!("{}: no [observer] section", cfg.name)))?;
            Some(build_observer(oc, &nominal, &par)?)
        }
        _ => None,
    };
    let mut traj = simulate(&mut plant, &x0, built.as_mut().map(|b| b.as_estimator()), &opts)?;

    let landscape = match mode {
        RunMode::Landscape => {
            let lc = cfg
                .landscape
                .as_ref()
                .ok_or_else(|| Error::Config(format!("{}: no [landscape] section", cfg.name)))?;
            let model = Model::new(&nominal, &par)?;
            let index = model
                .theta_names()
                .iter()
                .position(|n| *n == lc.parameter)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown landscape parameter `{}` (have {:?})",
                        lc.parameter,
                        model.theta_names()
                    ))
                })?;
            let base = lc.base.clone().unwrap_or_else(|| model.theta_true());
            let rows = cost_landscape(
                &model,
                &base,
                index,
                &lc.values(),
                &traj,
                lc.horizon_ms,
                InputSource::Signals(&cfg.input),
            )?;
            if let Some(d) = &dir {
                write_landscape_csv(&rows, &lc.parameter, &d.join("landscape.csv"))?;
            }
            Some(rows)
        }
        _ => None,
    };

    if let Some(d) = &dir {
        let path = d.join("trajectory.csv");
        traj.write_csv(&path)?;
        // the summary is computed from what a reader of the file sees
        traj = Trajectory::read_csv(&path)?;
        write_text(&d.join("config.toml"), &cfg.to_toml()?)?;
    }

    let members = built.as_ref().map(|b| b.members()).unwrap_or_default();
    let diagnostics = match cfg.observer.as_ref() {
        Some(oc) if built.is_some() && oc.record_internals => Some(diagnose_trajectory(cfg, &traj)?),
        _ => None,
    };
    let diagnostics_path = match (&dir, &diagnostics) {
        (Some(d), Some(r)) => {
            let p = d.join("diagnostics.json");
            write_text(&p, &to_json(r)?)?;
            Some(p.display().to_string())
        }
        _ => None,
    };

    let truth = truth_values(&plant.spec_at(cfg.t_end_ms), &par, &members)?;
    let mut summary = summarize(&cfg.name, cfg.seed, cfg.dt_ms, &traj, &truth);
    summary.diagnostics_path = diagnostics_path;
    summary.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    if let Some(d) = &dir {
        write_text(&d.join("summary.json"), &to_json(&summary)?)?;
    }
    Ok(ScenarioResult {
        summary,
        trajectory: traj,
        diagnostics,
        landscape,
        out_dir: dir,
    })
}

/// Diagnostics of a trajectory produced by `cfg` in estimate mode with
/// observer internals recorded.
pub fn diagnose_trajectory(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<DiagnosticsReport, Error> {
    let oc = cfg
        .observer
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{}: no [observer] section", cfg.name)))?;
    let (nominal, par) = cfg.resolve_model()?;
    let members = member_models(oc.kind, &nominal, &par)?;
    let plant_spec = match cfg.mismatch {
        Some(m) => apply_mismatch(&nominal, m.fraction, m.seed),
        None => nominal,
    };
    let under_test: Vec<ObserverUnderTest<'_>> = members
        .iter()
        .map(|(prefix, model)| ObserverUnderTest {
            prefix: prefix.clone(),
            model,
            alpha: oc.alpha_per_ms,
            beta: oc.beta,
            gamma: oc.gamma_per_ms,
            p0: oc.p0,
        })
        .collect();
    let opts = cfg.diagnostics.unwrap_or_default();
    Ok(diagnose(traj, &plant_spec, &under_test, &opts)?)
}

/// `(column, key, true value)` of every estimated parameter.
type Truth = Vec<(String, String, f64)>;

fn truth_values(spec: &NetworkSpec, par: &Parametrization, members: &[(String, Model)]) -> Result<Truth, Error> {
    let mut out = Vec::new();
    for (prefix, model) in members {
        let neurons: Vec<usize> = model.outputs().to_vec();
        let m = Model::for_neurons(spec, par, &neurons)?;
        for (name, val) in m.theta_names().into_iter().zip(m.theta_true()) {
            out.push((format!("{prefix}.theta.{name}"), format!("{prefix}.{name}"), val));
        }
        for (name, val) in m.eta_names().iter().zip(m.eta_true()) {
            out.push((format!("{prefix}.eta.{name}"), format!("{prefix}.{name}"), val));
        }
    }
    Ok(out)
}

/// Summary of a trajectory; `truth` lists `(column, key, true value)`.
/// Wall time and diagnostics path are left empty.
pub(crate) fn summarize(name: &str, seed: u64, dt: f64, traj: &Trajectory, truth: &Truth) -> Summary {
    let mut params_true = BTreeMap::new();
    let mut params_final = BTreeMap::new();
    let mut rel_errors = BTreeMap::new();
    for (col, key, val) in truth {
        if let Some(last) = traj.extra_column(col).and_then(|c| c.last()) {
            params_true.insert(key.clone(), *val);
            params_final.insert(key.clone(), *last);
            rel_errors.insert(key.clone(), (last - val).abs() / val.abs());
        }
    }
    Summary {
        scenario: name.to_string(),
        seed,
        dt,
        params_true,
        params_final,
        rel_errors,
        spikes: traj
            .v
            .iter()
            .map(|v| count_spikes(&traj.t, v, SPIKE_THRESHOLD_MV, SPIKE_REFRACTORY_MS))
            .collect(),
        diagnostics_path: None,
        wall_time_ms: 0.0,
    }
}

/// Recomputes the summary of a run from its output directory.
pub fn summary_from_files(cfg: &ScenarioConfig, dir: &Path) -> Result<Summary, Error> {
    let traj = Trajectory::read_csv(&dir.join("trajectory.csv"))?;
    let (nominal, par) = cfg.resolve_model()?;
    let mut members = Vec::new();
    if let Some(oc) = &cfg.observer {
        members = member_models(oc.kind, &nominal, &par)?;
    }
    let plant_spec = match cfg.mismatch {
        Some(m) => apply_mismatch(&nominal, m.fraction, m.seed),
        None => nominal,
    };
    let plant = Plant::new(plant_spec, cfg.input.clone(), cfg.schedule.clone())?;
    let truth = truth_values(&plant.spec_at(cfg.t_end_ms), &par, &members)?;
    Ok(summarize(&cfg.name, cfg.seed, cfg.dt_ms, &traj, &truth))
}

fn initial_state(cfg: &ScenarioConfig, nominal: &NetworkSpec) -> Result<SystemState, Error> {
    let x0 = SystemState {
        v: cfg.plant.v0_mv.clone(),
        w: cfg.plant.w0.clone(),
    };
    if cfg.plant.burn_in_ms <= 0.0 {
        return Ok(x0);
    }
    let mut plant = Plant::new(nominal.clone(), cfg.input.clone(), Default::default())?;
    let mut opts = SimulationOptions::new(cfg.plant.burn_in_ms, cfg.dt_ms);
    // only the end state is needed
    opts.record_every = opts.n_steps().max(1);
    let tr = simulate(&mut plant, &x0, None, &opts)?;
    let k = tr.len() - 1;
    Ok(SystemState {
        v: tr.v.iter().map(|s| s[k]).collect(),
        w: tr.w.iter().map(|s| s[k]).collect(),
    })
}

// built once per run, so the size difference does not matter
#[allow(clippy::large_enum_variant)]
enum BuiltObserver {
    Rls(RlsObserver, Model),
    Augmented(AugmentedObserver),
    Network(NetworkObserver),
}

impl BuiltObserver {
    fn as_estimator(&mut self) -> &mut dyn Estimator {
        match self {
            BuiltObserver::Rls(o, _) => o,
            BuiltObserver::Augmented(o) => o,
            BuiltObserver::Network(o) => o,
        }
    }

    fn members(&self) -> Vec<(String, Model)> {
        match self {
            BuiltObserver::Rls(_, m) => vec![("obs0".into(), m.clone())],
            BuiltObserver::Augmented(o) => vec![("obs0".into(), o.model().clone())],
            BuiltObserver::Network(o) => o
                .members()
                .iter()
                .enumerate()
                .map(|(i, m)| (format!("obs{i}"), m.model().clone()))
                .collect(),
        }
    }
}

fn member_models(kind: ObserverKind, spec: &NetworkSpec, par: &Parametrization) -> Result<Vec<(String, Model)>, Error> {
    Ok(match kind {
        ObserverKind::Network => (0..spec.n_neurons())
            .map(|i| Ok((format!("obs{i}"), Model::for_neurons(spec, par, &[i])?)))
            .collect::<Result<_, Error>>()?,
        _ => vec![("obs0".into(), Model::new(spec, par)?)],
    })
}

/// `values` for member `i` of `n`: shared when it has `len` entries,
/// the `i`-th chunk when it has `n * len`.
fn member_slice(what: &str, values: &[f64], i: usize, n: usize, len: usize) -> Result<Vec<f64>, Error> {
    if values.len() == len {
        Ok(values.to_vec())
    } else if values.len() == n * len {
        Ok(values[i * len..(i + 1) * len].to_vec())
    } else {
        Err(Error::Config(format!(
            "{what} has {} values, expected {len} (shared) or {} (per member)",
            values.len(),
            n * len
        )))
    }
}

fn build_observer(oc: &ObserverConfig, spec: &NetworkSpec, par: &Parametrization) -> Result<BuiltObserver, Error> {
    let hyper = Hyperparameters::new(oc.alpha_per_ms, oc.beta, oc.gamma_per_ms, oc.p0)?;
    let members = member_models(oc.kind, spec, par)?;
    let n = members.len();
    let mut built = Vec::with_capacity(n);
    for (i, (prefix, model)) in members.into_iter().enumerate() {
        let v = member_slice("v_hat0_mv", &oc.v_hat0_mv, i, n, model.n_v())?;
        let w = member_slice("w_hat0", &oc.w_hat0, i, n, model.n_w())?;
        let th = member_slice("theta_hat0", &oc.theta_hat0, i, n, model.n_theta())?;
        let eta = member_slice("eta_hat0_mv", &oc.eta_hat0_mv, i, n, model.n_eta())?;
        if oc.kind == ObserverKind::Rls {
            let sat = SaturationBox::uniform(model.n_w(), -0.05, 1.05, DEFAULT_MARGIN_FRACTION);
            let init = RlsObserverState::initial(v, w, th, oc.p0);
            let obs = RlsObserver::new(model.clone(), hyper, init, sat)?.recording_internals(oc.record_internals);
            return Ok(BuiltObserver::Rls(obs, model));
        }
        let sat = ObserverSaturation::default_for(&th, model.n_w(), model.n_eta());
        let init = AugmentedObserverState::initial(v, w, th, eta, oc.p0);
        let obs = AugmentedObserver::new(model, oc.variant, hyper, init, sat)?
            .with_prefix(&prefix)
            .recording_internals(oc.record_internals);
        built.push(obs);
    }
    Ok(match oc.kind {
        ObserverKind::Network => BuiltObserver::Network(NetworkObserver::new(built)?),
        _ => BuiltObserver::Augmented(built.pop().expect("one member")),
    })
}

fn to_json<T: Serialize>(x: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(x).map_err(|e| Error::Config(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
