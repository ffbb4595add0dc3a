//! With known gating kinetics the adaptive observer is recursive least
//! squares: its estimate at any time equals the exponentially weighted batch
//! least-squares fit on the filtered data seen so far.

use nalgebra::DMatrix;

use adaptive_neuro::batch::{batch_ls_solve, build_filtered_dataset, FilterSetup, Quadrature};
use adaptive_neuro::integrator::{simulate, InputSignal, MeasurementHold, ParameterSchedule, Plant, SimulationOptions};
use adaptive_neuro::model::{Model, Parametrization, SystemState, ThetaLayout};
use adaptive_neuro::observers::{Hyperparameters, RlsObserver, RlsObserverState, SaturationBox, DEFAULT_MARGIN_FRACTION};
use adaptive_neuro::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = presets::hh();
    let model = Model::new(&spec, &Parametrization::new(ThetaLayout::InverseCapacitance))?;
    let (alpha, gamma, p0) = (0.1, 1.0, 1.0);
    let theta0 = vec![2.0, 78.0, 78.0, 10.0];
    let w_sat = SaturationBox::uniform(3, -0.05, 1.05, DEFAULT_MARGIN_FRACTION);

    let mut rls = RlsObserver::new(
        model.clone(),
        Hyperparameters::new(alpha, 0.0, gamma, p0)?,
        RlsObserverState::initial(vec![-30.0], vec![0.0; 3], theta0.clone(), p0),
        w_sat.clone(),
    )?;
    let input = InputSignal::Sine {
        amplitude: 2.0,
        period_ms: 10.0,
        offset: 0.0,
        delay_ms: 0.0,
    };
    let mut plant = Plant::new(spec, vec![input], ParameterSchedule::default())?;
    let x0 = SystemState {
        v: vec![-30.0],
        w: vec![0.5; 3],
    };
    let traj = simulate(&mut plant, &x0, Some(&mut rls), &SimulationOptions::new(200.0, 0.01))?;

    let setup = FilterSetup {
        gamma,
        w_hat0: vec![0.0; 3],
        w_sat,
        hold: MeasurementHold::Linear,
    };
    let data = build_filtered_dataset(&traj, &model, &setup)?;
    let horizons = [25.0, 50.0, 100.0, 200.0];
    let p0_matrix = DMatrix::identity(4, 4) * p0;
    let batch = batch_ls_solve(&data, alpha, &p0_matrix, Some(&theta0), &horizons, Quadrature::EndCorrectedTrapezoid)?;

    for e in &batch.entries {
        let k = traj.index_at(e.t_ms);
        let online: Vec<f64> = model
            .theta_names()
            .iter()
            .map(|n| traj.extra_column(&format!("obs0.theta.{n}")).unwrap()[k])
            .collect();
        let gap = online.iter().zip(&e.theta_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("T = {:>5} ms  online {:>8.3?}  batch {:>8.3?}  max gap {gap:.1e}", e.t_ms, online, e.theta_hat);
    }
    Ok(())
}
