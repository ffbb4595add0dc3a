//! Online estimation of the membrane parameters and three half-activation
//! voltages of a Hodgkin-Huxley neuron from its voltage trace alone.

use adaptive_neuro::integrator::{simulate, InputSignal, ParameterSchedule, Plant, SimulationOptions};
use adaptive_neuro::model::{Model, Parametrization, SystemState, ThetaLayout};
use adaptive_neuro::observers::{AugmentedObserver, AugmentedObserverState, Hyperparameters, ObserverSaturation, ObserverVariant};
use adaptive_neuro::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = presets::hh();
    let par = Parametrization::new(ThetaLayout::InverseCapacitance).with_eta(Parametrization::all_half_activations(&spec));
    let model = Model::new(&spec, &par)?;

    let theta0 = vec![2.0, 78.0, 78.0, 10.0];
    let eta0 = vec![-20.0; 3];
    let init = AugmentedObserverState::initial(vec![-30.0], vec![0.0; 3], theta0.clone(), eta0, 1.0);
    let mut observer = AugmentedObserver::new(
        model.clone(),
        ObserverVariant::EquationError,
        Hyperparameters::new(0.1, 1.0, 1.0, 1.0)?,
        init,
        ObserverSaturation::default_for(&theta0, 3, 3),
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
    let mut opts = SimulationOptions::new(250.0, 0.01);
    opts.record_every = 100;
    let traj = simulate(&mut plant, &x0, Some(&mut observer), &opts)?;

    let names: Vec<String> = model.theta_names().iter().chain(model.eta_names()).cloned().collect();
    let truth: Vec<f64> = model.theta_true().into_iter().chain(model.eta_true()).collect();
    let columns: Vec<&[f64]> = names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let group = if k < model.n_theta() { "theta" } else { "eta" };
            traj.extra_column(&format!("obs0.{group}.{n}")).expect("recorded estimate")
        })
        .collect();

    print!("{:>6}", "t");
    names.iter().for_each(|n| print!(" {n:>9}"));
    println!();
    for t in [0.0, 25.0, 50.0, 100.0, 150.0, 200.0, 250.0] {
        let k = traj.index_at(t);
        print!("{t:>6}");
        columns.iter().for_each(|c| print!(" {:>9.3}", c[k]));
        println!();
    }
    print!("{:>6}", "true");
    truth.iter().for_each(|x| print!(" {x:>9.3}"));
    println!();
    Ok(())
}
