//! Output-error cost of a free-running predictor as the sodium conductance
//! sweeps across the spiking threshold. The cost is flat on either side and
//! jumps where the predictor starts to fire: gradient descent on it gets no
//! useful signal.

use adaptive_neuro::batch::{cost_landscape, largest_jump, InputSource};
use adaptive_neuro::integrator::{simulate, InputSignal, MeasurementHold, ParameterSchedule, Plant, Pulse, SimulationOptions};
use adaptive_neuro::model::{Model, Parametrization, SystemState, ThetaLayout};
use adaptive_neuro::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = presets::hh();
    let pulses = [(10.0, 2.0), (50.0, 5.7)]
        .map(|(start_ms, amplitude)| Pulse {
            start_ms,
            width_ms: 1.0,
            amplitude,
        })
        .to_vec();
    let input = InputSignal::PulseTrain { baseline: 0.0, pulses };
    let rest = SystemState {
        v: vec![-64.0654],
        w: vec![0.06453, 0.57323, 0.32351],
    };
    let mut plant = Plant::new(spec.clone(), vec![input], ParameterSchedule::default())?;
    let data = simulate(&mut plant, &rest, None, &SimulationOptions::new(100.0, 0.01))?;

    let model = Model::new(&spec, &Parametrization::new(ThetaLayout::InverseCapacitance))?;
    let base = model.theta_true();
    let index = model.theta_names().iter().position(|n| n == "mu_Na/c").unwrap();
    let values: Vec<f64> = (100..=115).map(f64::from).collect();
    let rows = cost_landscape(&model, &base, index, &values, &data, 100.0, InputSource::Recorded(MeasurementHold::Linear))?;

    println!("{:>8} {:>10} {:>10} {:>7}", "mu_Na", "cost", "gradient", "spikes");
    for r in &rows {
        println!("{:>8.1} {:>10.2} {:>10.2} {:>7}", r.value, r.cost, r.gradient, r.spikes);
    }
    if let Some(k) = largest_jump(&rows) {
        println!("largest jump between {} and {}", rows[k].value, rows[k + 1].value);
    }
    Ok(())
}
