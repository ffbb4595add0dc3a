//! Excitability of the Hodgkin-Huxley neuron: from rest, a weak current pulse
//! stays subthreshold and a slightly stronger one fires a spike.

use adaptive_neuro::integrator::{simulate, spike_times, InputSignal, ParameterSchedule, Plant, Pulse, SimulationOptions};
use adaptive_neuro::model::SystemState;
use adaptive_neuro::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rest = SystemState {
        v: vec![-64.0654],
        w: vec![0.06453, 0.57323, 0.32351],
    };
    let pulse = |start_ms, amplitude| Pulse {
        start_ms,
        width_ms: 1.0,
        amplitude,
    };
    let input = InputSignal::PulseTrain {
        baseline: 0.0,
        pulses: vec![pulse(10.0, 2.0), pulse(50.0, 5.7)],
    };
    let mut plant = Plant::new(presets::hh(), vec![input], ParameterSchedule::default())?;
    let traj = simulate(&mut plant, &rest, None, &SimulationOptions::new(100.0, 0.01))?;

    let v = &traj.v[0];
    for (from, to) in [(10.0, 50.0), (50.0, 100.0)] {
        let (a, b) = (traj.index_at(from), traj.index_at(to));
        let peak = v[a..b].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("after the pulse at {from:>4} ms: peak {peak:7.2} mV");
    }
    println!("spikes at {:?} ms", spike_times(&traj.t, v, 0.0, 1.0));
    Ok(())
}
