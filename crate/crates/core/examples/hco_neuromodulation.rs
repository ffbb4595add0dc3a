//! Two mutually inhibiting bursting neurons whose calcium conductance ramps
//! up slowly. One observer per neuron tracks the conductances from the two
//! noisy voltage traces, the drifting calcium conductance included.

use std::path::Path;

use adaptive_neuro::experiments::{calcium_schedule, run_scenario, RunMode, ScenarioConfig};
use adaptive_neuro::integrator::count_spikes;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/fig67-hco.toml");
    let cfg = ScenarioConfig::load(&path)?;
    let r = run_scenario(&cfg, RunMode::Estimate, None)?;
    let traj = &r.trajectory;

    for i in 0..2 {
        println!("neuron {i}: {} spikes", count_spikes(&traj.t, &traj.v[i], 0.0, 1.0));
    }
    println!("{:>7} {:>9} {:>9} {:>9} {:>9}", "t (s)", "mu_Ca", "obs0", "obs1", "mu_G[0]");
    let ca0 = traj.extra_column("obs0.theta.mu_Ca[0]").unwrap();
    let ca1 = traj.extra_column("obs1.theta.mu_Ca[1]").unwrap();
    let g0 = traj.extra_column("obs0.theta.mu_G[0]").unwrap();
    for s in 0..=10 {
        let t = 1000.0 * s as f64;
        let k = traj.index_at(t);
        println!(
            "{:>7} {:>9.4} {:>9.4} {:>9.4} {:>9.3}",
            s,
            calcium_schedule(t, cfg.t_end_ms),
            ca0[k],
            ca1[k],
            g0[k]
        );
    }
    Ok(())
}
