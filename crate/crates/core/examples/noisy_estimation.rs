//! Trade-off between tracking speed and noise sensitivity: the same noisy
//! trace estimated with a fast-forgetting and a slow-forgetting observer.

use std::path::Path;

use adaptive_neuro::experiments::{run_scenario, RunMode, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["fig5-hh-noisy-a", "fig5-hh-noisy-b"] {
        let cfg = ScenarioConfig::load(&dir.join(format!("{name}.toml")))?;
        let oc = cfg.observer.clone().unwrap();
        let r = run_scenario(&cfg, RunMode::Estimate, None)?;
        let t = &r.trajectory.t;
        let mu = r.trajectory.extra_column("obs0.theta.mu_Na/c").unwrap();
        let last: Vec<f64> = t.iter().zip(mu).filter(|(&t, _)| t >= cfg.t_end_ms - 2000.0).map(|(_, &x)| x).collect();
        let mean = last.iter().sum::<f64>() / last.len() as f64;
        let std = (last.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (last.len() - 1) as f64).sqrt();
        println!(
            "{name}: alpha {}, beta {}, gamma {}: mu_Na over the last 2 s {mean:.1} +- {std:.2} (true 120)",
            oc.alpha_per_ms, oc.beta, oc.gamma_per_ms
        );
    }
    Ok(())
}
