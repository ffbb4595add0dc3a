//! Convergence diagnostics for an estimation run: excitation level of the
//! regressor, covariance bounds, contraction rates and the fitted decay of
//! the estimation error.

use std::path::Path;

use adaptive_neuro::analysis::internal_contraction_rate;
use adaptive_neuro::experiments::{run_scenario, RunMode, ScenarioConfig};
use adaptive_neuro::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rates = internal_contraction_rate(&presets::hh());
    for g in &rates.gates {
        println!("gate {:<6} contracts at {:.4} /ms", g.gate, g.rate);
    }
    println!("internal dynamics contract at {:.4} /ms\n", rates.lambda_w);

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/fig4-hh-noiseless.toml");
    let cfg = ScenarioConfig::load(&path)?;
    let r = run_scenario(&cfg, RunMode::Estimate, None)?;
    let d = r.diagnostics.expect("the scenario asks for diagnostics");

    for (name, pe) in &d.pe {
        println!(
            "{name}: excitation delta {:.3e} over {} ms windows (threshold {:.3e}): {}",
            pe.delta,
            pe.window_ms,
            pe.threshold,
            if pe.persistently_exciting { "exciting" } else { "not exciting" }
        );
    }
    for (name, p) in &d.p_bounds {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.3e}"));
        println!(
            "{name}: eig P after the first window in [{:.3e}, {:.3e}], bounds [{}, {}]: {}",
            p.empirical_min,
            p.empirical_max,
            fmt(p.p_lo),
            fmt(p.p_hi),
            if p.pass { "inside" } else { "violated" }
        );
    }
    for (name, f) in &d.rate_fit {
        println!(
            "{name}: error decays at {:.4} /ms over [{}, {}] ms (r^2 {:.3})",
            f.rate, f.from_ms, f.to_ms, f.r_squared
        );
    }
    println!("all checks pass: {}", d.all_pass());
    Ok(())
}
