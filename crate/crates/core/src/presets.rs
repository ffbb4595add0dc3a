//! Shipped model presets and spec files.

use std::path::Path;

use crate::error::{Error, ModelError};
use crate::model::{NetworkSpec, Parametrization, ThetaLayout};

const HH_TOML: &str = include_str!("../presets/hh.toml");
const HCO_TOML: &str = include_str!("../presets/hco.toml");

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 2] = ["hh", "hco"];

/// Hodgkin-Huxley neuron with gates `(m_Na, h_Na, m_K)`.
pub fn hh() -> NetworkSpec {
    parse_spec(HH_TOML).expect("shipped hh preset parses")
}

/// Half-centre oscillator with nominal calcium conductance 0.11.
pub fn hco() -> NetworkSpec {
    parse_spec(HCO_TOML).expect("shipped hco preset parses")
}

/// Spec plus its default parametrization.
///
/// `hh` uses `theta = (1, mu_Na, mu_K, mu_L) / c` with the three
/// half-activations as `eta`; `hco` uses the maximal conductances of both
/// neurons and no `eta`.
pub fn preset(name: &str) -> Result<(NetworkSpec, Parametrization), ModelError> {
    match name {
        "hh" => {
            let spec = hh();
            let eta = Parametrization::all_half_activations(&spec);
            Ok((spec, Parametrization::new(ThetaLayout::InverseCapacitance).with_eta(eta)))
        }
        "hco" => Ok((hco(), Parametrization::new(ThetaLayout::MaxConductances))),
        other => Err(ModelError::UnknownPreset(other.to_string())),
    }
}

/// Parses a network spec from TOML text.
pub fn parse_spec(text: &str) -> Result<NetworkSpec, ModelError> {
    let spec: NetworkSpec =
        toml::from_str(text).map_err(|e| ModelError::InvalidSpec(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<NetworkSpec, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_spec(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hh_table_rows() {
        let spec = hh();
        let n = &spec.neurons[0];
        let m = n.currents[0].m_kin.unwrap();
        assert_eq!(
            (m.rho, m.kappa, m.tau_min, m.tau_max, m.zeta, m.chi),
            (-40.0, 9.0, 0.04, 0.50, -38.0, 30.0)
        );
        assert_eq!((n.c, n.mu_leak, n.nu_leak), (1.0, 0.3, -54.4));
        assert_eq!(n.currents[1].p_exp, 4);
        assert_eq!(spec.n_gates(), 3);
    }

    #[test]
    fn hco_table_rows() {
        let spec = hco();
        assert_eq!(spec.n_neurons(), 2);
        let h_ca = spec.neurons[0].currents[2].h_kin.unwrap();
        assert_eq!(
            (h_ca.rho, h_ca.kappa, h_ca.tau_min, h_ca.tau_max, h_ca.zeta, h_ca.chi),
            (-82.1, -5.5, 40.49, 126.51, -92.48, -50.24)
        );
        assert_eq!(spec.neurons[0].synapses[0].presynaptic, 1);
        assert_eq!(spec.neurons[1].synapses[0].presynaptic, 0);
        let s = spec.neurons[1].synapses[0].kinetics;
        assert_eq!((s.rho, s.kappa, s.a, s.b), (-45.0, 2.0, 2.0, 0.1));
        assert_eq!(spec.n_gates(), 12);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("lif"), Err(ModelError::UnknownPreset(_))));
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = hco();
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(parse_spec(&text).unwrap(), spec);
    }
}
