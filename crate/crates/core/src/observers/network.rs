use crate::error::{Error, ObserverError};
use crate::integrator::Estimator;
use crate::observers::AugmentedObserver;

/// Independent per-neuron observers advanced together.
///
/// Each member owns a single-neuron model (see [`crate::model::Model::for_neurons`])
/// and reads the full measurement vector only through the drivers of its
/// synaptic gates. The flat state is the concatenation of member states.
#[derive(Debug, Clone)]
pub struct NetworkObserver {
    members: Vec<AugmentedObserver>,
    offsets: Vec<usize>,
}

impl NetworkObserver {
    pub fn new(members: Vec<AugmentedObserver>) -> Result<Self, ObserverError> {
        if members.is_empty() {
            return Err(ObserverError::InvalidHyperparameters(
                "network observer needs at least one member".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(members.len() + 1);
        let mut acc = 0;
        for m in &members {
            offsets.push(acc);
            acc += m.dim();
        }
        offsets.push(acc);
        Ok(Self { members, offsets })
    }

    pub fn members(&self) -> &[AugmentedObserver] {
        &self.members
    }

    /// Slice of the flat state belonging to member `i`.
    pub fn member_state<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.offsets[i]..self.offsets[i + 1]]
    }
}

impl Estimator for NetworkObserver {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.members.iter().flat_map(|m| m.initial_state()).collect()
    }

    fn rhs(&mut self, _t: f64, x: &[f64], y: &[f64], u: &[f64], dx: &mut [f64]) {
        for (i, m) in self.members.iter_mut().enumerate() {
            let (a, b) = (self.offsets[i], self.offsets[i + 1]);
            m.eval(&x[a..b], y, u, &mut dx[a..b]);
        }
    }

    fn post_step(&mut self, t: f64, x: &mut [f64]) -> Result<(), Error> {
        for (i, m) in self.members.iter_mut().enumerate() {
            let (a, b) = (self.offsets[i], self.offsets[i + 1]);
            m.condition(t, &mut x[a..b])?;
        }
        Ok(())
    }

    fn column_names(&self) -> Vec<String> {
        self.members
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.column_names_with(&format!("obs{i}")))
            .collect()
    }

    fn record(&self, x: &[f64], out: &mut Vec<f64>) {
        for (i, m) in self.members.iter().enumerate() {
            m.record_into(self.member_state(x, i), out);
        }
    }
}
