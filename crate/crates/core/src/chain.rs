/// Discrete-time samples from a Langevin chain or a discretized trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleChain {
    pub states: Vec<Vec<f64>>,
    /// Metropolis decisions, one per stored state, when applicable.
    pub accepted: Option<Vec<bool>>,
    /// Seconds spent in the sampling phase.
    pub wall_time: f64,
}

impl SampleChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Trace of one coordinate.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for s in &self.states {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        self.accepted.as_ref().map(|a| {
            if a.is_empty() {
                f64::NAN
            } else {
                a.iter().filter(|&&b| b).count() as f64 / a.len() as f64
            }
        })
    }

    /// Applies `f` to every stored state in place.
    pub fn map_states(&mut self, mut f: impl FnMut(&mut [f64])) {
        for s in &mut self.states {
            f(s);
        }
    }
}
