use serde::{Deserialize, Serialize};

pub const SIGMA_FLOOR: f64 = 1e-4;

/// Moving-average mean and standard deviation of the learning signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningSignalState {
    pub mu: f64,
    pub sigma: f64,
    pub decay: f64,
}

impl LearningSignalState {
    pub fn new(decay: f64) -> Self {
        Self { mu: 0.0, sigma: 1.0, decay }
    }
}

/// Folds the batch statistics into the moving averages and returns
/// `(A - mu) / sigma` under the updated state.
pub fn normalize_signal(state: &mut LearningSignalState, batch: &[f64]) -> Vec<f64> {
    assert!(!batch.is_empty(), "normalize_signal needs a nonempty batch");
    let n = batch.len() as f64;
    let mean = batch.iter().sum::<f64>() / n;
    let std = (batch.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let d = state.decay;
    state.mu = d * state.mu + (1.0 - d) * mean;
    state.sigma = (d * state.sigma + (1.0 - d) * std).max(SIGMA_FLOOR);
    batch.iter().map(|a| (a - state.mu) / state.sigma).collect()
}
