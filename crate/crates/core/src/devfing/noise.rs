//! Additive ageing noise in the log domain: `log(D) + K·η`, `η ~ U[0, 1)`
//! drawn independently per entry (rows L, C, R, Z in order, test points
//! within each row).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LogMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub k_scale: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(k_scale: f64, seed: u64) -> Self {
        assert!(k_scale >= 0.0, "noise scale must be non-negative");
        Self { k_scale, seed }
    }
}

pub fn inject_noise(logs: &LogMatrix, model: &NoiseModel) -> LogMatrix {
    let mut out = logs.clone();
    if model.k_scale == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    for row in out.rows_mut().iter_mut() {
        for v in row.iter_mut() {
            let eta: f64 = rng.random();
            *v += model.k_scale * eta;
        }
    }
    out
}
