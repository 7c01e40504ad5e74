//! Authentication accuracy under simulated ageing noise.
//!
//! A device is enrolled once from its clean signature. For each noise scale
//! `K`, every trial perturbs the log features, re-binarizes, reproduces the
//! key through the sketch and compares it with the enrolled key. All trials
//! are genuine attempts, so accuracy reduces to accepts / trials.
//!
//! Trial `i` draws its noise from a seed derived from `(seed, i)` only, so
//! sweeps at different `t` (or different `K`) see the same `η` draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    authenticate, fe_generate, fe_reproduce, inject_noise, AuthDecision, DevfingError,
    LcrFeatureMatrix, NoiseModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: f64,
    pub trials: usize,
    pub accepts: usize,
    pub accuracy: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "K,trials,accepts,accuracy";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.k, self.trials, self.accepts, self.accuracy)
    }
}

/// SplitMix64 finaliser; decorrelates per-trial seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    mix(seed ^ mix(trial as u64))
}

pub fn accuracy_sweep(
    matrix: &LcrFeatureMatrix,
    t: usize,
    k_values: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, DevfingError> {
    if trials == 0 {
        return Err(DevfingError::NoTrials);
    }
    let logs = matrix.log_features();
    let enrolled = logs.binarize();
    let mut enroll_rng = ChaCha8Rng::seed_from_u64(mix(seed));
    let (key, sketch) = fe_generate(&enrolled, t, &mut enroll_rng)?;

    k_values
        .iter()
        .map(|&k| {
            let mut accepts = 0;
            for trial in 0..trials {
                let noisy = inject_noise(&logs, &NoiseModel::new(k, trial_seed(seed, trial)));
                let reproduced = fe_reproduce(&noisy.binarize(), &sketch)?;
                if authenticate(&reproduced, &key) == AuthDecision::Accept {
                    accepts += 1;
                }
            }
            Ok(SweepRow {
                k,
                trials,
                accepts,
                accuracy: accepts as f64 / trials as f64,
            })
        })
        .collect()
}
