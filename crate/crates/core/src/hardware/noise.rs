//! Fitting the noise model to a target ensemble fidelity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::measure_amplitude_matrix;
use super::profile::HardwareProfile;
use crate::analysis::amplitude_fidelity;
use crate::compiler::{clements_decompose, haar_ensemble};
use crate::error::{validation, Result};
use crate::mesh::Unitary;

/// Amplitude fidelity of every target compiled and measured on `profile`.
/// Measurement `i` uses the stream `(seed, i)`.
pub fn ensemble_fidelities(profile: &HardwareProfile, targets: &[Unitary], seed: u64) -> Result<Vec<f64>> {
    targets
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let settings = clements_decompose(u.matrix())?.settings;
            let measured = measure_amplitude_matrix(profile, &settings, crate::rng::derive_seed(seed, i as u64))?;
            amplitude_fidelity(u, &measured)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub phase_noise_sigma_radians: f64,
    pub splitter_sigma_radians: f64,
    pub haar_mean_fidelity: f64,
    pub count: usize,
    pub seed: u64,
}

/// Bisect the phase jitter so that the Haar-mean fidelity of `count`
/// matrices on `base` (with splitter spread `splitter_sigma`) hits
/// `target_mean`.
pub fn calibrate_noise(
    base: &HardwareProfile,
    target_mean: f64,
    splitter_sigma: f64,
    count: usize,
    seed: u64,
) -> Result<NoiseCalibration> {
    if !(0.0 < target_mean && target_mean < 1.0) || count == 0 {
        return validation("target mean must lie in (0, 1) and count must be positive");
    }
    let targets = haar_ensemble(base.n, count, seed)?;
    let mean_at = |sigma: f64| -> Result<f64> {
        let p = base.clone().with_noise(sigma, splitter_sigma, seed);
        let f = ensemble_fidelities(&p, &targets, seed)?;
        Ok(f.iter().sum::<f64>() / f.len() as f64)
    };
    let (mut lo, mut hi) = (0.0, 0.05);
    if mean_at(lo)? < target_mean {
        return validation("splitter errors alone already push the fidelity below the target");
    }
    while mean_at(hi)? > target_mean {
        hi *= 2.0;
        if hi > 10.0 {
            return validation("no phase noise level reaches the target fidelity");
        }
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid)? > target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    Ok(NoiseCalibration {
        phase_noise_sigma_radians: sigma,
        splitter_sigma_radians: splitter_sigma,
        haar_mean_fidelity: mean_at(sigma)?,
        count,
        seed,
    })
}
