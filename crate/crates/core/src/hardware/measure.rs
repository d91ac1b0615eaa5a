//! Simulated intensity measurements on the hardware model.

use rand_distr::{Distribution, Normal};

use super::profile::HardwareProfile;
use crate::analysis::AmplitudeMatrix;
use crate::error::Result;
use crate::mesh::{MeshSettings, TransferMatrix};
use crate::rng;

/// Inject light into every input in turn and record output powers through
/// the noisy, lossy chip. One phase-jitter draw applies to the whole
/// measurement; detector noise is drawn per input. Columns are normalized
/// to unit power before taking square roots.
pub fn measure_amplitude_matrix(profile: &HardwareProfile, settings: &MeshSettings, seed: u64) -> Result<AmplitudeMatrix> {
    let transfer = measured_transfer(profile, settings, seed)?;
    let m = transfer.elements();
    let n = profile.n;
    let normal = (profile.detector_noise_sigma > 0.0).then(|| Normal::new(0.0, profile.detector_noise_sigma).expect("finite sigma"));
    let mut powers = nalgebra::DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut det = rng::stream(rng::derive_seed(seed, 0x4445_5443), j as u64);
        for i in 0..n {
            let noise = normal.as_ref().map_or(0.0, |d| d.sample(&mut det));
            powers[(i, j)] = (m[(i, j)].norm_sqr() + noise).max(0.0);
        }
    }
    AmplitudeMatrix::from_powers(powers)
}

/// Transfer matrix of one measurement, including a seeded phase-jitter draw.
pub fn measured_transfer(profile: &HardwareProfile, settings: &MeshSettings, seed: u64) -> Result<TransferMatrix> {
    let mut rng = rng::stream(rng::derive_seed(seed, 0x4a49_5454), 0);
    let jitter = profile.sample_jitter(&mut rng);
    profile.transfer(settings, Some(&jitter))
}

/// Straight-through loss of every mode with the mesh set all-bar, in dB.
pub fn insertion_loss_per_mode(profile: &HardwareProfile) -> Result<Vec<f64>> {
    let t = profile.transfer(&MeshSettings::all_bar(profile.n), None)?;
    let m = t.elements();
    Ok((0..profile.n).map(|i| -10.0 * m[(i, i)].norm_sqr().log10()).collect())
}
