//! Shared fixtures for the benches.

use qpp_core::hardware::{CalibrationRecord, HardwareProfile, VoltageSolver};
use qpp_core::mesh::MeshSettings;
use qpp_core::{clements_decompose, haar_random, Unitary};

pub struct Fixture {
    pub target: Unitary,
    pub settings: MeshSettings,
    pub profile: HardwareProfile,
    pub solver: VoltageSolver,
}

pub fn fixture(n: usize, seed: u64) -> Fixture {
    let target = haar_random(n, seed).unwrap();
    let settings = clements_decompose(target.matrix()).unwrap().settings;
    let profile = HardwareProfile::calibrated(n, seed);
    let solver = VoltageSolver::new(&profile, &CalibrationRecord::exact(&profile)).unwrap();
    Fixture { target, settings, profile, solver }
}
