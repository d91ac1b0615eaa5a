use std::f64::consts::{FRAC_PI_4, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::heater::{
    CrosstalkDoc, CrosstalkMatrix, HeaterModel, DEFAULT_ALPHA, DEFAULT_RESISTANCE, DEFAULT_SPAN,
};
use crate::error::{validation, QppError, Result};
use crate::mesh::{
    addresses, apply_output_phases, apply_rows, cell_count, cell_matrix, column_cells, column_count,
    scale_rows, CMatrix, CellSetting, LossModel, MeshSettings, TransferMatrix,
};
use crate::rng;

/// Default thermal coupling between the two heaters of one cell, as a
/// fraction of the receiving heater's α. Order-of-magnitude guess.
pub const DEFAULT_SAME_CELL_CROSSTALK: f64 = 0.02;
/// Default coupling to heaters of neighbouring cells.
pub const DEFAULT_NEIGHBOUR_CROSSTALK: f64 = 0.01;

/// Phase jitter that puts the 20-mode Haar-mean amplitude fidelity at 0.974
/// with [`CALIBRATED_SPLITTER_SIGMA`]. Output of
/// `calibrate_noise(&HardwareProfile::nominal(20, 0), 0.974, 0.01, 1000, 0)`.
pub const CALIBRATED_PHASE_NOISE: f64 = 0.10457634301856161;
/// Spread of per-coupler splitting-angle errors in the calibrated profile.
pub const CALIBRATED_SPLITTER_SIGMA: f64 = 0.01;

pub const DEFAULT_WAVELENGTH_NM: f64 = 1562.0;

/// Machine model of a processor.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    pub n: usize,
    /// Indexed by heater id (see [`super::heater_id`]).
    pub heaters: Vec<HeaterModel>,
    pub crosstalk: CrosstalkMatrix,
    pub loss: LossModel,
    /// Splitting-angle deviation from 50:50 of the input and output coupler
    /// of every cell, in address order (radians).
    pub splitter_error: Vec<[f64; 2]>,
    /// Per-setting Gaussian jitter on θ and φ (radians).
    pub phase_noise_sigma: f64,
    /// Additive Gaussian noise on detected powers, relative to unit input.
    pub detector_noise_sigma: f64,
    pub wavelength_nm: f64,
}

impl HardwareProfile {
    /// Noise-free, lossless chip with nominal heaters and default crosstalk.
    pub fn ideal(n: usize) -> Self {
        let heaters = vec![HeaterModel::with_span(0.0, DEFAULT_ALPHA, DEFAULT_RESISTANCE, DEFAULT_SPAN); 2 * cell_count(n)];
        let crosstalk = CrosstalkMatrix::nearest_neighbour(
            n,
            &heaters,
            DEFAULT_SAME_CELL_CROSSTALK,
            DEFAULT_NEIGHBOUR_CROSSTALK,
        );
        Self {
            n,
            heaters,
            crosstalk,
            loss: LossModel::lossless(n),
            splitter_error: vec![[0.0, 0.0]; cell_count(n)],
            phase_noise_sigma: 0.0,
            detector_noise_sigma: 0.0,
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
        }
    }

    /// Noise-free chip with the default loss budget and seeded
    /// fabrication spread of the heaters (random φ₀, ±5 % α, ±2 % R).
    pub fn nominal(n: usize, seed: u64) -> Self {
        let mut rng = rng::stream(rng::derive_seed(seed, 0x4845_4154), 0);
        let heaters: Vec<HeaterModel> = (0..2 * cell_count(n))
            .map(|_| {
                let phi0 = rng.random_range(0.0..TAU);
                let alpha = DEFAULT_ALPHA * rng.random_range(0.95..1.05);
                let resistance = DEFAULT_RESISTANCE * rng.random_range(0.98..1.02);
                HeaterModel::with_span(phi0, alpha, resistance, DEFAULT_SPAN)
            })
            .collect();
        let crosstalk = CrosstalkMatrix::nearest_neighbour(
            n,
            &heaters,
            DEFAULT_SAME_CELL_CROSSTALK,
            DEFAULT_NEIGHBOUR_CROSSTALK,
        );
        Self { heaters, crosstalk, loss: LossModel::default_for(n), ..Self::ideal(n) }
    }

    /// Nominal chip carrying the calibrated noise model.
    pub fn calibrated(n: usize, seed: u64) -> Self {
        Self::nominal(n, seed).with_noise(CALIBRATED_PHASE_NOISE, CALIBRATED_SPLITTER_SIGMA, seed)
    }

    /// Copy with phase jitter `phase_sigma` and fresh seeded per-coupler
    /// splitting errors of spread `splitter_sigma` (clamped below 0.5 rad).
    pub fn with_noise(mut self, phase_sigma: f64, splitter_sigma: f64, seed: u64) -> Self {
        self.phase_noise_sigma = phase_sigma;
        self.splitter_error = random_splitter_errors(self.n, splitter_sigma, seed);
        self
    }

    pub fn heater_count(&self) -> usize {
        self.heaters.len()
    }

    pub fn validate(&self) -> Result<()> {
        let cells = cell_count(self.n);
        if self.n < 1 {
            return validation("profile needs at least one mode");
        }
        if self.heaters.len() != 2 * cells {
            return validation(format!("expected {} heaters, got {}", 2 * cells, self.heaters.len()));
        }
        self.heaters.iter().try_for_each(HeaterModel::validate)?;
        if self.crosstalk.size() != self.heaters.len() {
            return validation("crosstalk size does not match heater count");
        }
        self.crosstalk.validate()?;
        for (i, h) in self.heaters.iter().enumerate() {
            if (self.crosstalk.get(i, i) - h.alpha).abs() > 1e-12 * h.alpha {
                return validation(format!("crosstalk diagonal {i} differs from heater alpha"));
            }
        }
        self.loss.validate(self.n)?;
        if self.splitter_error.len() != cells {
            return validation(format!("expected {cells} splitter error pairs"));
        }
        if self.splitter_error.iter().flatten().any(|e| !(e.abs() < 0.5)) {
            return validation("splitter errors must satisfy |ε| < 0.5");
        }
        if !(self.phase_noise_sigma >= 0.0) || !(self.detector_noise_sigma >= 0.0) {
            return validation("noise levels must be >= 0");
        }
        if !(self.wavelength_nm > 0.0) {
            return validation("wavelength must be positive");
        }
        Ok(())
    }

    /// Transfer matrix of the physical chip running `settings`, with the
    /// coupler errors and losses of this profile. `jitter` holds per-cell
    /// (δθ, δφ) offsets in address order.
    pub fn transfer(&self, settings: &MeshSettings, jitter: Option<&[(f64, f64)]>) -> Result<TransferMatrix> {
        let n = self.n;
        if settings.n() != n {
            return validation(format!("settings for {} modes on a {n}-mode profile", settings.n()));
        }
        let facet = self.loss.facet_amplitude();
        let column_amp = self.loss.column_amplitudes(n);
        let mut m = CMatrix::identity(n, n);
        if facet != 1.0 {
            m *= Complex64::new(facet, 0.0);
        }
        let mut k = 0;
        for column in 0..column_count(n) {
            for address in column_cells(n, column) {
                let s = settings.cells()[&address];
                let (dt, dp) = jitter.map_or((0.0, 0.0), |j| j[k]);
                let [e_in, e_out] = self.splitter_error[k];
                let t = physical_cell(s.theta() + dt, s.phi() + dp, e_in, e_out);
                apply_rows(&mut m, address.row, &t);
                k += 1;
            }
            scale_rows(&mut m, &column_amp);
        }
        apply_output_phases(&mut m, settings.output_phases());
        if facet != 1.0 {
            m *= Complex64::new(facet, 0.0);
        }
        let lossy = !self.loss.is_lossless();
        Ok(TransferMatrix::new(m, lossy))
    }

    /// Draw one realization of the per-setting phase jitter.
    pub fn sample_jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(f64, f64)> {
        let cells = cell_count(self.n);
        if self.phase_noise_sigma == 0.0 {
            return vec![(0.0, 0.0); cells];
        }
        let normal = Normal::new(0.0, self.phase_noise_sigma).expect("finite sigma");
        (0..cells).map(|_| (normal.sample(rng), normal.sample(rng))).collect()
    }

    /// Heater phases produced by drive voltages (indexed by heater id),
    /// including thermal crosstalk.
    pub fn heater_phases(&self, volts: &[f64]) -> Result<Vec<f64>> {
        if volts.len() != self.heaters.len() {
            return validation(format!("expected {} voltages, got {}", self.heaters.len(), volts.len()));
        }
        let mut powers = Vec::with_capacity(volts.len());
        for (i, (v, h)) in volts.iter().zip(&self.heaters).enumerate() {
            if !(0.0..=h.v_max).contains(v) {
                return validation(format!("heater {i}: voltage {v} outside [0, {}]", h.v_max));
            }
            powers.push(h.power(*v));
        }
        let phi0: Vec<f64> = self.heaters.iter().map(|h| h.phi0).collect();
        Ok(self.crosstalk.phases(&phi0, &powers))
    }

    /// Mesh settings the chip actually realizes under `volts`. Output phases
    /// have no heaters and are passed through.
    pub fn realize(&self, volts: &[f64], output_phases: &[f64]) -> Result<MeshSettings> {
        let phases = self.heater_phases(volts)?;
        let cells = addresses(self.n)
            .into_iter()
            .enumerate()
            .map(|(k, a)| (a, CellSetting::new(phases[2 * k], phases[2 * k + 1])))
            .collect();
        MeshSettings::new(self.n, cells, output_phases.to_vec())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProfileDoc::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProfileDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Seeded per-coupler splitting errors `N(0, sigma)`, clamped to |ε| < 0.5.
pub fn random_splitter_errors(n: usize, sigma: f64, seed: u64) -> Vec<[f64; 2]> {
    let cells = cell_count(n);
    if sigma == 0.0 {
        return vec![[0.0, 0.0]; cells];
    }
    let mut rng = rng::stream(rng::derive_seed(seed, 0x5350_4c54), 0);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    (0..cells)
        .map(|_| [normal.sample(&mut rng).clamp(-0.49, 0.49), normal.sample(&mut rng).clamp(-0.49, 0.49)])
        .collect()
}

fn coupler(eps: f64) -> Matrix2<Complex64> {
    let (s, c) = (FRAC_PI_4 + eps).sin_cos();
    Matrix2::new(
        Complex64::new(c, 0.0),
        Complex64::new(0.0, s),
        Complex64::new(0.0, s),
        Complex64::new(c, 0.0),
    )
}

/// Unit cell built from two directional couplers with splitting-angle
/// errors `e_in`, `e_out`. Reduces to [`cell_transfer`] when both are zero.
pub fn physical_cell(theta: f64, phi: f64, e_in: f64, e_out: f64) -> Matrix2<Complex64> {
    if e_in == 0.0 && e_out == 0.0 {
        return cell_matrix(theta, phi);
    }
    let arm = Matrix2::new(
        Complex64::from_polar(1.0, theta),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    );
    let input = Matrix2::new(
        Complex64::from_polar(1.0, phi),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(-1.0, 0.0),
    );
    // -i e^{-iθ/2} fixes the common phase so that ε = 0 matches the mesh convention
    let common = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -theta / 2.0);
    (coupler(e_out) * arm * coupler(e_in) * input) * common
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    n: usize,
    wavelength_nm: f64,
    coupling_loss_db_per_facet: f64,
    propagation_loss_db_per_cm: f64,
    path_length_cm: Vec<f64>,
    splitter_error_radians: Vec<[f64; 2]>,
    phase_noise_sigma_radians: f64,
    detector_noise_sigma_relative: f64,
    heaters: Vec<HeaterModel>,
    crosstalk: CrosstalkDoc,
}

impl From<&HardwareProfile> for ProfileDoc {
    fn from(p: &HardwareProfile) -> Self {
        Self {
            n: p.n,
            wavelength_nm: p.wavelength_nm,
            coupling_loss_db_per_facet: p.loss.coupling_loss_db_per_facet,
            propagation_loss_db_per_cm: p.loss.propagation_loss_db_per_cm,
            path_length_cm: p.loss.path_length_cm.clone(),
            splitter_error_radians: p.splitter_error.clone(),
            phase_noise_sigma_radians: p.phase_noise_sigma,
            detector_noise_sigma_relative: p.detector_noise_sigma,
            heaters: p.heaters.clone(),
            crosstalk: CrosstalkDoc::from(&p.crosstalk),
        }
    }
}

impl TryFrom<ProfileDoc> for HardwareProfile {
    type Error = QppError;

    fn try_from(doc: ProfileDoc) -> Result<Self> {
        let profile = HardwareProfile {
            n: doc.n,
            heaters: doc.heaters,
            crosstalk: doc.crosstalk.try_into()?,
            loss: LossModel {
                coupling_loss_db_per_facet: doc.coupling_loss_db_per_facet,
                propagation_loss_db_per_cm: doc.propagation_loss_db_per_cm,
                path_length_cm: doc.path_length_cm,
            },
            splitter_error: doc.splitter_error_radians,
            phase_noise_sigma: doc.phase_noise_sigma_radians,
            detector_noise_sigma: doc.detector_noise_sigma_relative,
            wavelength_nm: doc.wavelength_nm,
        };
        profile.validate()?;
        Ok(profile)
    }
}
