//! Physical layer: heaters, crosstalk, losses, noise, calibration and
//! simulated measurements.

mod calibration;
mod heater;
mod measure;
mod noise;
mod profile;
mod solve;

pub use calibration::{
    calibrate_all, fit_phase_response, simulate_calibration_sweep, voltage_grid, CalibrationRecord, HeaterFit,
    PhaseSweep, DEFAULT_SWEEP_POINTS,
};
pub use heater::{
    heater_id, heater_location, CrosstalkMatrix, HeaterKind, HeaterModel, DEFAULT_ALPHA, DEFAULT_RESISTANCE,
    DEFAULT_SPAN,
};
pub use measure::{insertion_loss_per_mode, measure_amplitude_matrix, measured_transfer};
pub use noise::{calibrate_noise, ensemble_fidelities, NoiseCalibration};
pub use profile::{
    physical_cell, random_splitter_errors, HardwareProfile, CALIBRATED_PHASE_NOISE, CALIBRATED_SPLITTER_SIGMA,
    DEFAULT_NEIGHBOUR_CROSSTALK, DEFAULT_SAME_CELL_CROSSTALK, DEFAULT_WAVELENGTH_NM,
};
pub use solve::{solve_voltages, VoltageSolver};
