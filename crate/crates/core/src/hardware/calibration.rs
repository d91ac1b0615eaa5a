//! Heater calibration: simulated interferometric sweeps and phase-response fits.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heater::{heater_location, HeaterKind};
use super::profile::HardwareProfile;
use crate::error::{validation, QppError, Result};
use crate::fit::levenberg_marquardt;
use crate::mesh::normalize_phase;
use crate::rng;

/// Default number of voltage points per sweep.
pub const DEFAULT_SWEEP_POINTS: usize = 64;

/// One heater sweep: detected power against drive voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweep {
    pub heater_id: usize,
    pub resistance_ohms: f64,
    pub volts: Vec<f64>,
    pub power: Vec<f64>,
}

/// Voltages whose powers are evenly spaced over `[0, v_max]`.
pub fn voltage_grid(v_max: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0; points];
    }
    (0..points).map(|k| v_max * (k as f64 / (points - 1) as f64).sqrt()).collect()
}

/// Simulate sweeping one heater with every other heater off. θ heaters are
/// observed through the bar port (`T (1 - cos φ) / 2`), φ heaters through an
/// interferometer that reads `T (1 + cos φ) / 2`. `T` is the straight-path
/// transmission of the cell's row. Detector noise is additive Gaussian with
/// standard deviation `noise_sigma`.
pub fn simulate_calibration_sweep(
    profile: &HardwareProfile,
    heater_id: usize,
    volts: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<PhaseSweep> {
    let (address, kind) = heater_location(profile.n, heater_id).ok_or(QppError::UnknownHeater(heater_id))?;
    if !(noise_sigma >= 0.0) {
        return validation("detector noise sigma must be >= 0");
    }
    let heater = profile.heaters[heater_id];
    let transmission = 10f64.powf(-profile.loss.straight_insertion_loss_db(address.row) / 10.0);
    let offset = match kind {
        HeaterKind::Theta => PI,
        HeaterKind::Phi => 0.0,
    };
    let mut rng = rng::stream(seed, heater_id as u64);
    let normal = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("finite sigma"));
    let mut power = Vec::with_capacity(volts.len());
    for &v in volts {
        let phase = heater.phase_from_voltage(v, 0.0)?;
        let clean = 0.5 * transmission * (1.0 + (phase + offset).cos());
        power.push(clean + normal.as_ref().map_or(0.0, |d| d.sample(&mut rng)));
    }
    Ok(PhaseSweep { heater_id, resistance_ohms: heater.resistance, volts: volts.to_vec(), power })
}

/// Fitted heater response `P = A + B cos(phi0 + offset + alpha p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterFit {
    pub heater_id: usize,
    pub phi0: f64,
    pub alpha: f64,
    pub offset: f64,
    pub amplitude: f64,
    /// RMS fit residual.
    pub residual: f64,
    /// Covariance of (offset, amplitude, phi0, alpha); `None` if singular.
    pub covariance: Option<[[f64; 4]; 4]>,
}

fn fringe_offset(n: usize, heater_id: usize) -> Result<f64> {
    let (_, kind) = heater_location(n, heater_id).ok_or(QppError::UnknownHeater(heater_id))?;
    Ok(match kind {
        HeaterKind::Theta => PI,
        HeaterKind::Phi => 0.0,
    })
}

/// Fit `phi0` and `alpha` to a sweep. `n` is the mesh size, needed to know
/// which fringe the heater is read through.
pub fn fit_phase_response(n: usize, sweep: &PhaseSweep) -> Result<HeaterFit> {
    let delta = fringe_offset(n, sweep.heater_id)?;
    let m = sweep.volts.len();
    if m < 8 || sweep.power.len() != m {
        return Err(QppError::FitDegenerate(format!("need at least 8 samples, got {m}")));
    }
    if !(sweep.resistance_ohms > 0.0) {
        return validation("sweep resistance must be positive");
    }
    let p: Vec<f64> = sweep.volts.iter().map(|v| v * v / sweep.resistance_ohms).collect();
    let y = &sweep.power;
    let mean = y.iter().sum::<f64>() / m as f64;
    let spread = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    if !(spread > 1e-12 * mean.abs().max(1e-300)) {
        return Err(QppError::FitDegenerate("sweep signal is flat".into()));
    }
    let mut sorted = p.clone();
    sorted.sort_by(f64::total_cmp);
    let p_span = sorted[m - 1] - sorted[0];
    let max_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if !(p_span > 0.0) {
        return Err(QppError::FitDegenerate("sweep has no power range".into()));
    }

    // variable projection over ω: for fixed ω the model is linear in
    // (A, B cos ψ, -B sin ψ)
    let linear = |w: f64| -> Option<(f64, Vector3<f64>)> {
        let mut ata = Matrix3::zeros();
        let mut aty = Vector3::zeros();
        for (pk, yk) in p.iter().zip(y) {
            let row = Vector3::new(1.0, (w * pk).cos(), (w * pk).sin());
            ata += row * row.transpose();
            aty += row * *yk;
        }
        let c = ata.lu().solve(&aty)?;
        let cost: f64 = p
            .iter()
            .zip(y)
            .map(|(pk, yk)| (c[0] + c[1] * (w * pk).cos() + c[2] * (w * pk).sin() - yk).powi(2))
            .sum();
        Some((cost, c))
    };
    let w_min = PI / p_span;
    let w_max = PI / max_gap;
    let step = TAU / (16.0 * p_span);
    let mut best: Option<(f64, f64, Vector3<f64>)> = None;
    let mut w = w_min;
    while w <= w_max {
        if let Some((cost, c)) = linear(w) {
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, w, c));
            }
        }
        w += step;
    }
    let (_, w0, c) = best.ok_or_else(|| QppError::FitDegenerate("no frequency gives a solvable fit".into()))?;
    // c1 cos + c2 sin = B cos(wp + ψ) with B cos ψ = c1, -B sin ψ = c2
    let b0 = c[1].hypot(c[2]);
    let psi0 = (-c[2]).atan2(c[1]);
    let start = DVector::from_vec(vec![c[0], b0, psi0, w0]);

    let outcome = levenberg_marquardt(
        start,
        |q| {
            let r = DVector::from_iterator(m, p.iter().zip(y).map(|(pk, yk)| q[0] + q[1] * (q[2] + q[3] * pk).cos() - yk));
            let j = DMatrix::from_fn(m, 4, |i, col| {
                let arg = q[2] + q[3] * p[i];
                match col {
                    0 => 1.0,
                    1 => arg.cos(),
                    2 => -q[1] * arg.sin(),
                    _ => -q[1] * p[i] * arg.sin(),
                }
            });
            (r, j)
        },
        500,
    );
    let q = &outcome.params;
    let (mut amplitude, mut psi, alpha) = (q[1], q[2], q[3]);
    if amplitude < 0.0 {
        amplitude = -amplitude;
        psi += PI;
    }
    if !(alpha * p_span > TAU) {
        return Err(QppError::FitDegenerate(format!(
            "fitted response covers {:.3} rad, less than one fringe",
            alpha * p_span
        )));
    }
    let covariance = outcome.covariance().map(|c| {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = c[(i, j)];
            }
        }
        out
    });
    Ok(HeaterFit {
        heater_id: sweep.heater_id,
        phi0: normalize_phase(psi - delta),
        alpha,
        offset: q[0],
        amplitude,
        residual: (outcome.cost / m as f64).sqrt(),
        covariance,
    })
}

/// Calibrated `(phi0, alpha)` for every heater of a chip.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub fits: BTreeMap<usize, HeaterFit>,
}

impl CalibrationRecord {
    /// Record holding the profile's true heater parameters.
    pub fn exact(profile: &HardwareProfile) -> Self {
        let fits = profile
            .heaters
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let fit = HeaterFit {
                    heater_id: i,
                    phi0: h.phi0,
                    alpha: h.alpha,
                    offset: 0.0,
                    amplitude: 0.0,
                    residual: 0.0,
                    covariance: None,
                };
                (i, fit)
            })
            .collect();
        Self { fits }
    }

    pub fn phi0(&self, id: usize) -> Result<f64> {
        self.fits.get(&id).map(|f| f.phi0).ok_or(QppError::UnknownHeater(id))
    }

    pub fn alpha(&self, id: usize) -> Result<f64> {
        self.fits.get(&id).map(|f| f.alpha).ok_or(QppError::UnknownHeater(id))
    }

    /// Reject the record if any fit's RMS residual exceeds `max_residual`.
    pub fn accept(&self, max_residual: f64) -> Result<()> {
        let bad: Vec<usize> = self.fits.values().filter(|f| !(f.residual <= max_residual)).map(|f| f.heater_id).collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(QppError::FitDegenerate(format!("residual above {max_residual} for heaters {bad:?}")))
        }
    }

    /// `heater_id,phi0,alpha,residual` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("heater_id,phi0,alpha,residual\n");
        for f in self.fits.values() {
            out.push_str(&format!("{},{:.15e},{:.15e},{:.6e}\n", f.heater_id, f.phi0, f.alpha, f.residual));
        }
        out
    }
}

/// Sweep and fit every heater in parallel. Deterministic for a given seed.
pub fn calibrate_all(profile: &HardwareProfile, points: usize, noise_sigma: f64, seed: u64) -> Result<CalibrationRecord> {
    profile.validate()?;
    let fits: Result<Vec<HeaterFit>> = (0..profile.heater_count())
        .into_par_iter()
        .map(|id| {
            let grid = voltage_grid(profile.heaters[id].v_max, points);
            let sweep = simulate_calibration_sweep(profile, id, &grid, noise_sigma, seed)?;
            fit_phase_response(profile.n, &sweep)
        })
        .collect();
    Ok(CalibrationRecord { fits: fits?.into_iter().map(|f| (f.heater_id, f)).collect() })
}
