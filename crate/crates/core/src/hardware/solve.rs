//! Crosstalk-compensated voltage solving.

use std::collections::HashSet;
use std::f64::consts::TAU;

use nalgebra::{DVector, Dyn, LU};

use super::calibration::CalibrationRecord;
use super::profile::HardwareProfile;
use crate::error::{validation, QppError, Result};
use crate::mesh::{addresses, normalize_phase, MeshSettings};

const MAX_BRANCH_ITERATIONS: usize = 64;

/// Solves heater voltages for target phases on one calibrated chip. The
/// crosstalk matrix is factorized once.
#[derive(Debug, Clone)]
pub struct VoltageSolver {
    phi0: Vec<f64>,
    lu: LU<f64, Dyn, Dyn>,
    resistance: Vec<f64>,
    v_max: Vec<f64>,
}

impl VoltageSolver {
    /// Uses the calibrated `phi0` and `alpha` of every heater together with
    /// the profile's off-diagonal crosstalk, resistances and voltage limits.
    pub fn new(profile: &HardwareProfile, calibration: &CalibrationRecord) -> Result<Self> {
        let h = profile.heater_count();
        let mut phi0 = Vec::with_capacity(h);
        let mut alpha = Vec::with_capacity(h);
        for id in 0..h {
            phi0.push(calibration.phi0(id)?);
            alpha.push(calibration.alpha(id)?);
        }
        let c = profile.crosstalk.with_diagonal(&alpha);
        c.validate()?;
        Ok(Self {
            phi0,
            lu: c.entries().clone().lu(),
            resistance: profile.heaters.iter().map(|m| m.resistance).collect(),
            v_max: profile.heaters.iter().map(|m| m.v_max).collect(),
        })
    }

    pub fn heater_count(&self) -> usize {
        self.phi0.len()
    }

    /// Voltages (indexed by heater id) realizing `targets` modulo 2π.
    /// Each heater's phase may land on any 2π branch; branches are adjusted
    /// until every power lies in `[0, p_max]`.
    pub fn solve_phases(&self, targets: &[f64]) -> Result<Vec<f64>> {
        let h = self.heater_count();
        if targets.len() != h {
            return validation(format!("expected {h} target phases, got {}", targets.len()));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return validation("target phases must be finite");
        }
        let base: Vec<f64> = targets.iter().zip(&self.phi0).map(|(t, p)| normalize_phase(t - p)).collect();
        let p_max: Vec<f64> = self.v_max.iter().zip(&self.resistance).map(|(v, r)| v * v / r).collect();
        let mut branch = vec![0i64; h];
        let mut seen = HashSet::new();
        let mut last_bad = Vec::new();
        for _ in 0..MAX_BRANCH_ITERATIONS {
            if !seen.insert(branch.clone()) {
                break;
            }
            let rhs = DVector::from_iterator(h, (0..h).map(|i| base[i] + TAU * branch[i] as f64));
            let p = self.lu.solve(&rhs).ok_or_else(|| QppError::Structure("crosstalk matrix is singular".into()))?;
            let mut bad = Vec::new();
            for i in 0..h {
                let slack = 1e-12 * p_max[i];
                if p[i] < -slack {
                    branch[i] += 1;
                    bad.push(i);
                } else if p[i] > p_max[i] + slack {
                    branch[i] -= 1;
                    bad.push(i);
                }
            }
            if bad.is_empty() {
                return Ok((0..h)
                    .map(|i| (p[i].clamp(0.0, p_max[i]) * self.resistance[i]).sqrt().min(self.v_max[i]))
                    .collect());
            }
            last_bad = bad;
        }
        Err(QppError::Infeasible { heaters: last_bad })
    }

    /// Voltages realizing every θ and φ of `settings`.
    pub fn solve(&self, settings: &MeshSettings) -> Result<Vec<f64>> {
        let cells = addresses(settings.n());
        if 2 * cells.len() != self.heater_count() {
            return validation("settings do not match the solver's mesh size");
        }
        let mut targets = Vec::with_capacity(self.heater_count());
        for a in cells {
            let s = settings.cells()[&a];
            targets.push(s.theta());
            targets.push(s.phi());
        }
        self.solve_phases(&targets)
    }
}

/// One-shot [`VoltageSolver::solve`].
pub fn solve_voltages(profile: &HardwareProfile, calibration: &CalibrationRecord, target: &MeshSettings) -> Result<Vec<f64>> {
    if target.n() != profile.n {
        return validation(format!("target has {} modes, profile {}", target.n(), profile.n));
    }
    VoltageSolver::new(profile, calibration)?.solve(target)
}
