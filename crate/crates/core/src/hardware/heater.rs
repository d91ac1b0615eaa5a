//! Thermo-optic heaters and their thermal crosstalk.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{validation, QppError, Result};
use crate::mesh::{addresses, CellAddress};

/// Which phase of a unit cell a heater drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaterKind {
    /// Internal beam-splitter phase θ.
    Theta,
    /// External phase φ.
    Phi,
}

/// Heater `2 k` drives θ of cell `k` (address order), heater `2 k + 1` its φ.
pub fn heater_id(n: usize, address: CellAddress, kind: HeaterKind) -> Option<usize> {
    let k = addresses(n).binary_search(&address).ok()?;
    Some(2 * k + kind as usize)
}

/// Inverse of [`heater_id`].
pub fn heater_location(n: usize, id: usize) -> Option<(CellAddress, HeaterKind)> {
    let address = *addresses(n).get(id / 2)?;
    let kind = if id % 2 == 0 { HeaterKind::Theta } else { HeaterKind::Phi };
    Some((address, kind))
}

/// Phase response of one heater: `φ = phi0 + alpha · V² / R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeaterModel {
    #[serde(rename = "phi0_radians")]
    pub phi0: f64,
    #[serde(rename = "alpha_radians_per_watt")]
    pub alpha: f64,
    #[serde(rename = "resistance_ohms")]
    pub resistance: f64,
    #[serde(rename = "v_max_volts")]
    pub v_max: f64,
}

impl HeaterModel {
    /// Heater whose full drive range spans exactly `span` radians.
    pub fn with_span(phi0: f64, alpha: f64, resistance: f64, span: f64) -> Self {
        let v_max = (span / alpha * resistance).sqrt();
        Self { phi0, alpha, resistance, v_max }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.resistance > 0.0) || !(self.v_max > 0.0) {
            return validation("heater alpha, resistance and v_max must be positive");
        }
        if !(self.span() > TAU) {
            return validation(format!("heater phase span {:.4} rad does not exceed 2π", self.span()));
        }
        Ok(())
    }

    /// Electrical power at drive voltage `v`.
    pub fn power(&self, v: f64) -> f64 {
        v * v / self.resistance
    }

    pub fn max_power(&self) -> f64 {
        self.power(self.v_max)
    }

    /// Phase range reachable over `[0, v_max]`.
    pub fn span(&self) -> f64 {
        self.alpha * self.max_power()
    }

    /// Phase at drive `v` with `ambient_power` watts of crosstalk-equivalent
    /// heating from other heaters (already weighted by their coupling).
    pub fn phase_from_voltage(&self, v: f64, ambient_power: f64) -> Result<f64> {
        if !(0.0..=self.v_max).contains(&v) {
            return validation(format!("voltage {v} outside [0, {}]", self.v_max));
        }
        Ok(self.phi0 + self.alpha * (self.power(v) + ambient_power))
    }

    pub fn voltage_for_power(&self, p: f64) -> f64 {
        (p.max(0.0) * self.resistance).sqrt()
    }
}

/// Linear thermal coupling between heaters: phase on heater `i` per watt on
/// heater `j`. The diagonal holds each heater's own `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    entries: DMatrix<f64>,
}

impl CrosstalkMatrix {
    /// Diagonal-only matrix built from the heaters.
    pub fn diagonal(heaters: &[HeaterModel]) -> Self {
        let h = heaters.len();
        let mut entries = DMatrix::zeros(h, h);
        for (i, m) in heaters.iter().enumerate() {
            entries[(i, i)] = m.alpha;
        }
        Self { entries }
    }

    pub fn from_dense(entries: DMatrix<f64>) -> Result<Self> {
        let out = Self { entries };
        out.validate()?;
        Ok(out)
    }

    /// Nearest-neighbour coupling: `same_cell` between the θ and φ heaters
    /// of a cell, `neighbour` to heaters of cells one diagonal step, or two
    /// rows or columns, away. Both as fractions of the receiving heater's α.
    pub fn nearest_neighbour(n: usize, heaters: &[HeaterModel], same_cell: f64, neighbour: f64) -> Self {
        let mut out = Self::diagonal(heaters);
        let cells = addresses(n);
        for (a, ca) in cells.iter().enumerate() {
            for (b, cb) in cells.iter().enumerate() {
                let dc = ca.column.abs_diff(cb.column);
                let dr = ca.row.abs_diff(cb.row);
                let frac = if a == b {
                    same_cell
                } else if dc + dr == 2 {
                    neighbour
                } else {
                    continue;
                };
                if frac == 0.0 {
                    continue;
                }
                for ka in 0..2 {
                    for kb in 0..2 {
                        let (i, j) = (2 * a + ka, 2 * b + kb);
                        if i != j {
                            out.entries[(i, j)] = frac * heaters[i].alpha;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Copy with the diagonal replaced by `alphas`.
    pub fn with_diagonal(&self, alphas: &[f64]) -> Self {
        let mut entries = self.entries.clone();
        for (i, a) in alphas.iter().enumerate() {
            entries[(i, i)] = *a;
        }
        Self { entries }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.entries.nrows();
        if self.entries.ncols() != h {
            return validation("crosstalk matrix must be square");
        }
        for i in 0..h {
            let d = self.entries[(i, i)];
            if !(d > 0.0) {
                return validation(format!("crosstalk diagonal {i} must be positive"));
            }
            for j in 0..h {
                if i != j && !(self.entries[(i, j)].abs() < d) {
                    return validation(format!(
                        "crosstalk ({i}, {j}) = {} is not smaller than the diagonal {d}",
                        self.entries[(i, j)]
                    ));
                }
            }
        }
        Ok(())
    }

    /// Phase on every heater for the given heater powers.
    pub fn phases(&self, phi0: &[f64], powers: &[f64]) -> Vec<f64> {
        let h = self.size();
        (0..h)
            .map(|i| phi0[i] + (0..h).map(|j| self.entries[(i, j)] * powers[j]).sum::<f64>())
            .collect()
    }

    /// Crosstalk-only contribution on heater `i` (diagonal excluded), in
    /// watts equivalent of heater `i`'s own response.
    pub fn ambient_power(&self, i: usize, powers: &[f64]) -> f64 {
        let h = self.size();
        let shift: f64 = (0..h).filter(|&j| j != i).map(|j| self.entries[(i, j)] * powers[j]).sum();
        shift / self.entries[(i, i)]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct CouplingDoc {
    pub target: usize,
    pub source: usize,
    pub radians_per_watt: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct CrosstalkDoc {
    pub size: usize,
    pub diagonal_radians_per_watt: Vec<f64>,
    pub couplings: Vec<CouplingDoc>,
}

impl From<&CrosstalkMatrix> for CrosstalkDoc {
    fn from(c: &CrosstalkMatrix) -> Self {
        let h = c.size();
        let mut couplings = Vec::new();
        for i in 0..h {
            for j in 0..h {
                let v = c.entries[(i, j)];
                if i != j && v != 0.0 {
                    couplings.push(CouplingDoc { target: i, source: j, radians_per_watt: v });
                }
            }
        }
        Self { size: h, diagonal_radians_per_watt: (0..h).map(|i| c.entries[(i, i)]).collect(), couplings }
    }
}

impl TryFrom<CrosstalkDoc> for CrosstalkMatrix {
    type Error = QppError;

    fn try_from(doc: CrosstalkDoc) -> Result<Self> {
        let h = doc.size;
        if doc.diagonal_radians_per_watt.len() != h {
            return validation("crosstalk diagonal length does not match size");
        }
        let mut entries = DMatrix::zeros(h, h);
        for (i, d) in doc.diagonal_radians_per_watt.iter().enumerate() {
            entries[(i, i)] = *d;
        }
        for c in doc.couplings {
            if c.target >= h || c.source >= h || c.target == c.source {
                return validation(format!("invalid coupling {} <- {}", c.target, c.source));
            }
            entries[(c.target, c.source)] = c.radians_per_watt;
        }
        CrosstalkMatrix::from_dense(entries)
    }
}

/// Default heater phase-per-power: π per 25 mW.
pub const DEFAULT_ALPHA: f64 = PI / 0.025;
pub const DEFAULT_RESISTANCE: f64 = 1000.0;
/// Full-drive phase span of every default heater.
pub const DEFAULT_SPAN: f64 = 3.0 * PI;
