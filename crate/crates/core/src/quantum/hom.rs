use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coincidence::two_photon_coincidence;
use super::routing::{route_to_tbs, RoutingPlan};
use crate::analysis::{ensemble_statistics, EnsembleStatistics};
use crate::error::{validation, QppError, Result};
use crate::fit::levenberg_marquardt;
use crate::hardware::{heater_id, HardwareProfile, HeaterKind};
use crate::mesh::{addresses, column_count, CellAddress, CellSetting, MeshSettings, TransferMatrix};
use crate::rng;

/// Heralded photon-pair source with a Gaussian spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonPairSource {
    pub center_wavelength_nm: f64,
    pub bandwidth_fwhm_nm: f64,
    /// Two-photon overlap at zero delay, `1 / K` for Schmidt number `K`.
    pub overlap: f64,
    pub pair_rate_hz: f64,
}

impl Default for PhotonPairSource {
    fn default() -> Self {
        Self { center_wavelength_nm: 1562.0, bandwidth_fwhm_nm: 12.0, overlap: 1.0 / 1.1, pair_rate_hz: 1e5 }
    }
}

impl PhotonPairSource {
    pub fn with_overlap(overlap: f64) -> Self {
        Self { overlap, ..Self::default() }
    }

    pub fn from_schmidt_number(k: f64) -> Result<Self> {
        if !(k >= 1.0) {
            return validation("Schmidt number must be >= 1");
        }
        Ok(Self::with_overlap(1.0 / k))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.overlap) {
            return validation("overlap must lie in [0, 1]");
        }
        if !(self.bandwidth_fwhm_nm > 0.0) {
            return validation("bandwidth must be positive");
        }
        if !(self.center_wavelength_nm > 0.0) || !(self.pair_rate_hz >= 0.0) {
            return validation("wavelength must be positive and pair rate non-negative");
        }
        Ok(())
    }

    /// Gaussian `σ` of the overlap against path difference, in µm.
    pub fn coherence_length_um(&self) -> f64 {
        let l = self.center_wavelength_nm * 1e-3;
        let dl = self.bandwidth_fwhm_nm * 1e-3;
        l * l * (2.0 * 2f64.ln()).sqrt() / (PI * dl)
    }

    /// Overlap at path difference `delay_um`.
    pub fn overlap_at(&self, delay_um: f64) -> f64 {
        let s = self.coherence_length_um();
        self.overlap * (-(delay_um * delay_um) / (2.0 * s * s)).exp()
    }
}

/// Delays from -400 µm to 400 µm in 10 µm steps.
pub fn default_delays() -> Vec<f64> {
    (-40..=40).map(|k| k as f64 * 10.0).collect()
}

/// Fitted dip `baseline · (1 - V exp(-(τ - center)² / (2 width²)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    pub visibility: f64,
    pub visibility_sigma: Option<f64>,
    pub center_um: f64,
    pub width_um: f64,
    pub baseline: f64,
    /// Singular covariance or visibility within three sigma of zero.
    pub low_confidence: bool,
}

/// Mean of the 20 % of samples farthest from the middle of the delay range.
pub fn tail_baseline(delays: &[f64], values: &[f64]) -> Result<f64> {
    if delays.is_empty() || delays.len() != values.len() {
        return validation("delays and values must be non-empty and of equal length");
    }
    let (lo, hi) = delays.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let mid = 0.5 * (lo + hi);
    let mut idx: Vec<usize> = (0..delays.len()).collect();
    idx.sort_by(|&i, &j| (delays[j] - mid).abs().total_cmp(&(delays[i] - mid).abs()).then(i.cmp(&j)));
    let k = (delays.len() / 5).max(1);
    Ok(idx[..k].iter().map(|&i| values[i]).sum::<f64>() / k as f64)
}

/// Divide raw coincidences by [`tail_baseline`].
pub fn normalize_by_tails(delays: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let b = tail_baseline(delays, values)?;
    if !(b > 0.0) {
        return validation("tail baseline is not positive");
    }
    Ok(values.iter().map(|v| v / b).collect())
}

fn gauss(t: f64, c: f64, w: f64) -> f64 {
    (-(t - c).powi(2) / (2.0 * w * w)).exp()
}

/// Two-pass Gaussian dip fit. The first pass fits all four parameters; the
/// baseline is then re-estimated from points more than two widths from the
/// center (each divided by the fitted dip profile there, so the Gaussian
/// tail does not bias it) and the dip is refitted with that baseline fixed.
pub fn fit_gaussian_dip(delays: &[f64], values: &[f64]) -> Result<DipFit> {
    let m = delays.len();
    if m < 10 || values.len() != m {
        return validation(format!("dip fit needs at least 10 points, got {m}"));
    }
    if delays.iter().chain(values).any(|v| !v.is_finite()) {
        return validation("dip data must be finite");
    }
    let b0 = tail_baseline(delays, values)?;
    if !(b0 > 0.0) {
        return validation("dip baseline is not positive");
    }
    let (imin, ymin) = values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let span = delays.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - delays.iter().cloned().fold(f64::INFINITY, f64::min);
    let c0 = delays[imin];
    let v0 = (1.0 - ymin / b0).max(1e-6);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| delays[i].total_cmp(&delays[j]));
    let mut area = 0.0;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        area += 0.5 * (delays[j] - delays[i]) * ((1.0 - values[i] / b0) + (1.0 - values[j] / b0));
    }
    let w0 = (area / (v0 * TAU.sqrt())).clamp(span / (4.0 * m as f64), span / 2.0);

    let first = levenberg_marquardt(
        DVector::from_vec(vec![b0, v0, c0, w0]),
        |q| {
            let r = DVector::from_fn(m, |i, _| q[0] * (1.0 - q[1] * gauss(delays[i], q[2], q[3])) - values[i]);
            let j = DMatrix::from_fn(m, 4, |i, k| {
                let g = gauss(delays[i], q[2], q[3]);
                let d = delays[i] - q[2];
                match k {
                    0 => 1.0 - q[1] * g,
                    1 => -q[0] * g,
                    2 => -q[0] * q[1] * g * d / (q[3] * q[3]),
                    _ => -q[0] * q[1] * g * d * d / q[3].powi(3),
                }
            });
            (r, j)
        },
        300,
    );
    let (v1, c1, w1) = (first.params[1], first.params[2], first.params[3].abs());

    let off: Vec<usize> = (0..m).filter(|&i| (delays[i] - c1).abs() > 2.0 * w1).collect();
    if off.is_empty() {
        return Err(QppError::BaselineUndefined(format!(
            "no samples farther than two widths ({:.3} µm) from the dip center",
            2.0 * w1
        )));
    }
    let baseline = off.iter().map(|&i| values[i] / (1.0 - v1 * gauss(delays[i], c1, w1))).sum::<f64>() / off.len() as f64;
    if !(baseline > 0.0) {
        return Err(QppError::BaselineUndefined("off-dip baseline is not positive".into()));
    }

    let second = levenberg_marquardt(
        DVector::from_vec(vec![v1, c1, w1]),
        |q| {
            let r = DVector::from_fn(m, |i, _| baseline * (1.0 - q[0] * gauss(delays[i], q[1], q[2])) - values[i]);
            let j = DMatrix::from_fn(m, 3, |i, k| {
                let g = gauss(delays[i], q[1], q[2]);
                let d = delays[i] - q[1];
                match k {
                    0 => -baseline * g,
                    1 => -baseline * q[0] * g * d / (q[2] * q[2]),
                    _ => -baseline * q[0] * g * d * d / q[2].powi(3),
                }
            });
            (r, j)
        },
        300,
    );
    let visibility = second.params[0];
    let sigma = second.covariance().map(|c| c[(0, 0)].max(0.0).sqrt());
    let low_confidence = match sigma {
        None => true,
        Some(s) => visibility - 3.0 * s <= 0.0,
    } || !(0.0..=1.0).contains(&visibility);
    Ok(DipFit {
        visibility,
        visibility_sigma: sigma,
        center_um: second.params[1],
        width_um: second.params[2].abs(),
        baseline,
        low_confidence,
    })
}

/// Normalized coincidence rate against relative path delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomScan {
    pub delays_um: Vec<f64>,
    pub coincidences: Vec<f64>,
    pub fit: DipFit,
}

impl HomScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay_um,normalized_coincidence\n");
        for (d, c) in self.delays_um.iter().zip(&self.coincidences) {
            out.push_str(&format!("{d},{c:.15e}\n"));
        }
        out
    }
}

/// Coincidences at the plan's outputs through `transfer`, divided by the
/// fully distinguishable rate. The dip sits at `offset_um`.
fn scan_transfer(
    plan: &RoutingPlan,
    source: &PhotonPairSource,
    transfer: &TransferMatrix,
    delays: &[f64],
    offset_um: f64,
) -> Result<HomScan> {
    if delays.is_empty() {
        return validation("HOM scan needs at least one delay");
    }
    source.validate()?;
    let u = transfer.elements();
    let classical = two_photon_coincidence(u, plan.input_pair, plan.output_pair, 0.0)?;
    if !(classical > 0.0) {
        return Err(QppError::Structure("no coincidences reach the plan outputs".into()));
    }
    let coincidences = delays
        .iter()
        .map(|&d| Ok(two_photon_coincidence(u, plan.input_pair, plan.output_pair, source.overlap_at(d - offset_um))? / classical))
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_gaussian_dip(delays, &coincidences)?;
    Ok(HomScan { delays_um: delays.to_vec(), coincidences, fit })
}

/// Scan the relative delay of the two photons routed by `plan` through the
/// chip described by `profile`. One phase-jitter draw from `seed` applies
/// to the whole scan.
pub fn hom_scan(
    plan: &RoutingPlan,
    source: &PhotonPairSource,
    profile: &HardwareProfile,
    delays: &[f64],
    seed: u64,
) -> Result<HomScan> {
    let transfer = noisy_transfer(profile, &plan.settings(), seed, 0)?;
    scan_transfer(plan, source, &transfer, delays, 0.0)
}

fn noisy_transfer(profile: &HardwareProfile, settings: &MeshSettings, seed: u64, index: u64) -> Result<TransferMatrix> {
    if settings.n() != profile.n {
        return validation("plan and profile differ in mode count");
    }
    let mut rng = rng::stream(rng::derive_seed(seed, 0x484f_4d00), index);
    let jitter = profile.sample_jitter(&mut rng);
    profile.transfer(settings, Some(&jitter))
}

/// Fitted visibility of every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMap {
    pub n: usize,
    pub cells: Vec<CellVisibility>,
    pub summary: EnsembleStatistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellVisibility {
    pub column: usize,
    pub row: usize,
    pub visibility: f64,
    pub low_confidence: bool,
}

impl VisibilityMap {
    pub fn get(&self, address: CellAddress) -> Option<f64> {
        self.cells.iter().find(|c| c.column == address.column && c.row == address.row).map(|c| c.visibility)
    }

    pub fn visibilities(&self) -> BTreeMap<CellAddress, f64> {
        self.cells.iter().map(|c| (CellAddress::new(c.column, c.row), c.visibility)).collect()
    }

    /// Rows are mesh rows, columns mesh columns; empty where no cell sits.
    pub fn grid_csv(&self) -> String {
        let cols = column_count(self.n);
        let mut out = String::from("row");
        for c in 0..cols {
            out.push_str(&format!(",col{c}"));
        }
        out.push('\n');
        let map = self.visibilities();
        for r in 0..self.n.saturating_sub(1) {
            out.push_str(&r.to_string());
            for c in 0..cols {
                out.push(',');
                if let Some(v) = map.get(&CellAddress::new(c, r)) {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Visibilities grouped by mesh row and by mesh column.
    pub fn groups(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rows = vec![Vec::new(); self.n.saturating_sub(1)];
        let mut cols = vec![Vec::new(); column_count(self.n)];
        for c in &self.cells {
            rows[c.row].push(c.visibility);
            cols[c.column].push(c.visibility);
        }
        (rows.into_iter().filter(|g| !g.is_empty()).collect(), cols)
    }
}

/// Route, scan and fit every cell in parallel. Cell `k` (address order)
/// draws its phase jitter from stream `k` of `seed`.
pub fn hom_visibility_map(
    n: usize,
    source: &PhotonPairSource,
    profile: &HardwareProfile,
    delays: &[f64],
    seed: u64,
) -> Result<VisibilityMap> {
    if profile.n != n {
        return validation("profile and map differ in mode count");
    }
    source.validate()?;
    let cells = addresses(n)
        .into_par_iter()
        .enumerate()
        .map(|(k, a)| {
            let plan = route_to_tbs(n, a)?;
            let transfer = noisy_transfer(profile, &plan.settings(), seed, k as u64)?;
            let scan = scan_transfer(&plan, source, &transfer, delays, 0.0)?;
            Ok(CellVisibility { column: a.column, row: a.row, visibility: scan.fit.visibility, low_confidence: scan.fit.low_confidence })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = cells.iter().map(|c| c.visibility).collect();
    let summary = ensemble_statistics(&values)?;
    Ok(VisibilityMap { n, cells, summary })
}

/// Optical path added by phase `phase` at wavelength `wavelength_nm`, in µm.
pub fn path_shift_um(phase: f64, wavelength_nm: f64) -> f64 {
    phase * wavelength_nm * 1e-3 / TAU
}

/// Routing used for the delay sweep and the φ heaters on the arm of the
/// main diagonal that the upper photon follows. The photon entering mode 0
/// crosses every cell `(c, c)` down to the target `(n-2, n-2)`, whose
/// partner enters at the bottom mode.
pub fn diagonal_arm(n: usize) -> Result<(RoutingPlan, Vec<usize>)> {
    if n < 2 {
        return validation("delay sweep needs at least two modes");
    }
    let plan = route_to_tbs(n, CellAddress::new(n - 2, n - 2))?;
    let mut cells = plan.path_to_target(plan.input_pair.0)?;
    cells.push(plan.target);
    let heaters = cells
        .iter()
        .map(|&a| heater_id(n, a, HeaterKind::Phi).ok_or(QppError::UnknownHeater(usize::MAX)))
        .collect::<Result<Vec<_>>>()?;
    Ok((plan, heaters))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySweepPoint {
    /// Phase added by every driven heater.
    pub drive_radians: f64,
    /// Largest drive voltage among the driven heaters.
    pub max_volts: f64,
    pub per_heater_shift_um: f64,
    pub total_shift_um: f64,
    pub fitted_center_um: f64,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySweep {
    pub n: usize,
    pub wavelength_nm: f64,
    pub input_pair: (usize, usize),
    pub output_pair: (usize, usize),
    pub heaters: Vec<usize>,
    pub points: Vec<DelaySweepPoint>,
}

impl DelaySweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("drive_radians,max_volts,per_heater_shift_um,total_shift_um,fitted_center_um,visibility\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                p.drive_radians, p.max_volts, p.per_heater_shift_um, p.total_shift_um, p.fitted_center_um, p.visibility
            ));
        }
        out
    }
}

/// Drive every φ heater on the diagonal arm by each level (radians added on
/// top of its setting) and fit where the dip moves.
pub fn diagonal_delay_sweep(
    n: usize,
    profile: &HardwareProfile,
    source: &PhotonPairSource,
    drive_levels: &[f64],
    delays: &[f64],
    seed: u64,
) -> Result<DelaySweep> {
    if profile.n != n {
        return validation("profile and sweep differ in mode count");
    }
    let (plan, heaters) = diagonal_arm(n)?;
    let max_span = heaters.iter().map(|&h| profile.heaters[h].span()).fold(f64::INFINITY, f64::min);
    let wavelength = source.center_wavelength_nm;
    let mut points = Vec::with_capacity(drive_levels.len());
    for &level in drive_levels {
        // spans are rebuilt from v_max, so 3π can come back a few ulps short
        if !(0.0..=max_span * (1.0 + 1e-12)).contains(&level) {
            return validation(format!("drive {level} rad outside [0, {max_span:.6}]"));
        }
        let mut settings = plan.settings();
        let mut max_volts: f64 = 0.0;
        for &h in &heaters {
            let (address, _) = crate::hardware::heater_location(n, h).ok_or(QppError::UnknownHeater(h))?;
            let s = settings.cells()[&address];
            settings.set_cell(address, CellSetting::new(s.theta(), s.phi() + level));
            let model = profile.heaters[h];
            max_volts = max_volts.max(model.voltage_for_power(level / model.alpha).min(model.v_max));
        }
        let per_heater = path_shift_um(level, wavelength);
        let total = per_heater * heaters.len() as f64;
        let transfer = noisy_transfer(profile, &settings, seed, 0)?;
        let scan = scan_transfer(&plan, source, &transfer, delays, total)?;
        points.push(DelaySweepPoint {
            drive_radians: level,
            max_volts,
            per_heater_shift_um: per_heater,
            total_shift_um: total,
            fitted_center_um: scan.fit.center_um,
            visibility: scan.fit.visibility,
        });
    }
    Ok(DelaySweep { n, wavelength_nm: wavelength, input_pair: plan.input_pair, output_pair: plan.output_pair, heaters, points })
}
