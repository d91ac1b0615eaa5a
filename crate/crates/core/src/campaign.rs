//! Seeded, configuration-driven experiment campaigns.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    amplitude_fidelity, ensemble_statistics, error_matrix, mean_matrix, one_way_anova, parse_platform_csv,
    platform_report, bundled_platforms, useful_processor_size, AmplitudeMatrix,
};
use crate::compiler::{clements_decompose, haar_ensemble, permutation_ensemble, permutation_unitary};
use crate::error::{QppError, Result};
use crate::hardware::{
    calibrate_all, insertion_loss_per_mode, measure_amplitude_matrix, CalibrationRecord, HardwareProfile,
    VoltageSolver, DEFAULT_SWEEP_POINTS,
};
use crate::mesh::{cell_count, Unitary};
use crate::quantum::{default_delays, diagonal_delay_sweep, hom_visibility_map, PhotonPairSource};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignKind {
    FidelityHaar,
    FidelityPerm,
    Calibration,
    HomMap,
    DelaySweep,
    LossReport,
    Platform,
}

impl CampaignKind {
    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::FidelityHaar => "fidelity-haar",
            CampaignKind::FidelityPerm => "fidelity-perm",
            CampaignKind::Calibration => "calibration",
            CampaignKind::HomMap => "hom-map",
            CampaignKind::DelaySweep => "delay-sweep",
            CampaignKind::LossReport => "loss-report",
            CampaignKind::Platform => "platform",
        }
    }
}

/// Where the hardware model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileRef {
    /// Noise-free, lossless.
    Ideal,
    /// Default losses and heater spread, no noise.
    Nominal,
    /// Default losses, heater spread and the calibrated noise model.
    Default,
    /// Profile JSON file.
    File(PathBuf),
}

impl ProfileRef {
    fn parse(text: &str, base: Option<&Path>) -> Self {
        match text {
            "ideal" => ProfileRef::Ideal,
            "nominal" => ProfileRef::Nominal,
            "default" | "calibrated" => ProfileRef::Default,
            path => {
                let p = PathBuf::from(path);
                ProfileRef::File(match base {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                })
            }
        }
    }

    fn label(&self) -> String {
        match self {
            ProfileRef::Ideal => "ideal".into(),
            ProfileRef::Nominal => "nominal".into(),
            ProfileRef::Default => "default".into(),
            ProfileRef::File(p) => p.display().to_string(),
        }
    }

    pub fn load(&self, n: usize, profile_seed: u64) -> Result<HardwareProfile> {
        let p = match self {
            ProfileRef::Ideal => HardwareProfile::ideal(n),
            ProfileRef::Nominal => HardwareProfile::nominal(n, profile_seed),
            ProfileRef::Default => HardwareProfile::calibrated(n, profile_seed),
            ProfileRef::File(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| QppError::Validation(format!("profile {}: {e}", path.display())))?;
                let p = HardwareProfile::from_json(&text)?;
                if p.n != n {
                    return Err(QppError::Validation(format!(
                        "profile {} has {} modes, config asks for {n}",
                        path.display(),
                        p.n
                    )));
                }
                p
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// Normalized experiment configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub campaign: CampaignKind,
    pub n: usize,
    pub seed: u64,
    pub count: usize,
    pub profile: ProfileRef,
    pub profile_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Two-photon overlap at zero delay (hom-map, delay-sweep).
    pub overlap: f64,
    pub delays_um: Vec<f64>,
    /// Phase added per diagonal heater (delay-sweep).
    pub drive_levels_radians: Vec<f64>,
    /// Voltage points per heater sweep (calibration).
    pub sweep_points: usize,
    /// Detector noise of calibration sweeps; defaults to the profile's.
    pub detector_noise: Option<f64>,
    /// Extra platform CSV (platform).
    pub platforms: Option<PathBuf>,
}

/// Raw JSON document. Integers are wide so range errors can name the field.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    schema_version: Option<i64>,
    campaign: Option<CampaignKind>,
    n: Option<i128>,
    seed: Option<i128>,
    count: Option<i128>,
    profile: Option<String>,
    profile_seed: Option<i128>,
    output_dir: Option<String>,
    workers: Option<i128>,
    overlap: Option<f64>,
    delays_um: Option<Vec<f64>>,
    drive_levels_radians: Option<Vec<f64>>,
    sweep_points: Option<i128>,
    detector_noise: Option<f64>,
    platforms: Option<String>,
}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(QppError::Validation(msg.into()))
}

fn int_field(name: &str, v: Option<i128>, min: i128) -> Result<Option<u64>> {
    match v {
        None => Ok(None),
        Some(x) if x < min => usage(format!("field `{name}` must be >= {min}, got {x}")),
        Some(x) if x > u64::MAX as i128 => usage(format!("field `{name}` is too large")),
        Some(x) => Ok(Some(x as u64)),
    }
}

fn default_count(kind: CampaignKind, n: usize) -> usize {
    match kind {
        CampaignKind::FidelityHaar => 1000,
        CampaignKind::FidelityPerm => {
            let mut f: usize = 1;
            for k in 2..=n {
                f = f.saturating_mul(k);
                if f >= 190 {
                    break;
                }
            }
            f.min(190)
        }
        _ => 0,
    }
}

impl ExperimentConfig {
    /// Defaults for `campaign`: n = 20, seed = 0, default profile.
    pub fn new(campaign: CampaignKind) -> Self {
        let n = 20;
        Self {
            campaign,
            n,
            seed: 0,
            count: default_count(campaign, n),
            profile: ProfileRef::Default,
            profile_seed: 0,
            output_dir: None,
            workers: None,
            overlap: 1.0 / 1.1,
            delays_um: default_delays(),
            drive_levels_radians: (0..=6).map(|k| k as f64 * PI / 2.0).collect(),
            sweep_points: DEFAULT_SWEEP_POINTS,
            detector_noise: None,
            platforms: None,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self.count = default_count(self.campaign, n);
        self
    }

    /// Parse and normalize a JSON config. Relative paths resolve against
    /// `base_dir`.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let doc: ConfigDoc =
            serde_json::from_str(text).map_err(|e| QppError::Validation(format!("config: {e}")))?;
        match doc.schema_version {
            Some(v) if v == SCHEMA_VERSION as i64 => {}
            Some(v) => return usage(format!("field `schema_version`: unsupported version {v}")),
            None => return usage("missing required field `schema_version`"),
        }
        let campaign = doc.campaign.ok_or_else(|| QppError::Validation("missing required field `campaign`".into()))?;
        let mut cfg = Self::new(campaign);
        if let Some(n) = int_field("n", doc.n, 2)? {
            cfg = cfg.with_n(n as usize);
        }
        if let Some(seed) = int_field("seed", doc.seed, 0)? {
            cfg.seed = seed;
        }
        if let Some(count) = int_field("count", doc.count, 0)? {
            cfg.count = count as usize;
        }
        if let Some(p) = doc.profile {
            cfg.profile = ProfileRef::parse(&p, base_dir);
        }
        if let Some(s) = int_field("profile_seed", doc.profile_seed, 0)? {
            cfg.profile_seed = s;
        }
        cfg.output_dir = doc.output_dir.map(|d| {
            let p = PathBuf::from(d);
            match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        });
        cfg.workers = int_field("workers", doc.workers, 1)?.map(|w| w as usize);
        if let Some(x) = doc.overlap {
            cfg.overlap = x;
        }
        if let Some(d) = doc.delays_um {
            cfg.delays_um = d;
        }
        if let Some(d) = doc.drive_levels_radians {
            cfg.drive_levels_radians = d;
        }
        if let Some(p) = int_field("sweep_points", doc.sweep_points, 8)? {
            cfg.sweep_points = p as usize;
        }
        cfg.detector_noise = doc.detector_noise;
        cfg.platforms = doc.platforms.map(|p| {
            let p = PathBuf::from(p);
            match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        });
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return usage(format!("field `n` must be >= 2, got {}", self.n));
        }
        let stochastic = matches!(self.campaign, CampaignKind::FidelityHaar | CampaignKind::FidelityPerm);
        if stochastic && self.count == 0 {
            return usage("field `count` must be positive for fidelity campaigns");
        }
        if self.workers == Some(0) {
            return usage("field `workers` must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return usage(format!("field `overlap` must lie in [0, 1], got {}", self.overlap));
        }
        if self.delays_um.len() < 10 || self.delays_um.iter().any(|d| !d.is_finite()) {
            return usage("field `delays_um` needs at least 10 finite values");
        }
        if self.drive_levels_radians.is_empty() || self.drive_levels_radians.iter().any(|d| !(*d >= 0.0)) {
            return usage("field `drive_levels_radians` needs non-negative values");
        }
        if let Some(s) = self.detector_noise {
            if !(s >= 0.0) {
                return usage("field `detector_noise` must be >= 0");
            }
        }
        if self.campaign == CampaignKind::FidelityPerm {
            let fact = (1..=self.n).try_fold(1usize, |a, k| a.checked_mul(k));
            if fact.is_some_and(|f| self.count > f) {
                return usage(format!("field `count`: only {} distinct permutations of {} modes", fact.unwrap(), self.n));
            }
        }
        Ok(())
    }

    /// The experiment-defining part of the config. Execution settings
    /// (workers, output directory) are left out so reports do not depend
    /// on them.
    pub fn echo(&self) -> Value {
        let mut v = json!({
            "schema_version": SCHEMA_VERSION,
            "campaign": self.campaign.name(),
            "n": self.n,
            "seed": self.seed,
            "profile": self.profile.label(),
            "profile_seed": self.profile_seed,
        });
        let o = v.as_object_mut().expect("object");
        match self.campaign {
            CampaignKind::FidelityHaar | CampaignKind::FidelityPerm => {
                o.insert("count".into(), json!(self.count));
            }
            CampaignKind::Calibration => {
                o.insert("sweep_points".into(), json!(self.sweep_points));
                o.insert("detector_noise".into(), json!(self.detector_noise));
            }
            CampaignKind::HomMap => {
                o.insert("overlap".into(), json!(self.overlap));
                o.insert("delays_um".into(), json!(self.delays_um));
            }
            CampaignKind::DelaySweep => {
                o.insert("overlap".into(), json!(self.overlap));
                o.insert("delays_um".into(), json!(self.delays_um));
                o.insert("drive_levels_radians".into(), json!(self.drive_levels_radians));
            }
            CampaignKind::LossReport => {}
            CampaignKind::Platform => {
                o.insert("platforms".into(), json!(self.platforms.as_ref().map(|p| p.display().to_string())));
            }
        }
        v
    }

    /// Full normalized form, including execution settings.
    pub fn normalized(&self) -> Value {
        let mut v = self.echo();
        let o = v.as_object_mut().expect("object");
        o.insert("output_dir".into(), json!(self.output_dir.as_ref().map(|p| p.display().to_string())));
        o.insert("workers".into(), json!(self.workers));
        v
    }
}

/// Read, check and normalize a config file.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| QppError::Validation(format!("config {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text, path.parent())
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub results: Value,
    pub summary: Value,
    pub artifacts: Vec<Artifact>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    /// Report without timing; identical for identical configs.
    pub fn payload(&self) -> Value {
        json!({
            "tool_version": TOOL_VERSION,
            "config": self.config.echo(),
            "summary": self.summary,
            "results": self.results,
        })
    }

    pub fn payload_json(&self) -> String {
        serde_json::to_string_pretty(&self.payload()).expect("serializable") + "\n"
    }

    /// Payload plus a `timing` block.
    pub fn to_json(&self) -> String {
        let mut v = self.payload();
        v.as_object_mut()
            .expect("object")
            .insert("timing".into(), json!({ "wall_clock_seconds": self.wall_clock_seconds }));
        serde_json::to_string_pretty(&v).expect("serializable") + "\n"
    }

    /// Write `report.json` and every artifact into `dir`, each through a
    /// temporary file and a rename.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = vec![write_atomic(&dir.join("report.json"), &self.to_json())?];
        for a in &self.artifacts {
            written.push(write_atomic(&dir.join(&a.name), &a.contents)?);
        }
        Ok(written)
    }
}

/// Write `contents` to `path` via a sibling temp file and rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<PathBuf> {
    let name = path.file_name().ok_or_else(|| QppError::Io(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(path.to_path_buf())
}

/// Run `config` on a pool of `config.workers` threads (all cores when unset).
pub fn run_campaign(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| QppError::Validation(format!("worker pool: {e}")))?;
    let start = Instant::now();
    let (results, summary, artifacts) = pool.install(|| run_inner(config))?;
    Ok(ExperimentReport {
        config: config.clone(),
        results,
        summary,
        artifacts,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

type Output = (Value, Value, Vec<Artifact>);

fn run_inner(cfg: &ExperimentConfig) -> Result<Output> {
    match cfg.campaign {
        CampaignKind::FidelityHaar => {
            let targets = haar_ensemble(cfg.n, cfg.count, cfg.seed)?;
            fidelity_campaign(cfg, &targets, None)
        }
        CampaignKind::FidelityPerm => {
            let perms = permutation_ensemble(cfg.n, cfg.count, cfg.seed)?;
            let targets = perms.iter().map(|p| permutation_unitary(p)).collect::<Result<Vec<_>>>()?;
            fidelity_campaign(cfg, &targets, Some(&perms))
        }
        CampaignKind::Calibration => calibration_campaign(cfg),
        CampaignKind::HomMap => hom_map_campaign(cfg),
        CampaignKind::DelaySweep => delay_sweep_campaign(cfg),
        CampaignKind::LossReport => loss_campaign(cfg),
        CampaignKind::Platform => platform_campaign(cfg),
    }
}

/// Fidelity of one target through compile, voltage solve, the chip and the
/// measurement. Measurement seed is derived from `(seed, index)`.
pub fn measure_target(
    profile: &HardwareProfile,
    solver: &VoltageSolver,
    target: &Unitary,
    seed: u64,
    index: usize,
) -> Result<(f64, nalgebra::DMatrix<f64>)> {
    let settings = clements_decompose(target.matrix())?.settings;
    let volts = solver.solve(&settings)?;
    let realized = profile.realize(&volts, settings.output_phases())?;
    let measured: AmplitudeMatrix = measure_amplitude_matrix(profile, &realized, rng::derive_seed(seed, index as u64))?;
    Ok((amplitude_fidelity(target, &measured)?, error_matrix(target, &measured)?))
}

fn fidelity_campaign(cfg: &ExperimentConfig, targets: &[Unitary], perms: Option<&[Vec<usize>]>) -> Result<Output> {
    let profile = cfg.profile.load(cfg.n, cfg.profile_seed)?;
    let solver = VoltageSolver::new(&profile, &CalibrationRecord::exact(&profile))?;
    let outcomes: Vec<Result<(f64, nalgebra::DMatrix<f64>)>> = targets
        .par_iter()
        .enumerate()
        .map(|(i, u)| measure_target(&profile, &solver, u, cfg.seed, i))
        .collect();
    let failures: Vec<String> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("item {i}: {e}")))
        .collect();
    if !failures.is_empty() {
        return Err(QppError::Campaign(failures));
    }
    let (fidelities, errors): (Vec<f64>, Vec<_>) = outcomes.into_iter().map(|r| r.expect("checked")).unzip();
    let stats = ensemble_statistics(&fidelities)?;
    let max_abs_error = errors.iter().map(|e| e.amax()).fold(0.0, f64::max);
    let mean_error = mean_matrix(&errors)?;
    let items: Vec<Value> = fidelities
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(i, (f, e))| {
            let mut v = json!({ "index": i, "fidelity": f, "max_abs_error": e.amax() });
            if let Some(p) = perms {
                v.as_object_mut().unwrap().insert("permutation".into(), json!(p[i]));
            }
            v
        })
        .collect();
    let summary = json!({
        "count": stats.count,
        "mean_fidelity": stats.mean,
        "std_fidelity": stats.std,
        "min_fidelity": stats.min,
        "max_fidelity": stats.max,
        "max_abs_error": max_abs_error,
        "max_abs_mean_error": mean_error.amax(),
        "histogram": stats.histogram,
    });
    let mut csv = String::from("index,fidelity,max_abs_error\n");
    for (i, (f, e)) in fidelities.iter().zip(&errors).enumerate() {
        csv.push_str(&format!("{i},{f:.15e},{:.15e}\n", e.amax()));
    }
    let mut hist = String::from("bin_low,bin_high,count\n");
    let edges = stats.histogram.edges();
    for (k, c) in stats.histogram.counts.iter().enumerate() {
        hist.push_str(&format!("{:.4},{:.4},{c}\n", edges[k], edges[k + 1]));
    }
    hist.push_str(&format!("underflow,,{}\noverflow,,{}\n", stats.histogram.underflow, stats.histogram.overflow));
    let mut em = String::from("row,col,mean_error\n");
    for i in 0..mean_error.nrows() {
        for j in 0..mean_error.ncols() {
            em.push_str(&format!("{i},{j},{:.15e}\n", mean_error[(i, j)]));
        }
    }
    Ok((
        Value::Array(items),
        summary,
        vec![
            Artifact { name: "fidelities.csv".into(), contents: csv },
            Artifact { name: "histogram.csv".into(), contents: hist },
            Artifact { name: "mean_error_matrix.csv".into(), contents: em },
        ],
    ))
}

fn calibration_campaign(cfg: &ExperimentConfig) -> Result<Output> {
    let profile = cfg.profile.load(cfg.n, cfg.profile_seed)?;
    let noise = cfg.detector_noise.unwrap_or(profile.detector_noise_sigma);
    let record = calibrate_all(&profile, cfg.sweep_points, noise, cfg.seed)?;
    let mut max_alpha = 0.0f64;
    let mut max_phi0 = 0.0f64;
    let items: Vec<Value> = record
        .fits
        .values()
        .map(|f| {
            let h = profile.heaters[f.heater_id];
            let da = ((f.alpha - h.alpha) / h.alpha).abs();
            let dp = crate::mesh::phase_distance(f.phi0, h.phi0);
            max_alpha = max_alpha.max(da);
            max_phi0 = max_phi0.max(dp);
            json!({
                "heater_id": f.heater_id,
                "phi0": f.phi0,
                "alpha": f.alpha,
                "residual": f.residual,
                "alpha_relative_error": da,
                "phi0_error": dp,
            })
        })
        .collect();
    let max_residual = record.fits.values().map(|f| f.residual).fold(0.0, f64::max);
    let summary = json!({
        "heaters": record.fits.len(),
        "max_residual": max_residual,
        "max_alpha_relative_error": max_alpha,
        "max_phi0_error": max_phi0,
        "detector_noise": noise,
    });
    Ok((Value::Array(items), summary, vec![Artifact { name: "calibration.csv".into(), contents: record.to_csv() }]))
}

fn hom_map_campaign(cfg: &ExperimentConfig) -> Result<Output> {
    let profile = cfg.profile.load(cfg.n, cfg.profile_seed)?;
    let source = PhotonPairSource {
        overlap: cfg.overlap,
        center_wavelength_nm: profile.wavelength_nm,
        ..PhotonPairSource::default()
    };
    let map = hom_visibility_map(cfg.n, &source, &profile, &cfg.delays_um, cfg.seed)?;
    let (rows, cols) = map.groups();
    let anova = |g: &[Vec<f64>]| one_way_anova(g).ok().map(|a| json!(a));
    let summary = json!({
        "cells": map.cells.len(),
        "mean_visibility": map.summary.mean,
        "std_visibility": map.summary.std,
        "min_visibility": map.summary.min,
        "max_visibility": map.summary.max,
        "low_confidence_cells": map.cells.iter().filter(|c| c.low_confidence).count(),
        "histogram": map.summary.histogram,
        "row_anova": anova(&rows),
        "column_anova": anova(&cols),
        "coherence_length_um": source.coherence_length_um(),
    });
    let json_map = serde_json::to_string_pretty(&map.cells).expect("serializable") + "\n";
    Ok((
        serde_json::to_value(&map.cells).expect("serializable"),
        summary,
        vec![
            Artifact { name: "visibility_map.json".into(), contents: json_map },
            Artifact { name: "visibility_grid.csv".into(), contents: map.grid_csv() },
        ],
    ))
}

fn delay_sweep_campaign(cfg: &ExperimentConfig) -> Result<Output> {
    let profile = cfg.profile.load(cfg.n, cfg.profile_seed)?;
    let source = PhotonPairSource {
        overlap: cfg.overlap,
        center_wavelength_nm: profile.wavelength_nm,
        ..PhotonPairSource::default()
    };
    let sweep = diagonal_delay_sweep(cfg.n, &profile, &source, &cfg.drive_levels_radians, &cfg.delays_um, cfg.seed)?;
    let last = sweep.points.iter().max_by(|a, b| a.drive_radians.total_cmp(&b.drive_radians)).expect("non-empty");
    let summary = json!({
        "driven_heaters": sweep.heaters.len(),
        "heater_ids": sweep.heaters,
        "input_pair": sweep.input_pair,
        "output_pair": sweep.output_pair,
        "wavelength_nm": sweep.wavelength_nm,
        "max_drive_radians": last.drive_radians,
        "per_heater_shift_um": last.per_heater_shift_um,
        "total_shift_um": last.total_shift_um,
        "fitted_shift_um": last.fitted_center_um,
    });
    Ok((
        serde_json::to_value(&sweep.points).expect("serializable"),
        summary,
        vec![Artifact { name: "delay_sweep.csv".into(), contents: sweep.to_csv() }],
    ))
}

fn loss_campaign(cfg: &ExperimentConfig) -> Result<Output> {
    let profile = cfg.profile.load(cfg.n, cfg.profile_seed)?;
    let losses = insertion_loss_per_mode(&profile)?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    let facets = 2.0 * profile.loss.coupling_loss_db_per_facet;
    let per_cell = (mean - facets) / cfg.n as f64;
    let items: Vec<Value> = losses.iter().enumerate().map(|(i, l)| json!({ "mode": i, "insertion_loss_db": l })).collect();
    let summary = json!({
        "mean_insertion_loss_db": mean,
        "min_insertion_loss_db": losses.iter().cloned().fold(f64::INFINITY, f64::min),
        "max_insertion_loss_db": losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "coupling_loss_db_per_facet": profile.loss.coupling_loss_db_per_facet,
        "propagation_loss_db_per_cm": profile.loss.propagation_loss_db_per_cm,
        "loss_per_unit_cell_db": per_cell,
        "useful_processor_size": if per_cell > 0.0 { useful_processor_size(per_cell).ok() } else { None },
        "unit_cells": cell_count(cfg.n),
    });
    let mut csv = String::from("mode,insertion_loss_db\n");
    for (i, l) in losses.iter().enumerate() {
        csv.push_str(&format!("{i},{l:.12}\n"));
    }
    Ok((Value::Array(items), summary, vec![Artifact { name: "insertion_loss.csv".into(), contents: csv }]))
}

fn platform_campaign(cfg: &ExperimentConfig) -> Result<Output> {
    let mut extra = bundled_platforms();
    if let Some(path) = &cfg.platforms {
        let text = fs::read_to_string(path).map_err(|e| QppError::Validation(format!("platforms {}: {e}", path.display())))?;
        extra.extend(parse_platform_csv(&text)?);
    }
    let report = platform_report(&extra)?;
    let summary = json!({
        "entries": report.ranking.len(),
        "top": report.ranking.first().map(|r| r.entry.name.clone()),
        "insertion_loss_table": report.insertion_loss_table,
    });
    Ok((
        serde_json::to_value(&report.ranking).expect("serializable"),
        summary,
        vec![Artifact { name: "platform_ranking.csv".into(), contents: report.to_csv() }],
    ))
}
