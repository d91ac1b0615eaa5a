//! Fidelity metrics, ensemble statistics and loss scaling across platforms.

use std::f64::consts::E;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{validation, QppError, Result};
use crate::mesh::{TransferMatrix, Unitary};

/// Elementwise magnitudes of a transformation, columns of unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix {
    values: DMatrix<f64>,
}

impl AmplitudeMatrix {
    /// Column-normalizes `magnitudes`. Entries must be finite and >= 0 and
    /// every column must carry some power.
    pub fn new(magnitudes: DMatrix<f64>) -> Result<Self> {
        Self::from_powers(magnitudes.map(|x| x * x))
    }

    /// Square roots of column-normalized detected powers.
    pub fn from_powers(mut powers: DMatrix<f64>) -> Result<Self> {
        if !powers.is_square() {
            return validation("amplitude matrix must be square");
        }
        if powers.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return validation("powers must be finite and non-negative");
        }
        for (j, mut col) in powers.column_iter_mut().enumerate() {
            let total: f64 = col.iter().sum();
            if !(total > 0.0) {
                return validation(format!("column {j} carries no power"));
            }
            col /= total;
        }
        Ok(Self { values: powers.map(f64::sqrt) })
    }

    /// `|U|` of a unitary; already column-normalized.
    pub fn from_unitary(u: &Unitary) -> Self {
        Self { values: u.magnitudes() }
    }

    /// Magnitudes of a (possibly lossy) transfer matrix, column-normalized.
    pub fn from_transfer(t: &TransferMatrix) -> Result<Self> {
        Self::from_powers(t.elements().map(|z| z.norm_sqr()))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Long-format `row,col,amplitude` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,amplitude\n");
        for i in 0..self.n() {
            for j in 0..self.n() {
                out.push_str(&format!("{i},{j},{:.15e}\n", self.values[(i, j)]));
            }
        }
        out
    }
}

/// `F = Tr(|U†| · M) / N`. Since `|U†| = |U|ᵀ` this is the mean over
/// columns of the overlap between `|U|` and `M`.
pub fn amplitude_fidelity(target: &Unitary, measured: &AmplitudeMatrix) -> Result<f64> {
    let n = target.n();
    if measured.n() != n {
        return validation(format!("target is {n}x{n}, measured {}x{}", measured.n(), measured.n()));
    }
    let dagger_abs = target.matrix().adjoint().map(|z| z.norm());
    let f = (dagger_abs * measured.values()).trace() / n as f64;
    Ok(f.clamp(0.0, 1.0))
}

/// Signed `|target| - measured`.
pub fn error_matrix(target: &Unitary, measured: &AmplitudeMatrix) -> Result<DMatrix<f64>> {
    if measured.n() != target.n() {
        return validation("dimension mismatch between target and measurement");
    }
    Ok(target.magnitudes() - measured.values())
}

pub const HISTOGRAM_LOW: f64 = 0.90;
pub const HISTOGRAM_HIGH: f64 = 1.00;
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.0025;

/// Fixed-width fidelity histogram over `[0.90, 1.00]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub low: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(values: &[f64]) -> Self {
        Self::with_range(values, HISTOGRAM_LOW, HISTOGRAM_HIGH, HISTOGRAM_BIN_WIDTH)
    }

    /// Bins are `[low + k w, low + (k+1) w)`; the last bin also takes `high`.
    pub fn with_range(values: &[f64], low: f64, high: f64, bin_width: f64) -> Self {
        let bins = ((high - low) / bin_width).round() as usize;
        let mut h = Self { low, bin_width, counts: vec![0; bins], underflow: 0, overflow: 0 };
        for &v in values {
            if v < low {
                h.underflow += 1;
            } else if v > high {
                h.overflow += 1;
            } else {
                let k = (((v - low) / bin_width + 1e-9).floor() as usize).min(bins - 1);
                h.counts[k] += 1;
            }
        }
        h
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.counts.len()).map(|k| self.low + k as f64 * self.bin_width).collect()
    }

    /// Number of local maxima of the bin counts, plateaus counted once.
    pub fn modes(&self) -> usize {
        let mut dedup: Vec<usize> = Vec::new();
        for &x in &self.counts {
            if dedup.last() != Some(&x) {
                dedup.push(x);
            }
        }
        (0..dedup.len())
            .filter(|&i| {
                dedup[i] > 0
                    && (i == 0 || dedup[i - 1] < dedup[i])
                    && (i + 1 == dedup.len() || dedup[i + 1] < dedup[i])
            })
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStatistics {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

/// Sums run over sorted values so the result does not depend on input order.
pub fn ensemble_statistics(values: &[f64]) -> Result<EnsembleStatistics> {
    if values.is_empty() {
        return validation("ensemble statistics need at least one value");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return validation("ensemble values must be finite");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let count = sorted.len();
    let mean = sorted.iter().sum::<f64>() / count as f64;
    let std = if count > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(EnsembleStatistics {
        count,
        mean,
        std,
        min: sorted[0],
        max: sorted[count - 1],
        histogram: Histogram::new(&sorted),
    })
}

/// Elementwise mean of equally sized matrices.
pub fn mean_matrix(matrices: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = matrices.first().ok_or_else(|| QppError::Validation("no matrices to average".into()))?;
    let mut acc = DMatrix::zeros(first.nrows(), first.ncols());
    for m in matrices {
        if m.shape() != first.shape() {
            return validation("matrices differ in shape");
        }
        acc += m;
    }
    Ok(acc / matrices.len() as f64)
}

/// Loss in dB that reduces transmission to `1/e`.
pub fn e_folding_loss_db() -> f64 {
    10.0 * E.log10()
}

/// Number of cells that can be concatenated before transmission falls to
/// `1/e`.
pub fn useful_processor_size(loss_per_unit_cell_db: f64) -> Result<u64> {
    if !(loss_per_unit_cell_db > 0.0) || !loss_per_unit_cell_db.is_finite() {
        return validation("loss per unit cell must be positive");
    }
    let ratio = e_folding_loss_db() / loss_per_unit_cell_db;
    // tolerate representation error right at an integer threshold
    let nearest = ratio.round();
    let cells = if (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) { nearest } else { ratio.floor() };
    Ok(cells as u64)
}

/// One processor in the platform comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformEntry {
    pub name: String,
    pub platform: String,
    pub modes: usize,
    pub loss_per_unit_cell_db: f64,
    pub insertion_loss_db: f64,
    pub citation: String,
    /// Fields below are only known for the built-in processors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heaters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_loss_db_per_facet: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation_loss_db_per_cm: Option<f64>,
}

impl PlatformEntry {
    fn builtin(name: &str, modes: usize, heaters: usize, il: f64, cl: f64, pl: f64) -> Self {
        // a light path crosses `modes` cells on its way through a square mesh
        let per_cell = (il - 2.0 * cl) / modes as f64;
        Self {
            name: name.into(),
            platform: "SiN".into(),
            modes,
            loss_per_unit_cell_db: per_cell,
            insertion_loss_db: il,
            citation: "built-in".into(),
            heaters: Some(heaters),
            coupling_loss_db_per_facet: Some(cl),
            propagation_loss_db_per_cm: Some(pl),
        }
    }

    pub fn useful_size(&self) -> Result<u64> {
        useful_processor_size(self.loss_per_unit_cell_db)
    }
}

/// The 12- and 20-mode processors that are always part of a report.
pub fn builtin_platforms() -> Vec<PlatformEntry> {
    vec![
        PlatformEntry::builtin("12-mode processor", 12, 132, 5.0, 2.1, 0.1),
        PlatformEntry::builtin("20-mode processor", 20, 380, 2.9, 0.9, 0.07),
    ]
}

/// Literature dataset shipped with the crate.
pub const BUNDLED_PLATFORMS_CSV: &str = include_str!("../data/platforms.csv");

/// Parse a `name,platform,modes,loss_per_unit_cell_db,insertion_loss_db,citation`
/// CSV. Quoting is not supported; fields must not contain commas.
pub fn parse_platform_csv(text: &str) -> Result<Vec<PlatformEntry>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| QppError::Parse("empty platform CSV".into()))?;
    if header.trim() != "name,platform,modes,loss_per_unit_cell_db,insertion_loss_db,citation" {
        return Err(QppError::Parse(format!("unexpected platform CSV header: {header}")));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(QppError::Parse(format!("line {}: expected 6 fields", k + 2)));
            }
            let num = |s: &str, what: &str| -> Result<f64> {
                s.parse().map_err(|_| QppError::Parse(format!("line {}: bad {what} '{s}'", k + 2)))
            };
            Ok(PlatformEntry {
                name: f[0].into(),
                platform: f[1].into(),
                modes: f[2].parse().map_err(|_| QppError::Parse(format!("line {}: bad modes", k + 2)))?,
                loss_per_unit_cell_db: num(f[3], "loss_per_unit_cell_db")?,
                insertion_loss_db: num(f[4], "insertion_loss_db")?,
                citation: f[5].into(),
                heaters: None,
                coupling_loss_db_per_facet: None,
                propagation_loss_db_per_cm: None,
            })
        })
        .collect()
}

pub fn bundled_platforms() -> Vec<PlatformEntry> {
    parse_platform_csv(BUNDLED_PLATFORMS_CSV).expect("bundled dataset parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlatform {
    pub rank: usize,
    pub useful_size: u64,
    #[serde(flatten)]
    pub entry: PlatformEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformReport {
    /// Insertion loss against mode count, sorted by modes then name.
    pub insertion_loss_table: Vec<(String, usize, f64)>,
    /// Largest useful size first.
    pub ranking: Vec<RankedPlatform>,
}

impl PlatformReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,name,platform,modes,loss_per_unit_cell_db,insertion_loss_db,useful_size,citation\n");
        for r in &self.ranking {
            let e = &r.entry;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.rank, e.name, e.platform, e.modes, e.loss_per_unit_cell_db, e.insertion_loss_db, r.useful_size, e.citation
            ));
        }
        out
    }
}

/// Rank the built-in processors together with `extra` entries by useful size.
pub fn platform_report(extra: &[PlatformEntry]) -> Result<PlatformReport> {
    let mut all = builtin_platforms();
    all.extend_from_slice(extra);
    let mut ranking = all
        .iter()
        .map(|e| Ok(RankedPlatform { rank: 0, useful_size: e.useful_size()?, entry: e.clone() }))
        .collect::<Result<Vec<_>>>()?;
    ranking.sort_by(|a, b| {
        b.useful_size
            .cmp(&a.useful_size)
            .then(a.entry.loss_per_unit_cell_db.total_cmp(&b.entry.loss_per_unit_cell_db))
            .then(a.entry.name.cmp(&b.entry.name))
    });
    for (k, r) in ranking.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    let mut table: Vec<(String, usize, f64)> = all.iter().map(|e| (e.name.clone(), e.modes, e.insertion_loss_db)).collect();
    table.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(PlatformReport { insertion_loss_table: table, ranking })
}

/// One-way analysis of variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// Tests whether the group means differ. Needs at least two groups and more
/// observations than groups. Zero within-group variance gives `p = 1` if the
/// means also agree and `p = 0` otherwise.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<Anova> {
    let k = groups.len();
    let total: usize = groups.iter().map(Vec::len).sum();
    if k < 2 || groups.iter().any(Vec::is_empty) || total <= k {
        return validation("ANOVA needs two or more non-empty groups and more observations than groups");
    }
    let grand = groups.iter().flatten().sum::<f64>() / total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand).powi(2);
        ss_within += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }
    let (df_b, df_w) = (k - 1, total - k);
    let scale = grand.abs().max(1.0) * 1e-24 * total as f64;
    if ss_within <= scale {
        let p = if ss_between <= scale { 1.0 } else { 0.0 };
        return Ok(Anova { f_statistic: if p == 1.0 { 0.0 } else { f64::INFINITY }, p_value: p, df_between: df_b, df_within: df_w });
    }
    let f = (ss_between / df_b as f64) / (ss_within / df_w as f64);
    let dist = FisherSnedecor::new(df_b as f64, df_w as f64).map_err(|e| QppError::Validation(e.to_string()))?;
    Ok(Anova { f_statistic: f, p_value: dist.sf(f), df_between: df_b, df_within: df_w })
}
