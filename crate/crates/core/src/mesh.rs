//! Mesh topology and transfer-matrix conventions.
//!
//! The mesh is a rectangular (Clements) arrangement of unit cells. Column
//! `c` couples the mode pairs `(m, m + 1)` with `m ≡ c (mod 2)`, so adjacent
//! columns alternate between even and odd pairs. A mesh of `n` modes holds
//! `n (n - 1) / 2` cells spread over `n` columns (one column for `n = 2`).
//!
//! Each unit cell is a tunable beam splitter with internal phase `theta`
//! followed by an external phase `phi` on its upper input:
//!
//! ```text
//! T(θ, φ) = [[e^{iφ} sin(θ/2), -cos(θ/2)],
//!            [e^{iφ} cos(θ/2),  sin(θ/2)]]
//! ```
//!
//! `θ = π` is the bar state (identity at `φ = 0`), `θ = 0` the cross state,
//! and the same-mode power is `sin²(θ/2)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, QppError, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;

/// Unitarity tolerance for [`Unitary`] (max-abs of `U U^H - I`).
pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// Wrap a phase into `[0, 2π)`.
pub fn normalize_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round tiny negative inputs up to exactly 2π
    if r >= TAU {
        0.0
    } else {
        r + 0.0
    }
}

/// Signed distance between two phases, in `(-π, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = normalize_phase(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Max-abs elementwise deviation of `m m^H` from the identity.
pub fn unitarity_violation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let prod = m * m.adjoint();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(expected, 0.0)).norm());
        }
    }
    worst
}

/// Max-abs elementwise difference of two equally sized matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// An `n × n` unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    matrix: CMatrix,
}

impl Unitary {
    /// Wrap `matrix`, checking unitarity to [`UNITARY_TOLERANCE`].
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, UNITARY_TOLERANCE)
    }

    pub fn with_tolerance(matrix: CMatrix, tolerance: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return validation(format!(
                "unitary must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        let violation = unitarity_violation(&matrix);
        if !(violation <= tolerance) {
            return Err(QppError::NotUnitary { violation, tolerance });
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: CMatrix::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Elementwise modulus `|U|`.
    pub fn magnitudes(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.norm())
    }
}

/// Location of a unit cell: mesh column and upper mode of its pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellAddress {
    pub column: usize,
    pub row: usize,
}

impl CellAddress {
    pub const fn new(column: usize, row: usize) -> Self {
        Self { column, row }
    }

    pub fn is_valid(&self, n: usize) -> bool {
        self.column < column_count(n) && self.row + 1 < n && self.row % 2 == self.column % 2
    }
}

/// Number of unit cells in an `n`-mode mesh.
pub const fn cell_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Number of non-empty mesh columns.
pub const fn column_count(n: usize) -> usize {
    match n {
        0 | 1 => 0,
        2 => 1,
        _ => n,
    }
}

/// All cell addresses of an `n`-mode mesh, sorted by `(column, row)`.
pub fn addresses(n: usize) -> Vec<CellAddress> {
    let mut out = Vec::with_capacity(cell_count(n));
    for column in 0..column_count(n) {
        let mut row = column % 2;
        while row + 1 < n {
            out.push(CellAddress::new(column, row));
            row += 2;
        }
    }
    out
}

/// Cells of one column, in row order.
pub fn column_cells(n: usize, column: usize) -> impl Iterator<Item = CellAddress> {
    (column % 2..n.saturating_sub(1))
        .step_by(2)
        .map(move |row| CellAddress::new(column, row))
}

/// Phases of one unit cell, stored in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSetting {
    theta: f64,
    phi: f64,
}

impl CellSetting {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta: normalize_phase(theta), phi: normalize_phase(phi) }
    }

    pub const BAR: CellSetting = CellSetting { theta: std::f64::consts::PI, phi: 0.0 };
    pub const CROSS: CellSetting = CellSetting { theta: 0.0, phi: 0.0 };
    pub const HALF: CellSetting = CellSetting { theta: std::f64::consts::FRAC_PI_2, phi: 0.0 };

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Same-mode power fraction `sin²(θ/2)`.
    pub fn reflectivity(&self) -> f64 {
        (self.theta / 2.0).sin().powi(2)
    }
}

/// Transfer matrix of a single unit cell.
pub fn cell_transfer(setting: CellSetting) -> Matrix2<Complex64> {
    cell_matrix(setting.theta, setting.phi)
}

/// [`cell_transfer`] without phase normalization. The matrix changes sign
/// under `θ → θ + 2π`, so perturbed phases must not be re-wrapped.
pub(crate) fn cell_matrix(theta: f64, phi: f64) -> Matrix2<Complex64> {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    Matrix2::new(e * s, Complex64::new(-c, 0.0), e * c, Complex64::new(s, 0.0))
}

/// Left-multiply rows `row` and `row + 1` of `m` by the 2×2 block `t`.
pub(crate) fn apply_rows(m: &mut CMatrix, row: usize, t: &Matrix2<Complex64>) {
    for j in 0..m.ncols() {
        let a = m[(row, j)];
        let b = m[(row + 1, j)];
        m[(row, j)] = t[(0, 0)] * a + t[(0, 1)] * b;
        m[(row + 1, j)] = t[(1, 0)] * a + t[(1, 1)] * b;
    }
}

/// The compiled program of a mesh: one setting per cell plus an output
/// phase screen.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSettings {
    n: usize,
    cells: BTreeMap<CellAddress, CellSetting>,
    output_phases: Vec<f64>,
}

impl MeshSettings {
    pub fn new(
        n: usize,
        cells: BTreeMap<CellAddress, CellSetting>,
        output_phases: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(QppError::Structure("mode count must be >= 1".into()));
        }
        if cells.len() != cell_count(n) {
            return Err(QppError::Structure(format!(
                "expected {} cells for n = {n}, got {}",
                cell_count(n),
                cells.len()
            )));
        }
        if let Some(bad) = cells.keys().find(|a| !a.is_valid(n)) {
            return Err(QppError::Structure(format!(
                "cell (col {}, row {}) is not part of an {n}-mode mesh",
                bad.column, bad.row
            )));
        }
        if output_phases.len() != n {
            return Err(QppError::Structure(format!(
                "expected {n} output phases, got {}",
                output_phases.len()
            )));
        }
        let output_phases = output_phases.into_iter().map(normalize_phase).collect();
        Ok(Self { n, cells, output_phases })
    }

    /// Every cell set to `setting`, output phases zero.
    pub fn uniform(n: usize, setting: CellSetting) -> Self {
        let cells = addresses(n).into_iter().map(|a| (a, setting)).collect();
        Self { n, cells, output_phases: vec![0.0; n] }
    }

    /// All cells in the bar state; realizes the identity.
    pub fn all_bar(n: usize) -> Self {
        Self::uniform(n, CellSetting::BAR)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &BTreeMap<CellAddress, CellSetting> {
        &self.cells
    }

    pub fn cell(&self, address: CellAddress) -> Option<CellSetting> {
        self.cells.get(&address).copied()
    }

    pub fn output_phases(&self) -> &[f64] {
        &self.output_phases
    }

    /// Replace one cell's setting. Panics on an address outside the mesh.
    pub fn set_cell(&mut self, address: CellAddress, setting: CellSetting) {
        let slot = self.cells.get_mut(&address).expect("address outside mesh");
        *slot = setting;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MeshSettingsDoc::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeshSettingsDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Round to 15 significant digits so serialized programs are stable
/// across platforms.
pub(crate) fn round_sig15(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x + 0.0;
    }
    format!("{x:.14e}").parse().expect("formatted float parses")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDoc {
    col: usize,
    row: usize,
    theta: f64,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshSettingsDoc {
    n: usize,
    cells: Vec<CellDoc>,
    output_phases: Vec<f64>,
}

impl From<&MeshSettings> for MeshSettingsDoc {
    fn from(s: &MeshSettings) -> Self {
        Self {
            n: s.n,
            cells: s
                .cells
                .iter()
                .map(|(a, c)| CellDoc {
                    col: a.column,
                    row: a.row,
                    theta: round_sig15(c.theta),
                    phi: round_sig15(c.phi),
                })
                .collect(),
            output_phases: s.output_phases.iter().copied().map(round_sig15).collect(),
        }
    }
}

impl TryFrom<MeshSettingsDoc> for MeshSettings {
    type Error = QppError;

    fn try_from(doc: MeshSettingsDoc) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for c in doc.cells {
            let address = CellAddress::new(c.col, c.row);
            if cells.insert(address, CellSetting::new(c.theta, c.phi)).is_some() {
                return Err(QppError::Structure(format!(
                    "duplicate cell (col {}, row {})",
                    c.col, c.row
                )));
            }
        }
        MeshSettings::new(doc.n, cells, doc.output_phases)
    }
}

impl Serialize for MeshSettings {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeshSettingsDoc::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MeshSettings {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = MeshSettingsDoc::deserialize(deserializer)?;
        doc.try_into().map_err(serde::de::Error::custom)
    }
}

/// Composes the mesh into its `n × n` unitary.
///
/// Columns are applied in order (column 0 first acts on the input), each cell
/// on its `(row, row + 1)` pair, followed by the diagonal output phase screen.
pub fn mesh_unitary(settings: &MeshSettings) -> Unitary {
    let n = settings.n;
    let mut m = CMatrix::identity(n, n);
    for (address, setting) in &settings.cells {
        apply_rows(&mut m, address.row, &cell_transfer(*setting));
    }
    apply_output_phases(&mut m, &settings.output_phases);
    Unitary::new_unchecked(m)
}

pub(crate) fn apply_output_phases(m: &mut CMatrix, phases: &[f64]) {
    for (i, &p) in phases.iter().enumerate() {
        if p != 0.0 {
            let e = Complex64::from_polar(1.0, p);
            m.row_mut(i).iter_mut().for_each(|z| *z *= e);
        }
    }
}

/// Transfer matrix of a passive, possibly lossy network.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    elements: CMatrix,
    lossy: bool,
}

impl TransferMatrix {
    pub fn new(elements: CMatrix, lossy: bool) -> Self {
        Self { elements, lossy }
    }

    pub fn n(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    /// True when the network attenuates light (sub-unitary).
    pub fn is_lossy(&self) -> bool {
        self.lossy
    }

    pub fn max_singular_value(&self) -> f64 {
        self.elements.singular_values().max()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.elements.singular_values().iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

impl From<Unitary> for TransferMatrix {
    fn from(u: Unitary) -> Self {
        Self { elements: u.matrix, lossy: false }
    }
}

/// dB of power loss to amplitude transmission.
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

/// Aggregate loss parameters of the chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModel {
    pub coupling_loss_db_per_facet: f64,
    pub propagation_loss_db_per_cm: f64,
    /// Straight-through optical path length per mode.
    pub path_length_cm: Vec<f64>,
}

/// Total straight path length that, with the default loss figures, gives
/// 2.9 dB of insertion loss: `2 × 0.9 + 0.07 × L = 2.9`.
pub const DEFAULT_PATH_LENGTH_CM: f64 = 15.7;
pub const DEFAULT_COUPLING_LOSS_DB: f64 = 0.9;
pub const DEFAULT_PROPAGATION_LOSS_DB_PER_CM: f64 = 0.07;

impl LossModel {
    pub fn lossless(n: usize) -> Self {
        Self {
            coupling_loss_db_per_facet: 0.0,
            propagation_loss_db_per_cm: 0.0,
            path_length_cm: vec![DEFAULT_PATH_LENGTH_CM; n],
        }
    }

    pub fn default_for(n: usize) -> Self {
        Self {
            coupling_loss_db_per_facet: DEFAULT_COUPLING_LOSS_DB,
            propagation_loss_db_per_cm: DEFAULT_PROPAGATION_LOSS_DB_PER_CM,
            path_length_cm: vec![DEFAULT_PATH_LENGTH_CM; n],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.coupling_loss_db_per_facet >= 0.0) {
            return validation("coupling_loss_db_per_facet must be >= 0");
        }
        if !(self.propagation_loss_db_per_cm >= 0.0) {
            return validation("propagation_loss_db_per_cm must be >= 0");
        }
        if self.path_length_cm.len() != n {
            return validation(format!(
                "path_length_cm has {} entries for {n} modes",
                self.path_length_cm.len()
            ));
        }
        if self.path_length_cm.iter().any(|l| !(*l >= 0.0)) {
            return validation("path_length_cm entries must be >= 0");
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.coupling_loss_db_per_facet == 0.0
            && (self.propagation_loss_db_per_cm == 0.0 || self.path_length_cm.iter().all(|l| *l == 0.0))
    }

    pub(crate) fn facet_amplitude(&self) -> f64 {
        db_to_amplitude(self.coupling_loss_db_per_facet)
    }

    /// Per-mode amplitude transmission of one mesh column.
    pub(crate) fn column_amplitudes(&self, n: usize) -> Vec<f64> {
        let columns = column_count(n).max(1) as f64;
        self.path_length_cm
            .iter()
            .map(|l| db_to_amplitude(self.propagation_loss_db_per_cm * l / columns))
            .collect()
    }

    /// Straight-through insertion loss of mode `i`, in dB.
    pub fn straight_insertion_loss_db(&self, i: usize) -> f64 {
        2.0 * self.coupling_loss_db_per_facet + self.propagation_loss_db_per_cm * self.path_length_cm[i]
    }
}

pub(crate) fn scale_rows(m: &mut CMatrix, factors: &[f64]) {
    for (i, &f) in factors.iter().enumerate() {
        if f != 1.0 {
            m.row_mut(i).iter_mut().for_each(|z| *z *= f);
        }
    }
}

/// Lossy transfer matrix of `settings`: input facet, then each column
/// followed by its propagation loss, then output phases and output facet.
pub fn apply_loss(settings: &MeshSettings, loss: &LossModel) -> Result<TransferMatrix> {
    let n = settings.n;
    loss.validate(n)?;
    if loss.is_lossless() {
        return Ok(mesh_unitary(settings).into());
    }
    let facet = loss.facet_amplitude();
    let column_amp = loss.column_amplitudes(n);
    let mut m = CMatrix::identity(n, n) * Complex64::new(facet, 0.0);
    for column in 0..column_count(n) {
        for address in column_cells(n, column) {
            apply_rows(&mut m, address.row, &cell_transfer(settings.cells[&address]));
        }
        scale_rows(&mut m, &column_amp);
    }
    apply_output_phases(&mut m, &settings.output_phases);
    m *= Complex64::new(facet, 0.0);
    Ok(TransferMatrix::new(m, true))
}
