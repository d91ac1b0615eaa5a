//! Unitary compilation onto the rectangular mesh, and target ensembles.
//!
//! [`clements_decompose`] nulls the lower triangle of the target by
//! alternating column operations (cells applied on the input side) and row
//! operations (cells applied on the output side), then commutes the
//! output-side cells through the leftover diagonal so that every cell ends up
//! in the mesh and the diagonal becomes the output phase screen.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, QppError, Result};
use crate::mesh::{
    addresses, cell_transfer, max_abs_diff, mesh_unitary, normalize_phase, unitarity_violation,
    CMatrix, CellAddress, CellSetting, MeshSettings, Unitary,
};
use crate::rng;

/// Input unitarity tolerance accepted by the compiler.
pub const COMPILE_TOLERANCE: f64 = 1e-8;

// Entries below this magnitude count as already nulled.
const ZERO: f64 = 1e-14;

/// Which side of the target a nulling step multiplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullingSide {
    /// Column operation; the cell acts on the input side.
    Input,
    /// Row operation; the cell acts on the output side.
    Output,
}

/// One eliminated matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullingStep {
    pub side: NullingSide,
    pub row: usize,
    pub col: usize,
    /// Upper mode of the pair the nulling cell acts on.
    pub pair: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub settings: MeshSettings,
    /// Max-abs reconstruction error.
    pub residual: f64,
    pub nulling_sequence: Vec<NullingStep>,
}

#[derive(Clone, Copy)]
struct PlacedCell {
    pair: usize,
    theta: f64,
    phi: f64,
}

/// Compile a unitary into mesh settings.
///
/// θ lands on the principal branch `[0, π]`. Entries that are already zero
/// are nulled by a bar cell with φ = 0, so the identity compiles to the
/// all-bar mesh.
pub fn clements_decompose(u: &CMatrix) -> Result<DecompositionReport> {
    if !u.is_square() || u.nrows() == 0 {
        return validation(format!("target must be square and non-empty, got {}x{}", u.nrows(), u.ncols()));
    }
    let violation = unitarity_violation(u);
    if !(violation <= COMPILE_TOLERANCE) {
        return Err(QppError::NotUnitary { violation, tolerance: COMPILE_TOLERANCE });
    }
    let n = u.nrows();
    let mut v = u.clone();
    let mut input_side = Vec::new();
    let mut output_side = Vec::new();
    let mut sequence = Vec::with_capacity(crate::mesh::cell_count(n));

    for (k, i) in (0..n.saturating_sub(1)).rev().enumerate() {
        if k % 2 == 0 {
            for j in (0..n - 1 - i).rev() {
                let r = i + j + 1;
                let cell = null_from_input(&v, r, j);
                let t = cell_transfer(CellSetting::new(cell.theta, cell.phi));
                apply_cols_adjoint(&mut v, j, &t);
                input_side.push(cell);
                sequence.push(NullingStep { side: NullingSide::Input, row: r, col: j, pair: j });
            }
        } else {
            for j in 0..n - 1 - i {
                let p = i + j;
                let cell = null_from_output(&v, p, j);
                let t = cell_transfer(CellSetting::new(cell.theta, cell.phi));
                crate::mesh::apply_rows(&mut v, p, &t);
                output_side.push(cell);
                sequence.push(NullingStep { side: NullingSide::Output, row: p + 1, col: j, pair: p });
            }
        }
    }

    // v is now diagonal: U = L_1^H .. L_K^H D R_J .. R_1. Push each L^H
    // through D, innermost first.
    let mut diag: Vec<Complex64> = (0..n).map(|i| v[(i, i)]).collect();
    let mut moved = Vec::with_capacity(output_side.len());
    for cell in output_side.iter().rev() {
        let p = cell.pair;
        let (d1, d2) = (diag[p], diag[p + 1]);
        let e = Complex64::from_polar(1.0, -cell.phi);
        let bar = (cell.theta / 2.0).cos().abs() < ZERO;
        let new_phi = if bar {
            diag[p] = e * d1;
            0.0
        } else {
            diag[p] = -e * d2;
            PI + d1.arg() - d2.arg()
        };
        moved.push(PlacedCell { pair: p, theta: cell.theta, phi: new_phi });
    }
    // moved holds T'_K .. T'_1 which is already input-to-output order.
    let ordered: Vec<PlacedCell> = input_side.into_iter().chain(moved).collect();

    let cells = schedule(n, &ordered)?;
    let output_phases = diag.iter().map(|d| if d.norm() < ZERO { 0.0 } else { d.arg() }).collect();
    let settings = MeshSettings::new(n, cells, output_phases)?;
    let residual = max_abs_diff(mesh_unitary(&settings).matrix(), u);
    Ok(DecompositionReport { settings, residual, nulling_sequence: sequence })
}

/// Cell on columns `(j, j + 1)` whose adjoint, applied from the right,
/// nulls `v[r, j]`.
fn null_from_input(v: &CMatrix, r: usize, j: usize) -> PlacedCell {
    let a = v[(r, j)];
    let b = v[(r, j + 1)];
    if a.norm() < ZERO {
        return PlacedCell { pair: j, theta: PI, phi: 0.0 };
    }
    if b.norm() < ZERO {
        return PlacedCell { pair: j, theta: 0.0, phi: 0.0 };
    }
    let theta = 2.0 * b.norm().atan2(a.norm());
    PlacedCell { pair: j, theta, phi: normalize_phase(a.arg() - b.arg()) }
}

/// Cell on rows `(p, p + 1)` that, applied from the left, nulls `v[p + 1, j]`.
fn null_from_output(v: &CMatrix, p: usize, j: usize) -> PlacedCell {
    let x = v[(p, j)];
    let y = v[(p + 1, j)];
    if y.norm() < ZERO {
        return PlacedCell { pair: p, theta: PI, phi: 0.0 };
    }
    if x.norm() < ZERO {
        return PlacedCell { pair: p, theta: 0.0, phi: 0.0 };
    }
    let theta = 2.0 * x.norm().atan2(y.norm());
    PlacedCell { pair: p, theta, phi: normalize_phase(PI + y.arg() - x.arg()) }
}

/// Right-multiply columns `(j, j + 1)` of `m` by `t^H`.
fn apply_cols_adjoint(m: &mut CMatrix, j: usize, t: &Matrix2<Complex64>) {
    let th = t.adjoint();
    for r in 0..m.nrows() {
        let a = m[(r, j)];
        let b = m[(r, j + 1)];
        m[(r, j)] = a * th[(0, 0)] + b * th[(1, 0)];
        m[(r, j + 1)] = a * th[(0, 1)] + b * th[(1, 1)];
    }
}

/// Assign each cell, in application order, to the earliest column of the
/// right parity after every earlier cell sharing one of its modes.
fn schedule(n: usize, ordered: &[PlacedCell]) -> Result<BTreeMap<CellAddress, CellSetting>> {
    let mut next_free = vec![0usize; n];
    let mut cells = BTreeMap::new();
    for cell in ordered {
        let p = cell.pair;
        let mut column = next_free[p].max(next_free[p + 1]);
        if column % 2 != p % 2 {
            column += 1;
        }
        let address = CellAddress::new(column, p);
        if !address.is_valid(n) || cells.insert(address, CellSetting::new(cell.theta, cell.phi)).is_some() {
            return Err(QppError::Structure(format!(
                "decomposition does not fit the rectangular mesh at (col {column}, row {p})"
            )));
        }
        next_free[p] = column + 1;
        next_free[p + 1] = column + 1;
    }
    debug_assert_eq!(cells.keys().copied().collect::<Vec<_>>(), addresses(n));
    Ok(cells)
}

/// Draw a Haar-random unitary from `rng`: QR of a complex Ginibre matrix
/// with the phases of `R`'s diagonal moved into `Q`.
pub fn haar_with_rng<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Unitary {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
    }
    Unitary::new_unchecked(q)
}

/// Haar-random unitary, deterministic per seed.
pub fn haar_random(n: usize, seed: u64) -> Result<Unitary> {
    if n == 0 {
        return validation("mode count must be >= 1");
    }
    Ok(haar_with_rng(n, &mut rng::stream(seed, 0)))
}

/// `count` Haar unitaries; item `i` draws from stream `(seed, i)`, so item 0
/// equals [`haar_random`] with the same seed.
pub fn haar_ensemble(n: usize, count: usize, seed: u64) -> Result<Vec<Unitary>> {
    if n == 0 {
        return validation("mode count must be >= 1");
    }
    Ok((0..count)
        .into_par_iter()
        .map(|i| haar_with_rng(n, &mut rng::stream(seed, i as u64)))
        .collect())
}

fn check_bijection(perm: &[usize]) -> Result<()> {
    let n = perm.len();
    if n == 0 {
        return validation("permutation must be non-empty");
    }
    let mut seen = vec![false; n];
    for (i, &p) in perm.iter().enumerate() {
        if p >= n {
            return validation(format!("perm({i}) = {p} is outside 0..{n}"));
        }
        if std::mem::replace(&mut seen[p], true) {
            return validation(format!("perm is not a bijection: {p} hit twice"));
        }
    }
    Ok(())
}

/// 0/1 unitary routing input `i` to output `perm[i]`.
pub fn permutation_unitary(perm: &[usize]) -> Result<Unitary> {
    check_bijection(perm)?;
    let n = perm.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &p) in perm.iter().enumerate() {
        m[(p, i)] = Complex64::new(1.0, 0.0);
    }
    Ok(Unitary::new_unchecked(m))
}

fn factorial_capped(n: usize) -> u128 {
    (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX)
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm, iterative
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out.sort();
    out
}

/// `count` distinct permutations of `0..n`, sampled uniformly without
/// replacement from a seeded stream.
pub fn permutation_ensemble(n: usize, count: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return validation("mode count must be >= 1");
    }
    if count == 0 {
        return validation("count must be >= 1");
    }
    let total = factorial_capped(n);
    if count as u128 > total {
        return validation(format!("count {count} exceeds {n}! = {total} distinct permutations"));
    }
    let mut rng = rng::stream(seed, 0);
    if total <= 40_320 {
        let mut all = all_permutations(n);
        all.shuffle(&mut rng);
        all.truncate(count);
        return Ok(all);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut perm: Vec<usize> = (0..n).collect();
    while out.len() < count {
        perm.shuffle(&mut rng);
        if seen.insert(perm.clone()) {
            out.push(perm.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Haar,
    Permutation,
}

/// Reproducible description of a target ensemble.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleManifest {
    pub kind: EnsembleKind,
    pub n: usize,
    pub seed: u64,
    pub count: usize,
}

impl EnsembleManifest {
    pub fn generate(&self) -> Result<Vec<Unitary>> {
        match self.kind {
            EnsembleKind::Haar => haar_ensemble(self.n, self.count, self.seed),
            EnsembleKind::Permutation => permutation_ensemble(self.n, self.count, self.seed)?
                .iter()
                .map(|p| permutation_unitary(p))
                .collect(),
        }
    }
}

/// Long-format CSV `matrix,row,col,re,im`.
pub fn matrices_to_csv<'a>(matrices: impl IntoIterator<Item = &'a CMatrix>) -> String {
    let mut out = String::from("matrix,row,col,re,im\n");
    for (k, m) in matrices.into_iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                out.push_str(&format!("{k},{i},{j},{:e},{:e}\n", z.re, z.im));
            }
        }
    }
    out
}

pub fn matrices_from_csv(text: &str) -> Result<Vec<CMatrix>> {
    let mut entries: BTreeMap<usize, Vec<(usize, usize, Complex64)>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || QppError::Parse(format!("line {}: expected matrix,row,col,re,im", lineno + 1));
        if fields.len() != 5 {
            return Err(bad());
        }
        let k: usize = fields[0].parse().map_err(|_| bad())?;
        let i: usize = fields[1].parse().map_err(|_| bad())?;
        let j: usize = fields[2].parse().map_err(|_| bad())?;
        let re: f64 = fields[3].parse().map_err(|_| bad())?;
        let im: f64 = fields[4].parse().map_err(|_| bad())?;
        entries.entry(k).or_default().push((i, j, Complex64::new(re, im)));
    }
    entries
        .into_values()
        .map(|list| {
            let n = list.iter().map(|(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
            if list.len() != n * n {
                return Err(QppError::Parse(format!("matrix needs {} entries, got {}", n * n, list.len())));
            }
            let mut m = CMatrix::zeros(n, n);
            for (i, j, z) in list {
                m[(i, j)] = z;
            }
            Ok(m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_compiles_to_all_bar() {
        for n in 1..=8 {
            let rep = clements_decompose(&CMatrix::identity(n, n)).unwrap();
            assert_eq!(rep.settings, MeshSettings::all_bar(n), "n = {n}");
            assert!(rep.residual < 1e-15);
        }
    }

    #[test]
    fn round_trip_small() {
        for n in 2..=12 {
            for seed in 0..5 {
                let u = haar_random(n, seed).unwrap();
                let rep = clements_decompose(u.matrix()).unwrap();
                assert!(rep.residual < 1e-10, "n={n} seed={seed} residual={}", rep.residual);
                assert_eq!(rep.nulling_sequence.len(), crate::mesh::cell_count(n));
                for c in rep.settings.cells().values() {
                    assert!(c.theta() <= PI + 1e-15);
                }
            }
        }
    }

    #[test]
    fn reversal_permutation_magnitudes() {
        for n in 2..=9 {
            let perm: Vec<usize> = (0..n).rev().collect();
            let u = permutation_unitary(&perm).unwrap();
            let rep = clements_decompose(u.matrix()).unwrap();
            let mag = mesh_unitary(&rep.settings).magnitudes();
            for i in 0..n {
                for j in 0..n {
                    let want = if i + j == n - 1 { 1.0 } else { 0.0 };
                    assert!((mag[(i, j)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_unitary_rejected_with_magnitude() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 1)] = Complex64::new(0.01, 0.0);
        match clements_decompose(&m) {
            Err(QppError::NotUnitary { violation, .. }) => assert!(violation > 0.009),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_mode_haar_is_phase() {
        let u = haar_random(1, 9).unwrap();
        assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn haar_deterministic_and_unitary() {
        let a = haar_random(20, 17).unwrap();
        let b = haar_random(20, 17).unwrap();
        assert_eq!(a, b);
        assert!(unitarity_violation(a.matrix()) < 1e-10);
        assert_eq!(haar_ensemble(20, 3, 17).unwrap()[0], a);
    }

    #[test]
    fn permutation_matrices() {
        assert_eq!(permutation_unitary(&[0, 1, 2]).unwrap(), Unitary::identity(3));
        let swap = permutation_unitary(&[1, 0]).unwrap();
        assert_eq!(swap.matrix()[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(swap.matrix()[(0, 0)], Complex64::new(0.0, 0.0));
        assert!(permutation_unitary(&[0, 0]).is_err());
        assert!(permutation_unitary(&[0, 2]).is_err());
        let p = permutation_unitary(&[2, 0, 1]).unwrap();
        assert_eq!(p.matrix()[(2, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn exhaustive_small_ensemble() {
        let mut perms = permutation_ensemble(3, 6, 4).unwrap();
        perms.sort();
        assert_eq!(perms, all_permutations(3));
        assert!(permutation_ensemble(3, 7, 4).is_err());
        assert!(permutation_ensemble(3, 0, 4).is_err());
    }

    #[test]
    fn ensemble_distinct_and_deterministic() {
        let a = permutation_ensemble(20, 190, 5).unwrap();
        assert_eq!(a, permutation_ensemble(20, 190, 5).unwrap());
        let set: HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), 190);
        assert!(a.iter().all(|p| check_bijection(p).is_ok()));
    }

    #[test]
    fn csv_round_trip() {
        let u = haar_random(3, 2).unwrap();
        let text = matrices_to_csv([u.matrix()]);
        let back = matrices_from_csv(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert!(max_abs_diff(&back[0], u.matrix()) < 1e-15);
    }
}
