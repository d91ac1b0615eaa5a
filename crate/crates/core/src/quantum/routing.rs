use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{validation, QppError, Result};
use crate::mesh::{
    addresses, column_cells, column_count, mesh_unitary, CellAddress, CellSetting, MeshSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellState {
    Bar,
    Cross,
    Half,
}

impl CellState {
    pub fn setting(self) -> CellSetting {
        match self {
            CellState::Bar => CellSetting::BAR,
            CellState::Cross => CellSetting::CROSS,
            CellState::Half => CellSetting::HALF,
        }
    }
}

/// Mesh configuration that brings two photons together only at `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPlan {
    pub n: usize,
    pub target: CellAddress,
    pub input_pair: (usize, usize),
    pub output_pair: (usize, usize),
    pub cell_states: BTreeMap<CellAddress, CellState>,
}

/// The cell of `column` that `mode` passes through, if any.
pub fn cell_at(n: usize, column: usize, mode: usize) -> Option<CellAddress> {
    let start = column % 2;
    if mode < start || mode >= n {
        return None;
    }
    let row = mode - (mode - start) % 2;
    (row + 1 < n).then_some(CellAddress::new(column, row))
}

/// Staircase routing: the upper photon enters at `max(0, m - t)` and moves
/// one row down per column, the lower one enters at `min(n-1, m+1+t)` and
/// moves up; each waits in bar cells at the chip edge until it has to move.
/// After the target the two outputs diverge towards the edges.
pub fn route_to_tbs(n: usize, target: CellAddress) -> Result<RoutingPlan> {
    if !target.is_valid(n) {
        return validation(format!("cell ({}, {}) does not exist in a {n}-mode mesh", target.column, target.row));
    }
    let (t, m) = (target.column, target.row);
    let mut states: BTreeMap<CellAddress, CellState> = addresses(n).into_iter().map(|a| (a, CellState::Bar)).collect();
    let mut set = |column: usize, row: usize, s: CellState| -> Result<()> {
        let slot = states
            .get_mut(&CellAddress::new(column, row))
            .ok_or_else(|| QppError::Structure(format!("routing stepped outside the mesh at ({column}, {row})")))?;
        *slot = s;
        Ok(())
    };

    let a = m.saturating_sub(t);
    let mut pos = a;
    for c in 0..t {
        if m - pos == t - c {
            set(c, pos, CellState::Cross)?;
            pos += 1;
        }
    }
    let b = (m + 1 + t).min(n - 1);
    let mut pos = b;
    for c in 0..t {
        if pos - (m + 1) == t - c {
            set(c, pos - 1, CellState::Cross)?;
            pos -= 1;
        }
    }
    set(t, m, CellState::Half)?;

    let columns = column_count(n);
    let (mut up, mut down) = (m, m + 1);
    for c in t + 1..columns {
        if up > 0 && cell_at(n, c, up).is_some_and(|cell| cell.row + 1 == up) {
            set(c, up - 1, CellState::Cross)?;
            up -= 1;
        }
        if down + 1 < n && cell_at(n, c, down).is_some_and(|cell| cell.row == down) {
            set(c, down, CellState::Cross)?;
            down += 1;
        }
    }
    let plan = RoutingPlan { n, target, input_pair: (a, b), output_pair: (up, down), cell_states: states };
    verify_plan(&plan)?;
    Ok(plan)
}

/// Cells a photon passes through from `mode` at `from_column` until it
/// leaves the mesh or reaches a half cell, plus its exit mode.
fn trace(plan: &RoutingPlan, mut mode: usize, from_column: usize) -> Result<(Vec<CellAddress>, usize, bool)> {
    let mut cells = Vec::new();
    for c in from_column..column_count(plan.n) {
        let Some(cell) = cell_at(plan.n, c, mode) else { continue };
        cells.push(cell);
        match plan.cell_states.get(&cell) {
            Some(CellState::Bar) => {}
            Some(CellState::Cross) => mode = if mode == cell.row { mode + 1 } else { mode - 1 },
            Some(CellState::Half) => return Ok((cells, mode, true)),
            None => return Err(QppError::Structure(format!("plan has no state for ({}, {})", cell.column, cell.row))),
        }
    }
    Ok((cells, mode, false))
}

impl RoutingPlan {
    pub fn settings(&self) -> MeshSettings {
        let cells = self.cell_states.iter().map(|(a, s)| (*a, s.setting())).collect();
        MeshSettings::new(self.n, cells, vec![0.0; self.n]).expect("plan covers every cell")
    }

    /// Cells the photon from `input` crosses before the target, target excluded.
    pub fn path_to_target(&self, input: usize) -> Result<Vec<CellAddress>> {
        let (mut cells, _, hit) = trace(self, input, 0)?;
        if !hit || cells.pop() != Some(self.target) {
            return Err(QppError::Structure(format!("input {input} does not reach the target")));
        }
        Ok(cells)
    }

    /// Cells after the target on the branch leaving through `port` (0 upper,
    /// 1 lower), and the output mode reached.
    pub fn path_from_target(&self, port: usize) -> Result<(Vec<CellAddress>, usize)> {
        let (cells, exit, hit) = trace(self, self.target.row + port, self.target.column + 1)?;
        if hit {
            return Err(QppError::Structure("output branch meets a second half cell".into()));
        }
        Ok((cells, exit))
    }
}

/// Path-trace check: exactly one half cell (the target), both inputs reach
/// it on disjoint cell sets, the two output branches are disjoint and end
/// at the plan's output pair. Also propagates classical light from the two
/// inputs and checks that no other cell receives power.
pub fn verify_plan(plan: &RoutingPlan) -> Result<()> {
    let fail = |msg: String| Err(QppError::Structure(msg));
    let halves: Vec<_> = plan.cell_states.iter().filter(|(_, s)| **s == CellState::Half).map(|(a, _)| *a).collect();
    if halves != [plan.target] {
        return fail(format!("expected exactly one half cell at the target, found {halves:?}"));
    }
    if plan.cell_states.len() != addresses(plan.n).len() {
        return fail("plan does not cover every cell".into());
    }
    let (a, b) = plan.input_pair;
    let upper_in = plan.path_to_target(a)?;
    let lower_in = plan.path_to_target(b)?;
    let (upper_out, c) = plan.path_from_target(0)?;
    let (lower_out, d) = plan.path_from_target(1)?;
    let disjoint = |x: &[CellAddress], y: &[CellAddress]| x.iter().collect::<BTreeSet<_>>().is_disjoint(&y.iter().collect());
    if !disjoint(&upper_in, &lower_in) || !disjoint(&upper_out, &lower_out) {
        return fail(format!("photon paths of ({}, {}) intersect outside the target", plan.target.column, plan.target.row));
    }
    if (c, d) != plan.output_pair {
        return fail(format!("outputs ({c}, {d}) differ from the plan's {:?}", plan.output_pair));
    }
    // the two inputs must enter the target through different ports
    let entry = |path: &[CellAddress], input: usize| -> usize {
        // the port is the mode entering the target column
        let mut mode = input;
        for cell in path {
            if plan.cell_states[cell] == CellState::Cross {
                mode = if mode == cell.row { mode + 1 } else { mode - 1 };
            }
        }
        mode
    };
    if entry(&upper_in, a) != plan.target.row || entry(&lower_in, b) != plan.target.row + 1 {
        return fail("inputs do not arrive at opposite ports of the target".into());
    }

    let lit: BTreeSet<CellAddress> = upper_in
        .iter()
        .chain(&lower_in)
        .chain(&upper_out)
        .chain(&lower_out)
        .copied()
        .chain(std::iter::once(plan.target))
        .collect();
    for (cell, power) in cell_input_powers(plan)? {
        if power > 1e-20 && !lit.contains(&cell) {
            return fail(format!("cell ({}, {}) receives power {power:e}", cell.column, cell.row));
        }
        if power < 0.5 && lit.contains(&cell) {
            return fail(format!("path cell ({}, {}) receives only {power:e}", cell.column, cell.row));
        }
    }
    let u = mesh_unitary(&plan.settings());
    let out_power: f64 = [c, d].iter().map(|&o| u.matrix()[(o, a)].norm_sqr() + u.matrix()[(o, b)].norm_sqr()).sum();
    if (out_power - 2.0).abs() > 1e-12 {
        return fail(format!("only {out_power} of 2 units of light reach the outputs"));
    }
    Ok(())
}

/// Power entering every cell when unit classical light is injected into
/// both plan inputs (incoherently).
pub fn cell_input_powers(plan: &RoutingPlan) -> Result<BTreeMap<CellAddress, f64>> {
    let n = plan.n;
    let mut out = BTreeMap::new();
    let mut fields: Vec<Vec<num_complex::Complex64>> = [plan.input_pair.0, plan.input_pair.1]
        .iter()
        .map(|&i| {
            let mut v = vec![num_complex::Complex64::new(0.0, 0.0); n];
            v[i] = num_complex::Complex64::new(1.0, 0.0);
            v
        })
        .collect();
    for c in 0..column_count(n) {
        for cell in column_cells(n, c) {
            let t = crate::mesh::cell_transfer(plan.cell_states[&cell].setting());
            let mut power = 0.0;
            for f in fields.iter_mut() {
                let (x, y) = (f[cell.row], f[cell.row + 1]);
                power += x.norm_sqr() + y.norm_sqr();
                f[cell.row] = t[(0, 0)] * x + t[(0, 1)] * y;
                f[cell.row + 1] = t[(1, 0)] * x + t[(1, 1)] * y;
            }
            out.insert(cell, power);
        }
    }
    Ok(out)
}
