use num_complex::Complex64;

use crate::error::{validation, Result};
use crate::mesh::CMatrix;

fn check_modes(u: &CMatrix, modes: &[usize]) -> Result<()> {
    if let Some(m) = modes.iter().find(|&&m| m >= u.nrows().min(u.ncols())) {
        return validation(format!("mode {m} outside a {}-mode transfer matrix", u.nrows()));
    }
    Ok(())
}

fn check_overlap(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return validation(format!("overlap {x} outside [0, 1]"));
    }
    Ok(())
}

/// Probability of one photon at each of outputs `c`, `d` when single photons
/// enter `a` and `b` with mutual overlap `x` (1 = indistinguishable).
pub fn two_photon_coincidence(u: &CMatrix, inputs: (usize, usize), outputs: (usize, usize), x: f64) -> Result<f64> {
    let (a, b) = inputs;
    let (c, d) = outputs;
    if a == b || c == d {
        return validation("input and output modes must be distinct");
    }
    check_modes(u, &[a, b, c, d])?;
    check_overlap(x)?;
    let direct: Complex64 = u[(c, a)] * u[(d, b)];
    let exchange: Complex64 = u[(c, b)] * u[(d, a)];
    let p = direct.norm_sqr() + exchange.norm_sqr() + 2.0 * x * (direct * exchange.conj()).re;
    Ok(p.max(0.0))
}

/// Probability that both photons leave through output `c`.
pub fn two_photon_bunching(u: &CMatrix, inputs: (usize, usize), c: usize, x: f64) -> Result<f64> {
    let (a, b) = inputs;
    if a == b {
        return validation("input modes must be distinct");
    }
    check_modes(u, &[a, b, c])?;
    check_overlap(x)?;
    Ok((1.0 + x) * (u[(c, a)] * u[(c, b)]).norm_sqr())
}

/// Probabilities of every output pattern `(c, d)` with `c <= d`.
pub fn two_photon_distribution(u: &CMatrix, inputs: (usize, usize), x: f64) -> Result<Vec<((usize, usize), f64)>> {
    let n = u.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for c in 0..n {
        out.push(((c, c), two_photon_bunching(u, inputs, c, x)?));
        for d in c + 1..n {
            out.push(((c, d), two_photon_coincidence(u, inputs, (c, d), x)?));
        }
    }
    Ok(out)
}
