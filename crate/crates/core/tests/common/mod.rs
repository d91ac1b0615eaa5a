#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qpp_core::mesh::CMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Two photons in `m` modes, basis `|p, q>` with `p <= q`.
fn basis(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|p| (p..m).map(move |q| (p, q))).collect()
}

/// Matrix of `V` on the two-photon Fock space, built column by column from
/// `a†_p a†_q -> Σ V_rp V_sq a†_r a†_s`.
pub fn two_photon_operator(v: &CMatrix) -> (Vec<(usize, usize)>, DMatrix<Complex64>) {
    let m = v.nrows();
    let b = basis(m);
    let index: BTreeMap<(usize, usize), usize> = b.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mut op = DMatrix::zeros(b.len(), b.len());
    let sqrt2 = 2f64.sqrt();
    for (col, &(p, q)) in b.iter().enumerate() {
        // creation operators acting on vacuum; |2_p> = (a†_p)^2 |0> / sqrt 2
        let norm = if p == q { 1.0 / sqrt2 } else { 1.0 };
        for r in 0..m {
            for s in 0..m {
                let amp = v[(r, p)] * v[(s, q)] * norm;
                let (lo, hi) = (r.min(s), r.max(s));
                let w = if lo == hi { sqrt2 } else { 1.0 };
                op[(index[&(lo, hi)], col)] += amp * w;
            }
        }
    }
    (b, op)
}

/// Output distribution over spatial pairs `(c, d)`, `c <= d`, for photons
/// entering `a` and `b` with overlap `x`. The second photon carries an
/// internal state with `sqrt(x)` weight on the first photon's state.
pub fn fock_distribution(u: &CMatrix, (a, b): (usize, usize), x: f64) -> BTreeMap<(usize, usize), f64> {
    let n = u.nrows();
    // spatial mode i, internal k  ->  2 i + k
    let v = CMatrix::from_fn(2 * n, 2 * n, |r, s| if r % 2 == s % 2 { u[(r / 2, s / 2)] } else { Complex64::new(0.0, 0.0) });
    let (b_list, op) = two_photon_operator(&v);
    let pos = |k: (usize, usize)| b_list.iter().position(|&e| e == k).expect("basis state");
    let mut input = nalgebra::DVector::zeros(b_list.len());
    let (ia, ib0, ib1) = (2 * a, 2 * b, 2 * b + 1);
    input[pos((ia.min(ib0), ia.max(ib0)))] += Complex64::new(x.sqrt(), 0.0);
    input[pos((ia.min(ib1), ia.max(ib1)))] += Complex64::new((1.0 - x).sqrt(), 0.0);
    let out = op * input;
    let mut dist = BTreeMap::new();
    for (k, &(p, q)) in b_list.iter().enumerate() {
        let (c, d) = (p / 2, q / 2);
        *dist.entry((c.min(d), c.max(d))).or_insert(0.0) += out[k].norm_sqr();
    }
    dist
}

/// Haar unitary by modified Gram-Schmidt on a complex Ginibre matrix.
pub fn gram_schmidt_haar<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    for j in 0..n {
        for k in 0..j {
            let proj: Complex64 = m.column(k).iter().zip(m.column(j).iter()).map(|(a, b)| a.conj() * b).sum();
            let col_k = m.column(k).clone_owned();
            let mut col_j = m.column_mut(j);
            col_j -= col_k * proj;
        }
        let norm = m.column(j).norm();
        m.column_mut(j).iter_mut().for_each(|z| *z /= norm);
    }
    m
}
