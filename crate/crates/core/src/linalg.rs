//! Thin helpers over the dense backend.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// `ln |det M|` and the sign of `det M` from a partially pivoted LU
/// factorization. A zero pivot yields `(-inf, 0.0)`.
pub fn log_abs_det(m: MatRef<'_, f64>) -> (f64, f64) {
    let n = m.nrows();
    if n == 0 {
        return (0.0, 1.0);
    }
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let mut log = 0.0;
    let mut sign = permutation_sign(lu.P().arrays().0);
    for i in 0..n {
        let p = u[(i, i)];
        if p == 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        log += p.abs().ln();
        if p < 0.0 {
            sign = -sign;
        }
    }
    (log, sign)
}

fn permutation_sign(forward: &[usize]) -> f64 {
    let mut seen = vec![false; forward.len()];
    let mut sign = 1.0;
    for start in 0..forward.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = forward[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Singular value decomposition `M = U diag(s) V^T`, singular values in
/// nonincreasing order.
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn svd(m: MatRef<'_, f64>) -> Result<Svd> {
    let dec = m.svd().map_err(|e| Error::Backend(format!("svd: {e:?}")))?;
    let s = dec.S().column_vector().iter().copied().collect();
    Ok(Svd {
        u: dec.U().to_owned(),
        s,
        v: dec.V().to_owned(),
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.singular_values().map_err(|e| Error::Backend(format!("svd: {e:?}")))
}

/// Largest absolute entry.
pub fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].abs());
        }
    }
    best
}

/// `max |M^T M - I|`.
pub fn orthogonality_defect(m: MatRef<'_, f64>) -> f64 {
    let n = m.ncols();
    let gram = m.transpose() * m;
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}
