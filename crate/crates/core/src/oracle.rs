//! Independent small-system references.
//!
//! * Exact diagonalization of the spin Hamiltonian in the `sigma^z` basis.
//! * Many-body spectra rebuilt from single-particle energies.
//! * Momentum-space susceptibility of the clean chain.
//! * The BCS form `N exp(1/2 sum G_jk c+_j c+_k)|0>` of the quasiparticle
//!   vacuum, with `G = (T - I)(T + I)^{-1}`.
//!
//! Basis convention: bit `i` of a basis index is set when site `i` is spin
//! down, i.e. occupied by a Jordan-Wigner fermion. With fermion operators
//! applied in ascending site order every string factor is `+1`, so the
//! occupation amplitude of a set `S` is the spin amplitude of the state with
//! the sites in `S` flipped.
//!
//! Everything here costs `O(4^L)` memory or `O(2^L)` Pfaffians; run it at
//! `L <= 12` and avoid many concurrent `L = 12` instances.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    assemble, build_quadratic_form, check_consistent, ground_energy, single_particle_energies,
    Boundary, ChainSpec, FermionClosure, QuadraticForm, Realization,
};
use crate::spectral::{DriveAxis, OrthogonalFactor};

pub const MAX_EXACT_LENGTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone)]
pub struct EDResult {
    pub ground_energy: f64,
    pub ground_vector: Vec<f64>,
    /// Eigenvalue of `prod_i Z_i` on the ground vector.
    pub parity: Parity,
    /// Distance to the first excited level.
    pub gap: f64,
}

fn guard(length: usize, max: usize) -> Result<()> {
    if length > max {
        return Err(Error::TooLargeForExact { length, max });
    }
    Ok(())
}

/// Dense `2^L x 2^L` matrix of the spin Hamiltonian, periodic chains closed
/// directly on the spin level.
pub fn spin_hamiltonian(spec: &ChainSpec, r: &Realization) -> Result<Mat<f64>> {
    check_consistent(spec, r)?;
    let length = spec.length;
    guard(length, MAX_EXACT_LENGTH)?;
    let dim = 1usize << length;
    let mut h = Mat::<f64>::zeros(dim, dim);
    let bonds = match spec.boundary {
        Boundary::Open => length - 1,
        Boundary::PeriodicEvenSector => length,
    };
    let spin = |state: usize, site: usize| if state >> site & 1 == 0 { 1.0 } else { -1.0 };
    for state in 0..dim {
        let mut diag = 0.0;
        for (i, &field) in r.fields.iter().enumerate() {
            diag -= field * spin(state, i);
        }
        h[(state, state)] += diag;
        for i in 0..bonds {
            let j = (i + 1) % length;
            let g = r.anisotropies[i];
            // X_i X_j gives 1, Y_i Y_j gives -s_i s_j; both flip the pair.
            let amp = -(0.5 * (1.0 + g) - 0.5 * (1.0 - g) * spin(state, i) * spin(state, j));
            let target = state ^ (1 << i) ^ (1 << j);
            h[(target, state)] += amp;
        }
    }
    Ok(h)
}

fn parity_expectation(v: &[f64]) -> f64 {
    v.iter()
        .enumerate()
        .map(|(b, x)| if b.count_ones() % 2 == 0 { x * x } else { -x * x })
        .sum()
}

/// Lowest eigenpair by dense diagonalization.
pub fn ed_ground_state(spec: &ChainSpec, r: &Realization) -> Result<EDResult> {
    let h = spin_hamiltonian(spec, r)?;
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Backend(format!("eigendecomposition: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let ground_vector: Vec<f64> = (0..u.nrows()).map(|i| u[(i, 0)]).collect();
    let parity = if parity_expectation(&ground_vector) >= 0.0 {
        Parity::Even
    } else {
        Parity::Odd
    };
    Ok(EDResult {
        ground_energy: s[0],
        gap: if s.nrows() > 1 { s[1] - s[0] } else { f64::INFINITY },
        ground_vector,
        parity,
    })
}

/// Lowest eigenpair within one parity sector of `prod_i Z_i`, embedded back
/// into the full basis. Near-degenerate doublets of opposite parity (edge
/// modes of ordered open chains) no longer contaminate the vector.
pub fn ed_ground_state_in_sector(spec: &ChainSpec, r: &Realization, parity: Parity) -> Result<EDResult> {
    let h = spin_hamiltonian(spec, r)?;
    let wanted = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let basis: Vec<usize> = (0..h.nrows()).filter(|b| b.count_ones() % 2 == wanted).collect();
    let block = Mat::<f64>::from_fn(basis.len(), basis.len(), |i, j| h[(basis[i], basis[j])]);
    let eig = block
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Backend(format!("eigendecomposition: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut ground_vector = vec![0.0; h.nrows()];
    for (i, &b) in basis.iter().enumerate() {
        ground_vector[b] = u[(i, 0)];
    }
    Ok(EDResult {
        ground_energy: s[0],
        gap: if s.nrows() > 1 { s[1] - s[0] } else { f64::INFINITY },
        ground_vector,
        parity,
    })
}

/// All eigenvalues of the spin Hamiltonian, ascending (`L <= 10`).
pub fn ed_spectrum(spec: &ChainSpec, r: &Realization) -> Result<Vec<f64>> {
    guard(spec.length, 10)?;
    spin_hamiltonian(spec, r)?
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Backend(format!("eigenvalues: {e:?}")))
}

pub fn ed_overlap(e1: &EDResult, e2: &EDResult) -> Result<f64> {
    if e1.ground_vector.len() != e2.ground_vector.len() {
        return Err(Error::InvalidInput(format!(
            "ground vectors of different dimension: {} vs {}",
            e1.ground_vector.len(),
            e2.ground_vector.len()
        )));
    }
    let dot: f64 = e1
        .ground_vector
        .iter()
        .zip(&e2.ground_vector)
        .map(|(a, b)| a * b)
        .sum();
    Ok(dot.abs().min(1.0))
}

/// Fermion parity `(-1)^N` of the quasiparticle vacuum, `sign det Z`.
pub fn vacuum_parity(qf: &QuadraticForm) -> Result<Parity> {
    let (_, sign) = linalg::log_abs_det(qf.z().as_ref());
    if sign > 0.0 {
        Ok(Parity::Even)
    } else if sign < 0.0 {
        Ok(Parity::Odd)
    } else {
        Err(Error::GaplessRealization {
            smallest: 0.0,
            tolerance: 0.0,
        })
    }
}

fn sector_levels(qf: &QuadraticForm, keep: Option<Parity>) -> Result<Vec<f64>> {
    let energies = single_particle_energies(qf)?;
    let e0 = ground_energy(qf)?;
    let vacuum = vacuum_parity(qf)?;
    let n = energies.len();
    let mut levels = Vec::with_capacity(1 << n);
    for mask in 0usize..(1 << n) {
        let flips = mask.count_ones() % 2 == 1;
        let parity = match (vacuum, flips) {
            (Parity::Even, false) | (Parity::Odd, true) => Parity::Even,
            _ => Parity::Odd,
        };
        if keep.is_some_and(|p| p != parity) {
            continue;
        }
        let excitation: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| energies[k]).sum();
        levels.push(e0 + excitation);
    }
    Ok(levels)
}

/// Many-body spectrum rebuilt from quasiparticle energies, ascending.
///
/// Open chains: every occupation pattern of the single form. Periodic
/// chains: even-parity states of the antiperiodic form together with
/// odd-parity states of the periodic form.
pub fn fermionic_spectrum(spec: &ChainSpec, r: &Realization) -> Result<Vec<f64>> {
    fermionic_spectrum_with(spec, r, build_quadratic_form)
}

/// As [`fermionic_spectrum`], with the even-sector (or open) form supplied by `builder`.
pub fn fermionic_spectrum_with(spec: &ChainSpec, r: &Realization, builder: FormBuilder) -> Result<Vec<f64>> {
    check_consistent(spec, r)?;
    guard(spec.length, 16)?;
    let mut levels = match spec.boundary {
        Boundary::Open => sector_levels(&builder(spec, r)?, None)?,
        Boundary::PeriodicEvenSector => {
            let mut even = sector_levels(&builder(spec, r)?, Some(Parity::Even))?;
            let odd = sector_levels(&assemble(r, FermionClosure::Periodic), Some(Parity::Odd))?;
            even.extend(odd);
            even
        }
    };
    levels.sort_by(f64::total_cmp);
    Ok(levels)
}

/// Clean-chain susceptibility from the Bogoliubov angles
/// `tan theta_k = g sin k / (l - cos k)` at antiperiodic momenta:
/// `chi = sum_{0 < k < pi} (d theta_k / dx / 2)^2`.
pub fn clean_chain_chi(length: usize, field: f64, gamma: f64, drive: DriveAxis) -> Result<f64> {
    if length < 2 || !length.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "closed form needs an even chain length, got {length}"
        )));
    }
    let mut chi = 0.0;
    for n in 0..length / 2 {
        let k = (2 * n + 1) as f64 * std::f64::consts::PI / length as f64;
        let (s, c) = k.sin_cos();
        let denom = (field - c).powi(2) + (gamma * s).powi(2);
        if denom == 0.0 {
            return Err(Error::GaplessRealization {
                smallest: 0.0,
                tolerance: 0.0,
            });
        }
        let dtheta = match drive {
            DriveAxis::Field => -gamma * s / denom,
            DriveAxis::Anisotropy => s * (field - c) / denom,
        };
        chi += 0.25 * dtheta * dtheta;
    }
    Ok(chi)
}

/// Pairing matrix `G = (T - I)(T + I)^{-1}` of the BCS form.
pub fn cayley_pairing(t: &OrthogonalFactor) -> Result<Mat<f64>> {
    let tm = t.matrix();
    let n = tm.nrows();
    let plus = Mat::from_fn(n, n, |i, j| tm[(i, j)] + if i == j { 1.0 } else { 0.0 });
    let minus = Mat::from_fn(n, n, |i, j| tm[(i, j)] - if i == j { 1.0 } else { 0.0 });
    let lu = plus.partial_piv_lu();
    let u = lu.U();
    let smallest = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-10) {
        return Err(Error::CayleyUndefined(smallest));
    }
    // T - I and (T + I)^{-1} commute, so solving from the left is enough.
    use faer::linalg::solvers::Solve;
    Ok(lu.solve(&minus))
}

/// Pfaffian of a real skew-symmetric matrix (Parlett-Reid elimination with
/// partial pivoting). `a` is overwritten.
pub fn pfaffian(a: &mut [Vec<f64>]) -> f64 {
    let n = a.len();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        for i in k + 2..n {
            if a[i][k].abs() > a[kp][k].abs() {
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap(k + 1, kp);
            for row in a.iter_mut() {
                row.swap(k + 1, kp);
            }
            pf = -pf;
        }
        let pivot = a[k][k + 1];
        if pivot == 0.0 {
            return 0.0;
        }
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| a[k][j] / pivot).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| a[i][k + 1]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[i][j] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Spin-basis vector of the quasiparticle vacuum in BCS form, normalized.
/// Amplitude of occupation set `S` is `Pf(G[S, S])`.
pub fn bcs_state_from_t(t: &OrthogonalFactor) -> Result<Vec<f64>> {
    let n = t.len();
    guard(n, MAX_EXACT_LENGTH)?;
    let g = cayley_pairing(t)?;
    let dim = 1usize << n;
    let mut state = vec![0.0; dim];
    for (mask, amp) in state.iter_mut().enumerate() {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let sites: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut sub: Vec<Vec<f64>> = sites
            .iter()
            .map(|&i| sites.iter().map(|&j| g[(i, j)]).collect())
            .collect();
        *amp = pfaffian(&mut sub);
    }
    let norm = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    state.iter_mut().for_each(|x| *x /= norm);
    Ok(state)
}

/// Builds the quadratic form checked by the gates; swapped out by negative controls.
pub type FormBuilder = fn(&ChainSpec, &Realization) -> Result<QuadraticForm>;

pub mod gates;
