//! Disordered XY chain in a transverse field and its quasi-free-fermion form.
//!
//! The spin Hamiltonian is
//!
//! ```text
//! H = -sum_i [ (1+g_i)/2 X_i X_{i+1} + (1-g_i)/2 Y_i Y_{i+1} + l_i Z_i ]
//! ```
//!
//! Under the Jordan-Wigner map with `Z_i = 1 - 2 n_i` (spin up is the empty
//! site) it becomes
//!
//! ```text
//! H = sum_ij c+_i A_ij c_j + 1/2 sum_ij (c+_i B_ij c+_j + h.c.) + offset
//! ```
//!
//! with `A_ii = 2 l_i`, `A_{i,i+1} = A_{i+1,i} = -1`, `B_{i,i+1} = -g_i`,
//! `B_{i+1,i} = +g_i` and `offset = -sum_i l_i`. The periodic spin chain maps
//! onto antiperiodic fermions in the even-parity sector, which flips the sign
//! of the `(L-1, 0)` bond.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Open,
    /// Periodic spin chain restricted to the even fermion-parity sector
    /// (antiperiodic fermions).
    PeriodicEvenSector,
}

/// Global parameters of the chain; per-site values are drawn around the means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub length: usize,
    pub mean_field: f64,
    pub mean_anisotropy: f64,
    pub disorder_sigma: f64,
    pub boundary: Boundary,
}

impl ChainSpec {
    pub fn new(
        length: usize,
        mean_field: f64,
        mean_anisotropy: f64,
        disorder_sigma: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        let spec = Self {
            length,
            mean_field,
            mean_anisotropy,
            disorder_sigma,
            boundary,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidInput(format!(
                "chain length must be at least 2, got {}",
                self.length
            )));
        }
        if !(self.disorder_sigma >= 0.0) || !self.disorder_sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "disorder strength must be finite and nonnegative, got {}",
                self.disorder_sigma
            )));
        }
        if !self.mean_field.is_finite() || !self.mean_anisotropy.is_finite() {
            return Err(Error::InvalidInput("mean parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn with_length(self, length: usize) -> Self {
        Self { length, ..self }
    }

    pub fn with_sigma(self, disorder_sigma: f64) -> Self {
        Self {
            disorder_sigma,
            ..self
        }
    }
}

/// One quenched disorder sample: per-site fields and anisotropies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub fields: Vec<f64>,
    pub anisotropies: Vec<f64>,
}

impl Realization {
    pub fn new(fields: Vec<f64>, anisotropies: Vec<f64>) -> Result<Self> {
        if fields.len() != anisotropies.len() {
            return Err(Error::InvalidInput(format!(
                "field and anisotropy vectors differ in length ({} vs {})",
                fields.len(),
                anisotropies.len()
            )));
        }
        Ok(Self {
            fields,
            anisotropies,
        })
    }

    /// The clean (disorder-free) realization at the spec's mean values.
    pub fn uniform(spec: &ChainSpec) -> Self {
        Self {
            fields: vec![spec.mean_field; spec.length],
            anisotropies: vec![spec.mean_anisotropy; spec.length],
        }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Flips the sign of every anisotropy (global x <-> y spin rotation).
    pub fn with_flipped_anisotropies(&self) -> Self {
        Self {
            fields: self.fields.clone(),
            anisotropies: self.anisotropies.iter().map(|g| -g).collect(),
        }
    }
}

/// The pair `(A, B)` of the fermionic quadratic form plus the constant that
/// the `Z_i = 1 - 2 n_i` substitution leaves behind.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub a: Mat<f64>,
    pub b: Mat<f64>,
    pub energy_offset: f64,
}

impl QuadraticForm {
    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    /// `Z = A - B`, whose singular values are the quasiparticle energies.
    pub fn z(&self) -> Mat<f64> {
        &self.a - &self.b
    }

    pub fn trace_a(&self) -> f64 {
        (0..self.len()).map(|i| self.a[(i, i)]).sum()
    }
}

/// Sign carried by the `(L-1, 0)` fermion bond relative to the bulk bonds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FermionClosure {
    Open,
    /// Odd-parity sector of the periodic spin chain.
    Periodic,
    /// Even-parity sector of the periodic spin chain.
    Antiperiodic,
}

impl From<Boundary> for FermionClosure {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Open => FermionClosure::Open,
            Boundary::PeriodicEvenSector => FermionClosure::Antiperiodic,
        }
    }
}

pub(crate) fn check_consistent(spec: &ChainSpec, r: &Realization) -> Result<()> {
    spec.validate()?;
    if r.fields.len() != spec.length || r.anisotropies.len() != spec.length {
        return Err(Error::InvalidInput(format!(
            "realization has {} fields and {} anisotropies, chain length is {}",
            r.fields.len(),
            r.anisotropies.len(),
            spec.length
        )));
    }
    Ok(())
}

pub fn build_quadratic_form(spec: &ChainSpec, r: &Realization) -> Result<QuadraticForm> {
    check_consistent(spec, r)?;
    Ok(assemble(r, spec.boundary.into()))
}

pub(crate) fn assemble(r: &Realization, closure: FermionClosure) -> QuadraticForm {
    let n = r.len();
    let mut a = Mat::<f64>::zeros(n, n);
    let mut b = Mat::<f64>::zeros(n, n);
    for (i, &field) in r.fields.iter().enumerate() {
        a[(i, i)] = 2.0 * field;
    }
    let bonds = match closure {
        FermionClosure::Open => n - 1,
        _ => n,
    };
    for i in 0..bonds {
        let j = (i + 1) % n;
        let sign = if j == 0 && closure == FermionClosure::Antiperiodic {
            -1.0
        } else {
            1.0
        };
        let g = r.anisotropies[i];
        // `+=` so that the doubled bond of a two-site ring accumulates.
        a[(i, j)] += -sign;
        a[(j, i)] += -sign;
        b[(i, j)] += -sign * g;
        b[(j, i)] += sign * g;
    }
    let energy_offset = -r.fields.iter().sum::<f64>();
    QuadraticForm {
        a,
        b,
        energy_offset,
    }
}

/// Quasiparticle energies: singular values of `Z = A - B`, ascending.
pub fn single_particle_energies(qf: &QuadraticForm) -> Result<Vec<f64>> {
    let mut sv = qf
        .z()
        .singular_values()
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    sv.reverse();
    Ok(sv)
}

/// Energy of the quasiparticle vacuum, including the spin-to-fermion offset.
pub fn ground_energy(qf: &QuadraticForm) -> Result<f64> {
    let energies = single_particle_energies(qf)?;
    Ok(qf.energy_offset + 0.5 * (qf.trace_a() - energies.iter().sum::<f64>()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(length: usize, field: f64, gamma: f64, boundary: Boundary) -> (ChainSpec, Realization) {
        let spec = ChainSpec::new(length, field, gamma, 0.0, boundary).unwrap();
        let r = Realization::uniform(&spec);
        (spec, r)
    }

    #[test]
    fn open_ising_l4_entries() {
        let (spec, r) = uniform(4, 1.0, 1.0, Boundary::Open);
        let qf = build_quadratic_form(&spec, &r).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (ea, eb) = if i == j {
                    (2.0, 0.0)
                } else if j == i + 1 {
                    (-1.0, -1.0)
                } else if i == j + 1 {
                    (-1.0, 1.0)
                } else {
                    (0.0, 0.0)
                };
                assert_eq!(qf.a[(i, j)], ea, "A[{i},{j}]");
                assert_eq!(qf.b[(i, j)], eb, "B[{i},{j}]");
            }
        }
        assert_eq!(qf.energy_offset, -4.0);
    }

    #[test]
    fn periodic_corner_entries_flip_sign() {
        let gamma = 0.7;
        let (spec, r) = uniform(4, 1.0, gamma, Boundary::PeriodicEvenSector);
        let qf = build_quadratic_form(&spec, &r).unwrap();
        assert_eq!(qf.a[(3, 0)], 1.0);
        assert_eq!(qf.a[(0, 3)], 1.0);
        assert_eq!(qf.b[(3, 0)], gamma);
        assert_eq!(qf.b[(0, 3)], -gamma);
        assert_eq!(qf.a[(0, 1)], -1.0);
        assert_eq!(qf.b[(0, 1)], -gamma);
    }

    #[test]
    fn zero_anisotropy_gives_zero_pairing() {
        let spec = ChainSpec::new(6, 0.3, 0.0, 0.0, Boundary::PeriodicEvenSector).unwrap();
        let r = Realization::new(vec![0.1, 0.5, -0.2, 0.9, 1.3, 0.0], vec![0.0; 6]).unwrap();
        let qf = build_quadratic_form(&spec, &r).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(qf.b[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn exact_symmetry_of_a_and_antisymmetry_of_b() {
        let spec = ChainSpec::new(7, 1.0, 0.4, 0.3, Boundary::PeriodicEvenSector).unwrap();
        let r = Realization::new(
            vec![0.3, 1.2, 0.8, -0.1, 1.7, 0.5, 0.9],
            vec![0.2, -0.4, 0.6, 1.1, 0.05, 0.3, -0.7],
        )
        .unwrap();
        let qf = build_quadratic_form(&spec, &r).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(qf.a[(i, j)].to_bits(), qf.a[(j, i)].to_bits());
                // -0.0 == 0.0 on the diagonal; off-diagonal entries are exact negations.
                assert!(qf.b[(i, j)] == -qf.b[(j, i)]);
            }
        }
    }

    #[test]
    fn clean_chain_is_translation_invariant_in_the_bulk() {
        let (spec, r) = uniform(9, 0.8, 0.6, Boundary::Open);
        let qf = build_quadratic_form(&spec, &r).unwrap();
        for i in 0..8 {
            assert_eq!(qf.a[(i, i)], qf.a[(0, 0)]);
            assert_eq!(qf.a[(i, i + 1)], qf.a[(0, 1)]);
            assert_eq!(qf.b[(i, i + 1)], qf.b[(0, 1)]);
        }
    }

    #[test]
    fn antiperiodic_dispersion_of_clean_chain() {
        // 2 sqrt((l - cos k)^2 + g^2 sin^2 k) at k = (2n+1) pi / L, each
        // value twice degenerate (k and -k).
        for &(length, field, gamma) in &[(4usize, 1.0, 1.0), (10, 0.5, 1.0), (12, 0.3, 0.4)] {
            let (spec, r) = uniform(length, field, gamma, Boundary::PeriodicEvenSector);
            let qf = build_quadratic_form(&spec, &r).unwrap();
            let got = single_particle_energies(&qf).unwrap();
            let mut expected: Vec<f64> = (0..length)
                .map(|n| {
                    let k = (2 * n + 1) as f64 * std::f64::consts::PI / length as f64;
                    2.0 * ((field - k.cos()).powi(2) + (gamma * k.sin()).powi(2)).sqrt()
                })
                .collect();
            expected.sort_by(f64::total_cmp);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-12, "L={length}: {g} vs {e}");
            }
        }
    }

    #[test]
    fn anisotropy_sign_flip_keeps_spectrum() {
        let spec = ChainSpec::new(8, 1.0, 0.5, 0.3, Boundary::PeriodicEvenSector).unwrap();
        let r = Realization::new(
            vec![0.9, 1.1, 0.7, 1.3, 1.0, 0.6, 1.4, 0.95],
            vec![0.4, 0.7, 0.2, 0.9, -0.1, 0.5, 0.6, 0.3],
        )
        .unwrap();
        let e1 = single_particle_energies(&build_quadratic_form(&spec, &r).unwrap()).unwrap();
        let flipped = r.with_flipped_anisotropies();
        let e2 = single_particle_energies(&build_quadratic_form(&spec, &flipped).unwrap()).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn energies_are_nonnegative_without_field_or_pairing() {
        let (spec, r) = uniform(7, 0.0, 0.0, Boundary::Open);
        let e = single_particle_energies(&build_quadratic_form(&spec, &r).unwrap()).unwrap();
        assert!(e[0] >= 0.0);
        assert!(e.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = ChainSpec::new(5, 1.0, 1.0, 0.0, Boundary::Open).unwrap();
        let r = Realization::new(vec![1.0; 4], vec![1.0; 4]).unwrap();
        assert!(matches!(
            build_quadratic_form(&spec, &r),
            Err(Error::InvalidInput(_))
        ));
        assert!(Realization::new(vec![1.0; 3], vec![1.0; 4]).is_err());
    }

    #[test]
    fn spec_invariants() {
        assert!(ChainSpec::new(1, 1.0, 1.0, 0.0, Boundary::Open).is_err());
        assert!(ChainSpec::new(4, 1.0, 1.0, -0.1, Boundary::Open).is_err());
        assert!(ChainSpec::new(4, 1.0, 1.0, f64::NAN, Boundary::Open).is_err());
    }
}
