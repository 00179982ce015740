//! Polar decomposition, ground-state fidelity and fidelity susceptibility.
//!
//! For a quadratic form with `Z = A - B = T P` (T orthogonal, P symmetric
//! positive semidefinite) the overlap of two quasiparticle vacua is
//! `F = sqrt(|det((T + T') / 2)|)` and the susceptibility is
//! `chi = ||dT/dx||_F^2 / 8`.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_quadratic_form, ChainSpec, QuadraticForm, Realization};

/// Default relative singular-value floor: `s_min < SV_TOL * s_max` is gapless.
pub const DEFAULT_SV_TOL: f64 = 1e-12;

/// Orthogonal factor `T` of the polar decomposition of `Z`.
#[derive(Debug, Clone)]
pub struct OrthogonalFactor {
    t: Mat<f64>,
    singular_values: Vec<f64>,
}

impl OrthogonalFactor {
    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.t.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.t
    }

    /// Singular values of the decomposed matrix, nonincreasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn len(&self) -> usize {
        self.t.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.t.nrows() == 0
    }

    /// Symmetric positive factor `P = T^T Z`.
    pub fn positive_factor(&self, z: MatRef<'_, f64>) -> Mat<f64> {
        self.t.transpose() * z
    }
}

/// Which mean parameter the drive shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveAxis {
    Field,
    Anisotropy,
}

impl DriveAxis {
    pub fn name(self) -> &'static str {
        match self {
            DriveAxis::Field => "field",
            DriveAxis::Anisotropy => "anisotropy",
        }
    }

    /// Current mean value of the driven parameter.
    pub fn mean(self, spec: &ChainSpec) -> f64 {
        match self {
            DriveAxis::Field => spec.mean_field,
            DriveAxis::Anisotropy => spec.mean_anisotropy,
        }
    }

    /// The spec with the driven mean set to `x`.
    pub fn set_mean(self, spec: &ChainSpec, x: f64) -> ChainSpec {
        let mut s = *spec;
        match self {
            DriveAxis::Field => s.mean_field = x,
            DriveAxis::Anisotropy => s.mean_anisotropy = x,
        }
        s
    }

    /// The driven per-site parameters of `r`.
    pub fn values(self, r: &Realization) -> &[f64] {
        match self {
            DriveAxis::Field => &r.fields,
            DriveAxis::Anisotropy => &r.anisotropies,
        }
    }

    fn values_mut(self, r: &mut Realization) -> &mut Vec<f64> {
        match self {
            DriveAxis::Field => &mut r.fields,
            DriveAxis::Anisotropy => &mut r.anisotropies,
        }
    }

    /// Shifts every site's driven parameter by `shift`, disorder offsets frozen.
    pub fn shift(self, r: &Realization, shift: f64) -> Realization {
        let mut out = r.clone();
        self.values_mut(&mut out).iter_mut().for_each(|v| *v += shift);
        out
    }

    /// Moves site `i`'s driven parameter by `shift * slopes[i]`.
    pub fn shift_with_slopes(self, r: &Realization, shift: f64, slopes: &[f64]) -> Realization {
        let mut out = r.clone();
        for (v, k) in self.values_mut(&mut out).iter_mut().zip(slopes) {
            *v += shift * k;
        }
        out
    }
}

/// Step sizes and tolerances of the susceptibility stencil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    /// Central-difference half step.
    pub delta: f64,
    /// Relative singular-value floor, see [`DEFAULT_SV_TOL`].
    pub sv_tol: f64,
    /// Allowed relative disagreement between the `delta` and `delta / 2` stencils.
    pub richardson_tol: f64,
    /// Whether to run the half-step comparison at all. When on, the result is
    /// the Richardson extrapolation `(4 chi(delta / 2) - chi(delta)) / 3`.
    pub richardson_check: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            delta: 1e-5,
            sv_tol: DEFAULT_SV_TOL,
            richardson_tol: 1e-4,
            richardson_check: true,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("sv_tol", self.sv_tol),
            ("richardson_tol", self.richardson_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `T = U V^T` from the SVD `Z = U S V^T`.
pub fn polar_unitary(z: MatRef<'_, f64>, sv_tol: f64) -> Result<OrthogonalFactor> {
    if z.nrows() != z.ncols() {
        return Err(Error::InvalidInput(format!(
            "polar decomposition needs a square matrix, got {}x{}",
            z.nrows(),
            z.ncols()
        )));
    }
    let svd = linalg::svd(z)?;
    check_gap(&svd.s, sv_tol)?;
    let t = &svd.u * svd.v.transpose();
    Ok(OrthogonalFactor {
        t,
        singular_values: svd.s,
    })
}

fn check_gap(s: &[f64], sv_tol: f64) -> Result<()> {
    let largest = s.first().copied().unwrap_or(0.0);
    let smallest = s.last().copied().unwrap_or(0.0);
    let tolerance = sv_tol * largest;
    if !(smallest >= tolerance) || largest == 0.0 {
        return Err(Error::GaplessRealization {
            smallest,
            tolerance,
        });
    }
    Ok(())
}

/// Rejects a realization whose quasiparticle gap is below `sv_tol` relative.
pub fn ensure_gapped(qf: &QuadraticForm, sv_tol: f64) -> Result<()> {
    let mut s = linalg::singular_values(qf.z().as_ref())?;
    s.sort_by(|a, b| b.total_cmp(a));
    check_gap(&s, sv_tol)
}

pub fn orthogonal_factor(qf: &QuadraticForm, sv_tol: f64) -> Result<OrthogonalFactor> {
    polar_unitary(qf.z().as_ref(), sv_tol)
}

/// `ln |det((T1 + T2) / 2)|`, i.e. twice the log-fidelity.
fn log_det_mean(t1: MatRef<'_, f64>, t2: MatRef<'_, f64>) -> f64 {
    let m = Mat::from_fn(t1.nrows(), t1.ncols(), |i, j| 0.5 * (t1[(i, j)] + t2[(i, j)]));
    linalg::log_abs_det(m.as_ref()).0
}

fn check_pair(qf1: &QuadraticForm, qf2: &QuadraticForm) -> Result<()> {
    if qf1.len() != qf2.len() {
        return Err(Error::InvalidInput(format!(
            "forms of different size: {} vs {}",
            qf1.len(),
            qf2.len()
        )));
    }
    Ok(())
}

/// `ln F` for two quadratic forms. Not clamped.
///
/// Vacua of opposite fermion parity (`det T1 det T2 < 0`) are orthogonal and
/// give `-inf`; the determinant alone would only reach zero up to roundoff.
pub fn log_fidelity(qf1: &QuadraticForm, qf2: &QuadraticForm, sv_tol: f64) -> Result<f64> {
    check_pair(qf1, qf2)?;
    let t1 = orthogonal_factor(qf1, sv_tol)?;
    let t2 = orthogonal_factor(qf2, sv_tol)?;
    let parity1 = linalg::log_abs_det(t1.matrix()).1;
    let parity2 = linalg::log_abs_det(t2.matrix()).1;
    if parity1 * parity2 < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(0.5 * log_det_mean(t1.matrix(), t2.matrix()))
}

/// Ground-state fidelity `sqrt(|det((T1 + T2) / 2)|)` in `[0, 1]`.
pub fn fidelity(qf1: &QuadraticForm, qf2: &QuadraticForm, sv_tol: f64) -> Result<f64> {
    let f = log_fidelity(qf1, qf2, sv_tol)?.exp();
    if f > 1.0 + 1e-9 {
        return Err(Error::FidelityOutOfRange(f));
    }
    Ok(f.min(1.0))
}

fn central_difference_chi(
    spec: &ChainSpec,
    family: &dyn Fn(f64) -> Realization,
    delta: f64,
    sv_tol: f64,
) -> Result<f64> {
    let plus = build_quadratic_form(spec, &family(delta))?;
    let minus = build_quadratic_form(spec, &family(-delta))?;
    let tp = orthogonal_factor(&plus, sv_tol)?;
    let tm = orthogonal_factor(&minus, sv_tol)?;
    let (tp, tm) = (tp.matrix(), tm.matrix());
    let mut sum = 0.0;
    for j in 0..tp.ncols() {
        for i in 0..tp.nrows() {
            let d = tp[(i, j)] - tm[(i, j)];
            sum += d * d;
        }
    }
    Ok(sum / (4.0 * delta * delta) / 8.0)
}

/// Fidelity susceptibility `||dT/dx||_F^2 / 8` by central differences, with
/// the step-halving check and extrapolation of [`Numerics`].
pub fn susceptibility(
    spec: &ChainSpec,
    r: &Realization,
    drive: DriveAxis,
    numerics: &Numerics,
) -> Result<f64> {
    susceptibility_along(spec, numerics, &|s| drive.shift(r, s))
}

/// Susceptibility of the one-parameter family `x -> family(x)` at `x = 0`.
/// `family` must return realizations of length `spec.length`.
pub fn susceptibility_along(
    spec: &ChainSpec,
    numerics: &Numerics,
    family: &dyn Fn(f64) -> Realization,
) -> Result<f64> {
    numerics.validate()?;
    // The stencil never factors the unshifted form, so test its gap directly.
    ensure_gapped(&build_quadratic_form(spec, &family(0.0))?, numerics.sv_tol)?;
    let coarse = central_difference_chi(spec, family, numerics.delta, numerics.sv_tol)?;
    if numerics.richardson_check {
        let fine = central_difference_chi(spec, family, 0.5 * numerics.delta, numerics.sv_tol)?;
        let scale = coarse.abs().max(fine.abs());
        if (coarse - fine).abs() > numerics.richardson_tol * scale {
            return Err(Error::NonConvergedDerivative { coarse, fine });
        }
        // The stencil error is even in the step, so this cancels the delta^2 term.
        return Ok((4.0 * fine - coarse) / 3.0);
    }
    Ok(coarse)
}

/// The definitional estimator `-2 ln F(x, x + dx) / dx^2`.
pub fn susceptibility_from_logfidelity(
    spec: &ChainSpec,
    r: &Realization,
    drive: DriveAxis,
    dx: f64,
    sv_tol: f64,
) -> Result<f64> {
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(Error::InvalidInput(format!("displacement must be positive, got {dx}")));
    }
    crate::model::check_consistent(spec, r)?;
    let shifted = drive.shift(r, dx);
    if drive.values(r) == drive.values(&shifted) {
        return Err(Error::InvalidInput(format!(
            "displacement {dx} does not change any parameter"
        )));
    }
    let q0 = build_quadratic_form(spec, r)?;
    let q1 = build_quadratic_form(spec, &shifted)?;
    Ok(-2.0 * log_fidelity(&q0, &q1, sv_tol)? / (dx * dx))
}
