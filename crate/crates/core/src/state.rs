//! Spin and joint spin–photon density matrices.
//!
//! The spin basis is ordered (↑, ↓). The joint basis is the time-bin ⊗ spin
//! product ordered {e↑, e↓, l↑, l↓}, so index = 2·bin + spin.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix2 = Matrix2<Complex64>;
pub type CMatrix4 = Matrix4<Complex64>;

/// Elementwise Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-12;
/// Trace tolerance for normalized joint states.
pub const NORMALIZED_TRACE_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Which photonic time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBin {
    Early,
    Late,
}

impl TimeBin {
    pub fn index(self) -> usize {
        match self {
            TimeBin::Early => 0,
            TimeBin::Late => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeBin::Early => "early",
            TimeBin::Late => "late",
        }
    }
}

/// Spin projection along the quantization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// Index of |bin, spin⟩ in the joint basis.
pub fn joint_index(bin: TimeBin, spin: Spin) -> usize {
    2 * bin.index() + spin.index()
}

/// Kronecker product of two 2×2 matrices.
pub fn kron(a: &CMatrix2, b: &CMatrix2) -> CMatrix4 {
    CMatrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// Lifts a spin operator to the joint space, I_photon ⊗ op.
pub fn on_spin(op: &CMatrix2) -> CMatrix4 {
    kron(&CMatrix2::identity(), op)
}

/// Partial trace over the spin, leaving the 2×2 photonic block matrix.
pub fn trace_spin(m: &CMatrix4) -> CMatrix2 {
    CMatrix2::from_fn(|i, j| m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)])
}

/// Pauli X in the (↑, ↓) spin basis.
pub fn pauli_x() -> CMatrix2 {
    CMatrix2::new(ZERO, ONE, ONE, ZERO)
}

/// Pauli Y of the logical spin qubit (|0⟩ = ↓, |1⟩ = ↑) written in the (↑, ↓) basis.
pub fn pauli_y() -> CMatrix2 {
    let i = Complex64::new(0.0, 1.0);
    CMatrix2::new(ZERO, i, -i, ZERO)
}

/// Pauli Z of the logical spin qubit in the (↑, ↓) basis: ↓ → +1.
pub fn pauli_z() -> CMatrix2 {
    CMatrix2::new(-ONE, ZERO, ZERO, ONE)
}

/// Density matrix of the time-bin qubit α|e⟩ + β|l⟩ with α = 1/√2, β = e^{iθ}/√2.
pub fn time_bin_qubit(theta_p: f64) -> CMatrix2 {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let b = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, theta_p);
    pure_2(a, b)
}

/// |ψ⟩⟨ψ| for ψ = (a, b).
pub fn pure_2(a: Complex64, b: Complex64) -> CMatrix2 {
    CMatrix2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj())
}

/// |ψ⟩⟨ψ| for a four-component vector.
pub fn pure_4(v: &[Complex64; 4]) -> CMatrix4 {
    CMatrix4::from_fn(|i, j| v[i] * v[j].conj())
}

fn to_dynamic<const N: usize>(m: &nalgebra::SMatrix<Complex64, N, N>) -> DMatrix<Complex64> {
    DMatrix::from_fn(N, N, |i, j| m[(i, j)])
}

fn max_hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues<const N: usize>(m: &nalgebra::SMatrix<Complex64, N, N>) -> Vec<f64> {
    let d = to_dynamic(m);
    let h = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue<const N: usize>(m: &nalgebra::SMatrix<Complex64, N, N>) -> f64 {
    hermitian_eigenvalues(m)[0]
}

fn check_density<const N: usize>(
    m: &nalgebra::SMatrix<Complex64, N, N>,
    trace_range: (f64, f64),
) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidState("non-finite matrix entry".into()));
    }
    let defect = max_hermitian_defect(&to_dynamic(m));
    if defect > HERMITIAN_TOL {
        return Err(Error::InvalidState(format!(
            "not Hermitian (max |m_ij - conj(m_ji)| = {defect:e})"
        )));
    }
    let lambda = min_eigenvalue(m);
    if lambda < -PSD_TOL {
        return Err(Error::InvalidState(format!(
            "not positive semidefinite (min eigenvalue {lambda:e})"
        )));
    }
    let tr = m.trace().re;
    if tr < trace_range.0 || tr > trace_range.1 {
        return Err(Error::InvalidState(format!(
            "trace {tr} outside [{}, {}]",
            trace_range.0, trace_range.1
        )));
    }
    Ok(())
}

/// Spin density matrix over (↑, ↓).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDensity(CMatrix2);

impl SpinDensity {
    /// Validates Hermiticity, positivity and 0 ≤ trace ≤ 1.
    pub fn new(m: CMatrix2) -> Result<Self> {
        check_density(&m, (-HERMITIAN_TOL, 1.0 + HERMITIAN_TOL))?;
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: CMatrix2) -> Self {
        Self(m)
    }

    pub fn up() -> Self {
        Self(pure_2(ONE, ZERO))
    }

    pub fn down() -> Self {
        Self(pure_2(ZERO, ONE))
    }

    /// Pure state a|↑⟩ + b|↓⟩ (not renormalized).
    pub fn pure(a: Complex64, b: Complex64) -> Result<Self> {
        Self::new(pure_2(a, b))
    }

    pub fn matrix(&self) -> &CMatrix2 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Conjugation U ρ U†.
    pub fn conjugate_by(&self, u: &CMatrix2) -> Self {
        Self(u * self.0 * u.adjoint())
    }
}

/// Joint spin–photon density matrix over {e↑, e↓, l↑, l↓}.
///
/// Unnormalized states carry the running herald probability as their trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDensity {
    matrix: CMatrix4,
    normalized: bool,
}

impl JointDensity {
    /// Validates the matrix; normalized states need unit trace, others trace in [0, 1].
    pub fn new(matrix: CMatrix4, normalized: bool) -> Result<Self> {
        let range = if normalized {
            (1.0 - NORMALIZED_TRACE_TOL, 1.0 + NORMALIZED_TRACE_TOL)
        } else {
            (-PSD_TOL, 1.0 + NORMALIZED_TRACE_TOL)
        };
        check_density(&matrix, range)?;
        Ok(Self { matrix, normalized })
    }

    pub(crate) fn new_unchecked(matrix: CMatrix4, normalized: bool) -> Self {
        Self { matrix, normalized }
    }

    /// ρ_photon ⊗ ρ_spin.
    pub fn product(photon: &CMatrix2, spin: &SpinDensity) -> Result<Self> {
        let m = kron(photon, spin.matrix());
        let normalized = (m.trace().re - 1.0).abs() <= NORMALIZED_TRACE_TOL;
        Self::new(m, normalized)
    }

    /// The normalized maximally mixed state I/4.
    pub fn maximally_mixed() -> Self {
        Self {
            matrix: CMatrix4::identity() * Complex64::new(0.25, 0.0),
            normalized: true,
        }
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Population of one basis state.
    pub fn population(&self, bin: TimeBin, spin: Spin) -> f64 {
        let k = joint_index(bin, spin);
        self.matrix[(k, k)].re
    }

    /// Rescales to unit trace.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::NoHeraldedWeight);
        }
        Ok(Self {
            matrix: self.matrix / Complex64::new(tr, 0.0),
            normalized: true,
        })
    }

    /// Re-runs the invariant checks.
    pub fn check(&self) -> Result<()> {
        Self::new(self.matrix, self.normalized).map(|_| ())
    }
}
