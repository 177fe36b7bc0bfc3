//! Dense complex linear algebra on small Hilbert spaces.
//!
//! Composite spaces are ordered `system ⊗ output mode`, with the output mode
//! as the fastest-varying (rightmost) factor: basis index `2 * s + m` for
//! system level `s` and mode level `m`. Every module in the crate relies on
//! this ordering.

mod blocks;
mod expm;

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use blocks::{block_compose, block_decompose, BlockState};
pub use expm::{expm, matrix_exponential};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default tolerance for structural checks (Hermiticity, trace, unitarity).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Default tolerance on negative eigenvalues of physical states.
pub const POSITIVITY_TOL: f64 = 1e-10;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry-wise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn norm_one(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A linear operator on a finite-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
}

impl Operator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self {
            matrix: CMatrix::from_diagonal(&CVector::from_column_slice(diag)),
        }
    }

    /// Truncated harmonic-oscillator lowering operator, `<n-1|a|n> = sqrt(n)`.
    /// For `dim == 2` this is the qubit lowering operator `|0><1|`.
    pub fn lowering(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        for n in 1..dim {
            m[(n - 1, n)] = c((n as f64).sqrt());
        }
        Self { matrix: m }
    }

    pub fn number(dim: usize) -> Self {
        let diag: Vec<C64> = (0..dim).map(|n| c(n as f64)).collect();
        Self::from_diagonal(&diag)
    }

    pub fn sigma_z() -> Self {
        Self::from_diagonal(&[c(1.0), c(-1.0)])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// Kronecker product; entry `(i*dB + k, j*dB + l)` is `A(i,j) * B(k,l)`.
    pub fn tensor(&self, other: &Operator) -> Self {
        Self {
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            matrix: &self.matrix * factor,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector {
            amplitudes: &self.matrix * &psi.amplitudes,
        }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let n = self.dim();
        let prod = self.matrix.adjoint() * &self.matrix;
        max_abs(&(prod - CMatrix::identity(n, n))) <= tol
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self {
            matrix: (&self.matrix + self.matrix.adjoint()) * c(0.5),
        }
    }

    /// `(A - A†) / 2`
    pub fn anti_hermitian_part(&self) -> Self {
        Self {
            matrix: (&self.matrix - self.matrix.adjoint()) * c(0.5),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

/// A possibly unnormalized pure state. The squared norm carries probability
/// weight wherever a state is evolved without renormalization.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("state", "state vector must be non-empty"));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_amplitudes(amplitudes: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amplitudes))
    }

    /// Basis state `|k>` in a `dim`-level space.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[k] = c(1.0);
        Self { amplitudes: v }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: CVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut CVector {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.amplitudes.norm();
        (n > 0.0 && n.is_finite()).then(|| Self {
            amplitudes: &self.amplitudes / c(n),
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            amplitudes: &self.amplitudes * c(factor),
        }
    }

    /// `<psi|A|psi>` without normalization.
    pub fn expectation(&self, op: &Operator) -> C64 {
        self.amplitudes.dotc(&(op.matrix() * &self.amplitudes))
    }

    pub fn tensor(&self, other: &StateVector) -> Self {
        Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    /// `|psi><psi|`, unnormalized.
    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// A density matrix (or, during history recursions, a general branch
/// operator). Physicality is checked on demand, not enforced on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        Ok(Self { matrix })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.projector()
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim) / c(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * c(0.5);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Hermitian, unit trace and positive semidefinite within `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let tr = self.trace();
        self.is_hermitian(tol)
            && (tr.re - 1.0).abs() <= tol
            && tr.im.abs() <= tol
            && self.min_eigenvalue() >= -tol
    }

    /// Scaled to unit trace; `None` when the trace vanishes.
    pub fn normalized(&self) -> Option<Self> {
        let tr = self.trace().re;
        (tr.abs() > 0.0).then(|| Self {
            matrix: &self.matrix / c(tr),
        })
    }

    /// Reduced state of the first factor of a `d1 ⊗ d2` space.
    pub fn partial_trace_second(&self, d2: usize) -> Result<Self> {
        let d = self.dim();
        if d2 == 0 || d % d2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: d2,
                found: d,
            });
        }
        let d1 = d / d2;
        let m = CMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| self.matrix[(i * d2 + k, j * d2 + k)]).sum()
        });
        Ok(Self { matrix: m })
    }
}

/// `½ Σ|λ_i|` over the eigenvalues of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = a.matrix() - b.matrix();
    let deviation = hermiticity_deviation(&diff);
    if deviation > STRUCTURAL_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let herm = (&diff + diff.adjoint()) * c(0.5);
    Ok(0.5 * herm.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
}
