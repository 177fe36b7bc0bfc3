//! Liouville superoperators acting on column-stacked density matrices.
//!
//! Matrixization convention: `vec(X)[i + d*j] = X[i, j]` (column stacking),
//! so that `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use crate::error::{Error, Result};
use crate::hilbert::{
    block_decompose, c, expm, matrix_exponential, BlockState, CMatrix, CVector, DensityMatrix, Operator, I,
};
use crate::model::{build_reduced_model, LindbladModel, ModelParams};

pub fn vectorize(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// A linear map on `d×d` operators, stored as a `d²×d²` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn identity(dim: usize) -> Self {
        let n = dim * dim;
        Self {
            dim,
            matrix: CMatrix::identity(n, n),
        }
    }

    /// The matrixized Lindblad generator
    /// `−i(1⊗H − Hᵀ⊗1) + Σ (L̄⊗L − ½ 1⊗L†L − ½ (L†L)ᵀ⊗1)`.
    pub fn generator(model: &LindbladModel) -> Self {
        let d = model.dim();
        let id = CMatrix::identity(d, d);
        let h = model.hamiltonian().matrix();
        let mut gen = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
        for l in model.lindblad_ops() {
            let l = l.matrix();
            let ldl = l.adjoint() * l;
            gen += l.conjugate().kronecker(l);
            gen -= id.kronecker(&ldl) * c(0.5);
            gen -= ldl.transpose().kronecker(&id) * c(0.5);
        }
        Self { dim: d, matrix: gen }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let v = &self.matrix * vectorize(x);
        unvectorize(&v, self.dim)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// `exp(S t)`.
    pub fn exponential(&self, t: f64) -> Result<Superoperator> {
        let m = expm(&(&self.matrix * c(t)))?;
        Ok(Superoperator {
            dim: self.dim,
            matrix: m,
        })
    }

    /// Largest deviation of `wᵀ S` from `wᵀ`, where `w = vec(1)` represents
    /// the trace. Zero for trace-preserving maps.
    pub fn trace_preservation_error(&self) -> f64 {
        self.trace_row_deviation(1.0)
    }

    /// Largest entry of `wᵀ S`; zero for generators of trace-preserving maps.
    pub fn trace_annihilation_error(&self) -> f64 {
        self.trace_row_deviation(0.0)
    }

    fn trace_row_deviation(&self, diag: f64) -> f64 {
        let d = self.dim;
        let n = d * d;
        let mut worst = 0.0_f64;
        for col in 0..n {
            let s: crate::hilbert::C64 = (0..d).map(|i| self.matrix[(i + d * i, col)]).sum();
            let target = if col % (d + 1) == 0 { diag } else { 0.0 };
            worst = worst.max((s - c(target)).norm());
        }
        worst
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `ρ̇ = −i[H,ρ] + Σ_m (L_m ρ L_m† − ½{L_m†L_m, ρ})` evaluated directly.
pub fn apply_generator(model: &LindbladModel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dim(model.dim(), rho.dim())?;
    DensityMatrix::new(generator_action(model, rho.matrix()))
}

pub(crate) fn generator_action(model: &LindbladModel, rho: &CMatrix) -> CMatrix {
    let h = model.hamiltonian().matrix();
    let mut out = (h * rho - rho * h) * (-I);
    for l in model.lindblad_ops() {
        let l = l.matrix();
        let ldl = l.adjoint() * l;
        out += l * rho * l.adjoint();
        out -= (&ldl * rho + rho * &ldl) * c(0.5);
    }
    out
}

/// `exp(L t)` as a dense superoperator.
pub fn build_propagator(model: &LindbladModel, t: f64) -> Result<Superoperator> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("propagation time must be finite and >= 0, got {t}")));
    }
    Superoperator::generator(model).exponential(t)
}

/// Time derivative of the four output-mode blocks under the full model,
/// written component by component.
pub fn component_derivatives(p: &ModelParams, b: &BlockState) -> Result<BlockState> {
    check_dim(p.d_sys, b.d_sys())?;
    let h0 = p.h0_operator()?.into_matrix();
    let a = Operator::lowering(p.d_sys).into_matrix();
    let ad = a.adjoint();
    let k = p.kappa;
    let g = p.g();
    let comm = |x: &CMatrix| (&h0 * x - x * &h0) * (-I);

    let rho00 = comm(&b.rho00) - &ad * &b.rho10 * (I * k) + &b.rho01 * &a * (I * k) + &b.rho11 * c(p.gamma1);
    let rho01 = comm(&b.rho01) - &ad * &b.rho11 * (I * k) + &b.rho00 * &ad * (I * k) - &b.rho01 * c(g);
    let rho10 = comm(&b.rho10) + &b.rho11 * &a * (I * k) - &a * &b.rho00 * (I * k) - &b.rho10 * c(g);
    let rho11 = comm(&b.rho11) - &a * &b.rho01 * (I * k) + &b.rho10 * &ad * (I * k) - &b.rho11 * c(p.gamma1);
    Ok(BlockState {
        rho00,
        rho01,
        rho10,
        rho11,
    })
}

/// Block-decomposed action of [`apply_generator`], for cross-checking
/// [`component_derivatives`].
pub fn generator_blocks(model: &LindbladModel, b: &BlockState) -> Result<BlockState> {
    check_dim(model.dim(), 2 * b.d_sys())?;
    let rho = crate::hilbert::block_compose(b)?;
    block_decompose(&generator_action(model, &rho))
}

fn no_jump_conjugation(p: &ModelParams, x: &CMatrix) -> Result<CMatrix> {
    let reduced = build_reduced_model(p)?;
    let u = matrix_exponential(&reduced.h_eff.scale(-I), p.dt)?.into_matrix();
    Ok(&u * x * u.adjoint())
}

/// First-order blocks after one step δt from `ρ00 ⊗ |0><0|`:
/// `ρ00 → e^{−iH_eff δt} ρ00 e^{iH_eff† δt}`, `ρ01 = (iκ/G) ρ00 a†`,
/// `ρ11 = (2κ²/G) a ρ00 a† δt`.
pub fn step_unexcited_oracle(p: &ModelParams, rho00: &CMatrix) -> Result<BlockState> {
    check_dim(p.d_sys, rho00.nrows())?;
    let a = Operator::lowering(p.d_sys).into_matrix();
    let ad = a.adjoint();
    let g = p.g();
    let rho01 = rho00 * &ad * (I * (p.kappa / g));
    Ok(BlockState {
        rho00: no_jump_conjugation(p, rho00)?,
        rho10: rho01.adjoint(),
        rho01,
        rho11: &a * rho00 * &ad * c(p.jump_rate() * p.dt),
    })
}

/// First-order blocks after one step δt from `ρ11 ⊗ |1><1|`:
/// absorption `Γ1δt e^{−iH_eff δt} ρ11 e^{iH_eff† δt}` plus coherent
/// re-absorption `(2κ²/G) a† ρ11 a δt` into `ρ00`; `ρ01 = −(iκ/G) a† ρ11`;
/// `ρ11 → (1 − (Γ1 + 2κ²/G)δt) e^{−iH_eff δt} ρ11 e^{iH_eff† δt}`.
pub fn step_excited_oracle(p: &ModelParams, rho11: &CMatrix) -> Result<BlockState> {
    check_dim(p.d_sys, rho11.nrows())?;
    let a = Operator::lowering(p.d_sys).into_matrix();
    let ad = a.adjoint();
    let g = p.g();
    let evolved = no_jump_conjugation(p, rho11)?;
    let rho01 = &ad * rho11 * (-I * (p.kappa / g));
    let reabsorbed = reabsorption_term(p, rho11);
    Ok(BlockState {
        rho00: &evolved * c(p.gamma1 * p.dt) + reabsorbed,
        rho10: rho01.adjoint(),
        rho01,
        rho11: evolved * c(1.0 - (p.gamma1 + p.jump_rate()) * p.dt),
    })
}

/// Coherent re-absorption contribution `(2κ²/G) a† ρ11 a δt` of one step.
pub fn reabsorption_term(p: &ModelParams, rho11: &CMatrix) -> CMatrix {
    let a = Operator::lowering(p.d_sys).into_matrix();
    a.adjoint() * rho11 * &a * c(p.jump_rate() * p.dt)
}
