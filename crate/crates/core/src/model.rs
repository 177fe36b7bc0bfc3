//! The photodetection model: a system coupled through `κ(a†⊗b + a⊗b†)` to
//! a two-level output mode that is absorbed at rate `Γ1` and dephased at
//! rate `Γ2`, together with its adiabatically reduced form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c, CMatrix, Operator, StateVector, C64, I, STRUCTURAL_TOL};

/// Choice of the bare system Hamiltonian `H0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum H0Spec {
    #[default]
    Zero,
    /// `H0 = diag(frequencies)`.
    Diagonal { frequencies: Vec<f64> },
    /// Explicit Hermitian matrix, rows of `[re, im]` pairs.
    Matrix { rows: Vec<Vec<[f64; 2]>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// System–mode coupling κ.
    pub kappa: f64,
    /// Output-mode absorption rate Γ1.
    pub gamma1: f64,
    /// Output-mode dephasing rate Γ2.
    pub gamma2: f64,
    /// System dimension (2 for a two-level atom, n for a truncated oscillator).
    pub d_sys: usize,
    #[serde(default)]
    pub h0: H0Spec,
    /// Projection spacing δt.
    pub dt: f64,
    /// Number of projections / steps N.
    pub n_steps: usize,
    /// Initial system amplitudes as `[re, im]` pairs; normalized on use.
    pub initial_state: Vec<[f64; 2]>,
}

/// Regime conditions under which the first-order theory is expected to
/// hold. Violations are reported, never rejected.
#[derive(Clone, Debug, PartialEq)]
pub enum Advisory {
    /// `Γ2 ≫ Γ1 ≫ κ` fails.
    RateHierarchy { kappa: f64, gamma1: f64, gamma2: f64 },
    /// `1/G ≪ δt ≪ 1/Γ1` fails.
    StepOutsideWindow { g_dt: f64, gamma1_dt: f64 },
    /// `κ<a†a> ≪ Γ1` fails.
    HighlyExcited { kappa_n: f64, gamma1: f64 },
}

impl std::fmt::Display for Advisory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Advisory::RateHierarchy { kappa, gamma1, gamma2 } => write!(
                f,
                "rate hierarchy gamma2 >> gamma1 >> kappa not satisfied (kappa={kappa}, gamma1={gamma1}, gamma2={gamma2})"
            ),
            Advisory::StepOutsideWindow { g_dt, gamma1_dt } => write!(
                f,
                "dt outside 1/G << dt << 1/gamma1 (G*dt={g_dt}, gamma1*dt={gamma1_dt})"
            ),
            Advisory::HighlyExcited { kappa_n, gamma1 } => write!(
                f,
                "system too excited: kappa*<n>={kappa_n} is not << gamma1={gamma1}"
            ),
        }
    }
}

// "≪" is read as a factor of ten.
const MUCH_LESS: f64 = 10.0;

impl ModelParams {
    /// Two-level atom with `H0 = 0`, starting excited.
    pub fn qubit(kappa: f64, gamma1: f64, gamma2: f64, dt: f64, n_steps: usize) -> Self {
        Self {
            kappa,
            gamma1,
            gamma2,
            d_sys: 2,
            h0: H0Spec::Zero,
            dt,
            n_steps,
            initial_state: vec![[0.0, 0.0], [1.0, 0.0]],
        }
    }

    /// Combined damping of output-mode coherences, `G = Γ1/2 + 2Γ2`.
    pub fn g(&self) -> f64 {
        self.gamma1 / 2.0 + 2.0 * self.gamma2
    }

    /// `κ²/G`, the decay rate appearing in the effective Hamiltonian.
    pub fn kappa2_over_g(&self) -> f64 {
        self.kappa * self.kappa / self.g()
    }

    /// Per-unit-time jump rate prefactor `2κ²/G`.
    pub fn jump_rate(&self) -> f64 {
        2.0 * self.kappa2_over_g()
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |field: &str, v: f64| {
            if !v.is_finite() || v < 0.0 {
                Err(Error::invalid(field, format!("must be finite and non-negative, got {v}")))
            } else {
                Ok(())
            }
        };
        let positive = |field: &str, v: f64| {
            if !v.is_finite() || v <= 0.0 {
                Err(Error::invalid(field, format!("must be finite and positive, got {v}")))
            } else {
                Ok(())
            }
        };
        finite_nonneg("kappa", self.kappa)?;
        positive("gamma1", self.gamma1)?;
        positive("gamma2", self.gamma2)?;
        positive("dt", self.dt)?;
        if self.d_sys < 2 {
            return Err(Error::invalid("d_sys", format!("must be at least 2, got {}", self.d_sys)));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        if self.initial_state.len() != self.d_sys {
            return Err(Error::invalid(
                "initial_state",
                format!("expected {} amplitudes, got {}", self.d_sys, self.initial_state.len()),
            ));
        }
        let norm: f64 = self.initial_state.iter().map(|[re, im]| re * re + im * im).sum();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("initial_state", "must be a finite, non-zero vector"));
        }
        self.h0_operator_unchecked()?;
        Ok(())
    }

    /// Normalized initial system state `|ψ>`.
    pub fn system_state(&self) -> Result<StateVector> {
        self.validate()?;
        self.raw_state()
            .normalized()
            .ok_or_else(|| Error::invalid("initial_state", "must be non-zero"))
    }

    fn raw_state(&self) -> StateVector {
        let amps: Vec<C64> = self.initial_state.iter().map(|&[re, im]| C64::new(re, im)).collect();
        StateVector::from_amplitudes(&amps).unwrap_or_else(|_| StateVector::zeros(self.d_sys))
    }

    pub fn h0_operator(&self) -> Result<Operator> {
        self.validate()?;
        self.h0_operator_unchecked()
    }

    fn h0_operator_unchecked(&self) -> Result<Operator> {
        let d = self.d_sys;
        match &self.h0 {
            H0Spec::Zero => Ok(Operator::zeros(d)),
            H0Spec::Diagonal { frequencies } => {
                if frequencies.len() != d {
                    return Err(Error::invalid(
                        "h0.frequencies",
                        format!("expected {d} entries, got {}", frequencies.len()),
                    ));
                }
                if frequencies.iter().any(|f| !f.is_finite()) {
                    return Err(Error::invalid("h0.frequencies", "entries must be finite"));
                }
                let diag: Vec<C64> = frequencies.iter().map(|&f| c(f)).collect();
                Ok(Operator::from_diagonal(&diag))
            }
            H0Spec::Matrix { rows } => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid("h0.rows", format!("must be a {d}x{d} matrix")));
                }
                let m = CMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
                if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::invalid("h0.rows", "entries must be finite"));
                }
                let op = Operator::new(m)?;
                let deviation = op.hermiticity_deviation();
                if deviation > STRUCTURAL_TOL {
                    return Err(Error::invalid("h0.rows", format!("not Hermitian (deviation {deviation:e})")));
                }
                Ok(op)
            }
        }
    }

    /// Regime checks; empty when the parameters sit in the intended window.
    pub fn advisories(&self) -> Vec<Advisory> {
        let mut out = Vec::new();
        if !(self.gamma2 >= MUCH_LESS * self.gamma1 && self.gamma1 >= MUCH_LESS * self.kappa) {
            out.push(Advisory::RateHierarchy {
                kappa: self.kappa,
                gamma1: self.gamma1,
                gamma2: self.gamma2,
            });
        }
        let g_dt = self.g() * self.dt;
        let gamma1_dt = self.gamma1 * self.dt;
        if g_dt < MUCH_LESS || gamma1_dt > 1.0 / MUCH_LESS {
            out.push(Advisory::StepOutsideWindow { g_dt, gamma1_dt });
        }
        if let Some(psi) = self.raw_state().normalized() {
            let n = psi.expectation(&Operator::number(self.d_sys)).re;
            let kappa_n = self.kappa * n;
            if kappa_n * MUCH_LESS > self.gamma1 {
                out.push(Advisory::HighlyExcited {
                    kappa_n,
                    gamma1: self.gamma1,
                });
            }
        }
        out
    }

    /// Emits every advisory through `log::warn!`.
    pub fn warn_advisories(&self) {
        for adv in self.advisories() {
            log::warn!("{adv}");
        }
    }
}

/// A Hamiltonian plus an ordered list of Lindblad operators.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    hamiltonian: Operator,
    lindblad_ops: Vec<Operator>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, lindblad_ops: Vec<Operator>) -> Result<Self> {
        let d = hamiltonian.dim();
        if let Some(bad) = lindblad_ops.iter().find(|l| l.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let deviation = hamiltonian.hermiticity_deviation();
        if deviation > STRUCTURAL_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            hamiltonian,
            lindblad_ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn lindblad_ops(&self) -> &[Operator] {
        &self.lindblad_ops
    }
}

/// Output-mode lowering operator `b = |0><1|`.
pub fn mode_lowering() -> Operator {
    Operator::lowering(2)
}

/// Full model on `system ⊗ mode`:
/// `H = H0⊗1 + κ(a†⊗b + a⊗b†)`, Lindblad operators `√Γ1 (1⊗b)` and
/// `√Γ2 (1⊗σz)`. The dephasing operator squares to the identity, so its
/// dissipator is exactly `Γ2 (σz ρ σz − ρ)`.
pub fn build_total_model(p: &ModelParams) -> Result<LindbladModel> {
    let h0 = p.h0_operator()?;
    let d = p.d_sys;
    let a = Operator::lowering(d);
    let b = mode_lowering();
    let id_sys = Operator::identity(d);
    let id_mode = Operator::identity(2);

    let coupling = &a.adjoint().tensor(&b) + &a.tensor(&b.adjoint());
    let h = &h0.tensor(&id_mode) + &coupling.scale(c(p.kappa));
    let absorb = id_sys.tensor(&b).scale(c(p.gamma1.sqrt()));
    let dephase = id_sys.tensor(&Operator::sigma_z()).scale(c(p.gamma2.sqrt()));
    LindbladModel::new(h, vec![absorb, dephase])
}

/// The adiabatically reduced system model.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub h0: Operator,
    /// `H0 − i(κ²/G) a†a`.
    pub h_eff: Operator,
    /// `a`.
    pub jump_op: Operator,
    /// `2κ²/G`.
    pub jump_rate: f64,
}

impl ReducedModel {
    /// The reduced master equation as a generic Lindblad model:
    /// Hamiltonian `H0`, single Lindblad operator `√(2κ²/G)·a`.
    pub fn lindblad_model(&self) -> Result<LindbladModel> {
        LindbladModel::new(self.h0.clone(), vec![self.jump_op.scale(c(self.jump_rate.sqrt()))])
    }
}

pub fn build_reduced_model(p: &ModelParams) -> Result<ReducedModel> {
    let h0 = p.h0_operator()?;
    let a = Operator::lowering(p.d_sys);
    let n = &a.adjoint() * &a;
    let h_eff = &h0 - &n.scale(I * p.kappa2_over_g());
    Ok(ReducedModel {
        h0,
        h_eff,
        jump_op: a,
        jump_rate: p.jump_rate(),
    })
}
