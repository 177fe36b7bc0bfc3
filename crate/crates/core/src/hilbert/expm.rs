//! Matrix exponential by scaling and squaring with a fixed [13/13] Padé
//! approximant.
//!
//! The argument is scaled by `2^-s` until its 1-norm is below `THETA_13`,
//! for which the [13/13] approximant has backward error below double
//! precision unit roundoff; the result is then squared `s` times.

use super::{norm_one, CMatrix, Operator, C64};
use crate::error::{Error, Result};

const THETA_13: f64 = 5.371920351148152;

// Squaring more than this many times cannot produce a finite result.
const MAX_SQUARINGS: i32 = 1023;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(M t)` for an operator `M` and real `t`.
pub fn matrix_exponential(m: &Operator, t: f64) -> Result<Operator> {
    if !t.is_finite() {
        return Err(Error::Exponential(format!("non-finite time {t}")));
    }
    Operator::new(expm(&(m.matrix() * C64::new(t, 0.0)))?)
}

/// `exp(A)` for a square complex matrix.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Exponential("matrix has non-finite entries".into()));
    }

    let norm = norm_one(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    if s > MAX_SQUARINGS {
        return Err(Error::Exponential(format!(
            "scaling exponent {s} overflows (1-norm {norm:e})"
        )));
    }

    let scaled = a * C64::new((-s as f64).exp2(), 0.0);
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Exponential(format!("result overflowed (1-norm {norm:e})")));
    }
    Ok(r)
}

fn pade13(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let b = |k: usize| C64::new(PADE_13[k], 0.0);
    let ident = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &ident * b(1);
    let u = a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &ident * b(0);

    let numer = &v + &u;
    let denom = v - u;
    denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Exponential("singular Padé denominator".into()))
}
