use super::{max_abs, CMatrix};
use crate::error::{Error, Result};

/// Output-mode block decomposition of an operator on `system ⊗ mode`:
/// `ρ = Σ_{μν} ρ_μν ⊗ |μ><ν|`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    pub rho00: CMatrix,
    pub rho01: CMatrix,
    pub rho10: CMatrix,
    pub rho11: CMatrix,
}

impl BlockState {
    pub fn zeros(d_sys: usize) -> Self {
        let z = CMatrix::zeros(d_sys, d_sys);
        Self {
            rho00: z.clone(),
            rho01: z.clone(),
            rho10: z.clone(),
            rho11: z,
        }
    }

    pub fn d_sys(&self) -> usize {
        self.rho00.nrows()
    }

    pub fn block(&self, mu: usize, nu: usize) -> &CMatrix {
        match (mu, nu) {
            (0, 0) => &self.rho00,
            (0, 1) => &self.rho01,
            (1, 0) => &self.rho10,
            _ => &self.rho11,
        }
    }

    /// Largest entry-wise deviation between corresponding blocks.
    pub fn max_block_diff(&self, other: &BlockState) -> [f64; 4] {
        [
            max_abs(&(&self.rho00 - &other.rho00)),
            max_abs(&(&self.rho01 - &other.rho01)),
            max_abs(&(&self.rho10 - &other.rho10)),
            max_abs(&(&self.rho11 - &other.rho11)),
        ]
    }

    fn check(&self) -> Result<usize> {
        let d = self.d_sys();
        for m in [&self.rho00, &self.rho01, &self.rho10, &self.rho11] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.nrows().max(m.ncols()),
                });
            }
        }
        Ok(d)
    }
}

/// Splits a `2·d_sys` operator into its output-mode blocks. Pure reindexing.
pub fn block_decompose(rho: &CMatrix) -> Result<BlockState> {
    let d = rho.nrows();
    if rho.ncols() != d {
        return Err(Error::NotSquare {
            rows: d,
            cols: rho.ncols(),
        });
    }
    if d == 0 || d % 2 != 0 {
        return Err(Error::DimensionMismatch {
            expected: 2 * (d / 2).max(1),
            found: d,
        });
    }
    let ds = d / 2;
    let block = |mu: usize, nu: usize| CMatrix::from_fn(ds, ds, |i, j| rho[(2 * i + mu, 2 * j + nu)]);
    Ok(BlockState {
        rho00: block(0, 0),
        rho01: block(0, 1),
        rho10: block(1, 0),
        rho11: block(1, 1),
    })
}

/// Inverse of [`block_decompose`].
pub fn block_compose(blocks: &BlockState) -> Result<CMatrix> {
    let ds = blocks.check()?;
    Ok(CMatrix::from_fn(2 * ds, 2 * ds, |r, c| {
        blocks.block(r % 2, c % 2)[(r / 2, c / 2)]
    }))
}
