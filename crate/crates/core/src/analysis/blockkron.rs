//! Block matrices, block-row vectorization and the unbalanced block
//! Kronecker product.
//!
//! With `vecbr` stacking `vec(C_kl)` (column-major within each block) block
//! row by block row, the product `(D ⊠ C)_kl = D ⊗ C_kl` satisfies
//!
//! ```text
//! vecbr(D C Eᵀ) = (E ⊠ D) vecbr(C)
//! (C ⊠ D)(E ⊠ F) = CE ⊠ DF
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A dense matrix partitioned into a grid of equally sized blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    dense: DMatrix<f64>,
    block_rows: usize,
    block_cols: usize,
}

impl BlockMatrix {
    /// Partitions `dense` into `block_rows × block_cols` blocks.
    pub fn from_dense(dense: DMatrix<f64>, block_rows: usize, block_cols: usize) -> Result<Self> {
        if block_rows == 0
            || block_cols == 0
            || !dense.nrows().is_multiple_of(block_rows)
            || !dense.ncols().is_multiple_of(block_cols)
        {
            return Err(Error::param(format!(
                "{}x{} matrix does not split into {block_rows}x{block_cols} blocks",
                dense.nrows(),
                dense.ncols()
            )));
        }
        Ok(BlockMatrix { dense, block_rows, block_cols })
    }

    /// Assembles a grid of blocks; every block must have the same shape.
    pub fn from_blocks(grid: &[Vec<DMatrix<f64>>]) -> Result<Self> {
        let first = grid.first().and_then(|r| r.first()).ok_or_else(|| Error::param("empty block grid"))?;
        let (br, bc) = first.shape();
        let cols = grid[0].len();
        for row in grid {
            if row.len() != cols {
                return Err(Error::param("ragged block grid"));
            }
            if row.iter().any(|b| b.shape() != (br, bc)) {
                return Err(Error::param("blocks differ in shape"));
            }
        }
        let mut dense = DMatrix::zeros(grid.len() * br, cols * bc);
        for (k, row) in grid.iter().enumerate() {
            for (l, b) in row.iter().enumerate() {
                dense.view_mut((k * br, l * bc), (br, bc)).copy_from(b);
            }
        }
        BlockMatrix::from_dense(dense, br, bc)
    }

    /// `blockdiag(R, ..., R)` with `k` copies.
    pub fn block_diagonal(r: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (br, bc) = r.shape();
        let mut dense = DMatrix::zeros(k * br, k * bc);
        for i in 0..k {
            dense.view_mut((i * br, i * bc), (br, bc)).copy_from(r);
        }
        BlockMatrix::from_dense(dense, br, bc)
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn into_dense(self) -> DMatrix<f64> {
        self.dense
    }

    pub fn block_shape(&self) -> (usize, usize) {
        (self.block_rows, self.block_cols)
    }

    /// Number of block rows and block columns.
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.dense.nrows() / self.block_rows, self.dense.ncols() / self.block_cols)
    }

    pub fn block(&self, k: usize, l: usize) -> DMatrix<f64> {
        self.dense
            .view((k * self.block_rows, l * self.block_cols), (self.block_rows, self.block_cols))
            .into_owned()
    }

    /// Product keeping the row partition of `self` and the column partition
    /// of `other`; the inner partitions must agree.
    pub fn mul(&self, other: &BlockMatrix) -> Result<BlockMatrix> {
        if self.dense.ncols() != other.dense.nrows() || self.block_cols != other.block_rows {
            return Err(Error::param("block matrices are not conformable"));
        }
        BlockMatrix::from_dense(&self.dense * &other.dense, self.block_rows, other.block_cols)
    }

    pub fn add(&self, other: &BlockMatrix) -> Result<BlockMatrix> {
        if self.dense.shape() != other.dense.shape() || self.block_shape() != other.block_shape() {
            return Err(Error::param("block matrices differ in shape"));
        }
        BlockMatrix::from_dense(&self.dense + &other.dense, self.block_rows, self.block_cols)
    }
}

/// Concatenation of `vec(C_kl)` over `k` (outer) and `l` (inner), each block
/// stacked column by column.
pub fn vecbr(m: &BlockMatrix) -> DVector<f64> {
    let (gr, gc) = m.grid_shape();
    let (br, bc) = m.block_shape();
    let mut out = Vec::with_capacity(m.dense.len());
    for k in 0..gr {
        for l in 0..gc {
            for j in 0..bc {
                for i in 0..br {
                    out.push(m.dense[(k * br + i, l * bc + j)]);
                }
            }
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`vecbr`] for a given grid and block shape.
pub fn unvecbr(v: &DVector<f64>, grid: (usize, usize), block: (usize, usize)) -> Result<BlockMatrix> {
    let (gr, gc) = grid;
    let (br, bc) = block;
    if v.len() != gr * gc * br * bc {
        return Err(Error::param("vector length does not match block layout"));
    }
    let mut dense = DMatrix::zeros(gr * br, gc * bc);
    let mut it = v.iter();
    for k in 0..gr {
        for l in 0..gc {
            for j in 0..bc {
                for i in 0..br {
                    dense[(k * br + i, l * bc + j)] = *it.next().expect("length checked");
                }
            }
        }
    }
    BlockMatrix::from_dense(dense, br, bc)
}

/// `D ⊠ C`: the grid of `D ⊗ C_kl`.
pub fn block_kron(d: &DMatrix<f64>, c: &BlockMatrix) -> Result<BlockMatrix> {
    if d.is_empty() {
        return Err(Error::param("empty left factor"));
    }
    let (gr, gc) = c.grid_shape();
    let (br, bc) = c.block_shape();
    let (ob_r, ob_c) = (d.nrows() * br, d.ncols() * bc);
    let mut dense = DMatrix::zeros(gr * ob_r, gc * ob_c);
    for k in 0..gr {
        for l in 0..gc {
            let kron = d.kronecker(&c.block(k, l));
            dense.view_mut((k * ob_r, l * ob_c), (ob_r, ob_c)).copy_from(&kron);
        }
    }
    BlockMatrix::from_dense(dense, ob_r, ob_c)
}
