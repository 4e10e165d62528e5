//! Block-sparse symmetric matrices and a left-looking block Cholesky.
//!
//! The normal equations of the SLAM problem are block-structured: 3×3 blocks
//! for poses, 2×2 for landmarks, with off-diagonal blocks only where a factor
//! couples two variables. Only the lower triangle is stored, in column-major
//! block maps. The factorization is a standard left-looking block Cholesky;
//! elimination order is chosen by the caller (the solver eliminates rope
//! landmarks first, then buoys, then poses in time order: per-detection rope
//! landmarks have a single pose neighbor, so eliminating them first adds no
//! fill at all, and the remaining pose chain plus small buoy cliques stays
//! sparse).

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Block layout of a symmetric block matrix: per-block dimensions and the
/// scalar offset of each block.
#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub dims: Vec<usize>,
    pub offsets: Vec<usize>,
    pub total_dim: usize,
}

impl BlockStructure {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for d in &dims {
            offsets.push(acc);
            acc += d;
        }
        Self {
            dims,
            offsets,
            total_dim: acc,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.dims.len()
    }
}

/// Lower triangle of a symmetric block matrix, stored by block column.
#[derive(Debug, Clone)]
pub struct BlockSpdMatrix {
    pub structure: BlockStructure,
    /// cols[j] maps block row i (i >= j) to the (dims[i] × dims[j]) block.
    cols: Vec<BTreeMap<usize, DMatrix<f64>>>,
}

impl BlockSpdMatrix {
    pub fn new(structure: BlockStructure) -> Self {
        let n = structure.n_blocks();
        Self {
            structure,
            cols: vec![BTreeMap::new(); n],
        }
    }

    /// Accumulate `m` into block (i, j). Callers pass the lower-triangle
    /// coordinates (i >= j); diagonal blocks must be symmetric.
    pub fn add_block(&mut self, i: usize, j: usize, m: &DMatrix<f64>) {
        debug_assert!(i >= j, "lower triangle only: ({i}, {j})");
        debug_assert_eq!(m.nrows(), self.structure.dims[i]);
        debug_assert_eq!(m.ncols(), self.structure.dims[j]);
        match self.cols[j].get_mut(&i) {
            Some(b) => *b += m,
            None => {
                self.cols[j].insert(i, m.clone());
            }
        }
    }

    pub fn diagonal_block(&self, j: usize) -> Option<&DMatrix<f64>> {
        self.cols[j].get(&j)
    }

    /// Levenberg-Marquardt damping: scale each diagonal entry h by
    /// `h + lambda * max(h, floor)`.
    pub fn damped(&self, lambda: f64, floor: f64) -> BlockSpdMatrix {
        let mut out = self.clone();
        for j in 0..out.structure.n_blocks() {
            let dim = out.structure.dims[j];
            let block = out.cols[j]
                .entry(j)
                .or_insert_with(|| DMatrix::zeros(dim, dim));
            for k in 0..dim {
                let h = block[(k, k)];
                block[(k, k)] = h + lambda * h.max(floor);
            }
        }
        out
    }

    /// Left-looking block Cholesky. Fails with the offending block column
    /// index when a diagonal pivot block is not positive definite.
    pub fn cholesky(&self) -> Result<BlockCholesky, usize> {
        self.cholesky_damped(0.0, 0.0)
    }

    /// Cholesky of the matrix with Levenberg-Marquardt damping applied on the
    /// fly: each diagonal entry h becomes `h + lambda * max(h, floor)`.
    pub fn cholesky_damped(&self, lambda: f64, floor: f64) -> Result<BlockCholesky, usize> {
        let n = self.structure.n_blocks();
        let mut work: Vec<BTreeMap<usize, DMatrix<f64>>> = self.cols.clone();
        if lambda > 0.0 {
            for (j, col) in work.iter_mut().enumerate() {
                let dim = self.structure.dims[j];
                let block = col.entry(j).or_insert_with(|| DMatrix::zeros(dim, dim));
                for k in 0..dim {
                    let h = block[(k, k)];
                    block[(k, k)] = h + lambda * h.max(floor);
                }
            }
        }
        // For each block row i: columns k < i where L has a block at (i, k).
        let mut row_lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut cols: Vec<Vec<(usize, DMatrix<f64>)>> = vec![Vec::new(); n];

        for j in 0..n {
            let mut col = std::mem::take(&mut work[j]);
            // Subtract L_ik * L_jkᵀ contributions from already-eliminated columns.
            for &k in &row_lists[j] {
                let l_jk = cols[k]
                    .iter()
                    .find(|(i, _)| *i == j)
                    .map(|(_, b)| b.clone())
                    .expect("row list entry without matching block");
                for (i, l_ik) in cols[k].iter().filter(|(i, _)| *i >= j) {
                    let update = l_ik * l_jk.transpose();
                    match col.get_mut(i) {
                        Some(b) => *b -= &update,
                        None => {
                            col.insert(*i, -update);
                        }
                    }
                }
            }

            let d = match col.remove(&j) {
                Some(d) => d,
                None => return Err(j), // structurally zero diagonal: unconstrained variable
            };
            let chol = nalgebra::Cholesky::new(d).ok_or(j)?;
            let l_jj: DMatrix<f64> = chol.l();

            for (i, c) in col {
                // Solve L_ij L_jjᵀ = C  =>  L_ijᵀ = L_jj⁻¹ Cᵀ
                let l_ij_t = l_jj
                    .solve_lower_triangular(&c.transpose())
                    .expect("positive diagonal after successful Cholesky");
                row_lists[i].push(j);
                cols[j].push((i, l_ij_t.transpose()));
            }
            diag.push(l_jj);
        }

        Ok(BlockCholesky {
            structure: self.structure.clone(),
            diag,
            cols,
        })
    }
}

/// Lower block Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    pub structure: BlockStructure,
    /// Dense lower-triangular diagonal blocks.
    diag: Vec<DMatrix<f64>>,
    /// Strictly-below-diagonal blocks per column, sorted by block row.
    cols: Vec<Vec<(usize, DMatrix<f64>)>>,
}

impl BlockCholesky {
    /// Solve `A x = b` by forward and backward block substitution.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.structure.n_blocks();
        let mut y = b.clone();

        // Forward: L y = b
        for j in 0..n {
            let off = self.structure.offsets[j];
            let dim = self.structure.dims[j];
            let yj = self.diag[j]
                .solve_lower_triangular(&y.rows(off, dim).clone_owned())
                .expect("triangular solve");
            y.rows_mut(off, dim).copy_from(&yj);
            for (i, l_ij) in &self.cols[j] {
                let oi = self.structure.offsets[*i];
                let di = self.structure.dims[*i];
                let update = l_ij * &yj;
                let mut seg = y.rows_mut(oi, di);
                seg -= update;
            }
        }

        // Backward: Lᵀ x = y
        for j in (0..n).rev() {
            let off = self.structure.offsets[j];
            let dim = self.structure.dims[j];
            let mut acc = y.rows(off, dim).clone_owned();
            for (i, l_ij) in &self.cols[j] {
                let oi = self.structure.offsets[*i];
                let di = self.structure.dims[*i];
                acc -= l_ij.transpose() * y.rows(oi, di);
            }
            let xj = self.diag[j]
                .tr_solve_lower_triangular(&acc)
                .expect("triangular solve");
            y.rows_mut(off, dim).copy_from(&xj);
        }
        y
    }

    /// Number of stored below-diagonal blocks (fill diagnostic).
    pub fn nnz_blocks(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }
}
