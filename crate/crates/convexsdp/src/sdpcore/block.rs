//! Block-diagonal symmetric matrices: a fixed ordered list of small dense
//! blocks and diagonal blocks sharing one structure.

use crate::linalg::SmallMat;

/// Shape of a single block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSpec {
    /// Dense symmetric block of the given side.
    Dense(usize),
    /// Diagonal block of the given length.
    Diag(usize),
}

impl BlockSpec {
    pub fn dim(&self) -> usize {
        match *self {
            BlockSpec::Dense(q) => q,
            BlockSpec::Diag(q) => q,
        }
    }
}

/// Ordered block layout shared by every matrix of a problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    specs: Vec<BlockSpec>,
}

impl BlockStructure {
    pub fn new(specs: Vec<BlockSpec>) -> Self {
        BlockStructure { specs }
    }

    pub fn specs(&self) -> &[BlockSpec] {
        &self.specs
    }

    pub fn num_blocks(&self) -> usize {
        self.specs.len()
    }

    /// Sum of block sides; the order of the full matrix.
    pub fn total_dim(&self) -> usize {
        self.specs.iter().map(|s| s.dim()).sum()
    }
}

/// One block's worth of data.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Dense(SmallMat),
    Diag(Vec<f64>),
}

/// Symmetric matrix laid out over a [`BlockStructure`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    blocks: Vec<Block>,
}

impl BlockMatrix {
    pub fn zeros(structure: &BlockStructure) -> Self {
        let blocks = structure
            .specs()
            .iter()
            .map(|s| match *s {
                BlockSpec::Dense(q) => Block::Dense(SmallMat::zeros(q)),
                BlockSpec::Diag(q) => Block::Diag(vec![0.0; q]),
            })
            .collect();
        BlockMatrix { blocks }
    }

    /// `tau * I`.
    pub fn scaled_identity(structure: &BlockStructure, tau: f64) -> Self {
        let mut m = Self::zeros(structure);
        for b in &mut m.blocks {
            match b {
                Block::Dense(mat) => {
                    for i in 0..mat.dim() {
                        mat[(i, i)] = tau;
                    }
                }
                Block::Diag(v) => v.iter_mut().for_each(|x| *x = tau),
            }
        }
        m
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn block(&self, b: usize) -> &Block {
        &self.blocks[b]
    }

    pub fn add_scaled(&mut self, other: &BlockMatrix, s: f64) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            match (a, b) {
                (Block::Dense(x), Block::Dense(y)) => x.add_scaled(y, s),
                (Block::Diag(x), Block::Diag(y)) => {
                    for (xi, yi) in x.iter_mut().zip(y) {
                        *xi += s * yi;
                    }
                }
                _ => unreachable!("mismatched block kinds"),
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            match b {
                Block::Dense(m) => m.scale(s),
                Block::Diag(v) => v.iter_mut().for_each(|x| *x *= s),
            }
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &BlockMatrix) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| match (a, b) {
                (Block::Dense(x), Block::Dense(y)) => x.dot(y),
                (Block::Diag(x), Block::Diag(y)) => {
                    x.iter().zip(y).map(|(u, v)| u * v).sum()
                }
                _ => unreachable!("mismatched block kinds"),
            })
            .sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Dense(m) => m.min_eigenvalue(),
                Block::Diag(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-block Cholesky factors; `None` when any block is not positive
    /// definite.
    pub fn cholesky(&self) -> Option<Vec<Block>> {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Dense(m) => m.cholesky().map(Block::Dense),
                Block::Diag(v) => {
                    if v.iter().all(|&x| x > 0.0) {
                        Some(Block::Diag(v.iter().map(|x| x.sqrt()).collect()))
                    } else {
                        None
                    }
                }
            })
            .collect()
    }

    /// Largest step `alpha` with `self + alpha * step` PSD, given the
    /// per-block Cholesky factors of `self`.
    pub fn max_psd_step(chol: &[Block], step: &BlockMatrix) -> f64 {
        let mut alpha = f64::INFINITY;
        for (l, s) in chol.iter().zip(&step.blocks) {
            let a = match (l, s) {
                (Block::Dense(l), Block::Dense(ds)) => SmallMat::max_psd_step(l, ds),
                (Block::Diag(l), Block::Diag(ds)) => {
                    let mut a = f64::INFINITY;
                    for (li, di) in l.iter().zip(ds) {
                        if *di < 0.0 {
                            a = a.min(-(li * li) / di);
                        }
                    }
                    a
                }
                _ => unreachable!("mismatched block kinds"),
            };
            alpha = alpha.min(a);
        }
        alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn structure() -> BlockStructure {
        BlockStructure::new(vec![BlockSpec::Dense(2), BlockSpec::Diag(3)])
    }

    #[test]
    fn identity_and_dot() {
        let s = structure();
        let i = BlockMatrix::scaled_identity(&s, 2.0);
        assert_abs_diff_eq!(i.dot(&i), 4.0 * 5.0, epsilon = 1e-15);
        assert_eq!(s.total_dim(), 5);
        assert_abs_diff_eq!(i.min_eigenvalue(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn psd_step_over_blocks() {
        let s = structure();
        let eye = BlockMatrix::scaled_identity(&s, 1.0);
        let chol = eye.cholesky().unwrap();
        let mut step = BlockMatrix::zeros(&s);
        if let Block::Diag(v) = &mut step.blocks_mut()[1] {
            v[2] = -4.0;
        }
        assert_abs_diff_eq!(BlockMatrix::max_psd_step(&chol, &step), 0.25, epsilon = 1e-14);
    }
}
