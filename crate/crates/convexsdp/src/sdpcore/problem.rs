//! Linear-matrix-inequality problem data:
//! `min c.x  subject to  S(x) = x_1 A_1 + ... + x_m A_m - A_0 >= 0`
//! with all matrices sharing one block-diagonal structure.

use std::collections::BTreeMap;

use thiserror::Error;

use super::block::{Block, BlockMatrix, BlockSpec, BlockStructure};
use crate::linalg::SmallMat;

#[derive(Debug, Error, PartialEq)]
pub enum SdpError {
    #[error("objective length {got} does not match variable count {want}")]
    ObjectiveLength { got: usize, want: usize },
    #[error("problem needs at least one block")]
    NoBlocks,
    #[error("block {0} has zero dimension")]
    EmptyBlock(usize),
    #[error("entry references matrix {mat} but the problem has {nvar} variables")]
    MatOutOfRange { mat: usize, nvar: usize },
    #[error("entry references block {block} of {nblocks}")]
    BlockOutOfRange { block: usize, nblocks: usize },
    #[error("entry ({row},{col}) out of range or not upper-triangular in block {block}")]
    CellOutOfRange { block: usize, row: usize, col: usize },
    #[error("off-diagonal entry ({row},{col}) in diagonal block {block}")]
    OffDiagonalInDiagBlock { block: usize, row: usize, col: usize },
    #[error("non-finite coefficient value")]
    NonFiniteValue,
    #[error("solution block structure does not match the problem")]
    ShapeMismatch,
}

/// What a solver variable stands for, used by model decoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarLabel {
    /// Nodal unknown `u_k`.
    Node(usize),
    /// Per-node epigraph variable `t_k`.
    NodeEpigraph(usize),
    /// Single shared epigraph variable `t`.
    GlobalEpigraph,
    /// Epigraph variable for one squared term of a per-node quadratic.
    TermEpigraph { node: usize, term: usize },
}

/// One coefficient: `mat` is 0 for `A_0` or `1..=m` for `A_i`; `(row, col)`
/// with `row <= col` addresses the upper triangle of `block` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEntry {
    pub mat: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl SparseEntry {
    pub fn new(mat: usize, block: usize, row: usize, col: usize, value: f64) -> Self {
        SparseEntry {
            mat,
            block,
            row,
            col,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    c: Vec<f64>,
    structure: BlockStructure,
    labels: Vec<VarLabel>,
    /// Canonical coefficient storage: `(mat, block, row, col) -> value`,
    /// upper triangle only, duplicates summed at build time.
    entries: BTreeMap<(usize, usize, usize, usize), f64>,
}

/// Residuals recomputed from problem data and a candidate primal/dual pair,
/// independent of any solver internals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `max(0, -lambda_min(S(x)))`.
    pub primal_infeas: f64,
    /// `max_i |c_i - <A_i, Z>|`.
    pub dual_infeas: f64,
    /// `|c.x - <A_0, Z>|`.
    pub gap: f64,
}

impl SdpProblem {
    pub fn build(
        c: Vec<f64>,
        structure: BlockStructure,
        labels: Vec<VarLabel>,
        raw: impl IntoIterator<Item = SparseEntry>,
    ) -> Result<Self, SdpError> {
        let nvar = c.len();
        if labels.len() != nvar {
            return Err(SdpError::ObjectiveLength {
                got: labels.len(),
                want: nvar,
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(SdpError::NonFiniteValue);
        }
        if structure.num_blocks() == 0 {
            return Err(SdpError::NoBlocks);
        }
        if let Some(b) = structure.specs().iter().position(|s| s.dim() == 0) {
            return Err(SdpError::EmptyBlock(b));
        }
        let mut entries = BTreeMap::new();
        for e in raw {
            if e.mat > nvar {
                return Err(SdpError::MatOutOfRange { mat: e.mat, nvar });
            }
            if e.block >= structure.num_blocks() {
                return Err(SdpError::BlockOutOfRange {
                    block: e.block,
                    nblocks: structure.num_blocks(),
                });
            }
            let spec = structure.specs()[e.block];
            if e.row > e.col || e.col >= spec.dim() {
                return Err(SdpError::CellOutOfRange {
                    block: e.block,
                    row: e.row,
                    col: e.col,
                });
            }
            if matches!(spec, BlockSpec::Diag(_)) && e.row != e.col {
                return Err(SdpError::OffDiagonalInDiagBlock {
                    block: e.block,
                    row: e.row,
                    col: e.col,
                });
            }
            if !e.value.is_finite() {
                return Err(SdpError::NonFiniteValue);
            }
            *entries.entry((e.mat, e.block, e.row, e.col)).or_insert(0.0) += e.value;
        }
        entries.retain(|_, v| *v != 0.0);
        Ok(SdpProblem {
            c,
            structure,
            labels,
            entries,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.c
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn labels(&self) -> &[VarLabel] {
        &self.labels
    }

    /// Upper-triangle coefficients of matrix `mat` (0 = `A_0`), canonical order.
    pub fn matrix_entries(
        &self,
        mat: usize,
    ) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.entries
            .range((mat, 0, 0, 0)..(mat + 1, 0, 0, 0))
            .map(|(&(_, b, r, c), &v)| (b, r, c, v))
    }

    /// All canonical entries `(mat, block, row, col, value)`.
    pub fn all_entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(m, b, r, c), &v)| (m, b, r, c, v))
    }

    /// Symmetric dense/diag expansion of matrix `mat` (0 = `A_0`).
    pub fn matrix(&self, mat: usize) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(&self.structure);
        for (b, r, c, v) in self.matrix_entries(mat) {
            match &mut out.blocks_mut()[b] {
                Block::Dense(m) => {
                    m[(r, c)] = v;
                    m[(c, r)] = v;
                }
                Block::Diag(d) => d[r] = v,
            }
        }
        out
    }

    /// Linear part `A(x) = sum_i x_i A_i`, without the constant `A_0`.
    pub fn apply(&self, x: &[f64]) -> BlockMatrix {
        assert_eq!(x.len(), self.num_vars());
        let mut s = BlockMatrix::zeros(&self.structure);
        for (&(mat, b, r, c), &v) in &self.entries {
            if mat == 0 {
                continue;
            }
            let coef = x[mat - 1];
            match &mut s.blocks_mut()[b] {
                Block::Dense(m) => {
                    m[(r, c)] += coef * v;
                    if r != c {
                        m[(c, r)] += coef * v;
                    }
                }
                Block::Diag(d) => d[r] += coef * v,
            }
        }
        s
    }

    /// `S(x) = sum_i x_i A_i - A_0`.
    pub fn slack(&self, x: &[f64]) -> BlockMatrix {
        assert_eq!(x.len(), self.num_vars());
        let mut s = BlockMatrix::zeros(&self.structure);
        for (&(mat, b, r, c), &v) in &self.entries {
            let coef = if mat == 0 { -1.0 } else { x[mat - 1] };
            match &mut s.blocks_mut()[b] {
                Block::Dense(m) => {
                    m[(r, c)] += coef * v;
                    if r != c {
                        m[(c, r)] += coef * v;
                    }
                }
                Block::Diag(d) => d[r] += coef * v,
            }
        }
        s
    }

    /// Adjoint products `<A_i, Z>` for `i = 1..=m`.
    pub fn adjoint(&self, z: &BlockMatrix) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for (&(mat, b, r, c), &v) in &self.entries {
            if mat == 0 {
                continue;
            }
            let zval = match z.block(b) {
                Block::Dense(m) => {
                    if r == c {
                        m[(r, c)]
                    } else {
                        m[(r, c)] + m[(c, r)]
                    }
                }
                Block::Diag(d) => d[r],
            };
            out[mat - 1] += v * zval;
        }
        out
    }

    /// Frobenius norm of matrix `mat`, counting the symmetric completion.
    pub fn matrix_norm(&self, mat: usize) -> f64 {
        self.matrix_entries(mat)
            .map(|(_, r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// Independent residual recomputation for a candidate pair `(x, Z)`.
    pub fn residuals(&self, x: &[f64], z: &BlockMatrix) -> Result<Residuals, SdpError> {
        if x.len() != self.num_vars() || z.blocks().len() != self.structure.num_blocks() {
            return Err(SdpError::ShapeMismatch);
        }
        for (blk, spec) in z.blocks().iter().zip(self.structure.specs()) {
            let ok = match (blk, spec) {
                (Block::Dense(m), BlockSpec::Dense(q)) => m.dim() == *q,
                (Block::Diag(d), BlockSpec::Diag(q)) => d.len() == *q,
                _ => false,
            };
            if !ok {
                return Err(SdpError::ShapeMismatch);
            }
        }
        let slack_min = self.slack(x).min_eigenvalue();
        let primal_infeas = (-slack_min).max(0.0);
        let ad = self.adjoint(z);
        let dual_infeas = self
            .c
            .iter()
            .zip(&ad)
            .map(|(ci, ai)| (ci - ai).abs())
            .fold(0.0f64, f64::max);
        let pobj: f64 = self.c.iter().zip(x).map(|(ci, xi)| ci * xi).sum();
        let dobj = self.matrix(0).dot(z);
        Ok(Residuals {
            primal_infeas,
            dual_infeas,
            gap: (pobj - dobj).abs(),
        })
    }
}

/// Per-block coefficient index used by the solver's Schur assembly.
pub(crate) struct BlockIndex {
    /// For each dense block: variables touching it, with upper-triangle
    /// entries and the symmetric dense expansion.
    pub dense_vars: Vec<Vec<(usize, Vec<(usize, usize, f64)>, SmallMat)>>,
    /// For each diagonal block position with any variable coefficient:
    /// `(position, [(var, coeff)])`, indexed per block.
    pub diag_positions: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
    /// Block id remapping: dense_vars[i] corresponds to block dense_ids[i].
    pub dense_ids: Vec<usize>,
    pub diag_ids: Vec<usize>,
}

impl BlockIndex {
    pub fn new(p: &SdpProblem) -> Self {
        let specs = p.structure().specs();
        let mut per_block: Vec<BTreeMap<usize, Vec<(usize, usize, f64)>>> =
            vec![BTreeMap::new(); specs.len()];
        for (mat, b, r, c, v) in p.all_entries() {
            if mat == 0 {
                continue;
            }
            per_block[b].entry(mat - 1).or_default().push((r, c, v));
        }
        let mut dense_vars = Vec::new();
        let mut diag_positions = Vec::new();
        let mut dense_ids = Vec::new();
        let mut diag_ids = Vec::new();
        for (b, spec) in specs.iter().enumerate() {
            match *spec {
                BlockSpec::Dense(q) => {
                    let vars = per_block[b]
                        .iter()
                        .map(|(&var, ents)| {
                            let mut m = SmallMat::zeros(q);
                            for &(r, c, v) in ents {
                                m[(r, c)] = v;
                                m[(c, r)] = v;
                            }
                            (var, ents.clone(), m)
                        })
                        .collect();
                    dense_vars.push(vars);
                    dense_ids.push(b);
                }
                BlockSpec::Diag(_) => {
                    let mut by_pos: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
                    for (&var, ents) in &per_block[b] {
                        for &(r, _, v) in ents {
                            by_pos.entry(r).or_default().push((var, v));
                        }
                    }
                    diag_positions.push(by_pos.into_iter().collect());
                    diag_ids.push(b);
                }
            }
        }
        BlockIndex {
            dense_vars,
            diag_positions,
            dense_ids,
            diag_ids,
        }
    }
}
