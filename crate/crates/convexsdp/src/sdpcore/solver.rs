//! Primal-dual interior-point solver for the block LMI problem
//! `min c.x  s.t.  S(x) = sum_i x_i A_i - A_0 >= 0`.
//!
//! Infeasible-start predictor-corrector method in the HKM scaling. One
//! iteration factors both iterates per block, assembles the Schur complement
//! `M_ij = tr(A_i S^{-1} A_j Z)`, and solves it twice (affine direction, then
//! centering-corrector direction) against right-hand sides built from
//!
//! ```text
//! Rp   = A_0 + S - A(x)            (primal residual matrix)
//! rd_i = c_i - <A_i, Z>            (dual residual vector)
//! S dZ + dS Z = Rc                 (linearized complementarity)
//! ```
//!
//! which after eliminating `dS = A(dx) - Rp` and `dZ = S^{-1}(Rc - dS Z)`
//! leaves `M dx = rhs` with `rhs_i = <A_i, S^{-1}(Rc + Rp Z)> - rd_i`.
//! The predictor uses `Rc = -S Z`; the corrector reuses the factored `M` with
//! `Rc = sigma mu I - S Z - dS dZ` built from the affine direction.

use faer::prelude::*;

use super::block::{Block, BlockMatrix};
use super::problem::{BlockIndex, SdpProblem};
use crate::linalg::SmallMat;

/// Fraction-to-boundary coefficient on the exact max PSD step.
const STEP_FRACTION: f64 = 0.98;
/// Attempts at halving the step when the duality measure fails to decrease.
const MONOTONE_RETRIES: usize = 10;
/// Iterate norms past this threshold are treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Bound on `|c.x - <A_0,Z>| / (1 + |c.x| + |<A_0,Z>|)`.
    pub gap_tol: f64,
    /// Bound on the scaled primal and dual residual norms.
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    InfeasibleDetected,
    NumericalFailure,
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub mu: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    /// Inner product `<S, Z>` of the iterates.
    pub sz_inner: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub z: BlockMatrix,
    /// Primal objective `c.x` at the final iterate.
    pub objective: f64,
    /// Relative duality gap at the final iterate.
    pub gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub trace: Vec<IterRecord>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Elementwise per-block product; dense blocks multiply as matrices. The
/// result is not symmetric in general.
fn block_mul(a: &BlockMatrix, b: &BlockMatrix) -> BlockMatrix {
    let mut out = a.clone();
    for (o, (x, y)) in out.blocks_mut().iter_mut().zip(a.blocks().iter().zip(b.blocks())) {
        match (o, x, y) {
            (Block::Dense(om), Block::Dense(xm), Block::Dense(ym)) => *om = xm.matmul(ym),
            (Block::Diag(ov), Block::Diag(xv), Block::Diag(yv)) => {
                for (o, (x, y)) in ov.iter_mut().zip(xv.iter().zip(yv)) {
                    *o = x * y;
                }
            }
            _ => unreachable!("mismatched block kinds"),
        }
    }
    out
}

fn block_symmetrize(m: &mut BlockMatrix) {
    for b in m.blocks_mut() {
        if let Block::Dense(d) = b {
            d.symmetrize();
        }
    }
}

/// Per-block inverse of an SPD block matrix from its Cholesky factors.
fn block_inverse(chol: &[Block]) -> Vec<Block> {
    chol.iter()
        .map(|b| match b {
            Block::Dense(l) => Block::Dense(l.spd_inverse_from_cholesky()),
            Block::Diag(l) => Block::Diag(l.iter().map(|v| 1.0 / (v * v)).collect()),
        })
        .collect()
}

/// `Sinv * m`, with `Sinv` given per block.
fn block_inv_mul(sinv: &[Block], m: &BlockMatrix) -> BlockMatrix {
    let mut out = m.clone();
    for (o, (si, mb)) in out.blocks_mut().iter_mut().zip(sinv.iter().zip(m.blocks())) {
        match (o, si, mb) {
            (Block::Dense(om), Block::Dense(sm), Block::Dense(mm)) => *om = sm.matmul(mm),
            (Block::Diag(ov), Block::Diag(sv), Block::Diag(mv)) => {
                for (o, (s, v)) in ov.iter_mut().zip(sv.iter().zip(mv)) {
                    *o = s * v;
                }
            }
            _ => unreachable!("mismatched block kinds"),
        }
    }
    out
}

struct Workspace<'a> {
    problem: &'a SdpProblem,
    index: BlockIndex,
    nvar: usize,
    n_dim: f64,
    a0: BlockMatrix,
    a0_norm: f64,
    c_norm: f64,
}

impl<'a> Workspace<'a> {
    fn new(problem: &'a SdpProblem) -> Self {
        let a0 = problem.matrix(0);
        let a0_norm = a0.frob_norm();
        let c_norm = problem
            .objective()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Workspace {
            problem,
            index: BlockIndex::new(problem),
            nvar: problem.num_vars(),
            n_dim: problem.structure().total_dim() as f64,
            a0,
            a0_norm,
            c_norm,
        }
    }

    /// Schur complement `M_ij = tr(A_i S^{-1} A_j Z)`, symmetrized.
    fn schur(&self, sinv: &[Block], z: &BlockMatrix) -> faer::Mat<f64> {
        let mut m = faer::Mat::<f64>::zeros(self.nvar, self.nvar);
        for (slot, &b) in self.index.dense_ids.iter().enumerate() {
            let (si, zb) = match (&sinv[b], z.block(b)) {
                (Block::Dense(si), Block::Dense(zb)) => (si, zb),
                _ => unreachable!(),
            };
            let vars = &self.index.dense_vars[slot];
            // W_j = S^{-1} A_j Z for every variable touching this block.
            let ws: Vec<(usize, SmallMat)> = vars
                .iter()
                .map(|(var, _, aj)| (*var, si.matmul(aj).matmul(zb)))
                .collect();
            for (vi, _, ai) in vars {
                for (vj, wj) in &ws {
                    m[(*vi, *vj)] += ai.dot(wj);
                }
            }
        }
        for (slot, &b) in self.index.diag_ids.iter().enumerate() {
            let (si, zb) = match (&sinv[b], z.block(b)) {
                (Block::Diag(si), Block::Diag(zb)) => (si, zb),
                _ => unreachable!(),
            };
            for (pos, vars) in &self.index.diag_positions[slot] {
                let w = si[*pos] * zb[*pos];
                for &(vi, ai) in vars {
                    for &(vj, aj) in vars {
                        m[(vi, vj)] += ai * aj * w;
                    }
                }
            }
        }
        for i in 0..self.nvar {
            for j in (i + 1)..self.nvar {
                let s = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = s;
                m[(j, i)] = s;
            }
        }
        m
    }

    /// `rhs_i = <A_i, S^{-1}(Rc + Rp Z)> - rd_i`.
    fn direction_rhs(
        &self,
        sinv: &[Block],
        rc: &BlockMatrix,
        rp_z: &BlockMatrix,
        rd: &[f64],
    ) -> faer::Mat<f64> {
        let mut inner = rc.clone();
        inner.add_scaled(rp_z, 1.0);
        let r = block_inv_mul(sinv, &inner);
        let mut rhs = faer::Mat::<f64>::zeros(self.nvar, 1);
        for (i, v) in rd.iter().enumerate() {
            rhs[(i, 0)] = -v;
        }
        for (slot, &b) in self.index.dense_ids.iter().enumerate() {
            let rb = match r.block(b) {
                Block::Dense(rb) => rb,
                _ => unreachable!(),
            };
            for (vi, _, ai) in &self.index.dense_vars[slot] {
                rhs[(*vi, 0)] += ai.dot(rb);
            }
        }
        for (slot, &b) in self.index.diag_ids.iter().enumerate() {
            let rb = match r.block(b) {
                Block::Diag(rb) => rb,
                _ => unreachable!(),
            };
            for (pos, vars) in &self.index.diag_positions[slot] {
                for &(vi, ai) in vars {
                    rhs[(vi, 0)] += ai * rb[*pos];
                }
            }
        }
        rhs
    }

    /// Given `dx`, recover `dS = A(dx) - Rp` and the symmetrized
    /// `dZ = S^{-1}(Rc - dS Z)`.
    fn recover_directions(
        &self,
        dx: &[f64],
        rp: &BlockMatrix,
        rc: &BlockMatrix,
        sinv: &[Block],
        z: &BlockMatrix,
    ) -> (BlockMatrix, BlockMatrix) {
        let mut ds = self.problem.apply(dx);
        ds.add_scaled(rp, -1.0);
        let mut inner = rc.clone();
        inner.add_scaled(&block_mul(&ds, z), -1.0);
        let mut dz = block_inv_mul(sinv, &inner);
        block_symmetrize(&mut dz);
        (ds, dz)
    }
}

/// Factor the Schur matrix, retrying with an escalating diagonal ridge when
/// rounding makes it numerically indefinite.
fn factor_schur(
    m: &faer::Mat<f64>,
) -> Option<faer::linalg::solvers::Cholesky<f64>> {
    let n = m.nrows();
    if let Ok(f) = m.cholesky(faer::Side::Lower) {
        return Some(f);
    }
    let mut diag_max = 0.0f64;
    for i in 0..n {
        diag_max = diag_max.max(m[(i, i)].abs());
    }
    let mut ridge = 1e-12 * (1.0 + diag_max);
    for _ in 0..4 {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += ridge;
        }
        if let Ok(f) = shifted.cholesky(faer::Side::Lower) {
            return Some(f);
        }
        ridge *= 100.0;
    }
    None
}

pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let ws = Workspace::new(problem);
    let structure = problem.structure();
    let c = problem.objective();

    let tau = 1.0 + (0..=ws.nvar).map(|i| problem.matrix_norm(i)).fold(0.0, f64::max);
    let mut x = vec![0.0; ws.nvar];
    let mut s = BlockMatrix::scaled_identity(structure, tau);
    let mut z = BlockMatrix::scaled_identity(structure, tau);

    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut last_gap = f64::INFINITY;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let pobj: f64 = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
        let dobj = ws.a0.dot(&z);
        let sz = s.dot(&z);
        let mu = sz / ws.n_dim;

        // Rp = A_0 + S - A(x) = S - slack(x).
        let mut rp = s.clone();
        rp.add_scaled(&problem.slack(&x), -1.0);
        let adj = problem.adjoint(&z);
        let rd: Vec<f64> = c.iter().zip(&adj).map(|(ci, ai)| ci - ai).collect();

        let pinf = rp.frob_norm() / (1.0 + ws.a0_norm);
        let dinf = rd.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (1.0 + ws.c_norm);
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        last_gap = relgap;

        trace.push(IterRecord {
            mu,
            primal_obj: pobj,
            dual_obj: dobj,
            primal_infeas: pinf,
            dual_infeas: dinf,
            sz_inner: sz,
        });

        if relgap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            status = SolveStatus::Optimal;
            break;
        }
        let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !sz.is_finite() || sz > DIVERGENCE_LIMIT || xnorm > DIVERGENCE_LIMIT {
            status = SolveStatus::InfeasibleDetected;
            break;
        }

        let s_chol = match s.cholesky() {
            Some(f) => f,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let z_chol = match z.cholesky() {
            Some(f) => f,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let sinv = block_inverse(&s_chol);

        let m = ws.schur(&sinv, &z);
        let factor = match factor_schur(&m) {
            Some(f) => f,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };

        let sz_mat = block_mul(&s, &z);
        let rp_z = block_mul(&rp, &z);

        // Predictor: pure affine direction, Rc = -S Z.
        let mut rc = sz_mat.clone();
        rc.scale(-1.0);
        let rhs = ws.direction_rhs(&sinv, &rc, &rp_z, &rd);
        let dx_col = factor.solve(&rhs);
        let dx_aff: Vec<f64> = (0..ws.nvar).map(|i| dx_col[(i, 0)]).collect();
        let (ds_aff, dz_aff) = ws.recover_directions(&dx_aff, &rp, &rc, &sinv, &z);

        let ap_aff = (STEP_FRACTION * BlockMatrix::max_psd_step(&s_chol, &ds_aff)).min(1.0);
        let ad_aff = (STEP_FRACTION * BlockMatrix::max_psd_step(&z_chol, &dz_aff)).min(1.0);

        let mut s_aff = s.clone();
        s_aff.add_scaled(&ds_aff, ap_aff);
        let mut z_aff = z.clone();
        z_aff.add_scaled(&dz_aff, ad_aff);
        let mu_aff = s_aff.dot(&z_aff) / ws.n_dim;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector: Rc = sigma mu I - S Z - dS dZ, reusing the factored M.
        let mut rc = BlockMatrix::scaled_identity(structure, sigma * mu);
        rc.add_scaled(&sz_mat, -1.0);
        rc.add_scaled(&block_mul(&ds_aff, &dz_aff), -1.0);
        let rhs = ws.direction_rhs(&sinv, &rc, &rp_z, &rd);
        let dx_col = factor.solve(&rhs);
        let dx: Vec<f64> = (0..ws.nvar).map(|i| dx_col[(i, 0)]).collect();
        let (ds, dz) = ws.recover_directions(&dx, &rp, &rc, &sinv, &z);

        let mut ap = (STEP_FRACTION * BlockMatrix::max_psd_step(&s_chol, &ds)).min(1.0);
        let mut ad = (STEP_FRACTION * BlockMatrix::max_psd_step(&z_chol, &dz)).min(1.0);

        // Keep the duality measure from growing; halve the step a few times
        // if needed and then accept whatever is left.
        for _ in 0..MONOTONE_RETRIES {
            let mut s_try = s.clone();
            s_try.add_scaled(&ds, ap);
            let mut z_try = z.clone();
            z_try.add_scaled(&dz, ad);
            if s_try.dot(&z_try) <= sz * (1.0 + 1e-12) + 1e-12 {
                break;
            }
            ap *= 0.5;
            ad *= 0.5;
        }

        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += ap * di;
        }
        s.add_scaled(&ds, ap);
        z.add_scaled(&dz, ad);
    }

    if status == SolveStatus::MaxIterations {
        iterations = opts.max_iter;
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    SdpSolution {
        x,
        z,
        objective,
        gap: last_gap,
        iterations,
        status,
        trace,
    }
}
