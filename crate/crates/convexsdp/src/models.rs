//! Compile variational problems over convex grid functions into block SDPs.
//!
//! Every model shares the same convexity surrogate: the (reduced) discrete
//! Hessian must be positive semidefinite at each node where it is defined.
//! Hessian blocks enter the LMI scaled by `h^2` and gradient bounds scaled by
//! `h`, which keeps coefficient magnitudes near 1 on fine meshes.

use thiserror::Error;

use crate::fdops::{FdError, GridFunction};
use crate::grid::{Grid, GridError, NodeClass};
use crate::sdpcore::{
    BlockSpec, BlockStructure, SdpError, SdpProblem, SdpSolution, SparseEntry, VarLabel,
};
use crate::sdpcore::solver::SolveStatus;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("density must be nonnegative, got {value} at node {node}")]
    NegativeDensity { node: usize, value: f64 },
    #[error("data is sampled on a different grid than the model")]
    DataGridMismatch,
    #[error("expected {want} gradient component functions, got {got}")]
    GradientCount { got: usize, want: usize },
    #[error("solver returned no value for node {0}")]
    MissingNode(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Monopolist,
    Projection(Norm),
    /// Sobolev-type projection; `zero_boundary` pins boundary values to 0.
    ProjectionH1 { zero_boundary: bool },
    Fit(Norm),
}

/// A fully specified model instance: what to solve, on which grid, against
/// which data. Building the SDP and evaluating the functional both start here.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    grid: Grid,
    /// Target nodal data (projections and fits).
    f: Option<GridFunction>,
    /// Nodal samples of the target gradient, one function per axis.
    grad_f: Vec<GridFunction>,
    /// Nodal density samples (monopolist).
    density: Option<GridFunction>,
}

impl ModelSpec {
    pub fn monopolist(grid: Grid, density: GridFunction) -> Result<Self, ModelError> {
        if density.grid() != &grid {
            return Err(ModelError::DataGridMismatch);
        }
        for k in grid.nodes() {
            let v = density.value(k);
            if v < 0.0 {
                return Err(ModelError::NegativeDensity { node: k, value: v });
            }
        }
        Ok(ModelSpec {
            kind: ModelKind::Monopolist,
            grid,
            f: None,
            grad_f: vec![],
            density: Some(density),
        })
    }

    pub fn projection(grid: Grid, f: GridFunction, norm: Norm) -> Result<Self, ModelError> {
        if f.grid() != &grid {
            return Err(ModelError::DataGridMismatch);
        }
        Ok(ModelSpec {
            kind: ModelKind::Projection(norm),
            grid,
            f: Some(f),
            grad_f: vec![],
            density: None,
        })
    }

    pub fn projection_h1(
        grid: Grid,
        f: GridFunction,
        grad_f: Vec<GridFunction>,
        zero_boundary: bool,
    ) -> Result<Self, ModelError> {
        if f.grid() != &grid {
            return Err(ModelError::DataGridMismatch);
        }
        if grad_f.len() != grid.dim() {
            return Err(ModelError::GradientCount {
                got: grad_f.len(),
                want: grid.dim(),
            });
        }
        if grad_f.iter().any(|g| g.grid() != &grid) {
            return Err(ModelError::DataGridMismatch);
        }
        Ok(ModelSpec {
            kind: ModelKind::ProjectionH1 { zero_boundary },
            grid,
            f: Some(f),
            grad_f,
            density: None,
        })
    }

    pub fn fit(grid: Grid, samples: GridFunction, norm: Norm) -> Result<Self, ModelError> {
        let mut spec = Self::projection(grid, samples, norm)?;
        spec.kind = ModelKind::Fit(norm);
        Ok(spec)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn target(&self) -> Option<&GridFunction> {
        self.f.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Impose reduced discrete Hessians at boundary nodes in addition to the
    /// full Hessians at interior nodes.
    pub boundary_hessians: bool,
    /// Optional uniform bound `|h^2 H_ij| <= K h^2` on all second differences.
    pub second_diff_bound: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            boundary_hessians: true,
            second_diff_bound: None,
        }
    }
}

/// Model compiled to an SDP together with everything needed to interpret a
/// solver result.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub problem: SdpProblem,
    spec: ModelSpec,
}

#[derive(Debug, Clone)]
pub struct DecodedSolution {
    pub u: GridFunction,
    /// Auxiliary (epigraph) variables with their labels.
    pub aux: Vec<(VarLabel, f64)>,
    /// Model objective with the model's reporting sign: the monopolist value
    /// is the (positive) revenue, projections report the norm functional.
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl BuiltModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn decode(&self, sol: &SdpSolution) -> Result<DecodedSolution, ModelError> {
        let grid = &self.spec.grid;
        let mut values = vec![0.0; grid.node_count()];
        let mut aux = Vec::new();
        for (label, &xi) in self.problem.labels().iter().zip(&sol.x) {
            match *label {
                VarLabel::Node(k) => values[k] = xi,
                l => aux.push((l, xi)),
            }
        }
        let u = GridFunction::new(grid.clone(), values)?;
        let objective = match self.spec.kind {
            ModelKind::Monopolist => -sol.objective,
            _ => sol.objective,
        };
        Ok(DecodedSolution {
            u,
            aux,
            objective,
            status: sol.status,
            iterations: sol.iterations,
        })
    }
}

/// Incremental LMI assembly: variables, dense blocks, and one trailing
/// diagonal block collecting every scalar inequality. Dense 1x1 blocks are
/// folded into the diagonal block.
struct Assembler {
    c: Vec<f64>,
    labels: Vec<VarLabel>,
    dense: Vec<(usize, Vec<(usize, usize, usize, f64)>)>,
    diag: Vec<Vec<(usize, f64)>>,
}

impl Assembler {
    fn new() -> Self {
        Assembler {
            c: Vec::new(),
            labels: Vec::new(),
            dense: Vec::new(),
            diag: Vec::new(),
        }
    }

    /// New variable; returns its matrix id (1-based, ready for entries).
    fn var(&mut self, label: VarLabel, cost: f64) -> usize {
        self.c.push(cost);
        self.labels.push(label);
        self.c.len()
    }

    /// Entries are `(mat, row, col, value)` local to the new block.
    fn dense_block(&mut self, dim: usize, entries: Vec<(usize, usize, usize, f64)>) {
        if dim == 1 {
            self.diag
                .push(entries.into_iter().map(|(m, _, _, v)| (m, v)).collect());
        } else {
            self.dense.push((dim, entries));
        }
    }

    /// One scalar inequality `sum coeff_i x_i - a0 >= 0`, given as
    /// `(mat, value)` pairs with mat 0 denoting the constant matrix.
    fn diag_slot(&mut self, entries: Vec<(usize, f64)>) {
        self.diag.push(entries);
    }

    fn finish(self) -> Result<SdpProblem, ModelError> {
        let mut specs: Vec<BlockSpec> = self.dense.iter().map(|(d, _)| BlockSpec::Dense(*d)).collect();
        if !self.diag.is_empty() {
            specs.push(BlockSpec::Diag(self.diag.len()));
        }
        let diag_block = self.dense.len();
        let mut entries = Vec::new();
        for (b, (_, ents)) in self.dense.iter().enumerate() {
            for &(m, r, c, v) in ents {
                entries.push(SparseEntry::new(m, b, r, c, v));
            }
        }
        for (pos, slot) in self.diag.iter().enumerate() {
            for &(m, v) in slot {
                entries.push(SparseEntry::new(m, diag_block, pos, pos, v));
            }
        }
        Ok(SdpProblem::build(
            self.c,
            BlockStructure::new(specs),
            self.labels,
            entries,
        )?)
    }
}

/// Linear expansion of `h^2 H_h u(x)` restricted to `axes`, as per-cell
/// coefficient lists over node variables.
fn hessian_coeffs(grid: &Grid, k: usize, axes: &[usize]) -> Vec<(usize, usize, Vec<(usize, f64)>)> {
    let mut out = Vec::new();
    for (ai, &a) in axes.iter().enumerate() {
        let up = grid.neighbor(k, a, 1).unwrap();
        let dn = grid.neighbor(k, a, -1).unwrap();
        out.push((ai, ai, vec![(up, 1.0), (k, -2.0), (dn, 1.0)]));
        for (bj, &b) in axes.iter().enumerate().skip(ai + 1) {
            let pp = grid.neighbor(up, b, 1).unwrap();
            let pm = grid.neighbor(up, b, -1).unwrap();
            let mp = grid.neighbor(dn, b, 1).unwrap();
            let mm = grid.neighbor(dn, b, -1).unwrap();
            out.push((
                ai,
                bj,
                vec![(pp, 0.25), (mm, 0.25), (pm, -0.25), (mp, -0.25)],
            ));
        }
    }
    out
}

/// PSD constraints on the (reduced) discrete Hessian at every node where it
/// is defined; `interior_only` restricts to full Hessians at interior nodes.
/// `var_of[k]` maps nodes to matrix ids, `None` marking eliminated values.
fn add_hessian_blocks(
    asm: &mut Assembler,
    grid: &Grid,
    var_of: &[Option<usize>],
    interior_only: bool,
    second_diff_bound: Option<f64>,
) -> Result<(), ModelError> {
    let h2 = grid.h() * grid.h();
    for k in grid.nodes() {
        let (class, axes) = grid.classify_node(k)?;
        if axes.is_empty() || (interior_only && class != NodeClass::Interior) {
            continue;
        }
        let coeffs = hessian_coeffs(grid, k, &axes);
        let mut entries = Vec::new();
        for (r, c, nodes) in &coeffs {
            for &(node, v) in nodes {
                if let Some(m) = var_of[node] {
                    entries.push((m, *r, *c, v));
                }
            }
        }
        asm.dense_block(axes.len(), entries);
        if let Some(kk) = second_diff_bound {
            // Bound every represented second difference, pure and mixed
            // alike: K h^2 -/+ h^2 H_rc >= 0.
            for (_, _, nodes) in &coeffs {
                for sign in [-1.0, 1.0] {
                    let mut slot = vec![(0usize, -kk * h2)];
                    for &(node, v) in nodes {
                        if let Some(m) = var_of[node] {
                            slot.push((m, sign * v));
                        }
                    }
                    asm.diag_slot(slot);
                }
            }
        }
    }
    Ok(())
}

pub fn build_monopolist(
    grid: Grid,
    density: GridFunction,
    opts: &BuildOptions,
) -> Result<BuiltModel, ModelError> {
    let spec = ModelSpec::monopolist(grid, density)?;
    build_model(&spec, opts)
}

pub fn build_projection(
    grid: Grid,
    f: GridFunction,
    norm: Norm,
    opts: &BuildOptions,
) -> Result<BuiltModel, ModelError> {
    let spec = ModelSpec::projection(grid, f, norm)?;
    build_model(&spec, opts)
}

pub fn build_projection_h1(
    grid: Grid,
    f: GridFunction,
    grad_f: Vec<GridFunction>,
    zero_boundary: bool,
    opts: &BuildOptions,
) -> Result<BuiltModel, ModelError> {
    let spec = ModelSpec::projection_h1(grid, f, grad_f, zero_boundary)?;
    build_model(&spec, opts)
}

pub fn build_fit(
    grid: Grid,
    samples: GridFunction,
    norm: Norm,
    opts: &BuildOptions,
) -> Result<BuiltModel, ModelError> {
    let spec = ModelSpec::fit(grid, samples, norm)?;
    build_model(&spec, opts)
}

pub fn build_model(spec: &ModelSpec, opts: &BuildOptions) -> Result<BuiltModel, ModelError> {
    let problem = match spec.kind {
        ModelKind::Monopolist => assemble_monopolist(spec, opts)?,
        ModelKind::Projection(norm) | ModelKind::Fit(norm) => {
            assemble_projection(spec, norm, opts)?
        }
        ModelKind::ProjectionH1 { zero_boundary } => {
            assemble_projection_h1(spec, zero_boundary, opts)?
        }
    };
    Ok(BuiltModel {
        problem,
        spec: spec.clone(),
    })
}

/// Per-node gradient stencil for the monopolist quadrature: centered
/// differences at interior coordinates, one-sided at the faces. Each entry is
/// `(axis, upper node, lower node, span)` with the difference quotient
/// `(u(upper) - u(lower)) / span`. The centered convention matches the
/// benchmark table values; forward differences overestimate the revenue by
/// O(h) amounts far beyond the table tolerances.
fn monopolist_grad_nodes(grid: &Grid, k: usize) -> Vec<(usize, usize, usize, f64)> {
    let m = grid.multi_index(k);
    let n = grid.subdivisions();
    let h = grid.h();
    (0..grid.dim())
        .map(|a| {
            if m[a] == 0 {
                (a, grid.neighbor(k, a, 1).unwrap(), k, h)
            } else if m[a] == n {
                (a, k, grid.neighbor(k, a, -1).unwrap(), h)
            } else {
                (
                    a,
                    grid.neighbor(k, a, 1).unwrap(),
                    grid.neighbor(k, a, -1).unwrap(),
                    2.0 * h,
                )
            }
        })
        .collect()
}

fn assemble_monopolist(spec: &ModelSpec, opts: &BuildOptions) -> Result<SdpProblem, ModelError> {
    let grid = &spec.grid;
    let density = spec.density.as_ref().expect("monopolist spec has density");
    let h = grid.h();
    let nn = grid.node_count();

    // Objective: minimize sum_k w_k (u_k - grad_h u(P_k).P_k); the reported
    // value (revenue) is the negation.
    let mut obj = vec![0.0; nn];
    for k in grid.nodes() {
        let w = grid.cell_measure(k)? * density.value(k);
        obj[k] += w;
        let p = grid.coords(k);
        for (a, hi, lo, span) in monopolist_grad_nodes(grid, k) {
            if p[a] == 0.0 {
                continue;
            }
            obj[hi] -= w * p[a] / span;
            obj[lo] += w * p[a] / span;
        }
    }

    let mut asm = Assembler::new();
    let mut var_of = vec![None; nn];
    for k in 1..nn {
        // The origin value is pinned to 0 and eliminated.
        var_of[k] = Some(asm.var(VarLabel::Node(k), obj[k]));
    }
    add_hessian_blocks(
        &mut asm,
        grid,
        &var_of,
        !opts.boundary_hessians,
        opts.second_diff_bound,
    )?;
    // Gradient box 0 <= (u(x + h e_a) - u(x))/h <= 1, scaled by h.
    for k in grid.nodes() {
        let m = grid.multi_index(k);
        for a in 0..grid.dim() {
            if m[a] >= grid.subdivisions() {
                continue;
            }
            let up = grid.neighbor(k, a, 1).unwrap();
            let mut lower = Vec::new();
            let mut upper = vec![(0usize, -h)];
            if let Some(mu) = var_of[up] {
                lower.push((mu, 1.0));
                upper.push((mu, -1.0));
            }
            if let Some(mk) = var_of[k] {
                lower.push((mk, -1.0));
                upper.push((mk, 1.0));
            }
            asm.diag_slot(lower);
            asm.diag_slot(upper);
        }
    }
    asm.finish()
}

fn assemble_projection(
    spec: &ModelSpec,
    norm: Norm,
    opts: &BuildOptions,
) -> Result<SdpProblem, ModelError> {
    let grid = &spec.grid;
    let f = spec.f.as_ref().expect("projection spec has target data");
    let nn = grid.node_count();
    let mut asm = Assembler::new();
    let mut var_of = vec![None; nn];
    for k in grid.nodes() {
        var_of[k] = Some(asm.var(VarLabel::Node(k), 0.0));
    }
    match norm {
        Norm::L1 => {
            for k in grid.nodes() {
                let t = asm.var(VarLabel::NodeEpigraph(k), 1.0);
                let u = var_of[k].unwrap();
                let w = grid.cell_measure(k)?;
                let fk = f.value(k);
                asm.diag_slot(vec![(t, 1.0), (u, -w), (0, -w * fk)]);
                asm.diag_slot(vec![(t, 1.0), (u, w), (0, w * fk)]);
            }
        }
        Norm::L2 => {
            for k in grid.nodes() {
                let t = asm.var(VarLabel::NodeEpigraph(k), 1.0);
                let u = var_of[k].unwrap();
                let sw = grid.cell_measure(k)?.sqrt();
                let fk = f.value(k);
                asm.dense_block(
                    2,
                    vec![
                        (t, 0, 0, 1.0),
                        (u, 0, 1, sw),
                        (0, 0, 1, fk * sw),
                        (0, 1, 1, -1.0),
                    ],
                );
            }
        }
        Norm::Linf => {
            let t = asm.var(VarLabel::GlobalEpigraph, 1.0);
            for k in grid.nodes() {
                let u = var_of[k].unwrap();
                let fk = f.value(k);
                asm.diag_slot(vec![(t, 1.0), (u, -1.0), (0, -fk)]);
                asm.diag_slot(vec![(t, 1.0), (u, 1.0), (0, fk)]);
            }
        }
    }
    add_hessian_blocks(
        &mut asm,
        grid,
        &var_of,
        !opts.boundary_hessians,
        opts.second_diff_bound,
    )?;
    asm.finish()
}

fn assemble_projection_h1(
    spec: &ModelSpec,
    zero_boundary: bool,
    opts: &BuildOptions,
) -> Result<SdpProblem, ModelError> {
    let grid = &spec.grid;
    let f = spec.f.as_ref().expect("projection spec has target data");
    let h = grid.h();
    let hd = h.powi(grid.dim() as i32);
    let nn = grid.node_count();
    let mut asm = Assembler::new();
    let mut var_of = vec![None; nn];
    for k in grid.nodes() {
        let (class, _) = grid.classify_node(k)?;
        if zero_boundary && class == NodeClass::Boundary {
            continue;
        }
        var_of[k] = Some(asm.var(VarLabel::Node(k), 0.0));
    }
    for k in grid.nodes() {
        let (class, _) = grid.classify_node(k)?;
        if class != NodeClass::Interior {
            continue;
        }
        // Term 0: |v_k - f_k|^2; terms 1..d: |forward difference - d_a f|^2.
        // Each gets a 2x2 epigraph block and contributes h^d t to the
        // objective.
        let t0 = asm.var(VarLabel::TermEpigraph { node: k, term: 0 }, hd);
        let mut b0 = vec![(t0, 0, 0, 1.0), (0, 0, 1, f.value(k)), (0, 1, 1, -1.0)];
        if let Some(u) = var_of[k] {
            b0.push((u, 0, 1, 1.0));
        }
        asm.dense_block(2, b0);
        for a in 0..grid.dim() {
            let up = grid.neighbor(k, a, 1).unwrap();
            let ga = self::h1_gradient(spec, a, k);
            let t = asm.var(VarLabel::TermEpigraph { node: k, term: a + 1 }, hd);
            let mut blk = vec![(t, 0, 0, 1.0), (0, 0, 1, ga), (0, 1, 1, -1.0)];
            if let Some(m) = var_of[up] {
                blk.push((m, 0, 1, 1.0 / h));
            }
            if let Some(m) = var_of[k] {
                blk.push((m, 0, 1, -1.0 / h));
            }
            asm.dense_block(2, blk);
        }
    }
    add_hessian_blocks(
        &mut asm,
        grid,
        &var_of,
        !opts.boundary_hessians,
        opts.second_diff_bound,
    )?;
    asm.finish()
}

fn h1_gradient(spec: &ModelSpec, axis: usize, k: usize) -> f64 {
    spec.grad_f[axis].value(k)
}

/// Evaluate the model functional at an arbitrary grid function, straight from
/// the quadrature and independent of the solver. The monopolist value is the
/// revenue `sum_k w_k (grad_h u(P_k).P_k - u_k)`; L2 and Sobolev functionals
/// are squared norms.
pub fn evaluate_functional(spec: &ModelSpec, u: &GridFunction) -> Result<f64, ModelError> {
    let grid = &spec.grid;
    if u.grid() != grid {
        return Err(ModelError::DataGridMismatch);
    }
    let h = grid.h();
    match spec.kind {
        ModelKind::Monopolist => {
            let density = spec.density.as_ref().expect("monopolist spec has density");
            let mut total = 0.0;
            for k in grid.nodes() {
                let w = grid.cell_measure(k)? * density.value(k);
                let p = grid.coords(k);
                let mut grad_dot = 0.0;
                for (a, hi, lo, span) in monopolist_grad_nodes(grid, k) {
                    grad_dot += p[a] * (u.value(hi) - u.value(lo)) / span;
                }
                total += w * (grad_dot - u.value(k));
            }
            Ok(total)
        }
        ModelKind::Projection(norm) | ModelKind::Fit(norm) => {
            let f = spec.f.as_ref().expect("projection spec has target data");
            let mut total = 0.0;
            for k in grid.nodes() {
                let dev = u.value(k) - f.value(k);
                match norm {
                    Norm::L1 => total += dev.abs() * grid.cell_measure(k)?,
                    Norm::L2 => total += dev * dev * grid.cell_measure(k)?,
                    Norm::Linf => total = total.max(dev.abs()),
                }
            }
            Ok(total)
        }
        ModelKind::ProjectionH1 { .. } => {
            let f = spec.f.as_ref().expect("projection spec has target data");
            let hd = h.powi(grid.dim() as i32);
            let mut total = 0.0;
            for k in grid.nodes() {
                let (class, _) = grid.classify_node(k)?;
                if class != NodeClass::Interior {
                    continue;
                }
                let dev = u.value(k) - f.value(k);
                let mut s = dev * dev;
                for a in 0..grid.dim() {
                    let up = grid.neighbor(k, a, 1).unwrap();
                    let g = (u.value(up) - u.value(k)) / h - h1_gradient(spec, a, k);
                    s += g * g;
                }
                total += hd * s;
            }
            Ok(total)
        }
    }
}
