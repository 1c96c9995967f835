//! Finite-difference operators on grid functions: forward/backward first
//! differences, second differences, discrete Hessians (reduced at boundary
//! nodes), aggregated Hessians over coarse cells, piecewise-multilinear
//! interpolation, and two discrete-convexity diagnostics.

use crate::grid::{Grid, GridError};
use crate::linalg::SmallMat;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FdError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("finite difference undefined at node {node} along axis {axis}")]
    UndefinedAtNode { node: usize, axis: usize },
    #[error("discrete Hessian undefined at node {node} (no admissible axis)")]
    HessianUndefined { node: usize },
    #[error("value count {got} does not match node count {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite value at node {node}")]
    NonFiniteValue { node: usize },
    #[error("grids do not match")]
    GridMismatch,
    #[error("coarse mesh size must be an integer multiple m >= 2 of h, got factor {0}")]
    NonNestedMesh(usize),
    #[error("coarse cell around node {node} leaves the unit cube")]
    CoarseCellOutside { node: usize },
    #[error("point lies outside the unit cube")]
    PointOutsideCube,
}

/// Real values attached to the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

/// Symmetric matrix of second differences at a node, restricted to the axes
/// whose stencils stay inside the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHessian {
    pub node: usize,
    /// 0-based axes over which the matrix is formed; all of `0..d` at
    /// interior nodes.
    pub axes: Vec<usize>,
    pub matrix: SmallMat,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, FdError> {
        if values.len() != grid.node_count() {
            return Err(FdError::LengthMismatch {
                got: values.len(),
                want: grid.node_count(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(FdError::NonFiniteValue { node });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.node_count();
        GridFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Sample a continuous function at the nodes (the interpolant data `I_h f`).
    pub fn sample(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.nodes().map(|k| f(&grid.coords(k))).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// Forward first difference `(u(x + h e_i) - u(x)) / h`.
pub fn forward_diff(u: &GridFunction, k: usize, axis: usize) -> Result<f64, FdError> {
    let g = u.grid();
    g.check_node(k)?;
    let up = g
        .neighbor(k, axis, 1)
        .ok_or(FdError::UndefinedAtNode { node: k, axis })?;
    Ok((u.value(up) - u.value(k)) / g.h())
}

/// Backward first difference `(u(x) - u(x - h e_i)) / h`.
pub fn backward_diff(u: &GridFunction, k: usize, axis: usize) -> Result<f64, FdError> {
    let g = u.grid();
    g.check_node(k)?;
    let dn = g
        .neighbor(k, axis, -1)
        .ok_or(FdError::UndefinedAtNode { node: k, axis })?;
    Ok((u.value(k) - u.value(dn)) / g.h())
}

/// Second difference; three-point along an axis, four-point cross stencil
/// with prefactor `1/(4h^2)` for distinct axes. Symmetric in `(i, j)`.
pub fn second_diff(u: &GridFunction, k: usize, i: usize, j: usize) -> Result<f64, FdError> {
    let g = u.grid();
    g.check_node(k)?;
    let h = g.h();
    // Canonical axis order makes the (i,j) and (j,i) evaluations bit-identical.
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    if i == j {
        let up = g
            .neighbor(k, i, 1)
            .ok_or(FdError::UndefinedAtNode { node: k, axis: i })?;
        let dn = g
            .neighbor(k, i, -1)
            .ok_or(FdError::UndefinedAtNode { node: k, axis: i })?;
        Ok((u.value(up) - 2.0 * u.value(k) + u.value(dn)) / (h * h))
    } else {
        let corner = |si: isize, sj: isize| -> Result<f64, FdError> {
            let a = g
                .neighbor(k, i, si)
                .ok_or(FdError::UndefinedAtNode { node: k, axis: i })?;
            let b = g
                .neighbor(a, j, sj)
                .ok_or(FdError::UndefinedAtNode { node: k, axis: j })?;
            Ok(u.value(b))
        };
        let num = corner(1, 1)? - corner(-1, 1)? - corner(1, -1)? + corner(-1, -1)?;
        Ok(num / (4.0 * h * h))
    }
}

/// Discrete Hessian at a node, over the axes admitted by
/// [`Grid::classify_node`]. Fails at nodes with no admissible axis
/// (e.g. cube corners).
pub fn discrete_hessian(u: &GridFunction, k: usize) -> Result<DiscreteHessian, FdError> {
    let g = u.grid();
    let (_, axes) = g.classify_node(k)?;
    if axes.is_empty() {
        return Err(FdError::HessianUndefined { node: k });
    }
    let q = axes.len();
    let mut matrix = SmallMat::zeros(q);
    for a in 0..q {
        for b in a..q {
            let v = second_diff(u, k, axes[a], axes[b])?;
            matrix[(a, b)] = v;
            matrix[(b, a)] = v;
        }
    }
    Ok(DiscreteHessian {
        node: k,
        axes,
        matrix,
    })
}

/// Aggregated Hessian over the coarse cell `Q_{h'}(x)` with `h' = m h`:
/// the sum of the fine discrete Hessians `H_h u(y)` over all fine nodes `y`
/// whose cell `Q_h(y)` is contained in `Q_{h'}(x)`.
///
/// Computed through the telescoped boundary form (first-difference sums over
/// the two faces per axis on the diagonal, corner sums off the diagonal)
/// rather than by summing per-node Hessians.
pub fn aggregated_hessian(u: &GridFunction, k: usize, factor: usize) -> Result<SmallMat, FdError> {
    let g = u.grid();
    g.check_node(k)?;
    let n = g.subdivisions();
    let d = g.dim();
    if factor < 2 || n % factor != 0 {
        return Err(FdError::NonNestedMesh(factor));
    }
    let m = g.multi_index(k);
    let mf = factor as isize;
    if m.iter().any(|&c| c % factor != 0) {
        return Err(FdError::NonNestedMesh(factor));
    }
    if m.iter().any(|&c| (c as isize) < mf || c as isize > n as isize - mf) {
        return Err(FdError::CoarseCellOutside { node: k });
    }
    let h = g.h();
    let at = |offsets: &[(usize, isize)]| -> usize {
        let mut node = k;
        for &(axis, s) in offsets {
            node = g.neighbor(node, axis, s).expect("stencil stays in mesh");
        }
        node
    };
    // Offsets over a set of transverse axes, each in [-(m-1), m-1].
    let transverse = |axes: &[usize]| -> Vec<Vec<(usize, isize)>> {
        let mut out = vec![vec![]];
        for &a in axes {
            let mut next = Vec::new();
            for w in &out {
                for s in -(mf - 1)..=(mf - 1) {
                    let mut w2 = w.clone();
                    w2.push((a, s));
                    next.push(w2);
                }
            }
            out = next;
        }
        out
    };
    let mut agg = SmallMat::zeros(d);
    for i in 0..d {
        // Diagonal: forward differences on the two faces normal to axis i.
        let others: Vec<usize> = (0..d).filter(|&a| a != i).collect();
        let mut sum = 0.0;
        for w in transverse(&others) {
            let mut hi = w.clone();
            hi.push((i, mf - 1));
            let mut lo = w.clone();
            lo.push((i, -mf));
            sum += forward_diff(u, at(&hi), i)? - forward_diff(u, at(&lo), i)?;
        }
        agg[(i, i)] = sum / h;
        for j in (i + 1)..d {
            // Off-diagonal: the cross stencil telescopes in both axes to the
            // four corner offsets {m-1, m} per axis.
            let others: Vec<usize> = (0..d).filter(|&a| a != i && a != j).collect();
            let mut sum = 0.0;
            for w in transverse(&others) {
                for a in [mf - 1, mf] {
                    for b in [mf - 1, mf] {
                        let term = |si: isize, sj: isize| {
                            let mut o = w.clone();
                            o.push((i, si * a));
                            o.push((j, sj * b));
                            u.value(at(&o))
                        };
                        sum += term(1, 1) - term(1, -1) - term(-1, 1) + term(-1, -1);
                    }
                }
            }
            let v = sum / (4.0 * h * h);
            agg[(i, j)] = v;
            agg[(j, i)] = v;
        }
    }
    Ok(agg)
}

/// Tensor-product multilinear interpolation of the nodal values at `p`.
/// Exact at nodes and for multilinear functions.
pub fn interpolate(u: &GridFunction, p: &[f64]) -> Result<f64, FdError> {
    let g = u.grid();
    assert_eq!(p.len(), g.dim());
    if p.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
        return Err(FdError::PointOutsideCube);
    }
    let n = g.subdivisions();
    let d = g.dim();
    // Anchor cell corner and local coordinates in [0,1] per axis.
    let mut base = vec![0usize; d];
    let mut t = vec![0.0f64; d];
    for a in 0..d {
        let scaled = p[a] * n as f64;
        let cell = (scaled.floor() as usize).min(n - 1);
        base[a] = cell;
        t[a] = scaled - cell as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut mi = base.clone();
        for a in 0..d {
            if corner >> a & 1 == 1 {
                w *= t[a];
                mi[a] += 1;
            } else {
                w *= 1.0 - t[a];
            }
        }
        if w != 0.0 {
            acc += w * u.value(g.node_index(&mi));
        }
    }
    Ok(acc)
}

/// A violated midpoint inequality: `u(x+y) + u(x-y) < 2 u(x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvexityViolation {
    /// Multi-index of the center `x`.
    pub center: Vec<usize>,
    /// Lattice vector `y` in grid steps.
    pub direction: Vec<isize>,
}

/// Non-local discrete convexity check: `u(x+y) + u(x-y) >= 2 u(x)` for every
/// `x, y` with `x +- y` in the mesh (slack `-1e-12`). Brute force over all
/// lattice vectors; diagnostic only.
pub fn check_discrete_convexity(u: &GridFunction) -> (bool, Option<ConvexityViolation>) {
    const SLACK: f64 = 1e-12;
    let g = u.grid();
    let d = g.dim();
    let n = g.subdivisions() as isize;
    for k in g.nodes() {
        let m = g.multi_index(k);
        // |y_a| <= min(m_a, n - m_a); enumerate canonical y (first nonzero
        // component positive), lexicographic with axis 1 fastest.
        let bound: Vec<isize> = m
            .iter()
            .map(|&c| (c as isize).min(n - c as isize))
            .collect();
        let mut y = vec![0isize; d];
        'outer: loop {
            // advance y like a counter
            let mut a = 0;
            loop {
                if a == d {
                    break 'outer;
                }
                y[a] += 1;
                if y[a] <= bound[a] {
                    break;
                }
                y[a] = -bound[a];
                a += 1;
            }
            match y.iter().rev().find(|&&c| c != 0) {
                Some(&c) if c > 0 => {}
                _ => continue, // skip zero and non-canonical sign
            }
            let plus: Vec<usize> = m
                .iter()
                .zip(&y)
                .map(|(&c, &s)| (c as isize + s) as usize)
                .collect();
            let minus: Vec<usize> = m
                .iter()
                .zip(&y)
                .map(|(&c, &s)| (c as isize - s) as usize)
                .collect();
            let lhs = u.value(g.node_index(&plus)) + u.value(g.node_index(&minus));
            if lhs - 2.0 * u.value(k) < -SLACK {
                return (
                    false,
                    Some(ConvexityViolation {
                        center: m,
                        direction: y,
                    }),
                );
            }
        }
    }
    (true, None)
}

/// Worst node of the PSD-Hessian scan: location and minimum eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianExtremum {
    pub node: usize,
    pub min_eigenvalue: f64,
}

/// `true` iff every defined (possibly reduced) discrete Hessian has minimum
/// eigenvalue `>= -tol`. Also reports the worst node.
pub fn psd_hessian_everywhere(u: &GridFunction, tol: f64) -> (bool, Option<HessianExtremum>) {
    let g = u.grid();
    let mut worst: Option<HessianExtremum> = None;
    for k in g.nodes() {
        let (_, axes) = g.classify_node(k).expect("valid node");
        if axes.is_empty() {
            continue;
        }
        let hess = discrete_hessian(u, k).expect("axes nonempty");
        let lam = hess.matrix.min_eigenvalue();
        if worst.as_ref().map_or(true, |w| lam < w.min_eigenvalue) {
            worst = Some(HessianExtremum {
                node: k,
                min_eigenvalue: lam,
            });
        }
    }
    let ok = worst.as_ref().map_or(true, |w| w.min_eigenvalue >= -tol);
    (ok, worst)
}

#[cfg(test)]
pub mod fixtures {
    //! The two counterexample data sets from the non-equivalence discussion:
    //! one with PSD discrete Hessian but non-convex diagonal restriction, one
    //! convex restriction whose discrete Hessian is indefinite.
    use super::*;

    /// 3x3 data with PSD Hessian at the center yet non-convex along the
    /// diagonal (midpoint value 5/8 above the corner mean 1/2).
    pub fn psd_but_not_convex() -> GridFunction {
        let g = Grid::new(2, 2).unwrap();
        GridFunction::new(
            g,
            vec![0.0, 0.5, 1.0, 0.5, 0.625, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    /// 3x3 restriction of `max{x1, (14 x1 + x2)/15, x2 - 7/15}` (convex) whose
    /// discrete Hessian at the center is indefinite.
    pub fn convex_but_not_psd() -> GridFunction {
        let g = Grid::new(2, 2).unwrap();
        GridFunction::new(
            g,
            vec![
                0.0,
                0.5,
                1.0,
                1.0 / 30.0,
                0.5,
                1.0,
                8.0 / 15.0,
                8.0 / 15.0,
                1.0,
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::{convex_but_not_psd, psd_but_not_convex};
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn half_sq(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|c| c * c).sum::<f64>()
    }

    #[test]
    fn forward_diff_of_linear_and_constant() {
        let g = Grid::new(2, 4).unwrap();
        let u = GridFunction::sample(g.clone(), |x| x[0]);
        let c = GridFunction::sample(g.clone(), |_| 3.0);
        for k in g.nodes() {
            match forward_diff(&u, k, 0) {
                Ok(v) => assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13),
                Err(FdError::UndefinedAtNode { .. }) => {
                    assert_eq!(g.multi_index(k)[0], 4);
                }
                Err(e) => panic!("{e}"),
            }
            if let Ok(v) = forward_diff(&c, k, 0) {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn forward_diff_quadratic_1d() {
        let g = Grid::new(1, 2).unwrap();
        let u = GridFunction::sample(g, |x| 0.5 * x[0] * x[0]);
        assert_abs_diff_eq!(forward_diff(&u, 0, 0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn second_diff_of_half_square_norm() {
        let g = Grid::new(3, 4).unwrap();
        let u = GridFunction::sample(g.clone(), half_sq);
        for k in g.nodes() {
            let (class, _) = g.classify_node(k).unwrap();
            if class != crate::grid::NodeClass::Interior {
                continue;
            }
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(
                        second_diff(&u, k, i, j).unwrap(),
                        want,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn second_diff_stencil_errors() {
        let g = Grid::new(2, 2).unwrap();
        let u = GridFunction::zeros(g.clone());
        let edge = g.node_index(&[1, 0]);
        assert_eq!(
            second_diff(&u, edge, 1, 1),
            Err(FdError::UndefinedAtNode { node: edge, axis: 1 })
        );
        assert!(second_diff(&u, edge, 0, 0).is_ok());
    }

    #[test]
    fn counterexample_hessians() {
        let u1 = psd_but_not_convex();
        let center = u1.grid().node_index(&[1, 1]);
        let h1 = discrete_hessian(&u1, center).unwrap();
        assert_eq!(h1.axes, vec![0, 1]);
        assert_abs_diff_eq!(h1.matrix[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h1.matrix[(0, 1)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h1.matrix[(1, 1)], 1.0, epsilon = 1e-12);
        let e = h1.matrix.sym_eigenvalues();
        assert_abs_diff_eq!(e[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 2.0, epsilon = 1e-12);

        // Values follow from the printed data and the cross stencil; the
        // center Hessian is (1/15)[[2,-8],[-8,2]] with spectrum {-2/5, 2/3}.
        let u2 = convex_but_not_psd();
        let h2 = discrete_hessian(&u2, center).unwrap();
        assert_abs_diff_eq!(h2.matrix[(0, 0)], 2.0 / 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h2.matrix[(0, 1)], -8.0 / 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h2.matrix[(1, 1)], 2.0 / 15.0, epsilon = 1e-12);
        let e = h2.matrix.sym_eigenvalues();
        assert_abs_diff_eq!(e[0], -2.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn hessian_identity_for_half_square_norm() {
        let g = Grid::new(2, 4).unwrap();
        let u = GridFunction::sample(g.clone(), half_sq);
        let k = g.node_index(&[2, 2]);
        let h = discrete_hessian(&u, k).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(
                    h.matrix[(i, j)],
                    if i == j { 1.0 } else { 0.0 },
                    epsilon = 1e-12
                );
            }
        }
        let corner = g.node_index(&[0, 0]);
        assert_eq!(
            discrete_hessian(&u, corner),
            Err(FdError::HessianUndefined { node: corner })
        );
    }

    #[test]
    fn counterexample_pair_diagnostics() {
        let u1 = psd_but_not_convex();
        let (psd1, _) = psd_hessian_everywhere(&u1, 1e-9);
        assert!(psd1);
        let (conv1, violation) = check_discrete_convexity(&u1);
        assert!(!conv1);
        let v = violation.unwrap();
        assert_eq!(v.center, vec![1, 1]);
        assert_eq!(v.direction, vec![1, 1]);

        let u2 = convex_but_not_psd();
        let (psd2, worst) = psd_hessian_everywhere(&u2, 1e-9);
        assert!(!psd2);
        assert_abs_diff_eq!(
            worst.unwrap().min_eigenvalue,
            -2.0 / 5.0,
            epsilon = 1e-12
        );
        let (conv2, _) = check_discrete_convexity(&u2);
        assert!(conv2);
    }

    #[test]
    fn affine_functions_are_discretely_convex() {
        let g = Grid::new(2, 3).unwrap();
        let u = GridFunction::sample(g, |x| 2.0 * x[0] - 0.5 * x[1] + 1.0);
        let (ok, _) = check_discrete_convexity(&u);
        assert!(ok);
    }

    #[test]
    fn aggregated_hessian_1d_quadratic() {
        let g = Grid::new(1, 8).unwrap();
        let u = GridFunction::sample(g.clone(), half_sq);
        let k = g.node_index(&[4]);
        let agg = aggregated_hessian(&u, k, 2).unwrap();
        // 3 qualifying fine nodes, each contributing 1.
        assert_abs_diff_eq!(agg[(0, 0)], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregated_hessian_rejects_bad_inputs() {
        let g = Grid::new(1, 8).unwrap();
        let u = GridFunction::sample(g.clone(), half_sq);
        assert_eq!(
            aggregated_hessian(&u, g.node_index(&[4]), 3),
            Err(FdError::NonNestedMesh(3))
        );
        assert_eq!(
            aggregated_hessian(&u, g.node_index(&[0]), 2),
            Err(FdError::CoarseCellOutside { node: 0 })
        );
        // node not on the coarse mesh
        assert_eq!(
            aggregated_hessian(&u, g.node_index(&[3]), 2),
            Err(FdError::NonNestedMesh(2))
        );
    }

    /// Direct-summation oracle for the aggregated Hessian: sum the per-node
    /// discrete Hessians over all fine nodes within the coarse cell.
    fn aggregated_by_summation(u: &GridFunction, k: usize, factor: usize) -> SmallMat {
        let g = u.grid();
        let d = g.dim();
        let mf = factor as isize;
        let mut total = SmallMat::zeros(d);
        let mut offsets = vec![-(mf - 1); d];
        loop {
            let mut node = k;
            for (a, &s) in offsets.iter().enumerate() {
                node = g.neighbor(node, a, s).unwrap();
            }
            let h = discrete_hessian(u, node).unwrap();
            assert_eq!(h.axes.len(), d);
            total.add_scaled(&h.matrix, 1.0);
            let mut a = 0;
            loop {
                if a == d {
                    return total;
                }
                offsets[a] += 1;
                if offsets[a] <= mf - 1 {
                    break;
                }
                offsets[a] = -(mf - 1);
                a += 1;
            }
        }
    }

    #[test]
    fn aggregation_matches_summation_on_random_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (d, n, m) in [(1usize, 8usize, 2usize), (1, 12, 4), (2, 8, 2), (2, 12, 3), (2, 16, 4)] {
            let g = Grid::new(d, n).unwrap();
            let values: Vec<f64> = (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = GridFunction::new(g.clone(), values).unwrap();
            for k in g.nodes() {
                let mi = g.multi_index(k);
                if mi.iter().any(|&c| c % m != 0 || c < m || c > n - m) {
                    continue;
                }
                let formula = aggregated_hessian(&u, k, m).unwrap();
                let oracle = aggregated_by_summation(&u, k, m);
                for i in 0..d {
                    for j in 0..d {
                        assert_abs_diff_eq!(formula[(i, j)], oracle[(i, j)], epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn aggregate_of_psd_hessians_is_psd() {
        let g = Grid::new(2, 8).unwrap();
        // smooth convex: exact discrete Hessian 2*diag + cross terms all PSD
        let u = GridFunction::sample(g.clone(), |x| {
            (x[0] + 0.3 * x[1]).powi(2) + 0.5 * x[1] * x[1]
        });
        let (psd, _) = psd_hessian_everywhere(&u, 1e-12);
        assert!(psd);
        let agg = aggregated_hessian(&u, g.node_index(&[4, 4]), 2).unwrap();
        assert!(agg.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn interpolation_basics() {
        let g = Grid::new(2, 4).unwrap();
        let u = GridFunction::sample(g.clone(), |x| x[0] * x[1]);
        // exact at nodes
        for k in g.nodes() {
            let p = g.coords(k);
            assert_abs_diff_eq!(interpolate(&u, &p).unwrap(), u.value(k), epsilon = 1e-15);
        }
        // bilinear reproduced anywhere
        for p in [[0.13, 0.77], [0.5, 0.5], [0.999, 0.001]] {
            assert_abs_diff_eq!(interpolate(&u, &p).unwrap(), p[0] * p[1], epsilon = 1e-14);
        }
        // cell center = mean of the 4 corners
        let v = interpolate(&u, &[0.125, 0.125]).unwrap();
        let mean = (u.value(g.node_index(&[0, 0]))
            + u.value(g.node_index(&[1, 0]))
            + u.value(g.node_index(&[0, 1]))
            + u.value(g.node_index(&[1, 1])))
            / 4.0;
        assert_abs_diff_eq!(v, mean, epsilon = 1e-15);
        assert_eq!(
            interpolate(&u, &[1.2, 0.0]),
            Err(FdError::PointOutsideCube)
        );
    }

    #[test]
    fn quadratic_exactness_across_grids() {
        for d in 1..=3usize {
            for n in [2usize, 5, 16, 64] {
                if (n + 1).pow(d as u32) > 50_000 {
                    continue;
                }
                let g = Grid::new(d, n).unwrap();
                let u = GridFunction::sample(g.clone(), |x| {
                    let mut s = 0.0;
                    for i in 0..x.len() {
                        s += (i as f64 + 1.0) * x[i] * x[i];
                        if i + 1 < x.len() {
                            s += 0.5 * x[i] * x[i + 1];
                        }
                    }
                    s
                });
                let k = g.node_index(&vec![n / 2; d]);
                for i in 0..d {
                    let want = 2.0 * (i as f64 + 1.0);
                    assert_abs_diff_eq!(
                        second_diff(&u, k, i, i).unwrap(),
                        want,
                        epsilon = 1e-10 * (n * n) as f64
                    );
                }
            }
        }
    }

    #[test]
    fn psd_hessian_implies_1d_slice_convexity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let g = Grid::new(2, 6).unwrap();
            // random positive combination of squared affine functions: the
            // discrete Hessian is exactly the (PSD) continuous one.
            let mut terms = Vec::new();
            for _ in 0..4 {
                let a: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let b: f64 = rng.gen_range(-1.0..1.0);
                let c: f64 = rng.gen_range(0.0..1.0);
                terms.push((a, b, c));
            }
            let u = GridFunction::sample(g.clone(), |x| {
                terms
                    .iter()
                    .map(|(a, b, c)| c * (a[0] * x[0] + a[1] * x[1] + b).powi(2))
                    .sum()
            });
            let (psd, _) = psd_hessian_everywhere(&u, 1e-12);
            assert!(psd);
            // every axis-parallel line satisfies the 1D slope inequalities
            let n = g.subdivisions();
            for axis in 0..2 {
                for line in 0..=n {
                    for pos in 1..n {
                        let mut mid = [0usize; 2];
                        mid[axis] = pos;
                        mid[1 - axis] = line;
                        let k = g.node_index(&mid);
                        let lo = g.neighbor(k, axis, -1).unwrap();
                        let hi = g.neighbor(k, axis, 1).unwrap();
                        let left = u.value(k) - u.value(lo);
                        let right = u.value(hi) - u.value(k);
                        assert!(right - left >= -1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn second_diff_symmetric_bit_identical(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::new(2, 4).unwrap();
            let values: Vec<f64> = (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = GridFunction::new(g.clone(), values).unwrap();
            let k = g.node_index(&[2, 2]);
            let a = second_diff(&u, k, 0, 1).unwrap();
            let b = second_diff(&u, k, 1, 0).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn grid_function_rejects_bad_values(len in 0usize..30) {
            let g = Grid::new(2, 2).unwrap();
            let r = GridFunction::new(g, vec![0.0; len]);
            if len == 9 {
                prop_assert!(r.is_ok());
            } else {
                prop_assert!(r.is_err());
            }
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = Grid::new(2, 2).unwrap();
        let mut v = vec![0.0; 9];
        v[3] = f64::NAN;
        assert_eq!(
            GridFunction::new(g, v),
            Err(FdError::NonFiniteValue { node: 3 })
        );
    }
}
