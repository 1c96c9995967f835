//! Small dense symmetric matrix kernels.
//!
//! The SDP blocks arising here are tiny (Hessian blocks of side `d <= 3`,
//! epigraph blocks of side 2), so everything is done with straightforward
//! row-major storage: closed-form eigenvalues for sides 1 and 2, cyclic
//! Jacobi sweeps for side 3 and up.

/// Dense square matrix, row-major. Symmetry is a caller-maintained invariant
/// where the operation requires it.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMat {
    dim: usize,
    data: Vec<f64>,
}

/// Jacobi off-diagonal threshold, relative to the Frobenius norm.
const JACOBI_TOL: f64 = 1e-12;

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        SmallMat {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        SmallMat { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &SmallMat, s: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &SmallMat) -> SmallMat {
        debug_assert_eq!(self.dim, other.dim);
        let q = self.dim;
        let mut out = SmallMat::zeros(q);
        for i in 0..q {
            for l in 0..q {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..q {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> SmallMat {
        let q = self.dim;
        let mut out = SmallMat::zeros(q);
        for i in 0..q {
            for j in 0..q {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `(A + A^T)/2`.
    pub fn symmetrize(&mut self) {
        let q = self.dim;
        for i in 0..q {
            for j in (i + 1)..q {
                let s = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = s;
                self[(j, i)] = s;
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product `<A, B> = sum_ij A_ij B_ij`.
    pub fn dot(&self, other: &SmallMat) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Cholesky factor `L` with `A = L L^T`; `None` when a pivot is not
    /// strictly positive (matrix not positive definite).
    pub fn cholesky(&self) -> Option<SmallMat> {
        let q = self.dim;
        let mut l = SmallMat::zeros(q);
        for i in 0..q {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(l)
    }

    /// Solve `L x = b` for lower-triangular `self`, overwriting `b`.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let q = self.dim;
        for i in 0..q {
            let mut s = b[i];
            for k in 0..i {
                s -= self[(i, k)] * b[k];
            }
            b[i] = s / self[(i, i)];
        }
    }

    /// Solve `L^T x = b` for lower-triangular `self`, overwriting `b`.
    pub fn solve_lower_transpose_in_place(&self, b: &mut [f64]) {
        let q = self.dim;
        for i in (0..q).rev() {
            let mut s = b[i];
            for k in (i + 1)..q {
                s -= self[(k, i)] * b[k];
            }
            b[i] = s / self[(i, i)];
        }
    }

    /// Inverse of an SPD matrix given its Cholesky factor `self = L`.
    pub fn spd_inverse_from_cholesky(&self) -> SmallMat {
        let q = self.dim;
        let mut inv = SmallMat::zeros(q);
        let mut col = vec![0.0; q];
        for j in 0..q {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_lower_in_place(&mut col);
            self.solve_lower_transpose_in_place(&mut col);
            for i in 0..q {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        inv
    }

    /// Eigenvalues of a symmetric matrix, ascending. Sides 1 and 2 are closed
    /// form; larger sides use cyclic Jacobi sweeps to relative tolerance 1e-12.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            0 => vec![],
            1 => vec![self[(0, 0)]],
            2 => {
                let a = self[(0, 0)];
                let d = self[(1, 1)];
                let b = self[(0, 1)];
                let mean = 0.5 * (a + d);
                let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                vec![mean - r, mean + r]
            }
            _ => self.jacobi_eigenvalues(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    fn jacobi_eigenvalues(&self) -> Vec<f64> {
        let q = self.dim;
        let mut a = self.clone();
        a.symmetrize();
        let scale = a.frob_norm().max(1.0);
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for i in 0..q {
                for j in (i + 1)..q {
                    off = off.max(a[(i, j)].abs());
                }
            }
            if off <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..q {
                for r in (p + 1)..q {
                    let apr = a[(p, r)];
                    if apr.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..q {
                        let akp = a[(k, p)];
                        let akr = a[(k, r)];
                        a[(k, p)] = c * akp - s * akr;
                        a[(k, r)] = s * akp + c * akr;
                    }
                    for k in 0..q {
                        let apk = a[(p, k)];
                        let ark = a[(r, k)];
                        a[(p, k)] = c * apk - s * ark;
                        a[(r, k)] = s * apk + c * ark;
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..q).map(|i| a[(i, i)]).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eigs
    }

    /// Largest `alpha` such that `self + alpha * step` stays positive
    /// semidefinite, given the Cholesky factor `l` of `self`.
    /// Returns `f64::INFINITY` when every positive step is admissible.
    pub fn max_psd_step(l: &SmallMat, step: &SmallMat) -> f64 {
        let q = l.dim;
        // B = L^{-1} step L^{-T}, computed column by column.
        let mut b = SmallMat::zeros(q);
        let mut col = vec![0.0; q];
        for j in 0..q {
            for i in 0..q {
                col[i] = step[(i, j)];
            }
            l.solve_lower_in_place(&mut col);
            for i in 0..q {
                b[(i, j)] = col[i];
            }
        }
        // Right-multiply by L^{-T}: solve on rows.
        for i in 0..q {
            for j in 0..q {
                col[j] = b[(i, j)];
            }
            l.solve_lower_in_place(&mut col);
            for j in 0..q {
                b[(i, j)] = col[j];
            }
        }
        b.symmetrize();
        let lam = b.min_eigenvalue();
        if lam >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / lam
        }
    }
}

impl std::ops::Index<(usize, usize)> for SmallMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SmallMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_2x2_eigenvalues() {
        let m = SmallMat::from_rows(2, vec![1.0, -1.0, -1.0, 1.0]);
        let e = m.sym_eigenvalues();
        assert_abs_diff_eq!(e[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // diag(1,2,3) conjugated by a rotation in the (0,2) plane.
        let (c, s) = (0.6, 0.8);
        let mut m = SmallMat::zeros(3);
        m[(0, 0)] = c * c * 1.0 + s * s * 3.0;
        m[(2, 2)] = s * s * 1.0 + c * c * 3.0;
        m[(1, 1)] = 2.0;
        m[(0, 2)] = c * s * (1.0 - 3.0);
        m[(2, 0)] = m[(0, 2)];
        let e = m.sym_eigenvalues();
        assert_abs_diff_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_round_trip() {
        let m = SmallMat::from_rows(3, vec![4.0, 2.0, 1.0, 2.0, 5.0, 3.0, 1.0, 3.0, 6.0]);
        let l = m.cholesky().unwrap();
        let back = l.matmul(&l.transpose());
        for (a, b) in m.data().iter().zip(back.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        let inv = l.spd_inverse_from_cholesky();
        let id = m.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(id[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SmallMat::from_rows(2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn psd_step_length() {
        let s = SmallMat::identity(2);
        let l = s.cholesky().unwrap();
        let mut step = SmallMat::zeros(2);
        step[(0, 0)] = -2.0;
        step[(1, 1)] = 1.0;
        // I + a*step loses PSD at a = 1/2.
        assert_abs_diff_eq!(SmallMat::max_psd_step(&l, &step), 0.5, epsilon = 1e-14);
        let up = SmallMat::identity(2);
        assert_eq!(SmallMat::max_psd_step(&l, &up), f64::INFINITY);
    }
}
