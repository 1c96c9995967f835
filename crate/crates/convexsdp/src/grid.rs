//! Regular tensor meshes on the unit cube `[0,1]^d`.
//!
//! Nodes are the points `z/n` with `z` an integer multi-index in `{0,..,n}^d`.
//! Node order is lexicographic over multi-indices with axis 1 running fastest,
//! so that variable numbering (and every output file) is deterministic.
//! Coordinates are kept as integer multi-indices; floating point values are
//! derived as `z_i / n` only at the edge of the API.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("dimension must be at least 1, got {0}")]
    BadDimension(usize),
    #[error("need at least 2 subdivisions per axis, got {0}")]
    BadSubdivisions(usize),
    #[error("node index {index} out of range for grid with {count} nodes")]
    NodeOutOfRange { index: usize, count: usize },
}

/// Regular mesh on `[0,1]^d` with `n` subdivisions per axis (`h = 1/n`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    d: usize,
    n: usize,
}

/// Whether a node lies strictly inside the cube or on its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
}

impl Grid {
    pub fn new(d: usize, n: usize) -> Result<Self, GridError> {
        if d < 1 {
            return Err(GridError::BadDimension(d));
        }
        if n < 2 {
            return Err(GridError::BadSubdivisions(n));
        }
        Ok(Grid { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn subdivisions(&self) -> usize {
        self.n
    }

    /// Mesh size `h = 1/n`.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total node count `(n+1)^d`.
    pub fn node_count(&self) -> usize {
        (self.n + 1).pow(self.d as u32)
    }

    pub fn interior_count(&self) -> usize {
        (self.n - 1).pow(self.d as u32)
    }

    pub fn check_node(&self, k: usize) -> Result<(), GridError> {
        if k < self.node_count() {
            Ok(())
        } else {
            Err(GridError::NodeOutOfRange {
                index: k,
                count: self.node_count(),
            })
        }
    }

    /// Multi-index of node `k` (axis 1 fastest).
    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        debug_assert!(k < self.node_count());
        let mut rem = k;
        let base = self.n + 1;
        (0..self.d)
            .map(|_| {
                let c = rem % base;
                rem /= base;
                c
            })
            .collect()
    }

    /// Node index of a multi-index; inverse of [`Grid::multi_index`].
    pub fn node_index(&self, m: &[usize]) -> usize {
        debug_assert_eq!(m.len(), self.d);
        let base = self.n + 1;
        m.iter().rev().fold(0, |acc, &c| {
            debug_assert!(c <= self.n);
            acc * base + c
        })
    }

    /// Cartesian coordinates of node `k`.
    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }

    /// Node at the origin `(0,...,0)` (always index 0).
    pub fn origin(&self) -> usize {
        0
    }

    /// Offset node `k` by `steps` grid steps along `axis` (0-based).
    /// Returns `None` when the result leaves the mesh.
    pub fn neighbor(&self, k: usize, axis: usize, steps: isize) -> Option<usize> {
        let m = self.multi_index(k);
        let c = m[axis] as isize + steps;
        if c < 0 || c > self.n as isize {
            return None;
        }
        let stride = (self.n + 1).pow(axis as u32);
        Some((k as isize + steps * stride as isize) as usize)
    }

    /// Interior/boundary classification together with the axes along which a
    /// (possibly reduced) discrete Hessian can be formed: axis `i` qualifies
    /// iff both `x ± h e_i` stay in the mesh.
    pub fn classify_node(&self, k: usize) -> Result<(NodeClass, Vec<usize>), GridError> {
        self.check_node(k)?;
        let m = self.multi_index(k);
        let axes: Vec<usize> = (0..self.d).filter(|&a| m[a] > 0 && m[a] < self.n).collect();
        let class = if axes.len() == self.d {
            NodeClass::Interior
        } else {
            NodeClass::Boundary
        };
        Ok((class, axes))
    }

    /// Lumped measure of the cell around node `k`: tensor product of `h` for
    /// interior coordinates and `h/2` for coordinates sitting at 0 or 1.
    /// The measures partition the cube, `sum_k |Q_k| = 1`.
    pub fn cell_measure(&self, k: usize) -> Result<f64, GridError> {
        self.check_node(k)?;
        let h = self.h();
        let m = self.multi_index(k);
        Ok(m
            .iter()
            .map(|&c| if c == 0 || c == self.n { h / 2.0 } else { h })
            .product())
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        0..self.node_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert_eq!(Grid::new(0, 4), Err(GridError::BadDimension(0)));
        assert_eq!(Grid::new(2, 1), Err(GridError::BadSubdivisions(1)));
        assert_eq!(Grid::new(2, 0), Err(GridError::BadSubdivisions(0)));
    }

    #[test]
    fn node_counts() {
        let g = Grid::new(2, 2).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.interior_count(), 1);
        assert_eq!(g.coords(g.node_index(&[1, 1])), vec![0.5, 0.5]);

        assert_eq!(Grid::new(2, 8).unwrap().node_count(), 81);
        assert_eq!(Grid::new(3, 4).unwrap().node_count(), 125);
    }

    #[test]
    fn boundary_counts() {
        for (d, n) in [(1, 4), (2, 5), (3, 3), (4, 2)] {
            let g = Grid::new(d, n).unwrap();
            let interior = g
                .nodes()
                .filter(|&k| g.classify_node(k).unwrap().0 == NodeClass::Interior)
                .count();
            assert_eq!(interior, (n - 1).pow(d as u32));
            assert_eq!(
                g.node_count() - interior,
                (n + 1).pow(d as u32) - (n - 1).pow(d as u32)
            );
        }
    }

    #[test]
    fn classify_matches_boundary_hessian_cases() {
        // d=3, n=2: reduced Hessian axes at the face, edge and corner nodes.
        let g = Grid::new(3, 2).unwrap();
        let face = g.node_index(&[1, 1, 0]);
        assert_eq!(
            g.classify_node(face).unwrap(),
            (NodeClass::Boundary, vec![0, 1])
        );
        let edge = g.node_index(&[1, 0, 0]);
        assert_eq!(g.classify_node(edge).unwrap(), (NodeClass::Boundary, vec![0]));
        let corner = g.node_index(&[0, 0, 0]);
        assert_eq!(g.classify_node(corner).unwrap(), (NodeClass::Boundary, vec![]));
    }

    #[test]
    fn cell_measures_on_coarse_square() {
        let g = Grid::new(2, 2).unwrap();
        let center = g.node_index(&[1, 1]);
        assert_eq!(g.cell_measure(center).unwrap(), 0.25);
        let corner = g.node_index(&[0, 0]);
        assert_eq!(g.cell_measure(corner).unwrap(), 1.0 / 16.0);
        let total: f64 = g.nodes().map(|k| g.cell_measure(k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn measures_partition_unity() {
        for d in 1..=4 {
            for n in [2usize, 3, 7, 16, 64] {
                if (n + 1).pow(d as u32) > 300_000 {
                    continue;
                }
                let g = Grid::new(d, n).unwrap();
                let total: f64 = g.nodes().map(|k| g.cell_measure(k).unwrap()).sum();
                assert!(
                    (total - 1.0).abs() < 1e-11,
                    "d={d} n={n} sum={total:.17}"
                );
            }
        }
    }

    #[test]
    fn invalid_index_is_rejected() {
        let g = Grid::new(2, 2).unwrap();
        assert!(g.classify_node(9).is_err());
        assert!(g.cell_measure(100).is_err());
    }

    proptest! {
        #[test]
        fn index_bijection_round_trips(d in 1usize..=4, n in 2usize..=6, seed in 0usize..10_000) {
            let g = Grid::new(d, n).unwrap();
            let k = seed % g.node_count();
            let m = g.multi_index(k);
            prop_assert_eq!(g.node_index(&m), k);
        }

        #[test]
        fn neighbor_agrees_with_multi_index(d in 1usize..=3, n in 2usize..=5, seed in 0usize..10_000, axis_pick in 0usize..3, steps in -2isize..=2) {
            let g = Grid::new(d, n).unwrap();
            let k = seed % g.node_count();
            let axis = axis_pick % d;
            let mut m = g.multi_index(k);
            let c = m[axis] as isize + steps;
            match g.neighbor(k, axis, steps) {
                Some(j) => {
                    prop_assert!(c >= 0 && c <= n as isize);
                    m[axis] = c as usize;
                    prop_assert_eq!(g.node_index(&m), j);
                }
                None => prop_assert!(c < 0 || c > n as isize),
            }
        }
    }
}
