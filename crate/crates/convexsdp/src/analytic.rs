//! Closed-form reference solutions, named test functions, convergence tables
//! and seeded noise for the experiments.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fdops::GridFunction;
use crate::grid::Grid;
use crate::models::{
    build_monopolist, evaluate_functional, BuildOptions, ModelError,
};
use crate::sdpcore::{solve, SolveOptions};

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("no exact monopolist solution embedded for dimension {0}")]
    UnsupportedDimension(usize),
    #[error("unknown test function {0:?}")]
    UnknownFunction(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Convex piecewise-affine function `x -> max_i (g_i.x + b_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineMax {
    pieces: Vec<(Vec<f64>, f64)>,
}

impl PiecewiseAffineMax {
    pub fn new(pieces: Vec<(Vec<f64>, f64)>) -> Self {
        assert!(!pieces.is_empty());
        PiecewiseAffineMax { pieces }
    }

    pub fn pieces(&self) -> &[(Vec<f64>, f64)] {
        &self.pieces
    }

    pub fn evaluate(&self, p: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|(g, b)| g.iter().zip(p).map(|(gi, pi)| gi * pi).sum::<f64>() + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact optimizer of the unit-density monopolist problem together with the
/// exact functional value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMonopolist {
    pub solution: PiecewiseAffineMax,
    pub objective: f64,
}

/// 2D constants are closed form; the 3D coefficients are the six printed
/// digits (they are roots of high-degree polynomials), chosen so that
/// `b - a = c - b`.
pub fn monopolist_exact(d: usize) -> Result<ExactMonopolist, AnalyticError> {
    match d {
        2 => {
            let a = 2.0 / 3.0;
            let b = (4.0 - 2.0f64.sqrt()) / 3.0;
            Ok(ExactMonopolist {
                solution: PiecewiseAffineMax::new(vec![
                    (vec![0.0, 0.0], 0.0),
                    (vec![1.0, 0.0], -a),
                    (vec![0.0, 1.0], -a),
                    (vec![1.0, 1.0], -b),
                ]),
                objective: 2.0 / 27.0 * (6.0 + 2.0f64.sqrt()),
            })
        }
        3 => {
            let a = 0.840627;
            let b = 1.038352;
            let c = 1.236077;
            Ok(ExactMonopolist {
                solution: PiecewiseAffineMax::new(vec![
                    (vec![0.0, 0.0, 0.0], 0.0),
                    (vec![1.0, 0.0, 0.0], -a),
                    (vec![0.0, 1.0, 0.0], -a),
                    (vec![0.0, 0.0, 1.0], -a),
                    (vec![1.0, 1.0, 0.0], -b),
                    (vec![1.0, 0.0, 1.0], -b),
                    (vec![0.0, 1.0, 1.0], -b),
                    (vec![1.0, 1.0, 1.0], -c),
                ]),
                objective: 0.868405,
            })
        }
        other => Err(AnalyticError::UnsupportedDimension(other)),
    }
}

/// One mesh level of the monopolist benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Functional value of the computed minimizer.
    pub j_solved: f64,
    /// Functional value at the nodal interpolant of the exact solution.
    pub j_interp: f64,
    /// Nodal max error against the exact interpolant.
    pub linf_error: f64,
    pub wall_time_s: f64,
    /// `(J(u) - J_h(u_h)) / h`.
    pub ratio: f64,
    pub solved: bool,
}

/// Solve the unit-density monopolist at each mesh level and compare against
/// the exact solution. Failed solves keep their row, flagged unsolved.
pub fn convergence_table(d: usize, ns: &[usize]) -> Result<Vec<ConvergenceRow>, AnalyticError> {
    let exact = monopolist_exact(d)?;
    let mut rows = Vec::new();
    for &n in ns {
        let grid = Grid::new(d, n).map_err(ModelError::from)?;
        let density = GridFunction::sample(grid.clone(), |_| 1.0);
        let model = build_monopolist(grid.clone(), density, &BuildOptions::default())?;
        let start = Instant::now();
        let sol = solve(&model.problem, &SolveOptions::default());
        let wall_time_s = start.elapsed().as_secs_f64();
        let solved = sol.is_optimal();
        let dec = model.decode(&sol)?;
        let interp = GridFunction::sample(grid.clone(), |p| exact.solution.evaluate(p));
        let j_interp = evaluate_functional(model.spec(), &interp)?;
        let linf_error = grid
            .nodes()
            .map(|k| (dec.u.value(k) - interp.value(k)).abs())
            .fold(0.0f64, f64::max);
        rows.push(ConvergenceRow {
            n,
            j_solved: dec.objective,
            j_interp,
            linf_error,
            wall_time_s,
            ratio: (exact.objective - dec.objective) * n as f64,
            solved,
        });
    }
    Ok(rows)
}

/// Named benchmark functions with exact gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `-(4 + 5 x1 x2^2) exp(-30((x1-1/2)^2 + (x2-1/2)^2))`.
    CarlierF,
    /// `-sin^3(2 pi x1) sin^3(pi x2)`.
    Sin3G,
    /// `(x1-1/2)^2 + 2 (x2-1/2)^2`.
    Quad,
}

impl TestFunction {
    pub fn parse(name: &str) -> Result<Self, AnalyticError> {
        match name {
            "carlier-f" => Ok(TestFunction::CarlierF),
            "sin3-g" => Ok(TestFunction::Sin3G),
            "quad" => Ok(TestFunction::Quad),
            other => Err(AnalyticError::UnknownFunction(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::CarlierF => "carlier-f",
            TestFunction::Sin3G => "sin3-g",
            TestFunction::Quad => "quad",
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        let (x, y) = (p[0], p[1]);
        match self {
            TestFunction::CarlierF => {
                let e = (-30.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp();
                -(4.0 + 5.0 * x * y * y) * e
            }
            TestFunction::Sin3G => {
                -(2.0 * std::f64::consts::PI * x).sin().powi(3)
                    * (std::f64::consts::PI * y).sin().powi(3)
            }
            TestFunction::Quad => (x - 0.5).powi(2) + 2.0 * (y - 0.5).powi(2),
        }
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let (x, y) = (p[0], p[1]);
        match self {
            TestFunction::CarlierF => {
                let g = 4.0 + 5.0 * x * y * y;
                let e = (-30.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp();
                vec![
                    e * (-5.0 * y * y + 60.0 * (x - 0.5) * g),
                    e * (-10.0 * x * y + 60.0 * (y - 0.5) * g),
                ]
            }
            TestFunction::Sin3G => {
                let pi = std::f64::consts::PI;
                let (s1, c1) = (2.0 * pi * x).sin_cos();
                let (s2, c2) = (pi * y).sin_cos();
                vec![
                    -6.0 * pi * s1 * s1 * c1 * s2.powi(3),
                    -3.0 * pi * s1.powi(3) * s2 * s2 * c2,
                ]
            }
            TestFunction::Quad => vec![2.0 * (x - 0.5), 4.0 * (y - 0.5)],
        }
    }
}

/// Independent uniform(-eps, eps) noise per node from a seeded generator;
/// identical arguments give identical samples.
pub fn make_noise(grid: Grid, eps: f64, seed: u64) -> GridFunction {
    assert!(eps >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.node_count())
        .map(|_| rng.gen::<f64>() * 2.0 * eps - eps)
        .collect();
    GridFunction::new(grid, values).expect("noise values are finite")
}
