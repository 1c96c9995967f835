//! Command-line surface: solve models, regenerate the benchmark tables, and
//! export grids, contours, and SDPA files.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analytic::{convergence_table, make_noise, AnalyticError, TestFunction};
use crate::fdops::GridFunction;
use crate::grid::Grid;
use crate::io::{default_contour_levels, read_grid, write_contours, write_grid, IoError};
use crate::models::{
    build_model, BuildOptions, BuiltModel, DecodedSolution, ModelError, ModelSpec, Norm,
};
use crate::sdpcore::{solve, to_sdpa_sparse, SolveOptions, SolveStatus};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("{0}")]
    Usage(String),
    #[error("solver stopped with status {0:?}")]
    NotConverged(SolveStatus),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::NotConverged(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "convexsdp",
    version,
    about = "Optimization over convex grid functions via semidefinite programming"
)]
struct Cli {
    /// Worker threads (overrides CONVEXSDP_THREADS; 0 or absent = automatic).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative duality-gap tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    gap_tol: f64,
    /// Primal/dual feasibility tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    feas_tol: f64,
    #[arg(long, global = true, default_value_t = 200)]
    max_iter: usize,
    /// Print all digits instead of the 4-decimal table precision.
    #[arg(long, global = true)]
    full_precision: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Revenue-maximizing mechanism design with convex utilities.
    Monopolist {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Subdivisions per axis.
        #[arg(long)]
        n: usize,
        /// CSV of nodal density samples (default: uniform density 1).
        #[arg(long)]
        density_file: Option<PathBuf>,
        /// Write the solution grid as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write contour data as JSON (2D only).
        #[arg(long)]
        contours: Option<PathBuf>,
    },
    /// Norm projection onto discretely convex functions.
    Project {
        #[arg(long, value_enum)]
        norm: ProjectionNorm,
        #[arg(long)]
        n: Option<usize>,
        /// Built-in target: carlier-f, sin3-g, or quad (2D).
        #[arg(long)]
        function: Option<String>,
        /// CSV target data (alternative to --function).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        contours: Option<PathBuf>,
    },
    /// Fit noisy nodal samples by a discretely convex function.
    Fit {
        #[arg(long, value_enum)]
        norm: FitNorm,
        #[arg(long)]
        n: usize,
        /// Noise-free target function (2D).
        #[arg(long, default_value = "quad")]
        function: String,
        /// Noise amplitude as a multiple of h.
        #[arg(long, default_value_t = 10.0)]
        eps_mult: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Mesh-refinement benchmark against the exact monopolist solution.
    Table {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Comma-separated subdivision counts, e.g. 8,16,32.
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        /// Write the table as CSV (without the timing column, which is not
        /// reproducible byte-for-byte).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a model as an SDPA sparse file instead of solving it.
    ExportSdpa {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Destination .dat-s file (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProjectionNorm {
    L1,
    L2,
    Linf,
    H1,
    H01,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FitNorm {
    L1,
    L2,
    Linf,
}

impl From<FitNorm> for Norm {
    fn from(n: FitNorm) -> Norm {
        match n {
            FitNorm::L1 => Norm::L1,
            FitNorm::L2 => Norm::L2,
            FitNorm::Linf => Norm::Linf,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Monopolist,
    L1,
    L2,
    Linf,
    H1,
    H01,
}

pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    apply_threads(cli.threads);
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn apply_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("CONVEXSDP_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    faer::set_global_parallelism(faer::Parallelism::Rayon(n.unwrap_or(0)));
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let opts = SolveOptions {
        gap_tol: cli.gap_tol,
        feas_tol: cli.feas_tol,
        max_iter: cli.max_iter,
    };
    match &cli.cmd {
        Cmd::Monopolist {
            dim,
            n,
            density_file,
            output,
            contours,
        } => {
            let grid = Grid::new(*dim, *n).map_err(ModelError::from)?;
            let density = match density_file {
                Some(path) => {
                    let f = read_file(path)?;
                    if f.grid() != &grid {
                        return Err(CliError::Usage(format!(
                            "density file is on a {}d mesh with n={}, expected d={dim}, n={n}",
                            f.grid().dim(),
                            f.grid().subdivisions()
                        )));
                    }
                    f
                }
                None => GridFunction::sample(grid.clone(), |_| 1.0),
            };
            let spec = ModelSpec::monopolist(grid, density)?;
            let model = build_model(&spec, &BuildOptions::default())?;
            let dec = solve_and_report(&model, &opts)?;
            println!("J_h = {}", fmt(dec.objective, cli.full_precision));
            write_solution(&dec, output.as_deref(), contours.as_deref())?;
            Ok(())
        }
        Cmd::Project {
            norm,
            n,
            function,
            input,
            output,
            contours,
        } => {
            let spec = projection_spec(*norm, *n, function.as_deref(), input.as_deref())?;
            let model = build_model(&spec, &BuildOptions::default())?;
            let dec = solve_and_report(&model, &opts)?;
            println!("objective = {}", fmt(dec.objective, cli.full_precision));
            write_solution(&dec, output.as_deref(), contours.as_deref())?;
            Ok(())
        }
        Cmd::Fit {
            norm,
            n,
            function,
            eps_mult,
            seed,
            output,
        } => {
            let grid = Grid::new(2, *n).map_err(ModelError::from)?;
            let f = TestFunction::parse(function)?;
            let eps = eps_mult * grid.h();
            let noise = make_noise(grid.clone(), eps, *seed);
            let values: Vec<f64> = grid
                .nodes()
                .map(|k| f.value(&grid.coords(k)) + noise.value(k))
                .collect();
            let samples = GridFunction::new(grid.clone(), values).map_err(ModelError::from)?;
            let spec = ModelSpec::fit(grid, samples, (*norm).into())?;
            let model = build_model(&spec, &BuildOptions::default())?;
            let dec = solve_and_report(&model, &opts)?;
            println!("objective = {}", fmt(dec.objective, cli.full_precision));
            write_solution(&dec, output.as_deref(), None)?;
            Ok(())
        }
        Cmd::Table { dim, ns, output } => {
            let rows = convergence_table(*dim, ns)?;
            let mut failed = false;
            println!("n,h,J_h,J_h_interp,linf_error,time_s,ratio");
            for r in &rows {
                if !r.solved {
                    failed = true;
                }
                println!(
                    "{},{:?},{},{},{},{:.3},{}",
                    r.n,
                    1.0 / r.n as f64,
                    fmt(r.j_solved, cli.full_precision),
                    fmt(r.j_interp, cli.full_precision),
                    fmt(r.linf_error, cli.full_precision),
                    r.wall_time_s,
                    fmt(r.ratio, cli.full_precision),
                );
            }
            if let Some(path) = output {
                let mut w = BufWriter::new(File::create(path).map_err(IoError::from)?);
                writeln!(w, "n,h,J_h,J_h_interp,linf_error,ratio").map_err(IoError::from)?;
                for r in &rows {
                    writeln!(
                        w,
                        "{},{:?},{},{},{},{}",
                        r.n,
                        1.0 / r.n as f64,
                        fmt(r.j_solved, cli.full_precision),
                        fmt(r.j_interp, cli.full_precision),
                        fmt(r.linf_error, cli.full_precision),
                        fmt(r.ratio, cli.full_precision),
                    )
                    .map_err(IoError::from)?;
                }
            }
            if failed {
                return Err(CliError::NotConverged(SolveStatus::MaxIterations));
            }
            Ok(())
        }
        Cmd::ExportSdpa {
            model,
            dim,
            n,
            function,
            input,
            output,
        } => {
            let spec = match model {
                ModelArg::Monopolist => {
                    let n = n.ok_or_else(|| CliError::Usage("--n is required".into()))?;
                    let grid = Grid::new(*dim, n).map_err(ModelError::from)?;
                    let density = GridFunction::sample(grid.clone(), |_| 1.0);
                    ModelSpec::monopolist(grid, density)?
                }
                ModelArg::L1 => projection_spec(ProjectionNorm::L1, *n, function.as_deref(), input.as_deref())?,
                ModelArg::L2 => projection_spec(ProjectionNorm::L2, *n, function.as_deref(), input.as_deref())?,
                ModelArg::Linf => projection_spec(ProjectionNorm::Linf, *n, function.as_deref(), input.as_deref())?,
                ModelArg::H1 => projection_spec(ProjectionNorm::H1, *n, function.as_deref(), input.as_deref())?,
                ModelArg::H01 => projection_spec(ProjectionNorm::H01, *n, function.as_deref(), input.as_deref())?,
            };
            let built = build_model(&spec, &BuildOptions::default())?;
            let text = to_sdpa_sparse(&built.problem);
            match output {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path).map_err(IoError::from)?);
                    w.write_all(text.as_bytes()).map_err(IoError::from)?;
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn projection_spec(
    norm: ProjectionNorm,
    n: Option<usize>,
    function: Option<&str>,
    input: Option<&Path>,
) -> Result<ModelSpec, CliError> {
    let (grid, f, func) = match (function, input) {
        (Some(name), None) => {
            let n = n.ok_or_else(|| CliError::Usage("--n is required with --function".into()))?;
            let grid = Grid::new(2, n).map_err(ModelError::from)?;
            let tf = TestFunction::parse(name)?;
            let f = GridFunction::sample(grid.clone(), |p| tf.value(p));
            (grid, f, Some(tf))
        }
        (None, Some(path)) => {
            let f = read_file(path)?;
            let grid = f.grid().clone();
            if let Some(n) = n {
                if n != grid.subdivisions() {
                    return Err(CliError::Usage(format!(
                        "--n {n} contradicts the input mesh (n = {})",
                        grid.subdivisions()
                    )));
                }
            }
            (grid, f, None)
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --function and --input is required".into(),
            ))
        }
    };
    let spec = match norm {
        ProjectionNorm::L1 => ModelSpec::projection(grid, f, Norm::L1)?,
        ProjectionNorm::L2 => ModelSpec::projection(grid, f, Norm::L2)?,
        ProjectionNorm::Linf => ModelSpec::projection(grid, f, Norm::Linf)?,
        ProjectionNorm::H1 | ProjectionNorm::H01 => {
            let tf = func.ok_or_else(|| {
                CliError::Usage(
                    "Sobolev projections need exact gradient data; use --function".into(),
                )
            })?;
            let grads = (0..grid.dim())
                .map(|a| GridFunction::sample(grid.clone(), |p| tf.gradient(p)[a]))
                .collect();
            ModelSpec::projection_h1(
                grid,
                f,
                grads,
                matches!(norm, ProjectionNorm::H01),
            )?
        }
    };
    Ok(spec)
}

fn read_file(path: &Path) -> Result<GridFunction, IoError> {
    Ok(read_grid(BufReader::new(File::open(path)?))?)
}

/// Solve and print the independently recomputed residuals; non-optimal
/// statuses become exit code 2.
fn solve_and_report(model: &BuiltModel, opts: &SolveOptions) -> Result<DecodedSolution, CliError> {
    let sol = solve(&model.problem, opts);
    let res = model
        .problem
        .residuals(&sol.x, &sol.z)
        .map_err(ModelError::from)?;
    println!(
        "status = {:?}, iterations = {}, gap = {:.3e}, primal_infeas = {:.3e}, dual_infeas = {:.3e}",
        sol.status, sol.iterations, res.gap, res.primal_infeas, res.dual_infeas
    );
    if !sol.is_optimal() {
        return Err(CliError::NotConverged(sol.status));
    }
    Ok(model.decode(&sol)?)
}

fn write_solution(
    dec: &DecodedSolution,
    output: Option<&Path>,
    contours: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(path) = output {
        let w = BufWriter::new(File::create(path).map_err(IoError::from)?);
        write_grid(&dec.u, w)?;
    }
    if let Some(path) = contours {
        let w = BufWriter::new(File::create(path).map_err(IoError::from)?);
        write_contours(&dec.u, &default_contour_levels(), w)?;
    }
    Ok(())
}

fn fmt(v: f64, full: bool) -> String {
    if full {
        format!("{v:?}")
    } else {
        format!("{v:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> u8 {
        run(std::iter::once("convexsdp").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["bogus-subcommand"]), 1);
        assert_eq!(run_args(&["project", "--norm", "linf", "--n", "4"]), 1);
        assert_eq!(
            run_args(&["project", "--norm", "h1", "--input", "/nonexistent.csv"]),
            1
        );
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_args(&["--help"]), 0);
        assert_eq!(run_args(&["monopolist", "--help"]), 0);
    }

    #[test]
    fn quad_projection_is_exact_and_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sol.csv");
        let cont = dir.path().join("contours.json");
        let code = run_args(&[
            "project",
            "--norm",
            "linf",
            "--n",
            "2",
            "--function",
            "quad",
            "--output",
            out.to_str().unwrap(),
            "--contours",
            cont.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let u = read_file(&out).unwrap();
        assert_eq!(u.grid().subdivisions(), 2);
        let data: crate::io::ContourData =
            serde_json::from_reader(File::open(&cont).unwrap()).unwrap();
        assert_eq!(data.samples, 9);
    }

    #[test]
    fn monopolist_solution_round_trips_through_density_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("u.csv");
        assert_eq!(
            run_args(&[
                "monopolist",
                "--dim",
                "2",
                "--n",
                "4",
                "--output",
                out.to_str().unwrap()
            ]),
            0
        );
        // Feed the solution back as a density; it is nonnegative.
        assert_eq!(
            run_args(&[
                "monopolist",
                "--dim",
                "2",
                "--n",
                "4",
                "--density-file",
                out.to_str().unwrap()
            ]),
            0
        );
    }

    #[test]
    fn export_sdpa_writes_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m.dat-s");
        assert_eq!(
            run_args(&[
                "export-sdpa",
                "--model",
                "linf",
                "--n",
                "2",
                "--function",
                "quad",
                "--output",
                out.to_str().unwrap()
            ]),
            0
        );
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("10"));
        assert_eq!(lines.next(), Some("2"));
    }

    #[test]
    fn table_subcommand_runs() {
        assert_eq!(run_args(&["table", "--dim", "2", "--ns", "4"]), 0);
    }

    #[test]
    fn fit_is_seed_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        for out in [&a, &b] {
            assert_eq!(
                run_args(&[
                    "fit",
                    "--norm",
                    "linf",
                    "--n",
                    "4",
                    "--seed",
                    "11",
                    "--output",
                    out.to_str().unwrap()
                ]),
                0
            );
        }
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "identical argv must give byte-identical outputs"
        );
    }
}
