//! Command-line front end: instance generation, solving, certificate
//! verification, and batch benchmarking.
//!
//! Exit status: 0 on success (including `--help`/`--version`), 1 on a
//! usage error, 2 on a runtime failure. All file formats are the
//! plain-text ones of the `io` module.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{format_report, run_bench, BenchPlan};
use crate::io;
use crate::model::{
    add_noise, augment_with_diagonals, gen_denoise_model, gen_spinglass, plaquette_covering,
    strip_zero_diagonals, triangle_covering, vertex_covering, Assignment, GraphModel, NoiseKind,
    RegionCovering, SpinGlassDistribution,
};
use crate::mp::{bp_max_product, bp_sum_product, gbp_plaquette, BpOptions, GbpOptions};
use crate::oracle::{
    check_metric_polytope, check_triangle_inequalities, enumerate_chordless_cycles,
    exhaustive_map, ViolationReport,
};
use crate::rounding::{clap as clap_round, sign_round};
use crate::sdp::{moment_matrix, partial_sos, GramState, SolverConfig, SweepTrace};

#[derive(Parser)]
#[command(
    name = "psos",
    version,
    about = "Solvers and certificates for grid-structured binary MAP problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgArg {
    /// Degree-4 relaxation with confidence-ladder rounding.
    Psos4,
    /// Degree-2 relaxation with sign rounding.
    Psos2,
    /// Loopy sum-product with marginal decoding.
    BpSp,
    /// Loopy max-product.
    BpMp,
    /// Generalized belief propagation on plaquettes.
    Gbp,
    /// Exhaustive enumeration (at most 28 vertices).
    Exact,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegionsArg {
    /// Triangles of the diagonally augmented grid.
    Triangle,
    /// Four-vertex grid plaquettes.
    Plaquette,
    /// Single vertices (degree-2 relaxation).
    Vertex,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    /// Independent pixel flips.
    Bernoulli,
    /// 3x3 block flips around random centers.
    Blockwise,
}

impl From<NoiseArg> for NoiseKind {
    fn from(value: NoiseArg) -> Self {
        match value {
            NoiseArg::Bernoulli => NoiseKind::Bernoulli,
            NoiseArg::Blockwise => NoiseKind::Blockwise,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Gram vector dimension.
    #[arg(long, default_value_t = 10)]
    rank: usize,
    /// Multiplier-stage penalty weight.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Soft-stage penalty weight.
    #[arg(long, default_value_t = 0.01)]
    soft_rho: f64,
    /// Multiplier-stage progress threshold for convergence.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Soft-stage squared-movement threshold for convergence.
    #[arg(long, default_value_t = 1e-8)]
    movement_tol: f64,
    /// Sweep limit per solve phase.
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    /// Random-restart seed for the initial vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reset the equality multipliers between projection phases.
    #[arg(long)]
    reset_multipliers: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rank: self.rank,
            rho: self.rho,
            soft_rho: self.soft_rho,
            tol: self.tol,
            movement_tol: self.movement_tol,
            max_sweeps: self.max_sweeps,
            seed: self.seed,
            mode: crate::sdp::SolveMode::default(),
            reset_multipliers_between_lifts: self.reset_multipliers,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random grid spin glass and write it as a model file.
    GenSpinglass {
        /// Grid side length.
        #[arg(long)]
        side: usize,
        /// Weight distribution (1: unit couplings and fields; 2: unit
        /// couplings, half fields; 3: Gaussian couplings, weak Gaussian
        /// fields; 4: Gaussian couplings and fields).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        dist: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt an image with noise and write the denoising model for it.
    GenDenoise {
        /// Clean input image (PGM); omit to use a synthetic disk.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Side length of the synthetic disk image when --image is omitted.
        #[arg(long, conflicts_with = "image")]
        side: Option<usize>,
        #[arg(long, value_enum, default_value_t = NoiseArg::Bernoulli)]
        noise: NoiseArg,
        /// Noise level (flip or block-center probability).
        #[arg(long, default_value_t = 0.2)]
        p: f64,
        /// Data-term field strength.
        #[arg(long, default_value_t = 1.26)]
        theta0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model file.
        #[arg(long)]
        out_model: PathBuf,
        /// Optional output for the corrupted image (PGM).
        #[arg(long)]
        out_noisy: Option<PathBuf>,
    },
    /// Run one algorithm on a model file and print the rounded solution.
    Solve {
        /// Input model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        alg: AlgArg,
        /// Region shape for the degree-4 relaxation.
        #[arg(long, value_enum, default_value_t = RegionsArg::Triangle)]
        regions: RegionsArg,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the assignment to this file.
        #[arg(long)]
        out_assignment: Option<PathBuf>,
        /// Write the per-sweep trace CSV to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the converged relaxation state (before any pinning).
        #[arg(long)]
        out_state: Option<PathBuf>,
    },
    /// Check a stored state's moment matrix against the metric polytope.
    Verify {
        /// Model file the state was solved on.
        #[arg(long)]
        model: PathBuf,
        /// State file written by `solve --out-state`.
        #[arg(long)]
        state: PathBuf,
        /// Longest chordless cycle to test (at most 12).
        #[arg(long, default_value_t = 12)]
        cycles_max_len: usize,
        /// Violation tolerance.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Write the violation CSV to this file.
        #[arg(long)]
        out_report: Option<PathBuf>,
    },
    /// Run a batch plan and write its records as CSV.
    Bench {
        /// Plan file (key=value lines).
        #[arg(long)]
        plan: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` and runs the selected subcommand, mapping outcomes to
/// the documented exit codes.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

type RunError = Box<dyn std::error::Error>;

fn run(command: Command) -> Result<(), RunError> {
    match command {
        Command::GenSpinglass { side, dist, seed, out } => {
            let dist = SpinGlassDistribution::from_index(dist).expect("range-checked");
            let model = gen_spinglass(side, dist, seed)?;
            io::write_model(&out, &model)?;
            println!(
                "wrote {} ({} vertices, {} edges)",
                out.display(),
                model.num_vertices(),
                model.edges().len()
            );
            Ok(())
        }
        Command::GenDenoise { image, side, noise, p, theta0, seed, out_model, out_noisy } => {
            let clean = match (image, side) {
                (Some(path), _) => io::read_pgm(&path)?,
                (None, Some(side)) => crate::bench::disk_image(side),
                (None, None) => {
                    return Err("pass --image <pgm> or --side <n> for a synthetic disk".into())
                }
            };
            let noisy = add_noise(&clean, noise.into(), p, seed);
            let model = gen_denoise_model(&noisy, theta0)?;
            io::write_model(&out_model, &model)?;
            println!(
                "wrote {} ({} vertices, {} edges, {} pixels flipped)",
                out_model.display(),
                model.num_vertices(),
                model.edges().len(),
                clean.disagreement(&noisy)
            );
            if let Some(path) = out_noisy {
                io::write_pgm(&path, &noisy)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Solve { model, alg, regions, solver, out_assignment, trace, out_state } => {
            let model = io::read_model(&model)?;
            solve_command(&model, alg, regions, &solver.config(), SolveOutputs {
                out_assignment,
                trace,
                out_state,
            })
        }
        Command::Verify { model, state, cycles_max_len, tol, out_report } => {
            let model = io::read_model(&model)?;
            let state = io::read_gram_state(&state)?;
            verify_command(&model, &state, cycles_max_len, tol, out_report)
        }
        Command::Bench { plan, out } => {
            let plan = BenchPlan::parse(&std::fs::read_to_string(&plan)?)?;
            let report = run_bench(&plan)?;
            let text = format_report(&report);
            match out {
                Some(path) => {
                    std::fs::write(&path, &text)?;
                    println!("wrote {} ({} records)", path.display(), report.records.len());
                    for s in &report.summaries {
                        println!(
                            "summary {}: q05={} q10={} q60={} over {} ratios",
                            s.algorithm, s.q05, s.q10, s.q60, s.count
                        );
                    }
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

struct SolveOutputs {
    out_assignment: Option<PathBuf>,
    trace: Option<PathBuf>,
    out_state: Option<PathBuf>,
}

/// Side length of the square grid a model lives on, if its vertex count
/// is a perfect square.
fn square_side(model: &GraphModel) -> Result<usize, RunError> {
    let n = model.num_vertices();
    let side = (n as f64).sqrt().round() as usize;
    if side >= 2 && side * side == n {
        Ok(side)
    } else {
        Err(format!("{n} vertices do not form a square grid").into())
    }
}

/// The model to hand the degree-4 solver plus its region covering. For
/// triangle regions every down-right diagonal must exist as an edge;
/// missing ones are added with weight zero (no effect on the objective).
fn degree4_problem(
    model: &GraphModel,
    regions: RegionsArg,
) -> Result<(GraphModel, RegionCovering), RunError> {
    match regions {
        RegionsArg::Vertex => Ok((model.clone(), vertex_covering(model.num_vertices()))),
        RegionsArg::Plaquette => {
            let side = square_side(model)?;
            Ok((model.clone(), plaquette_covering(side)))
        }
        RegionsArg::Triangle => {
            let side = square_side(model)?;
            let diagonals: Vec<(u32, u32)> = (0..side - 1)
                .flat_map(|r| (0..side - 1).map(move |c| (r, c)))
                .map(|(r, c)| {
                    let a = (r * side + c) as u32;
                    (a, a + side as u32 + 1)
                })
                .collect();
            let present = diagonals
                .iter()
                .filter(|&&(a, b)| model.edge_weight(a, b).is_some())
                .count();
            let augmented = if present == diagonals.len() {
                model.clone()
            } else if present == 0 {
                augment_with_diagonals(model, side)?
            } else {
                return Err("model has only some of the grid diagonals; \
                            triangle regions need all or none"
                    .into());
            };
            Ok((augmented, triangle_covering(side)))
        }
    }
}

fn solve_command(
    model: &GraphModel,
    alg: AlgArg,
    regions: RegionsArg,
    config: &SolverConfig,
    outputs: SolveOutputs,
) -> Result<(), RunError> {
    let mut trace: Option<SweepTrace> = None;
    let mut state: Option<GramState> = None;
    let (label, assignment, extra): (&str, Assignment, Vec<String>) = match alg {
        AlgArg::Psos4 => {
            let (solve_model, cov) = degree4_problem(model, regions)?;
            if outputs.out_state.is_some() {
                let relaxed = partial_sos(&solve_model, &cov, config, None, None)?;
                state = Some(relaxed.state);
            }
            let run = clap_round(&solve_model, &cov, config)?;
            trace = Some(run.trace);
            let extra = vec![
                format!("lifts {}", run.lifts),
                format!("sweeps {}", run.total_sweeps),
                format!("residual {}", run.final_residual),
            ];
            ("psos4", run.assignment, extra)
        }
        AlgArg::Psos2 => {
            let cov = vertex_covering(model.num_vertices());
            let outcome = partial_sos(model, &cov, config, None, None)?;
            let x = sign_round(&outcome.state);
            let extra = vec![
                format!("sweeps {}", outcome.trace.len()),
                format!("converged {}", outcome.converged),
            ];
            trace = Some(outcome.trace);
            state = Some(outcome.state);
            ("psos2", x, extra)
        }
        AlgArg::BpSp => {
            let run = bp_sum_product(model, &BpOptions::default());
            let extra = vec![
                format!("iterations {}", run.iterations),
                format!("converged {}", run.converged),
            ];
            ("bp-sp", run.assignment, extra)
        }
        AlgArg::BpMp => {
            let run = bp_max_product(model, &BpOptions::default());
            let extra = vec![
                format!("iterations {}", run.iterations),
                format!("converged {}", run.converged),
            ];
            ("bp-mp", run.assignment, extra)
        }
        AlgArg::Gbp => {
            let side = square_side(model)?;
            let stripped = strip_zero_diagonals(model, side)?;
            let run = gbp_plaquette(&stripped, side, &GbpOptions::default())?;
            let extra = vec![
                format!("iterations {}", run.iterations),
                format!("converged {}", run.converged),
            ];
            ("gbp", run.assignment, extra)
        }
        AlgArg::Exact => {
            let (x, _) = exhaustive_map(model)?;
            ("exact", x, Vec::new())
        }
    };

    // Objective is always re-evaluated on the input model so that the
    // printed value matches the written assignment file exactly.
    let objective = model.objective_value(&assignment)?;
    println!("algorithm {label}");
    println!("objective {objective}");
    print!("assignment {}", io::format_assignment(&assignment));
    for line in extra {
        println!("{line}");
    }

    if let Some(path) = outputs.out_assignment {
        io::write_assignment(&path, &assignment)?;
    }
    if let Some(path) = outputs.trace {
        match &trace {
            Some(t) => io::write_trace(&path, t)?,
            None => eprintln!("note: {label} produces no sweep trace; {} not written",
                path.display()),
        }
    }
    if let Some(path) = outputs.out_state {
        match &state {
            Some(s) => io::write_gram_state(&path, s)?,
            None => eprintln!("note: {label} produces no relaxation state; {} not written",
                path.display()),
        }
    }
    Ok(())
}

fn verify_command(
    model: &GraphModel,
    state: &GramState,
    cycles_max_len: usize,
    tol: f64,
    out_report: Option<PathBuf>,
) -> Result<(), RunError> {
    if state.index_set().num_vertices() != model.num_vertices() {
        return Err(format!(
            "state has {} vertices but the model has {}",
            state.index_set().num_vertices(),
            model.num_vertices()
        )
        .into());
    }
    let m = moment_matrix(state);
    let n = model.num_vertices();
    let report: ViolationReport = if n <= 64 {
        let cycles = enumerate_chordless_cycles(model, cycles_max_len)?;
        println!("checking {} chordless cycles up to length {cycles_max_len}", cycles.len());
        check_metric_polytope(&m, &cycles, tol)
    } else {
        // Full metric-polytope checks are quadratic-plus in n; large
        // states get the entry bounds and the triangle inequalities on
        // adjacent triples instead.
        println!("cyclic inequalities skipped ({n} vertices > 64)");
        let mut triples = Vec::new();
        for j in 0..n as u32 {
            let nbrs = model.neighbors(j);
            for (a, &(i, _)) in nbrs.iter().enumerate() {
                for &(k, _) in &nbrs[a + 1..] {
                    triples.push((i, j, k));
                }
            }
        }
        let mut report = check_triangle_inequalities(&m, &triples, tol);
        let block = m.vertex_block();
        for i in 0..n {
            for j in i + 1..n {
                report.checks += 1;
                let slack = 1.0 - block[(i, j)].abs();
                if slack < -tol {
                    report.max_violation = report.max_violation.max(-slack);
                }
            }
        }
        report
    };

    println!("checks {}", report.checks);
    println!("violations {}", report.violations.len());
    println!("max_violation {}", report.max_violation);
    println!("verdict {}", if report.is_ok() { "PASS" } else { "FAIL" });
    if let Some(path) = out_report {
        std::fs::write(&path, report.csv())?;
    }
    Ok(())
}
