//! Batch experiment driver: a small plan file describes an instance
//! family and a list of algorithms; the runner produces one CSV record
//! per (replication, algorithm) pair plus per-algorithm quantile
//! summaries of the approximation ratio.
//!
//! Plan files are `key=value` lines with `#` comments. Keys: `family`
//! (`spinglass` or `denoise`), `side`, `reps`, `seed`, `algs`
//! (comma-separated labels), `dist` (spin-glass weight distribution,
//! 1-4), `noise`/`p`/`theta0` (denoising), and solver overrides `rank`,
//! `rho`, `tol`, `max-sweeps`. Replication `r` uses seed `seed + r` for
//! both the instance draw and the solver initialization.
//!
//! The `residual` column holds the equality residual for the
//! semidefinite solvers and the final message change for message
//! passing. A failed run keeps its row with a NaN objective rather than
//! aborting the batch.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::model::{
    add_noise, augment_with_diagonals, gen_denoise_model, gen_spinglass, triangle_covering,
    vertex_covering, BinaryImage, GraphModel, ModelError, NoiseKind, SpinGlassDistribution,
};
use crate::mp::{bp_max_product, bp_sum_product, gbp_plaquette, BpOptions, GbpOptions};
use crate::oracle::exhaustive_map;
use crate::rounding::{clap, sign_round};
use crate::sdp::{partial_sos, SolverConfig};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("plan line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Degree-4 relaxation with confidence-ladder rounding.
    Psos4,
    /// Degree-2 relaxation with sign rounding.
    Psos2,
    /// Loopy sum-product with marginal decoding.
    BpSp,
    /// Loopy max-product.
    BpMp,
    /// Generalized belief propagation on plaquette regions.
    Gbp,
    /// Exhaustive enumeration (small instances only).
    Exact,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Psos4,
        Algorithm::Psos2,
        Algorithm::BpSp,
        Algorithm::BpMp,
        Algorithm::Gbp,
        Algorithm::Exact,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Psos4 => "psos4",
            Algorithm::Psos2 => "psos2",
            Algorithm::BpSp => "bp-sp",
            Algorithm::BpMp => "bp-mp",
            Algorithm::Gbp => "gbp",
            Algorithm::Exact => "exact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceFamily {
    SpinGlass { dist: SpinGlassDistribution },
    Denoise { noise: NoiseKind, p: f64, theta0: f64 },
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub family: InstanceFamily,
    pub side: usize,
    pub reps: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub config: SolverConfig,
}

impl BenchPlan {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut family: Option<&str> = None;
        let mut side: Option<usize> = None;
        let mut dist = SpinGlassDistribution::UnitCouplingsUnitFields;
        let mut noise = NoiseKind::Bernoulli;
        let mut p = 0.2;
        let mut theta0 = 1.26;
        let mut reps = 1usize;
        let mut seed = 0u64;
        let mut algorithms: Option<Vec<Algorithm>> = None;
        let mut config = SolverConfig::default();

        let err = |line: usize, msg: String| BenchError::Parse { line, msg };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(line, format!("expected key=value, got `{content}`")))?;
            let bad = |what: &str| err(line, format!("bad {what} `{value}`"));
            match key {
                "family" => family = Some(value),
                "side" => side = Some(value.parse().map_err(|_| bad("side"))?),
                "dist" => {
                    let idx: u8 = value.parse().map_err(|_| bad("distribution"))?;
                    dist = SpinGlassDistribution::from_index(idx)
                        .ok_or_else(|| bad("distribution"))?;
                }
                "noise" => {
                    noise = match value {
                        "bernoulli" => NoiseKind::Bernoulli,
                        "blockwise" => NoiseKind::Blockwise,
                        _ => return Err(bad("noise kind")),
                    }
                }
                "p" => p = value.parse().map_err(|_| bad("noise level"))?,
                "theta0" => theta0 = value.parse().map_err(|_| bad("field strength"))?,
                "reps" => reps = value.parse().map_err(|_| bad("replication count"))?,
                "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
                "algs" => {
                    let parsed = value
                        .split(',')
                        .map(|s| s.trim().parse::<Algorithm>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| err(line, e))?;
                    algorithms = Some(parsed);
                }
                "rank" => config.rank = value.parse().map_err(|_| bad("rank"))?,
                "rho" => config.rho = value.parse().map_err(|_| bad("penalty"))?,
                "tol" => config.tol = value.parse().map_err(|_| bad("tolerance"))?,
                "max-sweeps" => {
                    config.max_sweeps = value.parse().map_err(|_| bad("sweep limit"))?
                }
                other => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }

        let side = side.ok_or_else(|| BenchError::Invalid("plan is missing `side`".into()))?;
        let algorithms =
            algorithms.ok_or_else(|| BenchError::Invalid("plan is missing `algs`".into()))?;
        let family = match family {
            Some("spinglass") => InstanceFamily::SpinGlass { dist },
            Some("denoise") => InstanceFamily::Denoise { noise, p, theta0 },
            Some(other) => {
                return Err(BenchError::Invalid(format!("unknown family `{other}`")))
            }
            None => return Err(BenchError::Invalid("plan is missing `family`".into())),
        };
        if side < 2 {
            return Err(BenchError::Invalid("side must be at least 2".into()));
        }
        if reps == 0 {
            return Err(BenchError::Invalid("reps must be at least 1".into()));
        }
        if algorithms.is_empty() {
            return Err(BenchError::Invalid("algs must name at least one algorithm".into()));
        }
        if algorithms.contains(&Algorithm::Exact) && side * side > 28 {
            return Err(BenchError::Invalid(format!(
                "exact enumeration is limited to 28 vertices, side {side} has {}",
                side * side
            )));
        }
        Ok(BenchPlan { family, side, reps, seed, algorithms, config })
    }
}

#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub instance: usize,
    pub algorithm: Algorithm,
    pub n: usize,
    pub seed: u64,
    pub objective: f64,
    /// Objective divided by the exact optimum, when one was computed
    /// and is positive.
    pub ratio: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_ms: f64,
    pub residual: f64,
    /// Failure description for rows whose run errored.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub count: usize,
    pub q05: f64,
    pub q10: f64,
    pub q60: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub summaries: Vec<AlgorithmSummary>,
}

/// Linear-interpolation quantile (the common "type 7" convention) of an
/// ascending-sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile level outside [0, 1]");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Filled disk (radius `0.3 * side`) on a dark background; the synthetic
/// clean image for denoising benchmarks.
pub fn disk_image(side: usize) -> BinaryImage {
    let center = (side as f64 - 1.0) / 2.0;
    let radius = 0.3 * side as f64;
    let mut pixels = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            let dr = row as f64 - center;
            let dc = col as f64 - center;
            pixels.push(if dr * dr + dc * dc <= radius * radius { 1 } else { -1 });
        }
    }
    BinaryImage::new(side, side, pixels).expect("disk image dimensions are consistent")
}

fn make_instance(plan: &BenchPlan, seed: u64) -> Result<GraphModel, BenchError> {
    match &plan.family {
        InstanceFamily::SpinGlass { dist } => Ok(gen_spinglass(plan.side, *dist, seed)?),
        InstanceFamily::Denoise { noise, p, theta0 } => {
            let clean = disk_image(plan.side);
            let noisy = add_noise(&clean, *noise, *p, seed);
            Ok(gen_denoise_model(&noisy, *theta0)?)
        }
    }
}

struct RunResult {
    objective: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
}

fn run_algorithm(
    alg: Algorithm,
    model: &GraphModel,
    side: usize,
    config: &SolverConfig,
) -> Result<RunResult, String> {
    let fail = |e: &dyn fmt::Display| e.to_string();
    match alg {
        Algorithm::Psos4 => {
            let augmented = augment_with_diagonals(model, side).map_err(|e| fail(&e))?;
            let cov = triangle_covering(side);
            let run = clap(&augmented, &cov, config).map_err(|e| fail(&e))?;
            Ok(RunResult {
                objective: run.objective,
                iterations: run.total_sweeps,
                converged: true,
                residual: run.final_residual,
            })
        }
        Algorithm::Psos2 => {
            let cov = vertex_covering(model.num_vertices());
            let outcome = partial_sos(model, &cov, config, None, None).map_err(|e| fail(&e))?;
            let x = sign_round(&outcome.state);
            let objective = model.objective_value(&x).map_err(|e| fail(&e))?;
            Ok(RunResult {
                objective,
                iterations: outcome.trace.len(),
                converged: outcome.converged,
                residual: 0.0,
            })
        }
        Algorithm::BpSp => {
            let run = bp_sum_product(model, &BpOptions::default());
            let objective = model.objective_value(&run.assignment).map_err(|e| fail(&e))?;
            Ok(RunResult {
                objective,
                iterations: run.iterations,
                converged: run.converged,
                residual: run.final_delta,
            })
        }
        Algorithm::BpMp => {
            let run = bp_max_product(model, &BpOptions::default());
            let objective = model.objective_value(&run.assignment).map_err(|e| fail(&e))?;
            Ok(RunResult {
                objective,
                iterations: run.iterations,
                converged: run.converged,
                residual: run.final_delta,
            })
        }
        Algorithm::Gbp => {
            let run = gbp_plaquette(model, side, &GbpOptions::default()).map_err(|e| fail(&e))?;
            let objective = model.objective_value(&run.assignment).map_err(|e| fail(&e))?;
            Ok(RunResult {
                objective,
                iterations: run.iterations,
                converged: run.converged,
                residual: run.final_delta,
            })
        }
        Algorithm::Exact => {
            let (_, objective) = exhaustive_map(model).map_err(|e| fail(&e))?;
            Ok(RunResult { objective, iterations: 0, converged: true, residual: 0.0 })
        }
    }
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport, BenchError> {
    let mut records = Vec::with_capacity(plan.reps * plan.algorithms.len());
    for rep in 0..plan.reps {
        let seed = plan.seed + rep as u64;
        let model = make_instance(plan, seed)?;
        let n = model.num_vertices();
        let reference = if plan.algorithms.contains(&Algorithm::Exact) && n <= 28 {
            exhaustive_map(&model).ok().map(|(_, v)| v)
        } else {
            None
        };
        for &alg in &plan.algorithms {
            let mut config = plan.config.clone();
            config.seed = seed;
            let start = Instant::now();
            let outcome = run_algorithm(alg, &model, plan.side, &config);
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let (objective, iterations, converged, residual, error) = match outcome {
                Ok(r) => (r.objective, r.iterations, r.converged, r.residual, None),
                Err(msg) => (f64::NAN, 0, false, f64::NAN, Some(msg)),
            };
            let ratio = reference
                .filter(|&r| r > 0.0 && objective.is_finite())
                .map(|r| objective / r);
            records.push(BenchRecord {
                instance: rep,
                algorithm: alg,
                n,
                seed,
                objective,
                ratio,
                iterations,
                converged,
                runtime_ms,
                residual,
                error,
            });
        }
    }

    let mut summaries = Vec::new();
    for &alg in &plan.algorithms {
        let mut ratios: Vec<f64> = records
            .iter()
            .filter(|r| r.algorithm == alg)
            .filter_map(|r| r.ratio)
            .filter(|v| v.is_finite())
            .collect();
        if ratios.is_empty() {
            continue;
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios compare"));
        summaries.push(AlgorithmSummary {
            algorithm: alg,
            count: ratios.len(),
            q05: quantile(&ratios, 0.05),
            q10: quantile(&ratios, 0.10),
            q60: quantile(&ratios, 0.60),
        });
    }
    Ok(BenchReport { records, summaries })
}

pub fn format_report(report: &BenchReport) -> String {
    use std::fmt::Write as _;
    let mut out =
        String::from("instance,algorithm,n,seed,objective,ratio,iterations,converged,runtime_ms,residual\n");
    for r in &report.records {
        let ratio = r.ratio.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.3},{}",
            r.instance,
            r.algorithm,
            r.n,
            r.seed,
            r.objective,
            ratio,
            r.iterations,
            r.converged,
            r.runtime_ms,
            r.residual
        );
    }
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "# summary,{},{},{},{},{}",
            s.algorithm, s.count, s.q05, s.q10, s.q60
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate_linearly() {
        let data = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&data, 0.0), 1.0);
        assert_eq!(quantile(&data, 1.0), 4.0);
        assert_eq!(quantile(&data, 0.5), 2.5);
        assert!((quantile(&data, 0.05) - 1.15).abs() < 1e-12);
        assert_eq!(quantile(&[7.5], 0.6), 7.5);
    }

    #[test]
    fn plan_parser_reads_all_keys() {
        let text = "\
# experiment
family=spinglass
side=4
dist=3
reps=5
seed=11
algs=psos4, bp-mp ,exact
rank=6
rho=2.0
tol=1e-5
max-sweeps=250
";
        let plan = BenchPlan::parse(text).unwrap();
        assert_eq!(
            plan.family,
            InstanceFamily::SpinGlass {
                dist: SpinGlassDistribution::GaussianCouplingsWeakFields
            }
        );
        assert_eq!(plan.side, 4);
        assert_eq!(plan.reps, 5);
        assert_eq!(plan.seed, 11);
        assert_eq!(
            plan.algorithms,
            vec![Algorithm::Psos4, Algorithm::BpMp, Algorithm::Exact]
        );
        assert_eq!(plan.config.rank, 6);
        assert_eq!(plan.config.rho, 2.0);
        assert_eq!(plan.config.tol, 1e-5);
        assert_eq!(plan.config.max_sweeps, 250);
    }

    #[test]
    fn plan_parser_rejects_bad_input() {
        assert!(BenchPlan::parse("side=4\nalgs=psos2\n").is_err());
        assert!(BenchPlan::parse("family=spinglass\nalgs=psos2\n").is_err());
        assert!(BenchPlan::parse("family=spinglass\nside=4\n").is_err());
        assert!(BenchPlan::parse("family=spinglass\nside=4\nalgs=wavelets\n").is_err());
        assert!(BenchPlan::parse("family=spinglass\nside=4\nalgs=psos2\nmystery=1\n").is_err());
        assert!(BenchPlan::parse("family=spinglass\nside=6\nalgs=exact\n").is_err());
        assert!(BenchPlan::parse("family=spinglass\nside=4\nalgs=psos2\ndist=9\n").is_err());
    }

    #[test]
    fn algorithm_labels_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.label().parse::<Algorithm>().unwrap(), alg);
        }
        assert!("exactly".parse::<Algorithm>().is_err());
    }

    #[test]
    fn spin_glass_bench_produces_ordered_records_and_summaries() {
        let plan = BenchPlan::parse(
            "family=spinglass\nside=3\ndist=1\nreps=2\nseed=5\nalgs=psos2,bp-mp,exact\nrank=4\n",
        )
        .unwrap();
        let report = run_bench(&plan).unwrap();
        assert_eq!(report.records.len(), 6);
        for (k, record) in report.records.iter().enumerate() {
            assert_eq!(record.instance, k / 3);
            assert_eq!(record.algorithm, plan.algorithms[k % 3]);
            assert_eq!(record.n, 9);
            assert_eq!(record.seed, 5 + (k / 3) as u64);
            assert!(record.objective.is_finite());
            assert!(record.error.is_none());
            let ratio = record.ratio.expect("reference exists for nine vertices");
            assert!(ratio <= 1.0 + 1e-9, "ratio {ratio} exceeds 1");
            if record.algorithm == Algorithm::Exact {
                assert!((ratio - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(report.summaries.len(), 3);
        for s in &report.summaries {
            assert_eq!(s.count, 2);
            assert!(s.q05 <= s.q60 + 1e-12);
        }
    }

    #[test]
    fn denoise_bench_runs_message_passing() {
        let plan = BenchPlan::parse(
            "family=denoise\nside=4\nnoise=bernoulli\np=0.2\ntheta0=1.26\nreps=1\nseed=3\nalgs=bp-mp,gbp\n",
        )
        .unwrap();
        let report = run_bench(&plan).unwrap();
        assert_eq!(report.records.len(), 2);
        for record in &report.records {
            assert_eq!(record.n, 16);
            assert!(record.objective.is_finite(), "error: {:?}", record.error);
        }
        assert!(report.summaries.is_empty());
    }

    #[test]
    fn report_format_has_stable_header_and_summary_prefix() {
        let plan = BenchPlan::parse(
            "family=spinglass\nside=3\ndist=2\nreps=1\nseed=0\nalgs=exact\n",
        )
        .unwrap();
        let report = run_bench(&plan).unwrap();
        let text = format_report(&report);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "instance,algorithm,n,seed,objective,ratio,iterations,converged,runtime_ms,residual"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,exact,9,0,"));
        assert!(text.lines().any(|l| l.starts_with("# summary,exact,1,")));
    }

    #[test]
    fn disk_image_is_centered_and_nontrivial() {
        let image = disk_image(8);
        assert_eq!(image.get(3, 3), 1);
        assert_eq!(image.get(0, 0), -1);
        let whites = image.pixels().iter().filter(|&&v| v == 1).count();
        assert!(whites > 0 && whites < 64);
    }
}
