//! Temporary calibration probe: rounding quality across seeds.

use psos::model::{
    augment_with_diagonals, gen_spinglass, triangle_covering, SpinGlassDistribution,
};
use psos::oracle::exhaustive_map;
use psos::rounding::clap;
use psos::sdp::SolverConfig;

fn main() {
    let rank: usize = std::env::var("PSOS_RANK")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(10);
    let tol: f64 = std::env::var("PSOS_TOL")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1e-4);
    let rhos: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("rho argument"))
        .collect();
    let rhos = if rhos.is_empty() { vec![1.0] } else { rhos };
    for &rho in &rhos {
        println!("=== rho {} rank {} ===", rho, rank);
        let sides: Vec<usize> = std::env::var("PSOS_SIDES")
            .map(|v| v.split(',').map(|s| s.parse().unwrap()).collect())
            .unwrap_or_else(|_| vec![4, 5]);
        for side in sides {
            for dist in SpinGlassDistribution::ALL {
                let restarts: u64 = std::env::var("PSOS_RESTARTS")
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(1);
                let mut exact_hits = 0;
                let mut single_hits = 0u64;
                let mut worst: f64 = 1.0;
                let mut total_sweeps = 0usize;
                let seeds = 10u64;
                for seed in 0..seeds {
                    let base = gen_spinglass(side, dist, seed).unwrap();
                    let (_, best) = exhaustive_map(&base).unwrap();
                    let aug = augment_with_diagonals(&base, side).unwrap();
                    let cov = triangle_covering(side);
                    let mut best_run: f64 = f64::NEG_INFINITY;
                    for attempt in 0..restarts {
                        let max_sweeps: usize = std::env::var("PSOS_MAXSW")
                            .ok()
                            .and_then(|v| v.parse().ok())
                            .unwrap_or(500);
                        let config = SolverConfig {
                            rank,
                            rho,
                            tol,
                            seed: seed + 7919 * attempt,
                            reset_multipliers_between_lifts: std::env::var("PSOS_RESETLAM")
                                .is_ok(),
                            max_sweeps,
                            ..SolverConfig::default()
                        };
                        let run = clap(&aug, &cov, &config).unwrap();
                        total_sweeps += run.total_sweeps;
                        let mut obj = run.objective;
                        if std::env::var("PSOS_POLISH").is_ok() {
                            let mut vals = run.assignment.values().to_vec();
                            loop {
                                let mut improved = false;
                                for i in 0..vals.len() {
                                    vals[i] = -vals[i];
                                    let cand = psos::model::Assignment::new(vals.clone()).unwrap();
                                    let cobj = base.objective_value(&cand).unwrap();
                                    if cobj > obj + 1e-12 {
                                        obj = cobj;
                                        improved = true;
                                    } else {
                                        vals[i] = -vals[i];
                                    }
                                }
                                if !improved {
                                    break;
                                }
                            }
                        }
                        best_run = best_run.max(obj);
                        if (best - obj).abs() <= 1e-9 * best.abs().max(1.0) {
                            single_hits += 1;
                        }
                    }
                    let ratio = best_run / best;
                    if (best - best_run).abs() <= 1e-9 * best.abs().max(1.0) {
                        exact_hits += 1;
                    } else {
                        worst = worst.min(ratio);
                    }
                }
                println!(
                    "side={} dist={} exact={}/{} single={}/{} worst_ratio={:.4} avg_sweeps={}",
                    side,
                    dist.index(),
                    exact_hits,
                    seeds,
                    single_hits,
                    seeds * restarts,
                    worst,
                    total_sweeps / (seeds * restarts) as usize,
                );
            }
        }
    }
}
