//! Temporary calibration probe: per-lift dissection of rounding misses.
//!
//! Args: dist_index seed [rho]. Env: PSOS_PENONLY etc. apply inside runs.

use psos::model::{
    augment_with_diagonals, gen_spinglass, triangle_covering, SpinGlassDistribution,
};
use psos::oracle::exhaustive_map;
use psos::rounding::{clap, project_phase, ClapState};
use psos::sdp::{residual_norm, sdp_objective, GramIndex, Solver, SolverConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dist_idx: usize = args[0].parse().unwrap();
    let seed: u64 = args[1].parse().unwrap();
    let rho: f64 = args.get(2).map(|a| a.parse().unwrap()).unwrap_or(0.01);
    let side = 4usize;
    let dist = SpinGlassDistribution::ALL[dist_idx - 1];

    let base = gen_spinglass(side, dist, seed).unwrap();
    let (best_x, best) = exhaustive_map(&base).unwrap();
    let aug = augment_with_diagonals(&base, side).unwrap();
    let cov = triangle_covering(side);
    let max_sweeps: usize = std::env::var("PSOS_MAXSW")
                            .ok()
                            .and_then(|v| v.parse().ok())
                            .unwrap_or(500);
                        let config = SolverConfig { rho, seed, max_sweeps,
                            ..SolverConfig::default() };
    let run = clap(&aug, &cov, &config).unwrap();
    println!(
        "dist={} seed={} clap={:+.6} best={:+.6} ratio={:.4} lifts={}",
        dist_idx,
        seed,
        run.objective,
        best,
        run.objective / best,
        run.lifts
    );
    let mut polished = run.objective;
    {
        let mut vals = run.assignment.values().to_vec();
        loop {
            let mut improved = false;
            for i in 0..vals.len() {
                vals[i] = -vals[i];
                let cand = psos::model::Assignment::new(vals.clone()).unwrap();
                let cobj = base.objective_value(&cand).unwrap();
                if cobj > polished + 1e-12 {
                    polished = cobj;
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
    println!("  polished={:+.6} ratio={:.4}", polished, polished / best);
    if (run.objective - best).abs() <= 1e-9 * best.abs().max(1.0) {
        return;
    }

    // Dissect: re-run manually with per-lift promotion detail.
    let n = base.num_vertices();
    let index = {
        let solver = Solver::new(&aug, &cov, config.clone()).unwrap();
        solver.catalog().index_set().clone()
    };
    let truth_of_slot = |slot: usize| -> i8 {
        match index.index_of(slot) {
            GramIndex::Vertex(i) => best_x.values()[i as usize],
            GramIndex::Pair(i, j) => {
                best_x.values()[i as usize] * best_x.values()[j as usize]
            }
            GramIndex::Origin => 1,
        }
    };

    let mut solver = Solver::new(&aug, &cov, config).unwrap();
    let mut clap_state = ClapState::new(solver.state().num_slots());
    let mut lift = 0;
    loop {
        let reliables = clap_state.reliable_set();
        let outcome = solver.run(&reliables).unwrap();
        lift += 1;
        let obj = sdp_objective(solver.state(), &aug);
        let res = residual_norm(solver.state(), solver.catalog());

        // Record beliefs before projection mutates the state.
        let beliefs: Vec<f64> =
            (0..solver.state().num_slots()).map(|s| solver.state().origin_dot(s)).collect();
        project_phase(solver.state_mut(), &mut clap_state);
        let conf = clap_state.confidence();
        let promoted = clap_state.promotions().to_vec();
        let mut wrong = Vec::new();
        for &slot in &promoted {
            let pinned = clap_state.sign(slot).unwrap();
            if pinned != truth_of_slot(slot) {
                let kind = if slot <= n { "v" } else { "e" };
                wrong.push(format!("{}{}({:+.3})", kind, slot, beliefs[slot]));
            }
        }
        println!(
            "  lift {:2}: sweeps={:4} conv={} obj={:+.4} res={:.2e} conf={:.1} promoted={:3} wrong={:?}",
            lift,
            outcome.trace.len(),
            outcome.converged,
            obj,
            res,
            conf,
            promoted.len(),
            wrong
        );
        if clap_state.all_fixed() {
            break;
        }
    }
}
