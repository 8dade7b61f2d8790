// Temporary diagnostic: sweep-by-sweep trajectory of one solve on a
// spin-glass instance, tracking vertex hardness, belief agreement with
// the exact optimum, and pair-belief consistency. Remove before release.

use psos::model::{
    augment_with_diagonals, gen_spinglass, triangle_covering, SpinGlassDistribution,
};
use psos::oracle::exhaustive_map;
use psos::sdp::{residual_norm, sdp_objective, ReliableSet, Solver, SolverConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|v| v.parse().ok()).unwrap_or(0);
    let side: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(4);
    let rho: f64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(1.0);
    let max: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(60);

    let base = gen_spinglass(side, SpinGlassDistribution::UnitCouplingsUnitFields, seed).unwrap();
    let (best_x, best) = exhaustive_map(&base).unwrap();
    let aug = augment_with_diagonals(&base, side).unwrap();
    let cov = triangle_covering(side);
    let n = base.num_vertices();

    println!("seed={seed} side={side} rho={rho} best={best}");
    let truth: Vec<f64> =
        best_x.values().iter().map(|&b| f64::from(b)).collect();

    // One sweep at a time via warm restarts.
    let config = SolverConfig { rho, seed, max_sweeps: 1, tol: 1e-300, ..SolverConfig::default() };
    let mut solver = Solver::new(&aug, &cov, config.clone()).unwrap();
    let none = ReliableSet::none(solver.state().num_slots());
    for sweep in 1..=max {
        let _ = solver.run(&none).unwrap();
        let state = solver.state();
        let obj = sdp_objective(state, &aug);
        let res = residual_norm(state, solver.catalog());

        // Vertex beliefs.
        let mut min_abs: f64 = f64::INFINITY;
        let mut sum_abs = 0.0;
        let mut overlap = 0usize; // sign agreement with exact optimum
        let mut soft = 0usize; // |belief| < 0.9
        for i in 0..n {
            let d = state.dot(0, 1 + i);
            sum_abs += d.abs();
            min_abs = min_abs.min(d.abs());
            if d.signum() == truth[i] {
                overlap += 1;
            }
            if d.abs() < 0.9 {
                soft += 1;
            }
        }

        // Pair-belief consistency: <o,ij> vs <i,j>, and pair-belief sign
        // agreement with the exact optimum's correlations.
        let index = solver.catalog().index_set().clone();
        let mut pair_incons: f64 = 0.0;
        let mut pair_agree = 0usize;
        let mut pairs = 0usize;
        for slot in (1 + n)..state.num_slots() {
            if let psos::sdp::GramIndex::Pair(i, j) = index.index_of(slot) {
                pairs += 1;
                let b_pair = state.dot(0, slot);
                let b_vv = state.dot(1 + i as usize, 1 + j as usize);
                pair_incons = pair_incons.max((b_pair - b_vv).abs());
                if b_pair.signum() == truth[i as usize] * truth[j as usize] {
                    pair_agree += 1;
                }
            }
        }

        println!(
            "sweep {sweep:3}: obj={obj:+8.3} res={res:8.2e} vtx[mean|b|={:.3} min|b|={:.3} soft={soft:2} agree={overlap:2}/{n}] pair[agree={pair_agree:2}/{pairs} maxinc={pair_incons:.3}]",
            sum_abs / n as f64,
            min_abs,
        );
        let state = solver.into_state();
        solver = Solver::with_state(&aug, &cov, config.clone(), state).unwrap();
    }
}
