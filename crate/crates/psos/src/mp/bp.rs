//! Loopy belief propagation in the log domain with damped synchronous
//! updates. Messages live on directed edges; an update folds the source
//! vertex's field and all its other incoming messages, then renormalizes
//! so each message's maximum entry is zero. Runs that never reach the
//! tolerance report the message set of their best iteration instead of
//! the last one, flagged as non-converged.

use crate::model::{Assignment, GraphModel};

#[derive(Debug, Clone, PartialEq)]
pub struct BpOptions {
    /// Inertia on the previous message: the damped update is
    /// `(1 - damping) * new + damping * old`.
    pub damping: f64,
    pub max_iters: usize,
    /// Largest absolute message change that still counts as converged.
    pub tol: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self { damping: 0.5, max_iters: 2000, tol: 1e-8 }
    }
}

/// Outcome of the sum-product variant.
#[derive(Debug, Clone)]
pub struct SumProductRun {
    /// Per-vertex probability of the +1 state under the beliefs.
    pub marginals: Vec<f64>,
    /// Threshold decode of the marginals; 0.5 rounds up.
    pub assignment: Assignment,
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
}

/// Outcome of the max-product variant.
#[derive(Debug, Clone)]
pub struct MaxProductRun {
    /// Sign decode of the max-beliefs; ties round up.
    pub assignment: Assignment,
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
}

/// Log-space combine of the two source states: log-sum-exp for
/// sum-product, plain max for max-product.
#[derive(Clone, Copy, PartialEq)]
enum Combine {
    SumProduct,
    MaxProduct,
}

impl Combine {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Combine::SumProduct => {
                let m = a.max(b);
                m + (-(a - b).abs()).exp().ln_1p()
            }
            Combine::MaxProduct => a.max(b),
        }
    }
}

/// Messages indexed by directed edge: edge `k = (i, j)` owns direction
/// `2k` for `i -> j` and `2k + 1` for `j -> i`. Each message stores its
/// log values at the `[+1, -1]` states of the target vertex.
struct BpCore<'m> {
    model: &'m GraphModel,
    /// Incoming directions per vertex: `(direction id, source, weight)`.
    incoming: Vec<Vec<(usize, u32, f64)>>,
    msgs: Vec<[f64; 2]>,
    converged: bool,
    iterations: usize,
    final_delta: f64,
}

impl<'m> BpCore<'m> {
    fn run(model: &'m GraphModel, opts: &BpOptions, combine: Combine) -> Self {
        let n = model.num_vertices();
        let mut incoming: Vec<Vec<(usize, u32, f64)>> = vec![Vec::new(); n];
        for (k, &(i, j, w)) in model.edges().iter().enumerate() {
            incoming[j as usize].push((2 * k, i, w));
            incoming[i as usize].push((2 * k + 1, j, w));
        }

        let num_dirs = 2 * model.edges().len();
        let mut msgs = vec![[0.0f64; 2]; num_dirs];
        let mut next = msgs.clone();
        let mut best: Option<(f64, Vec<[f64; 2]>)> = None;
        let mut converged = false;
        let mut iterations = 0;
        let mut final_delta = 0.0;

        // Field plus all incoming messages, per vertex and state.
        let mut totals = vec![[0.0f64; 2]; n];
        for _ in 0..opts.max_iters {
            iterations += 1;
            for (v, total) in totals.iter_mut().enumerate() {
                let h = model.vertex_weights()[v];
                *total = [h, -h];
                for &(d, _, _) in &incoming[v] {
                    total[0] += msgs[d][0];
                    total[1] += msgs[d][1];
                }
            }

            let mut delta = 0.0f64;
            for (k, &(i, j, w)) in model.edges().iter().enumerate() {
                for (dir, src, dst) in [(2 * k, i, j), (2 * k + 1, j, i)] {
                    // Source evidence excludes the reverse message.
                    let reverse = dir ^ 1;
                    let s_plus = totals[src as usize][0] - msgs[reverse][0];
                    let s_minus = totals[src as usize][1] - msgs[reverse][1];
                    // Target state +1 / -1 against source states +1 / -1.
                    let mut m = [
                        combine.apply(w + s_plus, -w + s_minus),
                        combine.apply(-w + s_plus, w + s_minus),
                    ];
                    let peak = m[0].max(m[1]);
                    m = [m[0] - peak, m[1] - peak];
                    let old = msgs[dir];
                    let mut damped = [
                        (1.0 - opts.damping) * m[0] + opts.damping * old[0],
                        (1.0 - opts.damping) * m[1] + opts.damping * old[1],
                    ];
                    let peak = damped[0].max(damped[1]);
                    damped = [damped[0] - peak, damped[1] - peak];
                    delta = delta
                        .max((damped[0] - old[0]).abs())
                        .max((damped[1] - old[1]).abs());
                    next[dir] = damped;
                    let _ = dst;
                }
            }
            std::mem::swap(&mut msgs, &mut next);
            final_delta = delta;
            if best.as_ref().is_none_or(|(b, _)| delta < *b) {
                best = Some((delta, msgs.clone()));
            }
            if delta <= opts.tol {
                converged = true;
                break;
            }
        }

        if !converged {
            if let Some((delta, best_msgs)) = best {
                msgs = best_msgs;
                final_delta = delta;
            }
        }
        Self { model, incoming, msgs, converged, iterations, final_delta }
    }

    /// Log-belief of a vertex at states `[+1, -1]`.
    fn belief(&self, v: usize) -> [f64; 2] {
        let h = self.model.vertex_weights()[v];
        let mut b = [h, -h];
        for &(d, _, _) in &self.incoming[v] {
            b[0] += self.msgs[d][0];
            b[1] += self.msgs[d][1];
        }
        b
    }
}

/// Damped synchronous sum-product on the model's factor graph.
pub fn bp_sum_product(model: &GraphModel, opts: &BpOptions) -> SumProductRun {
    let core = BpCore::run(model, opts, Combine::SumProduct);
    let n = model.num_vertices();
    let mut marginals = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for v in 0..n {
        let b = core.belief(v);
        let p = 1.0 / (1.0 + (b[1] - b[0]).exp());
        marginals.push(p);
        values.push(if p >= 0.5 { 1 } else { -1 });
    }
    SumProductRun {
        marginals,
        assignment: Assignment::new(values).expect("signs are valid"),
        converged: core.converged,
        iterations: core.iterations,
        final_delta: core.final_delta,
    }
}

/// Damped synchronous max-product on the model's factor graph.
pub fn bp_max_product(model: &GraphModel, opts: &BpOptions) -> MaxProductRun {
    let core = BpCore::run(model, opts, Combine::MaxProduct);
    let n = model.num_vertices();
    let mut values = Vec::with_capacity(n);
    for v in 0..n {
        let b = core.belief(v);
        values.push(if b[0] >= b[1] { 1 } else { -1 });
    }
    MaxProductRun {
        assignment: Assignment::new(values).expect("signs are valid"),
        converged: core.converged,
        iterations: core.iterations,
        final_delta: core.final_delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exhaustive_map;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Exact single-vertex marginals by enumeration.
    fn exact_marginals(model: &GraphModel) -> Vec<f64> {
        let n = model.num_vertices();
        let mut z = 0.0;
        let mut plus = vec![0.0; n];
        for bits in 0u32..(1 << n) {
            let values: Vec<i8> =
                (0..n).map(|v| if bits >> v & 1 == 0 { 1 } else { -1 }).collect();
            let x = Assignment::new(values.clone()).unwrap();
            let w = model.objective_value(&x).unwrap().exp();
            z += w;
            for (v, &s) in values.iter().enumerate() {
                if s == 1 {
                    plus[v] += w;
                }
            }
        }
        plus.iter().map(|p| p / z).collect()
    }

    #[test]
    fn single_vertex_marginal_is_the_field_sigmoid() {
        let model = GraphModel::new(1, vec![], vec![1.0]).unwrap();
        let run = bp_sum_product(&model, &BpOptions::default());
        assert!(run.converged);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(run.marginals[0], e / (e + 1.0 / e), epsilon = 1e-12);
        assert_eq!(run.assignment.values(), &[1]);
    }

    #[test]
    fn zero_model_gives_uniform_marginals_and_rounds_up() {
        let model = GraphModel::new(3, vec![(0, 1, 0.0), (1, 2, 0.0)], vec![0.0; 3]).unwrap();
        let run = bp_sum_product(&model, &BpOptions::default());
        assert!(run.converged);
        for &p in &run.marginals {
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        }
        assert_eq!(run.assignment.values(), &[1, 1, 1]);
    }

    #[test]
    fn tree_marginals_match_enumeration() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..10 {
            // Random tree on 8 vertices.
            let n = 8u32;
            let mut edges = Vec::new();
            for v in 1..n {
                let parent = rng.random_range(0..v);
                edges.push((parent, v, rng.random_range(-1.5..1.5)));
            }
            let fields = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let model = GraphModel::new(n as usize, edges, fields).unwrap();
            let opts = BpOptions { tol: 1e-12, ..BpOptions::default() };
            let run = bp_sum_product(&model, &opts);
            assert!(run.converged);
            let exact = exact_marginals(&model);
            for (got, want) in run.marginals.iter().zip(&exact) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn max_product_is_exact_on_trees() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = 10u32;
            let mut edges = Vec::new();
            for v in 1..n {
                let parent = rng.random_range(0..v);
                edges.push((parent, v, rng.random_range(-2.0..2.0)));
            }
            let fields = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let model = GraphModel::new(n as usize, edges, fields).unwrap();
            let run = bp_max_product(&model, &BpOptions::default());
            assert!(run.converged);
            let (_, best) = exhaustive_map(&model).unwrap();
            let got = model.objective_value(&run.assignment).unwrap();
            assert_abs_diff_eq!(got, best, epsilon = 1e-9);
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence_with_valid_fallback() {
        let model = GraphModel::new(
            4,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)],
            vec![0.3, -0.2, 0.1, 0.0],
        )
        .unwrap();
        let opts = BpOptions { max_iters: 2, ..BpOptions::default() };
        let run = bp_sum_product(&model, &opts);
        assert!(!run.converged);
        assert_eq!(run.iterations, 2);
        assert!(run.final_delta > opts.tol);
        assert!(run.marginals.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert_eq!(run.assignment.len(), 4);
    }

    #[test]
    fn frustrated_loop_settles_at_the_symmetric_fixed_point() {
        let w = -5.0;
        let model =
            GraphModel::new(3, vec![(0, 1, w), (0, 2, w), (1, 2, w)], vec![0.0; 3]).unwrap();
        let run = bp_sum_product(&model, &BpOptions::default());
        // With no fields the damped updates settle where every belief
        // is even; ties decode to +1.
        for &p in &run.marginals {
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-6);
        }
        assert_eq!(run.assignment.values(), &[1, 1, 1]);
    }

    #[test]
    fn runs_are_deterministic() {
        let model = GraphModel::new(
            4,
            vec![(0, 1, 1.0), (1, 2, -1.0), (2, 3, 1.0), (0, 3, 1.0)],
            vec![0.2, -0.1, 0.0, 0.4],
        )
        .unwrap();
        let a = bp_sum_product(&model, &BpOptions::default());
        let b = bp_sum_product(&model, &BpOptions::default());
        assert_eq!(a.marginals, b.marginals);
        assert_eq!(a.iterations, b.iterations);
    }
}
