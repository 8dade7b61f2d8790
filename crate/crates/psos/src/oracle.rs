//! Ground truth and certificates: exhaustive MAP enumeration,
//! chordless-cycle enumeration, and metric-polytope membership checks.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::{Assignment, GraphModel};
use crate::sdp::MomentMatrix;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{what} supports up to {cap}, got {got}")]
    TooLarge {
        what: &'static str,
        cap: usize,
        got: usize,
    },
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
}

/// Exact MAP by enumerating all `2ⁿ` assignments (n ≤ 28). States are
/// visited in Gray-code order with O(degree) incremental objective
/// updates; ties go to the lexicographically smallest assignment under
/// the ordering +1 < -1. The returned value is recomputed from the
/// winning assignment, not the incremental accumulator.
pub fn exhaustive_map(model: &GraphModel) -> Result<(Assignment, f64), OracleError> {
    let n = model.num_vertices();
    if n > 28 {
        return Err(OracleError::TooLarge {
            what: "exhaustive enumeration",
            cap: 28,
            got: n,
        });
    }
    let mut x = vec![1.0f64; n];
    let mut value = {
        let all_plus = Assignment::new(vec![1; n]).unwrap();
        model.objective_value(&all_plus)?
    };
    let mut best = x.clone();
    let mut best_value = value;
    let states: u64 = 1 << n;
    for k in 1..states {
        let flip = k.trailing_zeros() as usize;
        let mut local = model.vertex_weights()[flip];
        for &(nbr, w) in model.neighbors(flip as u32) {
            local += w * x[nbr as usize];
        }
        value -= 2.0 * x[flip] * local;
        x[flip] = -x[flip];
        if value > best_value || (value == best_value && lex_before(&x, &best)) {
            best_value = value;
            best.copy_from_slice(&x);
        }
    }
    let assignment = Assignment::new(best.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect())
        .unwrap();
    let exact = model.objective_value(&assignment)?;
    Ok((assignment, exact))
}

fn lex_before(a: &[f64], b: &[f64]) -> bool {
    for (&x, &y) in a.iter().zip(b) {
        if x != y {
            return x > y; // +1 sorts before -1
        }
    }
    false
}

/// Chordless (induced) cycles as canonical vertex sequences.
#[derive(Debug, Clone, Default)]
pub struct CycleList {
    cycles: Vec<Vec<u32>>,
}

impl CycleList {
    pub fn cycles(&self) -> &[Vec<u32>] {
        &self.cycles
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

/// Enumerates every chordless cycle of length 3..=`max_len` (n ≤ 64,
/// max_len ≤ 12). Each cycle appears once, rotated to start at its
/// smallest vertex and oriented so the second vertex is smaller than
/// the last; the list is sorted.
pub fn enumerate_chordless_cycles(
    model: &GraphModel,
    max_len: usize,
) -> Result<CycleList, OracleError> {
    let n = model.num_vertices();
    if n > 64 {
        return Err(OracleError::TooLarge {
            what: "cycle enumeration",
            cap: 64,
            got: n,
        });
    }
    if max_len > 12 {
        return Err(OracleError::TooLarge {
            what: "cycle length",
            cap: 12,
            got: max_len,
        });
    }
    let mut adj = vec![0u64; n];
    for &(i, j, _) in model.edges() {
        adj[i as usize] |= 1 << j;
        adj[j as usize] |= 1 << i;
    }
    let mut cycles = Vec::new();
    if max_len >= 3 {
        let mut path = Vec::with_capacity(max_len);
        for v0 in 0..n as u32 {
            path.push(v0);
            let higher = !0u64 << v0 << 1; // vertices strictly above v0
            extend_induced_path(&adj, higher, max_len, &mut path, 1 << v0, 0, &mut cycles);
            path.pop();
        }
    }
    cycles.sort();
    Ok(CycleList { cycles })
}

/// Depth-first extension of an induced path rooted at `path[0]`.
/// `internal_adj` is the union of neighborhoods of interior vertices
/// `path[1..len-1]`; touching it would create a chord.
fn extend_induced_path(
    adj: &[u64],
    higher: u64,
    max_len: usize,
    path: &mut Vec<u32>,
    path_mask: u64,
    internal_adj: u64,
    cycles: &mut Vec<Vec<u32>>,
) {
    let v0 = path[0] as usize;
    let tail = *path.last().unwrap() as usize;
    let candidates = adj[tail] & higher & !path_mask & !internal_adj;
    // Closing candidates are adjacent to the root; a cycle needs at
    // least one interior vertex between root and closer.
    if path.len() >= 2 && path.len() + 1 <= max_len {
        let mut closers = candidates & adj[v0];
        while closers != 0 {
            let w = closers.trailing_zeros();
            closers &= closers - 1;
            if path[1] < w {
                let mut cycle = path.clone();
                cycle.push(w);
                cycles.push(cycle);
            }
        }
    }
    if path.len() + 1 >= max_len {
        return;
    }
    // A vertex adjacent to the root cannot become interior without
    // creating a chord, so extensions avoid the root's neighborhood —
    // except for the very first step, which must take a root edge.
    let mut extenders = if path.len() == 1 {
        candidates
    } else {
        candidates & !adj[v0]
    };
    // Extending past `tail` makes `tail` interior from now on.
    let next_internal = if path.len() >= 2 {
        internal_adj | adj[tail]
    } else {
        internal_adj
    };
    while extenders != 0 {
        let w = extenders.trailing_zeros();
        extenders &= extenders - 1;
        path.push(w);
        extend_induced_path(
            adj,
            higher,
            max_len,
            path,
            path_mask | (1 << w),
            next_internal,
            cycles,
        );
        path.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `|M_ij| ≤ 1`
    Bound,
    /// `M(F) - M(C∖F) ≥ 2 - |C|` for odd `F ⊆ C`
    Cyclic,
    /// `|M_ij + M_jk| ≤ 1 + M_ik`
    Triangle,
}

impl ViolationKind {
    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::Bound => "bound",
            ViolationKind::Cyclic => "cyclic",
            ViolationKind::Triangle => "triangle",
        }
    }
}

/// One failed inequality, stated as `lhs ≥ rhs`; `slack = lhs - rhs`
/// is negative exactly when the inequality is violated.
#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    pub ids: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl Violation {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.kind.label(),
            self.ids,
            self.lhs,
            self.rhs,
            self.slack
        )
    }
}

/// Outcome of a certificate check: every violated inequality beyond
/// tolerance, plus the worst violation magnitude observed.
#[derive(Debug, Clone, Default)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    pub checks: usize,
    pub max_violation: f64,
}

impl ViolationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, tol: f64, kind: ViolationKind, ids: String, lhs: f64, rhs: f64) {
        self.checks += 1;
        let slack = lhs - rhs;
        if slack < -tol {
            self.max_violation = self.max_violation.max(-slack);
            self.violations.push(Violation {
                kind,
                ids,
                lhs,
                rhs,
                slack,
            });
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("kind,ids,lhs,rhs,slack\n");
        for v in &self.violations {
            out.push_str(&v.csv_row());
            out.push('\n');
        }
        out
    }

    fn merge(mut self, other: ViolationReport) -> ViolationReport {
        self.checks += other.checks;
        self.max_violation = self.max_violation.max(other.max_violation);
        self.violations.extend(other.violations);
        self
    }
}

/// Metric-polytope membership for a moment matrix: entry bounds
/// `|M_ij| ≤ 1` on all pairs, cyclic inequalities on every provided
/// cycle, and triangle inequalities on all vertex triples. Violations
/// smaller than `tol` are ignored.
pub fn check_metric_polytope(m: &MomentMatrix, cycles: &CycleList, tol: f64) -> ViolationReport {
    let block = m.vertex_block();
    let n = block.nrows();
    let mut report = ViolationReport::default();
    for i in 0..n {
        for j in i + 1..n {
            report.record(
                tol,
                ViolationKind::Bound,
                format!("{i}-{j}"),
                1.0,
                block[(i, j)].abs(),
            );
        }
    }
    for cycle in cycles.cycles() {
        check_cycle(block, cycle, tol, &mut report);
    }
    let triples = all_triples(n);
    report.merge(check_triangle_inequalities(m, &triples, tol))
}

fn check_cycle(block: &DMatrix<f64>, cycle: &[u32], tol: f64, report: &mut ViolationReport) {
    let len = cycle.len();
    let weights: Vec<f64> = (0..len)
        .map(|t| {
            let a = cycle[t] as usize;
            let b = cycle[(t + 1) % len] as usize;
            block[(a, b)]
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let cycle_id = cycle
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("-");
    for f_mask in 0u32..(1 << len) {
        if f_mask.count_ones() % 2 != 1 {
            continue;
        }
        let in_f: f64 = (0..len)
            .filter(|&t| f_mask >> t & 1 == 1)
            .map(|t| weights[t])
            .sum();
        let lhs = in_f - (total - in_f);
        let rhs = 2.0 - len as f64;
        let ids = format!("{cycle_id}|F={f_mask:b}");
        report.record(tol, ViolationKind::Cyclic, ids, lhs, rhs);
    }
}

/// All middle-role triples `(i, j, k)` of an `n`-vertex matrix:
/// `j` is the middle vertex and `i < k` are the endpoints.
pub fn all_triples(n: usize) -> Vec<(u32, u32, u32)> {
    let mut triples = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            for c in b + 1..n as u32 {
                triples.push((b, a, c));
                triples.push((a, b, c));
                triples.push((a, c, b));
            }
        }
    }
    triples
}

/// Triangle inequalities `|M_ij + M_jk| ≤ 1 + M_ik` for the given
/// `(i, j, k)` triples (j in the middle role).
pub fn check_triangle_inequalities(
    m: &MomentMatrix,
    triples: &[(u32, u32, u32)],
    tol: f64,
) -> ViolationReport {
    let block = m.vertex_block();
    let mut report = ViolationReport::default();
    for &(i, j, k) in triples {
        let (i, j, k) = (i as usize, j as usize, k as usize);
        let lhs = 1.0 + block[(i, k)];
        let rhs = (block[(i, j)] + block[(j, k)]).abs();
        report.record(
            tol,
            ViolationKind::Triangle,
            format!("{i}-{j}-{k}"),
            lhs,
            rhs,
        );
    }
    report
}

/// Rank-one cut matrix `x xᵀ` of an assignment; lies in the metric
/// polytope by construction, so it never produces violations.
pub fn cut_matrix(x: &Assignment) -> MomentMatrix {
    let n = x.len();
    let v = x.values();
    let block = DMatrix::from_fn(n, n, |i, j| f64::from(v[i]) * f64::from(v[j]));
    MomentMatrix::from_parts(block, Vec::new())
}

/// Objective values normalized for cross-algorithm comparison.
#[derive(Debug, Clone)]
pub struct Ratios {
    pub ratios: Vec<f64>,
    pub reference: Option<f64>,
    /// Set when no positive reference was available; `ratios` then
    /// holds the raw values unchanged.
    pub raw_fallback: bool,
}

/// Divides each value by `reference` when one is given, otherwise by
/// the largest value. A non-positive (or NaN) divisor triggers the
/// raw-value fallback instead of producing nonsense ratios.
pub fn ratio_to_best(values: &[f64], reference: Option<f64>) -> Ratios {
    let divisor = reference.or_else(|| {
        values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    });
    match divisor {
        Some(d) if d > 0.0 => Ratios {
            ratios: values.iter().map(|&v| v / d).collect(),
            reference: Some(d),
            raw_fallback: false,
        },
        _ => Ratios {
            ratios: values.to_vec(),
            reference: None,
            raw_fallback: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Independent enumerator: plain binary counting, full objective
    /// recomputation per state, explicit tie comparison. Shares no
    /// code path with `exhaustive_map`.
    pub(crate) fn exhaustive_by_counting(model: &GraphModel) -> (Assignment, f64) {
        let n = model.num_vertices();
        assert!(n <= 24, "counting oracle is for small instances");
        let mut best: Option<(Assignment, f64)> = None;
        for k in 0u64..(1 << n) {
            let signs: Vec<i8> = (0..n)
                .map(|i| if k >> i & 1 == 0 { 1 } else { -1 })
                .collect();
            let x = Assignment::new(signs).unwrap();
            let value = model.objective_value(&x).unwrap();
            let better = match &best {
                None => true,
                Some((bx, bv)) => value > *bv || (value == *bv && x.lex_before(bx)),
            };
            if better {
                best = Some((x, value));
            }
        }
        best.unwrap()
    }

    fn random_model(rng: &mut ChaCha20Rng, n: usize, edge_prob: f64) -> GraphModel {
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                if rng.random::<f64>() < edge_prob {
                    edges.push((i, j, rng.random_range(-2.0..2.0)));
                }
            }
        }
        let weights = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        GraphModel::new(n, edges, weights).unwrap()
    }

    #[test]
    fn gray_code_enumeration_matches_counting_enumeration() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for trial in 0..30 {
            let n = 2 + (trial % 9);
            let model = random_model(&mut rng, n, 0.5);
            let (gx, gv) = exhaustive_map(&model).unwrap();
            let (cx, cv) = exhaustive_by_counting(&model);
            assert_eq!(gv, cv, "trial {trial}");
            assert_eq!(gx, cx, "trial {trial}");
        }
    }

    #[test]
    fn exhaustive_ties_prefer_plus_ones() {
        // No fields: x and -x tie, the +1-leading vector must win.
        let m = GraphModel::new(2, vec![(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        let (x, v) = exhaustive_map(&m).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(x.values(), &[1, 1]);
        // Frustrated triangle: optimum 1, lex-first optimal vector.
        let t = GraphModel::new(
            3,
            vec![(0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)],
            vec![0.0; 3],
        )
        .unwrap();
        let (x, v) = exhaustive_map(&t).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(x.values(), &[1, 1, -1]);
    }

    #[test]
    fn exhaustive_rejects_large_instances() {
        let m = GraphModel::new(29, vec![], vec![0.0; 29]).unwrap();
        assert!(matches!(
            exhaustive_map(&m),
            Err(OracleError::TooLarge { .. })
        ));
    }

    /// Subset oracle: a vertex set is a chordless cycle exactly when
    /// its induced subgraph is connected and 2-regular.
    fn chordless_cycle_sets_by_subsets(model: &GraphModel, max_len: usize) -> Vec<Vec<u32>> {
        let n = model.num_vertices();
        assert!(n <= 20);
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            let size = mask.count_ones() as usize;
            if size < 3 || size > max_len {
                continue;
            }
            let verts: Vec<u32> = (0..n as u32).filter(|&v| mask >> v & 1 == 1).collect();
            let degree_ok = verts.iter().all(|&v| {
                let d = model
                    .neighbors(v)
                    .iter()
                    .filter(|(u, _)| mask >> *u & 1 == 1)
                    .count();
                d == 2
            });
            if !degree_ok {
                continue;
            }
            // 2-regular and connected means a single cycle.
            let mut seen = vec![verts[0]];
            let mut frontier = vec![verts[0]];
            while let Some(v) = frontier.pop() {
                for &(u, _) in model.neighbors(v) {
                    if mask >> u & 1 == 1 && !seen.contains(&u) {
                        seen.push(u);
                        frontier.push(u);
                    }
                }
            }
            if seen.len() == size {
                out.push(verts);
            }
        }
        out.sort();
        out
    }

    fn grid3() -> GraphModel {
        crate::model::grid_model(3, &vec![1.0; 12], &vec![0.0; 9]).unwrap()
    }

    #[test]
    fn grid_cycles_match_subset_oracle() {
        let g = grid3();
        for max_len in [3, 4, 6, 8] {
            let fast = enumerate_chordless_cycles(&g, max_len).unwrap();
            let mut fast_sets: Vec<Vec<u32>> = fast
                .cycles()
                .iter()
                .map(|c| {
                    let mut s = c.clone();
                    s.sort_unstable();
                    s
                })
                .collect();
            fast_sets.sort();
            let slow = chordless_cycle_sets_by_subsets(&g, max_len);
            assert_eq!(fast_sets, slow, "max_len {max_len}");
        }
    }

    #[test]
    fn three_by_three_grid_has_four_squares_and_the_rim() {
        let g = grid3();
        assert_eq!(enumerate_chordless_cycles(&g, 4).unwrap().len(), 4);
        // Length 5..7 add nothing: the only longer chordless cycle is
        // the 8-vertex rim around the center.
        assert_eq!(enumerate_chordless_cycles(&g, 7).unwrap().len(), 4);
        assert_eq!(enumerate_chordless_cycles(&g, 8).unwrap().len(), 5);
    }

    #[test]
    fn random_graph_cycles_match_subset_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for trial in 0..20 {
            let n = 4 + (trial % 6);
            let model = random_model(&mut rng, n, 0.45);
            let fast = enumerate_chordless_cycles(&model, 9).unwrap();
            let mut fast_sets: Vec<Vec<u32>> = fast
                .cycles()
                .iter()
                .map(|c| {
                    let mut s = c.clone();
                    s.sort_unstable();
                    s
                })
                .collect();
            fast_sets.sort();
            fast_sets.dedup();
            assert_eq!(
                fast_sets.len(),
                fast.len(),
                "duplicate cycles in trial {trial}"
            );
            let slow = chordless_cycle_sets_by_subsets(&model, 9);
            assert_eq!(fast_sets, slow, "trial {trial}");
        }
    }

    #[test]
    fn cycles_are_canonically_oriented() {
        let g = grid3();
        for cycle in enumerate_chordless_cycles(&g, 8).unwrap().cycles() {
            let v0 = cycle[0];
            assert!(cycle.iter().skip(1).all(|&v| v > v0));
            assert!(cycle[1] < *cycle.last().unwrap());
        }
    }

    #[test]
    fn cycle_enumeration_rejects_oversized_inputs() {
        let g = grid3();
        assert!(enumerate_chordless_cycles(&g, 13).is_err());
        let big = GraphModel::new(65, vec![], vec![0.0; 65]).unwrap();
        assert!(enumerate_chordless_cycles(&big, 4).is_err());
    }

    #[test]
    fn cut_matrices_pass_all_checks() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for trial in 0..25 {
            let n = 3 + (trial % 10);
            let model = random_model(&mut rng, n, 0.4);
            let cycles = enumerate_chordless_cycles(&model, 8).unwrap();
            let signs: Vec<i8> = (0..n)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect();
            let m = cut_matrix(&Assignment::new(signs).unwrap());
            let report = check_metric_polytope(&m, &cycles, 1e-6);
            assert!(report.is_ok(), "trial {trial}: {:?}", report.violations);
            assert!(report.checks > 0);
        }
    }

    #[test]
    fn uniform_negative_half_matrix_violates_triangle_and_cyclic() {
        // The degree-2 relaxation of the frustrated triangle settles at
        // pairwise inner products -1/2, which is outside the polytope.
        let block = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.5 });
        let m = MomentMatrix::from_parts(block, Vec::new());
        let cycles = CycleList {
            cycles: vec![vec![0, 1, 2]],
        };
        let report = check_metric_polytope(&m, &cycles, 1e-6);
        assert!(!report.is_ok());
        let worst_triangle = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::Triangle)
            .map(|v| -v.slack)
            .fold(0.0f64, f64::max);
        // |(-1/2) + (-1/2)| = 1 against 1 + (-1/2) = 1/2.
        assert!((worst_triangle - 0.5).abs() < 1e-12);
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Cyclic));
        // All-edge F: -3/2 against 2 - 3 = -1.
        let worst_cyclic = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::Cyclic)
            .map(|v| -v.slack)
            .fold(0.0f64, f64::max);
        assert!((worst_cyclic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn entry_bound_violations_are_reported() {
        let mut block = DMatrix::identity(2, 2);
        block[(0, 1)] = 1.2;
        block[(1, 0)] = 1.2;
        let m = MomentMatrix::from_parts(block, Vec::new());
        let report = check_metric_polytope(&m, &CycleList::default(), 1e-6);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::Bound);
        assert!((report.max_violation - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ratios_divide_by_reference_or_best() {
        let r = ratio_to_best(&[2.0, 4.0], Some(8.0));
        assert_eq!(r.ratios, vec![0.25, 0.5]);
        assert!(!r.raw_fallback);
        let r = ratio_to_best(&[2.0, 4.0], None);
        assert_eq!(r.ratios, vec![0.5, 1.0]);
        assert_eq!(r.reference, Some(4.0));
        let r = ratio_to_best(&[-1.0, -3.0], None);
        assert!(r.raw_fallback);
        assert_eq!(r.ratios, vec![-1.0, -3.0]);
        let r = ratio_to_best(&[1.0, 2.0], Some(0.0));
        assert!(r.raw_fallback);
    }
}
