use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{GraphModel, RegionCovering};

use super::catalog::ConstraintCatalog;
use super::index::{GramIndex, IndexSet};
use super::solver::{SolverConfig, SolverError};

/// The primal-dual state of the relaxation: one unit vector per Gram
/// index (origin, vertices, covered pairs) stored contiguously at a fixed
/// rank, plus the scaled multipliers of the compiled equalities. An empty
/// multiplier vector means all zeros; the solver sizes it on first use.
#[derive(Debug, Clone, PartialEq)]
pub struct GramState {
    index: Arc<IndexSet>,
    rank: usize,
    data: Vec<f64>,
    multipliers: Vec<f64>,
}

impl GramState {
    pub(crate) fn from_raw(
        index: Arc<IndexSet>,
        rank: usize,
        data: Vec<f64>,
        multipliers: Vec<f64>,
    ) -> Result<Self, SolverError> {
        if rank < 2 {
            return Err(SolverError::RankTooSmall(rank));
        }
        if data.len() != index.num_slots() * rank {
            return Err(SolverError::StateMismatch("vector storage size"));
        }
        if data.iter().any(|v| !v.is_finite()) || multipliers.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("state data"));
        }
        Ok(Self { index, rank, data, multipliers })
    }

    pub fn index_set(&self) -> &Arc<IndexSet> {
        &self.index
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_slots(&self) -> usize {
        self.index.num_slots()
    }

    pub fn vector(&self, slot: usize) -> &[f64] {
        &self.data[slot * self.rank..(slot + 1) * self.rank]
    }

    pub(crate) fn vector_mut(&mut self, slot: usize) -> &mut [f64] {
        &mut self.data[slot * self.rank..(slot + 1) * self.rank]
    }

    pub fn dot(&self, a: usize, b: usize) -> f64 {
        let va = self.vector(a);
        let vb = self.vector(b);
        va.iter().zip(vb).map(|(x, y)| x * y).sum()
    }

    /// Inner product of a slot vector with the origin vector.
    pub fn origin_dot(&self, slot: usize) -> f64 {
        self.dot(slot, 0)
    }

    /// Overwrites a slot with `sign` times the origin vector.
    pub(crate) fn assign_signed_origin(&mut self, slot: usize, sign: i8) {
        debug_assert!(slot != 0);
        let (head, tail) = self.data.split_at_mut(self.rank);
        let dst = &mut tail[(slot - 1) * self.rank..slot * self.rank];
        for (d, &o) in dst.iter_mut().zip(head.iter()) {
            *d = f64::from(sign) * o;
        }
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub(crate) fn multipliers_mut(&mut self) -> &mut Vec<f64> {
        &mut self.multipliers
    }

    pub fn reset_multipliers(&mut self) {
        for m in &mut self.multipliers {
            *m = 0.0;
        }
    }

    /// Largest deviation of any stored vector from unit norm.
    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.num_slots())
            .map(|s| (self.dot(s, s).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Draws the initial state: the origin vector is the first basis vector
/// and every other slot is an independent uniform draw from the unit
/// sphere, in slot order, from a stream seeded by `config.seed`.
pub fn init_state(
    cov: &RegionCovering,
    model: &GraphModel,
    config: &SolverConfig,
) -> Result<GramState, SolverError> {
    if config.rank < 2 {
        return Err(SolverError::RankTooSmall(config.rank));
    }
    let index = Arc::new(IndexSet::new(model.num_vertices(), cov));
    let rank = config.rank;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut data = vec![0.0; index.num_slots() * rank];
    data[0] = 1.0;
    for slot in 1..index.num_slots() {
        let v = &mut data[slot * rank..(slot + 1) * rank];
        loop {
            for x in v.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for x in v.iter_mut() {
                    *x /= norm;
                }
                break;
            }
        }
    }
    GramState::from_raw(index, rank, data, Vec::new())
}

/// Relaxation objective of a state: coupling weights against vertex-pair
/// inner products plus field weights against vertex-origin products.
pub fn sdp_objective(state: &GramState, model: &GraphModel) -> f64 {
    let index = state.index_set();
    let slot = |g: GramIndex| index.slot(g).expect("model vertex in index set");
    let mut total = 0.0;
    for &(i, j, w) in model.edges() {
        total += w * state.dot(slot(GramIndex::Vertex(i)), slot(GramIndex::Vertex(j)));
    }
    for (i, &h) in model.vertex_weights().iter().enumerate() {
        if h != 0.0 {
            total += h * state.origin_dot(slot(GramIndex::Vertex(i as u32)));
        }
    }
    total
}

/// Euclidean norm of the vector of equality violations.
pub fn residual_norm(state: &GramState, catalog: &ConstraintCatalog) -> f64 {
    let mut sum = 0.0;
    for e in 0..catalog.len() {
        let [a, b, c, d] = catalog.slots(e);
        let r = state.dot(a as usize, b as usize) - state.dot(c as usize, d as usize);
        sum += r * r;
    }
    sum.sqrt()
}

/// Second-order moments extracted from a state: the symmetric
/// vertex-vertex block and the origin moments of the covered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    vertex_block: DMatrix<f64>,
    edge_moments: Vec<((u32, u32), f64)>,
}

impl MomentMatrix {
    pub fn from_parts(vertex_block: DMatrix<f64>, edge_moments: Vec<((u32, u32), f64)>) -> Self {
        assert_eq!(vertex_block.nrows(), vertex_block.ncols(), "vertex block must be square");
        Self { vertex_block, edge_moments }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_block.nrows()
    }

    pub fn vertex_block(&self) -> &DMatrix<f64> {
        &self.vertex_block
    }

    pub fn edge_moments(&self) -> &[((u32, u32), f64)] {
        &self.edge_moments
    }
}

/// Reads the moment matrix off a state.
pub fn moment_matrix(state: &GramState) -> MomentMatrix {
    let index = state.index_set();
    let n = index.num_vertices();
    let mut block = DMatrix::zeros(n, n);
    for i in 0..n {
        block[(i, i)] = state.dot(1 + i, 1 + i);
        for j in i + 1..n {
            let m = state.dot(1 + i, 1 + j);
            block[(i, j)] = m;
            block[(j, i)] = m;
        }
    }
    let base = 1 + n;
    let edge_moments = index
        .covered_pairs()
        .iter()
        .enumerate()
        .map(|(k, &p)| (p, state.origin_dot(base + k)))
        .collect();
    MomentMatrix::from_parts(block, edge_moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::vertex_covering;
    use approx::assert_abs_diff_eq;

    fn frustrated_triangle() -> GraphModel {
        GraphModel::new(3, vec![(0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)], vec![0.0; 3]).unwrap()
    }

    #[test]
    fn init_state_is_unit_norm_and_deterministic() {
        let model = frustrated_triangle();
        let cov = RegionCovering::new(vec![vec![0, 1, 2]], 3).unwrap();
        let config = SolverConfig { rank: 5, seed: 7, ..SolverConfig::default() };
        let a = init_state(&cov, &model, &config).unwrap();
        let b = init_state(&cov, &model, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_slots(), 1 + 3 + 3);
        assert!(a.max_norm_deviation() < 1e-12);
        assert_eq!(a.vector(0), &[1.0, 0.0, 0.0, 0.0, 0.0]);

        let c = init_state(&cov, &model, &SolverConfig { rank: 5, seed: 8, ..Default::default() })
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rank_below_two_is_rejected() {
        let model = frustrated_triangle();
        let cov = vertex_covering(3);
        let config = SolverConfig { rank: 1, ..SolverConfig::default() };
        assert!(matches!(
            init_state(&cov, &model, &config),
            Err(SolverError::RankTooSmall(1))
        ));
    }

    #[test]
    fn objective_on_product_state_matches_assignment_value() {
        let model = GraphModel::new(
            3,
            vec![(0, 1, 2.0), (1, 2, -1.0)],
            vec![0.5, 0.0, -0.25],
        )
        .unwrap();
        let cov = RegionCovering::new(vec![vec![0, 1, 2]], 3).unwrap();
        let config = SolverConfig { rank: 4, ..SolverConfig::default() };
        let mut state = init_state(&cov, &model, &config).unwrap();
        let x = [1i8, -1, 1];
        for (i, &s) in x.iter().enumerate() {
            state.assign_signed_origin(1 + i, s);
        }
        let assignment = crate::model::Assignment::new(x.to_vec()).unwrap();
        assert_abs_diff_eq!(
            sdp_objective(&state, &model),
            model.objective_value(&assignment).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn residual_vanishes_on_consistent_product_states() {
        let model = frustrated_triangle();
        let cov = RegionCovering::new(vec![vec![0, 1, 2]], 3).unwrap();
        let catalog = super::super::catalog::compile_constraints(&cov, 3);
        let config = SolverConfig { rank: 3, ..SolverConfig::default() };
        let mut state = init_state(&cov, &model, &config).unwrap();
        assert!(residual_norm(&state, &catalog) > 0.1);

        let x = [1i8, -1, -1];
        for (i, &s) in x.iter().enumerate() {
            state.assign_signed_origin(1 + i, s);
        }
        let index = state.index_set().clone();
        for (k, &(i, j)) in index.covered_pairs().iter().enumerate() {
            state.assign_signed_origin(1 + 3 + k, x[i as usize] * x[j as usize]);
        }
        assert_abs_diff_eq!(residual_norm(&state, &catalog), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn moment_matrix_reads_vertex_and_pair_products() {
        let model = frustrated_triangle();
        let cov = RegionCovering::new(vec![vec![0, 1, 2]], 3).unwrap();
        let config = SolverConfig { rank: 3, seed: 3, ..SolverConfig::default() };
        let state = init_state(&cov, &model, &config).unwrap();
        let m = moment_matrix(&state);
        assert_eq!(m.num_vertices(), 3);
        assert_abs_diff_eq!(m.vertex_block()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.vertex_block()[(0, 1)], state.dot(1, 2), epsilon = 1e-15);
        assert_eq!(m.vertex_block()[(0, 1)], m.vertex_block()[(1, 0)]);
        assert_eq!(m.edge_moments().len(), 3);
        assert_eq!(m.edge_moments()[0].0, (0, 1));
        assert_abs_diff_eq!(m.edge_moments()[0].1, state.dot(4, 0), epsilon = 1e-15);
    }
}
