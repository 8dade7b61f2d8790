use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::graph::{GraphModel, ModelError};
use super::grid::{grid_edge_count, grid_model};

/// Weight distributions for random grid spin glasses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinGlassDistribution {
    /// (1) `θᵉ ~ U{±1}`, `θᵛ ~ U{±1}`.
    UnitCouplingsUnitFields,
    /// (2) `θᵉ ~ U{±1}`, `θᵛ ~ U{±1/2}`.
    UnitCouplingsHalfFields,
    /// (3) `θᵉ ~ N(0,1)`, `θᵛ ~ N(0, 0.01)`.
    GaussianCouplingsWeakFields,
    /// (4) `θᵉ ~ N(0,1)`, `θᵛ ~ N(0,1)`.
    GaussianCouplingsUnitFields,
}

impl SpinGlassDistribution {
    pub const ALL: [SpinGlassDistribution; 4] = [
        SpinGlassDistribution::UnitCouplingsUnitFields,
        SpinGlassDistribution::UnitCouplingsHalfFields,
        SpinGlassDistribution::GaussianCouplingsWeakFields,
        SpinGlassDistribution::GaussianCouplingsUnitFields,
    ];

    /// 1-based index used by the command line and plan files.
    pub fn index(self) -> u8 {
        match self {
            SpinGlassDistribution::UnitCouplingsUnitFields => 1,
            SpinGlassDistribution::UnitCouplingsHalfFields => 2,
            SpinGlassDistribution::GaussianCouplingsWeakFields => 3,
            SpinGlassDistribution::GaussianCouplingsUnitFields => 4,
        }
    }

    pub fn from_index(idx: u8) -> Option<Self> {
        Self::ALL.get(idx.checked_sub(1)? as usize).copied()
    }

    /// Objectives are half-integers for the two discrete distributions,
    /// which makes exact float comparison against enumeration sound.
    pub fn has_half_integer_objectives(self) -> bool {
        matches!(
            self,
            SpinGlassDistribution::UnitCouplingsUnitFields
                | SpinGlassDistribution::UnitCouplingsHalfFields
        )
    }
}

fn sign_draw(rng: &mut ChaCha20Rng, magnitude: f64) -> f64 {
    if rng.next_u32() & 1 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// Random `side x side` grid spin glass. All edge weights are drawn
/// first (canonical edge order) and then all vertex weights (index
/// order) from one ChaCha stream, so instances are reproducible.
pub fn gen_spinglass(
    side: usize,
    dist: SpinGlassDistribution,
    seed: u64,
) -> Result<GraphModel, ModelError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = grid_edge_count(side);
    let n = side * side;
    let mut edge_weights = Vec::with_capacity(m);
    let mut vertex_weights = Vec::with_capacity(n);
    match dist {
        SpinGlassDistribution::UnitCouplingsUnitFields => {
            for _ in 0..m {
                edge_weights.push(sign_draw(&mut rng, 1.0));
            }
            for _ in 0..n {
                vertex_weights.push(sign_draw(&mut rng, 1.0));
            }
        }
        SpinGlassDistribution::UnitCouplingsHalfFields => {
            for _ in 0..m {
                edge_weights.push(sign_draw(&mut rng, 1.0));
            }
            for _ in 0..n {
                vertex_weights.push(sign_draw(&mut rng, 0.5));
            }
        }
        SpinGlassDistribution::GaussianCouplingsWeakFields => {
            for _ in 0..m {
                edge_weights.push(rng.sample::<f64, _>(StandardNormal));
            }
            for _ in 0..n {
                vertex_weights.push(0.1 * rng.sample::<f64, _>(StandardNormal));
            }
        }
        SpinGlassDistribution::GaussianCouplingsUnitFields => {
            for _ in 0..m {
                edge_weights.push(rng.sample::<f64, _>(StandardNormal));
            }
            for _ in 0..n {
                vertex_weights.push(rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
    grid_model(side, &edge_weights, &vertex_weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic_per_seed() {
        for dist in SpinGlassDistribution::ALL {
            let a = gen_spinglass(4, dist, 42).unwrap();
            let b = gen_spinglass(4, dist, 42).unwrap();
            assert_eq!(a.edges(), b.edges());
            assert_eq!(a.vertex_weights(), b.vertex_weights());
            let c = gen_spinglass(4, dist, 43).unwrap();
            assert_ne!(a.edges(), c.edges());
        }
    }

    #[test]
    fn discrete_distributions_draw_from_the_right_support() {
        let m1 = gen_spinglass(5, SpinGlassDistribution::UnitCouplingsUnitFields, 7).unwrap();
        assert!(m1.edges().iter().all(|&(_, _, w)| w.abs() == 1.0));
        assert!(m1.vertex_weights().iter().all(|&w| w.abs() == 1.0));
        let m2 = gen_spinglass(5, SpinGlassDistribution::UnitCouplingsHalfFields, 7).unwrap();
        assert!(m2.edges().iter().all(|&(_, _, w)| w.abs() == 1.0));
        assert!(m2.vertex_weights().iter().all(|&w| w.abs() == 0.5));
    }

    #[test]
    fn weak_fields_are_weak() {
        let m = gen_spinglass(10, SpinGlassDistribution::GaussianCouplingsWeakFields, 3).unwrap();
        let max_field = m.vertex_weights().iter().fold(0.0f64, |a, &w| a.max(w.abs()));
        assert!(max_field < 1.0, "N(0, 0.01) draw of magnitude {max_field}");
        // Couplings are full strength.
        let max_coupling = m.edges().iter().fold(0.0f64, |a, &(_, _, w)| a.max(w.abs()));
        assert!(max_coupling > 1.0);
    }

    #[test]
    fn both_signs_appear() {
        let m = gen_spinglass(6, SpinGlassDistribution::UnitCouplingsUnitFields, 123).unwrap();
        assert!(m.edges().iter().any(|&(_, _, w)| w > 0.0));
        assert!(m.edges().iter().any(|&(_, _, w)| w < 0.0));
    }
}
