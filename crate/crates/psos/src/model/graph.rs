use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("vertex index {0} out of range for {1} vertices")]
    VertexOutOfRange(u32, usize),
    #[error("self loop at vertex {0}")]
    SelfLoop(u32),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(u32, u32),
    #[error("non-finite weight on {0}")]
    NonFiniteWeight(String),
    #[error("expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("assignment entry {0} is not +1 or -1")]
    NotASign(i8),
    #[error("model is not a {side}x{side} grid: offending edge ({i}, {j})")]
    NotAGrid { side: usize, i: u32, j: u32 },
}

/// A sign vector in `{+1, -1}ⁿ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<i8>,
}

impl Assignment {
    pub fn new(values: Vec<i8>) -> Result<Self, ModelError> {
        if let Some(&v) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(ModelError::NotASign(v));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flip every sign; the edge part of any objective is invariant.
    pub fn flipped(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Lexicographic comparison under the ordering +1 < -1.
    pub fn lex_before(&self, other: &Assignment) -> bool {
        for (&a, &b) in self.values.iter().zip(&other.values) {
            if a != b {
                return a > b; // +1 (= 1) sorts before -1
            }
        }
        false
    }
}

/// Binary pairwise model: vertex weights `θᵛ` and edge weights `θᵉ`
/// on canonically ordered edges `(i, j)` with `i < j`.
#[derive(Debug, Clone)]
pub struct GraphModel {
    n: usize,
    edges: Vec<(u32, u32, f64)>,
    vertex_weights: Vec<f64>,
    adjacency: Vec<Vec<(u32, f64)>>,
    edge_lookup: HashMap<(u32, u32), f64>,
}

impl GraphModel {
    /// Builds a model, canonicalizing each edge to `i < j`.
    /// The edge list order is preserved and fixes the summation order
    /// of [`GraphModel::objective_value`].
    pub fn new(
        n: usize,
        edges: Vec<(u32, u32, f64)>,
        vertex_weights: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if vertex_weights.len() != n {
            return Err(ModelError::DimensionMismatch {
                what: "vertex weights",
                expected: n,
                got: vertex_weights.len(),
            });
        }
        if let Some((i, &w)) = vertex_weights.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(ModelError::NonFiniteWeight(format!("vertex {i} (weight {w})")));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        let mut lookup = HashMap::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for (a, b, w) in edges {
            if a == b {
                return Err(ModelError::SelfLoop(a));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j as usize >= n {
                return Err(ModelError::VertexOutOfRange(j, n));
            }
            if !w.is_finite() {
                return Err(ModelError::NonFiniteWeight(format!("edge ({i}, {j})")));
            }
            if lookup.insert((i, j), w).is_some() {
                return Err(ModelError::DuplicateEdge(i, j));
            }
            canonical.push((i, j, w));
            adjacency[i as usize].push((j, w));
            adjacency[j as usize].push((i, w));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable_by_key(|&(v, _)| v);
        }
        Ok(Self {
            n,
            edges: canonical,
            vertex_weights,
            adjacency,
            edge_lookup: lookup,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn vertex_weights(&self) -> &[f64] {
        &self.vertex_weights
    }

    /// Neighbors of `i` with the incident edge weight, sorted by index.
    pub fn neighbors(&self, i: u32) -> &[(u32, f64)] {
        &self.adjacency[i as usize]
    }

    /// Edge weight for the unordered pair `{i, j}`, or `None` if absent.
    pub fn edge_weight(&self, i: u32, j: u32) -> Option<f64> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edge_lookup.get(&key).copied()
    }

    /// `U(x) = Σ θᵉ_ij x_i x_j + Σ θᵛ_i x_i`, summed in edge-list order
    /// then vertex order so reruns are bit-identical.
    pub fn objective_value(&self, x: &Assignment) -> Result<f64, ModelError> {
        if x.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                what: "assignment entries",
                expected: self.n,
                got: x.len(),
            });
        }
        let v = x.values();
        let mut total = 0.0;
        for &(i, j, w) in &self.edges {
            total += w * f64::from(v[i as usize] * v[j as usize]);
        }
        for (i, &w) in self.vertex_weights.iter().enumerate() {
            total += w * f64::from(v[i]);
        }
        Ok(total)
    }
}

/// Rewrites vertex weights as edges to a fresh apex vertex `n`:
/// `θᵉ_{i,apex} = θᵛ_i` and all vertex weights zero. Fixing the apex
/// to +1 recovers the original objective, so the optima agree.
pub fn apex_reduction(model: &GraphModel) -> GraphModel {
    let n = model.num_vertices();
    let apex = n as u32;
    let mut edges = model.edges().to_vec();
    for (i, &w) in model.vertex_weights().iter().enumerate() {
        if w != 0.0 {
            edges.push((i as u32, apex, w));
        }
    }
    GraphModel::new(n + 1, edges, vec![0.0; n + 1]).expect("apex construction is canonical")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frustrated_triangle() -> GraphModel {
        GraphModel::new(
            3,
            vec![(0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)],
            vec![0.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn objective_on_frustrated_triangle() {
        let m = frustrated_triangle();
        let best = Assignment::new(vec![1, 1, -1]).unwrap();
        assert_eq!(m.objective_value(&best).unwrap(), 1.0);
        let worst = Assignment::new(vec![1, 1, 1]).unwrap();
        assert_eq!(m.objective_value(&worst).unwrap(), -3.0);
    }

    #[test]
    fn objective_is_flip_symmetric_without_fields() {
        let m = frustrated_triangle();
        let x = Assignment::new(vec![1, -1, 1]).unwrap();
        assert_eq!(
            m.objective_value(&x).unwrap(),
            m.objective_value(&x.flipped()).unwrap()
        );
    }

    #[test]
    fn objective_rejects_wrong_length() {
        let m = frustrated_triangle();
        let x = Assignment::new(vec![1, -1]).unwrap();
        assert!(matches!(
            m.objective_value(&x),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn edges_are_canonicalized_and_duplicates_rejected() {
        let m = GraphModel::new(3, vec![(2, 0, 0.5)], vec![0.0; 3]).unwrap();
        assert_eq!(m.edges(), &[(0, 2, 0.5)]);
        assert_eq!(m.edge_weight(2, 0), Some(0.5));
        let dup = GraphModel::new(3, vec![(0, 1, 1.0), (1, 0, 2.0)], vec![0.0; 3]);
        assert!(matches!(dup, Err(ModelError::DuplicateEdge(0, 1))));
        let oob = GraphModel::new(2, vec![(0, 5, 1.0)], vec![0.0; 2]);
        assert!(matches!(oob, Err(ModelError::VertexOutOfRange(5, 2))));
        let loopy = GraphModel::new(2, vec![(1, 1, 1.0)], vec![0.0; 2]);
        assert!(matches!(loopy, Err(ModelError::SelfLoop(1))));
    }

    #[test]
    fn assignment_rejects_non_signs() {
        assert!(matches!(Assignment::new(vec![1, 0]), Err(ModelError::NotASign(0))));
    }

    #[test]
    fn lex_order_puts_plus_one_first() {
        let a = Assignment::new(vec![1, -1]).unwrap();
        let b = Assignment::new(vec![-1, 1]).unwrap();
        assert!(a.lex_before(&b));
        assert!(!b.lex_before(&a));
        assert!(!a.lex_before(&a));
    }

    #[test]
    fn apex_reduction_moves_fields_to_edges() {
        let m = GraphModel::new(2, vec![(0, 1, 2.0)], vec![0.5, 0.0]).unwrap();
        let a = apex_reduction(&m);
        assert_eq!(a.num_vertices(), 3);
        assert_eq!(a.edges(), &[(0, 1, 2.0), (0, 2, 0.5)]);
        assert!(a.vertex_weights().iter().all(|&w| w == 0.0));
        // Fixing the apex to +1 reproduces the original objective.
        let x = Assignment::new(vec![1, -1]).unwrap();
        let x_apex = Assignment::new(vec![1, -1, 1]).unwrap();
        assert_eq!(
            m.objective_value(&x).unwrap(),
            a.objective_value(&x_apex).unwrap()
        );
    }
}
