use thiserror::Error;

use super::graph::{GraphModel, ModelError};

/// A family of vertex subsets. Solver constraints are generated
/// region by region; the intended use covers every model edge.
#[derive(Debug, Clone)]
pub struct RegionCovering {
    regions: Vec<Vec<u32>>,
    cap: usize,
}

#[derive(Debug, Error)]
pub enum CoveringError {
    #[error("region {0} has {1} vertices, cap is {2}")]
    RegionTooLarge(usize, usize, usize),
    #[error("region {0} is empty")]
    EmptyRegion(usize),
    #[error("region {0} repeats vertex {1}")]
    RepeatedVertex(usize, u32),
    #[error("cap {0} is outside 1..=4")]
    BadCap(usize),
}

impl RegionCovering {
    /// `cap` bounds the region size (3 for triangles, 4 for plaquettes).
    /// Regions are stored sorted; vertices must be distinct.
    pub fn new(regions: Vec<Vec<u32>>, cap: usize) -> Result<Self, CoveringError> {
        if cap == 0 || cap > 4 {
            return Err(CoveringError::BadCap(cap));
        }
        let mut sorted = regions;
        for (k, r) in sorted.iter_mut().enumerate() {
            if r.is_empty() {
                return Err(CoveringError::EmptyRegion(k));
            }
            if r.len() > cap {
                return Err(CoveringError::RegionTooLarge(k, r.len(), cap));
            }
            r.sort_unstable();
            if let Some(w) = r.windows(2).find(|w| w[0] == w[1]) {
                return Err(CoveringError::RepeatedVertex(k, w[0]));
            }
        }
        Ok(Self { regions: sorted, cap })
    }

    pub fn regions(&self) -> &[Vec<u32>] {
        &self.regions
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// All vertex pairs lying inside some region, sorted and deduplicated.
    pub fn covered_pairs(&self) -> Vec<(u32, u32)> {
        let mut pairs = Vec::new();
        for r in &self.regions {
            for a in 0..r.len() {
                for b in a + 1..r.len() {
                    pairs.push((r[a], r[b]));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

/// Validation outcome for a covering against a model.
#[derive(Debug, Clone, Default)]
pub struct CoveringReport {
    pub out_of_range: Vec<u32>,
    pub uncovered_vertices: Vec<u32>,
    pub uncovered_edges: Vec<(u32, u32)>,
}

impl CoveringReport {
    pub fn is_valid(&self) -> bool {
        self.out_of_range.is_empty()
            && self.uncovered_vertices.is_empty()
            && self.uncovered_edges.is_empty()
    }
}

/// Checks that region vertices are in range, every vertex appears in
/// some region, and every model edge lies inside some region.
pub fn validate_covering(model: &GraphModel, cov: &RegionCovering) -> CoveringReport {
    let n = model.num_vertices();
    let mut report = CoveringReport::default();
    let mut seen = vec![false; n];
    for r in cov.regions() {
        for &v in r {
            if (v as usize) < n {
                seen[v as usize] = true;
            } else {
                report.out_of_range.push(v);
            }
        }
    }
    report.out_of_range.sort_unstable();
    report.out_of_range.dedup();
    report.uncovered_vertices = (0..n as u32).filter(|&v| !seen[v as usize]).collect();
    let covered = cov.covered_pairs();
    for &(i, j, _) in model.edges() {
        if covered.binary_search(&(i, j)).is_err() {
            report.uncovered_edges.push((i, j));
        }
    }
    report
}

fn vertex_at(side: usize, row: usize, col: usize) -> u32 {
    (row * side + col) as u32
}

/// Number of edges of the 4-connected `side x side` grid.
pub fn grid_edge_count(side: usize) -> usize {
    2 * side * (side - 1)
}

/// 4-connected grid with row-major vertex indexing. `edge_weights`
/// follows the canonical edge order: vertices scanned row-major, the
/// rightward edge before the downward edge at each vertex (this is
/// exactly the (i, j)-lexicographic order).
pub fn grid_model(
    side: usize,
    edge_weights: &[f64],
    vertex_weights: &[f64],
) -> Result<GraphModel, ModelError> {
    assert!(side >= 2, "grid needs side >= 2");
    let n = side * side;
    let m = grid_edge_count(side);
    if edge_weights.len() != m {
        return Err(ModelError::DimensionMismatch {
            what: "edge weights",
            expected: m,
            got: edge_weights.len(),
        });
    }
    if vertex_weights.len() != n {
        return Err(ModelError::DimensionMismatch {
            what: "vertex weights",
            expected: n,
            got: vertex_weights.len(),
        });
    }
    let mut edges = Vec::with_capacity(m);
    let mut k = 0;
    for row in 0..side {
        for col in 0..side {
            let v = vertex_at(side, row, col);
            if col + 1 < side {
                edges.push((v, v + 1, edge_weights[k]));
                k += 1;
            }
            if row + 1 < side {
                edges.push((v, v + side as u32, edge_weights[k]));
                k += 1;
            }
        }
    }
    GraphModel::new(n, edges, vertex_weights.to_vec())
}

fn check_grid_shape(model: &GraphModel, side: usize) -> Result<(), ModelError> {
    let n = side * side;
    if model.num_vertices() != n {
        return Err(ModelError::DimensionMismatch {
            what: "grid vertices",
            expected: n,
            got: model.num_vertices(),
        });
    }
    for &(i, j, _) in model.edges() {
        if !is_grid_edge(side, i, j) {
            return Err(ModelError::NotAGrid { side, i, j });
        }
    }
    Ok(())
}

fn is_grid_edge(side: usize, i: u32, j: u32) -> bool {
    let s = side as u32;
    let (ri, ci) = (i / s, i % s);
    let (rj, cj) = (j / s, j % s);
    ri.abs_diff(rj) + ci.abs_diff(cj) == 1
}

fn is_diagonal_edge(side: usize, i: u32, j: u32) -> bool {
    // Top-left to bottom-right within one plaquette.
    let s = side as u32;
    j == i + s + 1 && i % s + 1 < s
}

/// Adds the top-left-to-bottom-right diagonal of every plaquette with
/// weight zero, one per plaquette, so each square splits into two
/// triangles. The objective is unchanged; the covered edge set grows.
pub fn augment_with_diagonals(model: &GraphModel, side: usize) -> Result<GraphModel, ModelError> {
    check_grid_shape(model, side)?;
    let mut edges = model.edges().to_vec();
    for row in 0..side - 1 {
        for col in 0..side - 1 {
            let v = vertex_at(side, row, col);
            edges.push((v, v + side as u32 + 1, 0.0));
        }
    }
    GraphModel::new(model.num_vertices(), edges, model.vertex_weights().to_vec())
}

/// Splits every plaquette along its added diagonal: `2(side-1)²`
/// triangles covering all grid and diagonal edges.
pub fn triangle_covering(side: usize) -> RegionCovering {
    let mut regions = Vec::with_capacity(2 * (side - 1) * (side - 1));
    for row in 0..side - 1 {
        for col in 0..side - 1 {
            let a = vertex_at(side, row, col);
            let b = a + 1;
            let c = a + side as u32;
            let d = c + 1;
            regions.push(vec![a, b, d]);
            regions.push(vec![a, c, d]);
        }
    }
    RegionCovering::new(regions, 3).expect("triangles are canonical")
}

/// One four-vertex region per unit square: `(side-1)²` plaquettes.
pub fn plaquette_covering(side: usize) -> RegionCovering {
    let mut regions = Vec::with_capacity((side - 1) * (side - 1));
    for row in 0..side - 1 {
        for col in 0..side - 1 {
            let a = vertex_at(side, row, col);
            regions.push(vec![a, a + 1, a + side as u32, a + side as u32 + 1]);
        }
    }
    RegionCovering::new(regions, 4).expect("plaquettes are canonical")
}

/// Each vertex its own region: no pair variables, no equality
/// constraints, only unit-norm constraints. This is the degree-2
/// relaxation; edges are deliberately left uncovered.
pub fn vertex_covering(n: usize) -> RegionCovering {
    let regions = (0..n as u32).map(|v| vec![v]).collect();
    RegionCovering::new(regions, 1).expect("singletons are canonical")
}

/// Two-vertex region per edge plus singletons for isolated vertices.
/// Works for any graph; gives the pair-consistency constraints only.
pub fn edge_covering(model: &GraphModel) -> RegionCovering {
    let n = model.num_vertices();
    let mut regions: Vec<Vec<u32>> = model.edges().iter().map(|&(i, j, _)| vec![i, j]).collect();
    for v in 0..n as u32 {
        if model.neighbors(v).is_empty() {
            regions.push(vec![v]);
        }
    }
    RegionCovering::new(regions, 2).expect("edges are canonical")
}

/// Splits a model into its grid skeleton: drops zero-weight diagonal
/// edges (solver padding), errors on any other non-grid edge.
pub fn strip_zero_diagonals(model: &GraphModel, side: usize) -> Result<GraphModel, ModelError> {
    let mut edges = Vec::with_capacity(model.edges().len());
    for &(i, j, w) in model.edges() {
        if is_grid_edge(side, i, j) {
            edges.push((i, j, w));
        } else if !(is_diagonal_edge(side, i, j) && w == 0.0) {
            return Err(ModelError::NotAGrid { side, i, j });
        }
    }
    GraphModel::new(model.num_vertices(), edges, model.vertex_weights().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros_grid(side: usize) -> GraphModel {
        grid_model(
            side,
            &vec![0.0; grid_edge_count(side)],
            &vec![0.0; side * side],
        )
        .unwrap()
    }

    #[test]
    fn grid_counts_match_closed_forms() {
        let g = zeros_grid(20);
        assert_eq!(g.num_vertices(), 400);
        assert_eq!(g.edges().len(), 760);
        let aug = augment_with_diagonals(&g, 20).unwrap();
        assert_eq!(aug.edges().len(), 760 + 361);
    }

    #[test]
    fn grid_edges_are_lexicographically_ordered() {
        let g = zeros_grid(3);
        let pairs: Vec<(u32, u32)> = g.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        let mut sorted = pairs.clone();
        sorted.sort_unstable();
        assert_eq!(pairs, sorted);
        assert_eq!(pairs[0], (0, 1));
        assert_eq!(pairs[1], (0, 3));
    }

    #[test]
    fn covering_sizes_match_closed_forms() {
        assert_eq!(triangle_covering(2).regions().len(), 2);
        assert_eq!(triangle_covering(10).regions().len(), 162);
        assert_eq!(triangle_covering(20).regions().len(), 722);
        assert_eq!(plaquette_covering(20).regions().len(), 361);
    }

    #[test]
    fn triangle_covering_covers_augmented_grid() {
        let aug = augment_with_diagonals(&zeros_grid(4), 4).unwrap();
        let report = validate_covering(&aug, &triangle_covering(4));
        assert!(report.is_valid(), "{report:?}");
        // Covered pairs are exactly the augmented edge set.
        assert_eq!(
            triangle_covering(4).covered_pairs().len(),
            aug.edges().len()
        );
    }

    #[test]
    fn plaquette_covering_covers_plain_grid() {
        let g = zeros_grid(4);
        assert!(validate_covering(&g, &plaquette_covering(4)).is_valid());
    }

    #[test]
    fn vertex_covering_reports_uncovered_edges() {
        let g = zeros_grid(3);
        let report = validate_covering(&g, &vertex_covering(9));
        assert!(report.uncovered_vertices.is_empty());
        assert_eq!(report.uncovered_edges.len(), g.edges().len());
    }

    #[test]
    fn missing_vertex_is_reported() {
        let g = zeros_grid(2);
        let cov = RegionCovering::new(vec![vec![0, 1, 3]], 3).unwrap();
        let report = validate_covering(&g, &cov);
        assert_eq!(report.uncovered_vertices, vec![2]);
        assert!(!report.is_valid());
    }

    #[test]
    fn covering_constructor_enforces_cap_and_distinctness() {
        assert!(matches!(
            RegionCovering::new(vec![vec![0, 1, 2, 3]], 3),
            Err(CoveringError::RegionTooLarge(0, 4, 3))
        ));
        assert!(matches!(
            RegionCovering::new(vec![vec![1, 1]], 3),
            Err(CoveringError::RepeatedVertex(0, 1))
        ));
        let c = RegionCovering::new(vec![vec![2, 0, 1]], 3).unwrap();
        assert_eq!(c.regions()[0], vec![0, 1, 2]);
    }

    #[test]
    fn augment_rejects_non_grid_input() {
        let tri = GraphModel::new(3, vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], vec![0.0; 3]);
        assert!(augment_with_diagonals(&tri.unwrap(), 2).is_err());
        let aug = augment_with_diagonals(&zeros_grid(2), 2).unwrap();
        assert!(augment_with_diagonals(&aug, 2).is_err());
    }

    #[test]
    fn strip_zero_diagonals_inverts_augment() {
        let g = zeros_grid(3);
        let aug = augment_with_diagonals(&g, 3).unwrap();
        let back = strip_zero_diagonals(&aug, 3).unwrap();
        assert_eq!(back.edges(), g.edges());
        // A weighted diagonal is not solver padding.
        let mut edges = g.edges().to_vec();
        edges.push((0, 4, 0.5));
        let weighted = GraphModel::new(9, edges, vec![0.0; 9]).unwrap();
        assert!(strip_zero_diagonals(&weighted, 3).is_err());
    }

    #[test]
    fn edge_covering_handles_isolated_vertices() {
        let m = GraphModel::new(3, vec![(0, 1, 1.0)], vec![0.0; 3]).unwrap();
        let cov = edge_covering(&m);
        assert_eq!(cov.regions(), &[vec![0, 1], vec![2]]);
        assert!(validate_covering(&m, &cov).is_valid());
    }
}
