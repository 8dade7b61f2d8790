use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::model::RegionCovering;

use super::index::{GramIndex, IndexSet};

/// One linear moment-consistency constraint `<l0,l1> = <r0,r1>` between
/// Gram vectors, stored as slot ids. The left pair is the canonical
/// representation of the shared moment (lexicographically least), so the
/// same constraint discovered through different regions deduplicates to
/// identical tuples. All four slots are distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EqualitySlots(pub [u32; 4]);

/// Decoded form of one equality, for reporting and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Equality {
    pub left: (GramIndex, GramIndex),
    pub right: (GramIndex, GramIndex),
}

/// Structural family of an equality, determined by the shapes of its two
/// sides. Used for diagnostics and for freezing compilation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintFamily {
    /// `<i,j> = <ij,()>`
    Undirected,
    /// `<j,()> = <i,ij>`
    Directed,
    /// `<i,jk> = <k,ij>` style, no origin involved
    VShaped,
    /// `<ij,()> = <ik,jk>`
    Triangle,
    /// `<ab,cd> = <ac,bd>` between four pair vectors
    Loop,
}

impl Equality {
    pub fn family(&self) -> ConstraintFamily {
        use GramIndex::{Origin, Pair, Vertex};
        let has_origin = self.left.0 == Origin || self.left.1 == Origin;
        match (has_origin, self.right) {
            (true, (Vertex(_), Vertex(_))) => ConstraintFamily::Undirected,
            (true, (Vertex(_), Pair(..))) => ConstraintFamily::Directed,
            (true, (Pair(..), Pair(..))) => ConstraintFamily::Triangle,
            (false, (Vertex(_), Pair(..))) => ConstraintFamily::VShaped,
            (false, (Pair(..), Pair(..))) => ConstraintFamily::Loop,
            _ => unreachable!("no such constraint shape is ever compiled"),
        }
    }
}

/// One penalty row of a variable's local system: the inner product of the
/// swept vector with `partner` must match `<other0,other1>`. `sign` maps
/// the equality's global residual onto this row's local residual.
#[derive(Debug, Clone, Copy)]
pub struct LocalRow {
    pub eq: u32,
    pub partner: u32,
    pub other0: u32,
    pub other1: u32,
    pub sign: f64,
}

/// Compiled constraint set for one covering: the deduplicated equalities
/// plus a per-slot index of the equalities each Gram vector appears in.
#[derive(Debug, Clone)]
pub struct ConstraintCatalog {
    index: Arc<IndexSet>,
    equalities: Vec<EqualitySlots>,
    row_offsets: Vec<u32>,
    rows: Vec<u32>,
}

impl ConstraintCatalog {
    pub fn index_set(&self) -> &Arc<IndexSet> {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.equalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equalities.is_empty()
    }

    pub fn slots(&self, eq: usize) -> [u32; 4] {
        self.equalities[eq].0
    }

    pub fn equality(&self, eq: usize) -> Equality {
        let [a, b, c, d] = self.equalities[eq].0;
        Equality {
            left: (self.index.index_of(a as usize), self.index.index_of(b as usize)),
            right: (self.index.index_of(c as usize), self.index.index_of(d as usize)),
        }
    }

    pub fn equalities(&self) -> impl Iterator<Item = Equality> + '_ {
        (0..self.len()).map(|e| self.equality(e))
    }

    pub fn family_counts(&self) -> HashMap<ConstraintFamily, usize> {
        let mut counts = HashMap::new();
        for eq in self.equalities() {
            *counts.entry(eq.family()).or_insert(0) += 1;
        }
        counts
    }

    /// Number of equalities the given slot participates in.
    pub fn degree(&self, slot: usize) -> usize {
        (self.row_offsets[slot + 1] - self.row_offsets[slot]) as usize
    }

    /// The local penalty rows of one slot, in ascending equality order.
    pub fn rows_for(&self, slot: usize) -> impl Iterator<Item = LocalRow> + '_ {
        let lo = self.row_offsets[slot] as usize;
        let hi = self.row_offsets[slot + 1] as usize;
        let s = slot as u32;
        self.rows[lo..hi].iter().map(move |&eq| {
            let [a, b, c, d] = self.equalities[eq as usize].0;
            let (partner, other0, other1, sign) = if s == a {
                (b, c, d, 1.0)
            } else if s == b {
                (a, c, d, 1.0)
            } else if s == c {
                (d, a, b, -1.0)
            } else {
                (c, a, b, -1.0)
            };
            LocalRow { eq, partner, other0, other1, sign }
        })
    }
}

/// Compiles the moment-consistency equalities of a covering.
///
/// For every region, all unordered pairs of that region's Gram indices
/// (origin, vertices, covered pairs) are grouped by the moment they
/// represent, i.e. the symmetric difference of their member sets. Each
/// group's lexicographically least pair is the canonical representation;
/// one equality ties every other representation to it. Equalities seen
/// through multiple regions are emitted once.
///
/// `num_vertices` is the ambient vertex count; every region vertex must
/// lie below it. Unit norms are enforced by the solver directly and are
/// not part of the catalog.
pub fn compile_constraints(cov: &RegionCovering, num_vertices: usize) -> ConstraintCatalog {
    let index = Arc::new(IndexSet::new(num_vertices, cov));
    let mut equalities: Vec<EqualitySlots> = Vec::new();
    let mut seen: HashSet<EqualitySlots> = HashSet::new();

    for region in cov.regions() {
        assert!(
            region.iter().all(|&v| (v as usize) < num_vertices),
            "region vertex out of range"
        );
        // Gram indices of this region, already in canonical order because
        // the region is sorted.
        let mut members = vec![GramIndex::Origin];
        members.extend(region.iter().map(|&v| GramIndex::Vertex(v)));
        for (i, &a) in region.iter().enumerate() {
            for &b in &region[i + 1..] {
                members.push(GramIndex::Pair(a, b));
            }
        }

        // First pair seen for a moment is its canonical representation,
        // because the double loop enumerates pairs in lexicographic order.
        let mut canonical: HashMap<([u32; 4], usize), (GramIndex, GramIndex)> = HashMap::new();
        for (i, &p) in members.iter().enumerate() {
            for &q in &members[i + 1..] {
                let moment = p.sym_diff(q);
                match canonical.get(&moment) {
                    None => {
                        canonical.insert(moment, (p, q));
                    }
                    Some(&(cp, cq)) => {
                        let slot =
                            |g: GramIndex| index.slot(g).expect("region index is in the set") as u32;
                        let eq = EqualitySlots([slot(cp), slot(cq), slot(p), slot(q)]);
                        debug_assert!({
                            let [a, b, c, d] = eq.0;
                            a < b && c < d && a != c && a != d && b != c && b != d
                        });
                        if seen.insert(eq) {
                            equalities.push(eq);
                        }
                    }
                }
            }
        }
    }

    // CSR of equality memberships per slot.
    let num_slots = index.num_slots();
    let mut counts = vec![0u32; num_slots + 1];
    for eq in &equalities {
        for &s in &eq.0 {
            counts[s as usize + 1] += 1;
        }
    }
    for i in 0..num_slots {
        counts[i + 1] += counts[i];
    }
    let row_offsets = counts;
    let mut cursor = row_offsets.clone();
    let mut rows = vec![0u32; row_offsets[num_slots] as usize];
    for (e, eq) in equalities.iter().enumerate() {
        for &s in &eq.0 {
            rows[cursor[s as usize] as usize] = e as u32;
            cursor[s as usize] += 1;
        }
    }

    ConstraintCatalog { index, equalities, row_offsets, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{edge_covering, plaquette_covering, triangle_covering, GraphModel};
    use ConstraintFamily::*;

    fn counts_of(catalog: &ConstraintCatalog) -> [usize; 5] {
        let c = catalog.family_counts();
        [
            c.get(&Undirected).copied().unwrap_or(0),
            c.get(&Directed).copied().unwrap_or(0),
            c.get(&VShaped).copied().unwrap_or(0),
            c.get(&Triangle).copied().unwrap_or(0),
            c.get(&Loop).copied().unwrap_or(0),
        ]
    }

    #[test]
    fn single_edge_region_compiles_three_equalities() {
        let cov = RegionCovering::new(vec![vec![0, 1]], 2).unwrap();
        let catalog = compile_constraints(&cov, 2);
        assert_eq!(catalog.len(), 3);
        assert_eq!(counts_of(&catalog), [1, 2, 0, 0, 0]);
    }

    #[test]
    fn single_triangle_region_compiles_fourteen_equalities() {
        let cov = RegionCovering::new(vec![vec![0, 1, 2]], 3).unwrap();
        let catalog = compile_constraints(&cov, 3);
        assert_eq!(catalog.len(), 14);
        assert_eq!(counts_of(&catalog), [3, 6, 2, 3, 0]);
    }

    #[test]
    fn single_plaquette_region_compiles_forty_equalities() {
        let cov = RegionCovering::new(vec![vec![0, 1, 2, 3]], 4).unwrap();
        let catalog = compile_constraints(&cov, 4);
        assert_eq!(catalog.len(), 40);
        assert_eq!(counts_of(&catalog), [6, 12, 8, 12, 2]);
    }

    #[test]
    fn shared_edge_between_triangles_deduplicates() {
        // The three edge-level equalities of the shared pair appear once.
        let cov = RegionCovering::new(vec![vec![0, 1, 3], vec![0, 2, 3]], 3).unwrap();
        let catalog = compile_constraints(&cov, 4);
        assert_eq!(catalog.len(), 14 + 14 - 3);
    }

    #[test]
    fn grid_covering_counts() {
        let tri = triangle_covering(4);
        let catalog = compile_constraints(&tri, 16);
        // 18 triangles, 14 each, minus 3 per deduplicated shared pair.
        // Shared pairs: the 9 diagonals (2 triangles each) and the 24
        // augmented-grid edges shared between adjacent triangle pairs.
        let shared: usize = {
            let mut pair_regions = std::collections::HashMap::new();
            for r in tri.regions() {
                for (i, &a) in r.iter().enumerate() {
                    for &b in &r[i + 1..] {
                        *pair_regions.entry((a, b)).or_insert(0usize) += 1;
                    }
                }
            }
            pair_regions.values().map(|&c| 3 * (c - 1)).sum()
        };
        assert_eq!(catalog.len(), 18 * 14 - shared);

        let plq = plaquette_covering(4);
        let catalog = compile_constraints(&plq, 16);
        let shared: usize = {
            let mut pair_regions = std::collections::HashMap::new();
            for r in plq.regions() {
                for (i, &a) in r.iter().enumerate() {
                    for &b in &r[i + 1..] {
                        *pair_regions.entry((a, b)).or_insert(0usize) += 1;
                    }
                }
            }
            // Pairs shared by two plaquettes deduplicate their 3
            // edge-level equalities (the only equalities whose four
            // indices all live inside the shared pair).
            pair_regions.values().map(|&c| 3 * (c - 1)).sum()
        };
        assert_eq!(catalog.len(), 9 * 40 - shared);
    }

    #[test]
    fn every_representation_pair_is_canonical_or_constrained() {
        let cov = RegionCovering::new(vec![vec![0, 1, 2, 3]], 4).unwrap();
        let catalog = compile_constraints(&cov, 4);
        let eqs: HashSet<EqualitySlots> =
            (0..catalog.len()).map(|e| EqualitySlots(catalog.slots(e))).collect();
        let index = catalog.index_set();

        let mut members = vec![GramIndex::Origin];
        members.extend((0..4).map(GramIndex::Vertex));
        for i in 0..4u32 {
            for j in i + 1..4 {
                members.push(GramIndex::Pair(i, j));
            }
        }
        let mut canonical: HashMap<([u32; 4], usize), (GramIndex, GramIndex)> = HashMap::new();
        for (i, &p) in members.iter().enumerate() {
            for &q in &members[i + 1..] {
                let m = p.sym_diff(q);
                let slot = |g: GramIndex| index.slot(g).unwrap() as u32;
                match canonical.get(&m) {
                    None => {
                        canonical.insert(m, (p, q));
                    }
                    Some(&(cp, cq)) => {
                        assert!(
                            eqs.contains(&EqualitySlots([slot(cp), slot(cq), slot(p), slot(q)])),
                            "missing equality for {p} {q}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn equalities_hold_on_product_states() {
        // On a state built from an assignment x (vertex vectors x_i * o,
        // pair vectors x_i x_j * o) every compiled equality must hold
        // exactly, whatever the region shapes.
        let model = GraphModel::new(
            6,
            vec![(0, 1, 1.0), (1, 2, -1.0), (2, 3, 0.5), (3, 4, 1.0), (4, 5, -2.0)],
            vec![0.3; 6],
        )
        .unwrap();
        let cov = RegionCovering::new(
            vec![vec![0, 1, 2, 3], vec![2, 3, 4], vec![3, 4, 5], vec![0, 5]],
            4,
        )
        .unwrap();
        let catalog = compile_constraints(&cov, model.num_vertices());
        let index = catalog.index_set();

        let x = [1.0f64, -1.0, -1.0, 1.0, -1.0, 1.0];
        let sign = |g: GramIndex| match g {
            GramIndex::Origin => 1.0,
            GramIndex::Vertex(i) => x[i as usize],
            GramIndex::Pair(i, j) => x[i as usize] * x[j as usize],
        };
        for eq in catalog.equalities() {
            let lhs = sign(eq.left.0) * sign(eq.left.1);
            let rhs = sign(eq.right.0) * sign(eq.right.1);
            assert_eq!(lhs, rhs, "violated: {:?}", eq);
        }
        assert!(index.num_slots() >= 1 + 6);
    }

    #[test]
    fn rows_cover_each_membership_once_with_correct_sides() {
        let cov = RegionCovering::new(vec![vec![0, 1, 2]], 3).unwrap();
        let catalog = compile_constraints(&cov, 3);
        let mut memberships = 0;
        for slot in 0..catalog.index_set().num_slots() {
            for row in catalog.rows_for(slot) {
                memberships += 1;
                let [a, b, c, d] = catalog.slots(row.eq as usize);
                let s = slot as u32;
                if row.sign > 0.0 {
                    assert!(s == a || s == b);
                    assert_eq!((row.other0, row.other1), (c, d));
                    assert_eq!(row.partner, if s == a { b } else { a });
                } else {
                    assert!(s == c || s == d);
                    assert_eq!((row.other0, row.other1), (a, b));
                    assert_eq!(row.partner, if s == c { d } else { c });
                }
            }
        }
        assert_eq!(memberships, 4 * catalog.len());
    }

    #[test]
    fn edge_covering_of_model_compiles() {
        let model =
            GraphModel::new(4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], vec![0.0; 4]).unwrap();
        let cov = edge_covering(&model);
        let catalog = compile_constraints(&cov, 4);
        assert_eq!(catalog.len(), 3 * 3);
        assert_eq!(counts_of(&catalog), [3, 6, 0, 0, 0]);
    }

    #[test]
    fn empty_catalog_for_vertex_covering() {
        let cov = crate::model::vertex_covering(5);
        let catalog = compile_constraints(&cov, 5);
        assert!(catalog.is_empty());
        assert_eq!(catalog.index_set().num_slots(), 6);
    }
}
