use std::collections::HashMap;

use crate::model::RegionCovering;

/// Label of one Gram vector: the distinguished origin vector, a
/// vertex vector, or a covered-pair vector. The derived ordering
/// (origin, then vertices, then pairs lexicographically) is the
/// canonical sweep and sampling order everywhere in the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GramIndex {
    Origin,
    Vertex(u32),
    Pair(u32, u32),
}

impl GramIndex {
    pub fn pair(a: u32, b: u32) -> Self {
        assert_ne!(a, b, "pair index needs two distinct vertices");
        if a < b {
            GramIndex::Pair(a, b)
        } else {
            GramIndex::Pair(b, a)
        }
    }

    /// Vertices as a sorted set: the origin is the empty set.
    fn members(self) -> ([u32; 2], usize) {
        match self {
            GramIndex::Origin => ([0, 0], 0),
            GramIndex::Vertex(i) => ([i, 0], 1),
            GramIndex::Pair(i, j) => ([i, j], 2),
        }
    }

    /// Symmetric difference of the two member sets, sorted.
    pub fn sym_diff(self, other: GramIndex) -> ([u32; 4], usize) {
        let (a, na) = self.members();
        let (b, nb) = other.members();
        let mut out = [0u32; 4];
        let mut k = 0;
        for &v in &a[..na] {
            if !b[..nb].contains(&v) {
                out[k] = v;
                k += 1;
            }
        }
        for &v in &b[..nb] {
            if !a[..na].contains(&v) {
                out[k] = v;
                k += 1;
            }
        }
        out[..k].sort_unstable();
        (out, k)
    }
}

impl std::fmt::Display for GramIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GramIndex::Origin => write!(f, "()"),
            GramIndex::Vertex(i) => write!(f, "({i})"),
            GramIndex::Pair(i, j) => write!(f, "({i},{j})"),
        }
    }
}

/// Dense slot numbering for the Gram vectors of one problem:
/// slot 0 is the origin, slots `1..=n` the vertices, and the covered
/// pairs follow in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    n: usize,
    pairs: Vec<(u32, u32)>,
    pair_slot: HashMap<(u32, u32), u32>,
}

impl IndexSet {
    pub fn new(n: usize, cov: &RegionCovering) -> Self {
        let pairs = cov.covered_pairs();
        let base = 1 + n as u32;
        let pair_slot = pairs
            .iter()
            .enumerate()
            .map(|(k, &p)| (p, base + k as u32))
            .collect();
        Self { n, pairs, pair_slot }
    }

    /// Rebuilds an index set from an explicit pair list, as stored in a
    /// state file. Pairs must be strictly sorted, canonical, and in range.
    pub(crate) fn from_pairs(n: usize, pairs: Vec<(u32, u32)>) -> Option<Self> {
        let ordered = pairs.windows(2).all(|w| w[0] < w[1])
            && pairs.iter().all(|&(i, j)| i < j && (j as usize) < n);
        if !ordered {
            return None;
        }
        let base = 1 + n as u32;
        let pair_slot = pairs
            .iter()
            .enumerate()
            .map(|(k, &p)| (p, base + k as u32))
            .collect();
        Some(Self { n, pairs, pair_slot })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn covered_pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn num_slots(&self) -> usize {
        1 + self.n + self.pairs.len()
    }

    pub fn slot(&self, idx: GramIndex) -> Option<usize> {
        match idx {
            GramIndex::Origin => Some(0),
            GramIndex::Vertex(i) => ((i as usize) < self.n).then(|| 1 + i as usize),
            GramIndex::Pair(i, j) => self.pair_slot.get(&(i, j)).map(|&s| s as usize),
        }
    }

    pub fn index_of(&self, slot: usize) -> GramIndex {
        if slot == 0 {
            GramIndex::Origin
        } else if slot <= self.n {
            GramIndex::Vertex((slot - 1) as u32)
        } else {
            let (i, j) = self.pairs[slot - 1 - self.n];
            GramIndex::Pair(i, j)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_origin_vertices_pairs() {
        let mut idx = vec![
            GramIndex::Pair(0, 2),
            GramIndex::Vertex(1),
            GramIndex::Origin,
            GramIndex::Pair(0, 1),
            GramIndex::Vertex(0),
        ];
        idx.sort();
        assert_eq!(
            idx,
            vec![
                GramIndex::Origin,
                GramIndex::Vertex(0),
                GramIndex::Vertex(1),
                GramIndex::Pair(0, 1),
                GramIndex::Pair(0, 2),
            ]
        );
    }

    #[test]
    fn sym_diff_cases() {
        let d = GramIndex::Vertex(1).sym_diff(GramIndex::Pair(1, 2));
        assert_eq!(&d.0[..d.1], &[2]);
        let d = GramIndex::Pair(0, 1).sym_diff(GramIndex::Pair(2, 3));
        assert_eq!(&d.0[..d.1], &[0, 1, 2, 3]);
        let d = GramIndex::Pair(0, 1).sym_diff(GramIndex::Pair(0, 1));
        assert_eq!(d.1, 0);
        let d = GramIndex::Origin.sym_diff(GramIndex::Pair(4, 7));
        assert_eq!(&d.0[..d.1], &[4, 7]);
    }

    #[test]
    fn slots_round_trip() {
        let cov = RegionCovering::new(vec![vec![0, 1, 2]], 3).unwrap();
        let set = IndexSet::new(3, &cov);
        assert_eq!(set.num_slots(), 1 + 3 + 3);
        for slot in 0..set.num_slots() {
            assert_eq!(set.slot(set.index_of(slot)), Some(slot));
        }
        assert_eq!(set.slot(GramIndex::Pair(0, 3)), None);
        assert_eq!(set.slot(GramIndex::Vertex(9)), None);
    }
}
