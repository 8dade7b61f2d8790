//! Generalized belief propagation on the plaquette closure of a grid.
//!
//! Outer regions are the grid's complete plaquettes plus any model edge
//! not inside one; the region set is closed under intersections (shared
//! edges between adjacent plaquettes, then vertices where two regions
//! meet in exactly one point). Messages flow from direct parents to
//! children following the parent-to-child rule: the update for a message
//! into region R folds the parent's factors and the incoming messages
//! that reach the parent side but not R, and divides out R's factors and
//! the messages R already receives elsewhere. Counting numbers from the
//! cluster-variation rule are computed for validation: every factor must
//! be counted exactly once. On grids without complete plaquettes the
//! construction degrades to the Bethe graph and the updates coincide with
//! ordinary belief propagation.

use std::collections::{HashMap, HashSet};

use crate::model::{Assignment, GraphModel};

use super::MpError;

#[derive(Debug, Clone, PartialEq)]
pub struct GbpOptions {
    /// Inertia: weight kept on the previous message, so each step moves
    /// `1 - damping` toward the fresh update. Synchronous plaquette
    /// updates spiral outward unless steps are small; the default moves
    /// a tenth per iteration.
    pub damping: f64,
    pub max_iters: usize,
    /// Largest absolute message change that still counts as converged.
    pub tol: f64,
}

impl Default for GbpOptions {
    fn default() -> Self {
        Self { damping: 0.9, max_iters: 2000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct GbpRun {
    /// Threshold decode of the marginals; ties round up.
    pub assignment: Assignment,
    /// Per-vertex probability of the +1 state under the beliefs.
    pub marginals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
}

/// Log-sum-exp of two values; the left one may be negative infinity.
fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Restricts a table index of a superset region to a subset: `pos[t]` is
/// the bit position (within the superset's vertex order) of the subset's
/// `t`-th vertex.
fn project(idx: usize, pos: &[u8]) -> usize {
    let mut out = 0;
    for (t, &p) in pos.iter().enumerate() {
        out |= ((idx >> p) & 1) << t;
    }
    out
}

/// Positions of `sub`'s vertices inside `sup` (both sorted).
fn positions(sub: &[u32], sup: &[u32]) -> Vec<u8> {
    sub.iter()
        .map(|v| sup.iter().position(|w| w == v).expect("subset region") as u8)
        .collect()
}

fn is_subset(sub: &[u32], sup: &[u32]) -> bool {
    sub.iter().all(|v| sup.binary_search(v).is_ok())
}

fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    a.iter().filter(|v| b.binary_search(v).is_ok()).count()
}

#[derive(Debug)]
struct Region {
    verts: Vec<u32>,
    /// Log factor table over the region's joint states: the sum of all
    /// model terms whose scope lies inside the region.
    theta: Vec<f64>,
    /// Message ids of M(R): messages whose child is R or a descendant
    /// and whose parent is outside that down-set.
    m_set: Vec<u32>,
    /// Cluster-variation counting number.
    #[cfg_attr(not(test), allow(dead_code))]
    count: i32,
}

#[derive(Debug)]
struct Message {
    parent: usize,
    child: usize,
    /// Positions of the child's vertices inside the parent.
    keep: Vec<u8>,
    /// Messages folded on the parent side: `(id, positions of that
    /// message's child region inside the parent)`.
    n_refs: Vec<(u32, Vec<u8>)>,
    /// Messages divided out on the child side: `(id, positions inside
    /// the child)`.
    d_refs: Vec<(u32, Vec<u8>)>,
}

struct RegionGraph {
    n: usize,
    regions: Vec<Region>,
    messages: Vec<Message>,
    /// For each vertex, its regions (any size), ascending.
    #[cfg_attr(not(test), allow(dead_code))]
    memb: Vec<Vec<usize>>,
    /// For each vertex, the region its belief is read from, when any.
    belief_region: Vec<Option<usize>>,
}

/// Table index: bit `t` set means the region's `t`-th vertex is -1.
fn state_of(idx: usize, t: usize) -> f64 {
    if idx >> t & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn theta_table(model: &GraphModel, verts: &[u32]) -> Vec<f64> {
    let k = verts.len();
    let mut table = vec![0.0; 1 << k];
    for (idx, entry) in table.iter_mut().enumerate() {
        let mut v = 0.0;
        for (t, &a) in verts.iter().enumerate() {
            v += model.vertex_weights()[a as usize] * state_of(idx, t);
            for (u, &b) in verts.iter().enumerate().skip(t + 1) {
                if let Some(w) = model.edge_weight(a, b) {
                    v += w * state_of(idx, t) * state_of(idx, u);
                }
            }
        }
        *entry = v;
    }
    table
}

impl RegionGraph {
    fn build(model: &GraphModel, side: usize) -> Result<Self, MpError> {
        let n = model.num_vertices();
        if side < 2 || n != side * side {
            return Err(MpError::NotAGridSubgraph { side, i: 0, j: 0 });
        }
        for &(i, j, _) in model.edges() {
            let (ri, ci) = (i as usize / side, i as usize % side);
            let (rj, cj) = (j as usize / side, j as usize % side);
            let horizontal = ri == rj && cj == ci + 1;
            let vertical = ci == cj && rj == ri + 1;
            if !horizontal && !vertical {
                return Err(MpError::NotAGridSubgraph { side, i, j });
            }
        }
        let present = |a: u32, b: u32| model.edge_weight(a, b).is_some();

        // Outer regions: complete plaquettes, then uncovered model edges.
        let mut vert_sets: Vec<Vec<u32>> = Vec::new();
        let mut covered: HashSet<(u32, u32)> = HashSet::new();
        for r in 0..side - 1 {
            for c in 0..side - 1 {
                let a = (r * side + c) as u32;
                let (b, d, e) = (a + 1, a + side as u32, a + side as u32 + 1);
                if present(a, b) && present(d, e) && present(a, d) && present(b, e) {
                    vert_sets.push(vec![a, b, d, e]);
                    covered.extend([(a, b), (d, e), (a, d), (b, e)]);
                }
            }
        }
        let num_plaquettes = vert_sets.len();
        for &(i, j, _) in model.edges() {
            if !covered.contains(&(i, j)) {
                vert_sets.push(vec![i, j]);
            }
        }

        // Close under intersections: pairs shared by two plaquettes.
        let mut pair_count: HashMap<(u32, u32), usize> = HashMap::new();
        for verts in &vert_sets[..num_plaquettes] {
            for (t, &a) in verts.iter().enumerate() {
                for &b in &verts[t + 1..] {
                    *pair_count.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
        let mut shared_pairs: Vec<(u32, u32)> =
            pair_count.into_iter().filter(|&(_, c)| c >= 2).map(|(p, _)| p).collect();
        shared_pairs.sort_unstable();
        vert_sets.extend(shared_pairs.into_iter().map(|(a, b)| vec![a, b]));

        // Close further: vertices where two regions meet in one point.
        let mut memb: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, verts) in vert_sets.iter().enumerate() {
            for &v in verts {
                memb[v as usize].push(r);
            }
        }
        for v in 0..n {
            let rs = &memb[v];
            let meets_here = rs.iter().enumerate().any(|(t, &x)| {
                rs[t + 1..]
                    .iter()
                    .any(|&y| intersection_size(&vert_sets[x], &vert_sets[y]) == 1)
            });
            if meets_here {
                vert_sets.push(vec![v as u32]);
            }
        }
        // Rebuild membership over the full region list.
        let mut memb: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, verts) in vert_sets.iter().enumerate() {
            for &v in verts {
                memb[v as usize].push(r);
            }
        }

        // Ancestors (all strict supersets) via first-vertex membership.
        let num_regions = vert_sets.len();
        let mut ancestors: Vec<Vec<usize>> = vec![Vec::new(); num_regions];
        for x in 0..num_regions {
            let first = vert_sets[x][0] as usize;
            for &y in &memb[first] {
                if y != x
                    && vert_sets[y].len() > vert_sets[x].len()
                    && is_subset(&vert_sets[x], &vert_sets[y])
                {
                    ancestors[x].push(y);
                }
            }
        }
        let mut desc: Vec<Vec<usize>> = vec![Vec::new(); num_regions];
        for x in 0..num_regions {
            for &y in &ancestors[x] {
                desc[y].push(x);
            }
        }

        // Counting numbers by descending size; validate single counting.
        let mut order: Vec<usize> = (0..num_regions).collect();
        order.sort_by_key(|&r| std::cmp::Reverse(vert_sets[r].len()));
        let mut count = vec![0i32; num_regions];
        for &r in &order {
            count[r] = 1 - ancestors[r].iter().map(|&a| count[a]).sum::<i32>();
        }
        for v in 0..n {
            if !memb[v].is_empty() {
                let total: i32 = memb[v].iter().map(|&r| count[r]).sum();
                assert_eq!(total, 1, "vertex {v} counted {total} times");
            }
        }
        for &(i, j, _) in model.edges() {
            let total: i32 = (0..num_regions)
                .filter(|&r| is_subset(&[i, j], &vert_sets[r]))
                .map(|r| count[r])
                .sum();
            assert_eq!(total, 1, "edge ({i},{j}) counted {total} times");
        }

        // Messages: one per direct containment.
        let mut messages = Vec::new();
        let mut incoming: Vec<Vec<u32>> = vec![Vec::new(); num_regions];
        for x in 0..num_regions {
            for &y in &ancestors[x] {
                let direct = !ancestors[x]
                    .iter()
                    .any(|&z| z != y && is_subset(&vert_sets[z], &vert_sets[y]));
                if direct {
                    let id = messages.len() as u32;
                    messages.push(Message {
                        parent: y,
                        child: x,
                        keep: Vec::new(),
                        n_refs: Vec::new(),
                        d_refs: Vec::new(),
                    });
                    incoming[x].push(id);
                }
            }
        }

        // M(R) per region: messages into the down-set from outside it.
        let mut m_sets: Vec<Vec<u32>> = vec![Vec::new(); num_regions];
        for r in 0..num_regions {
            let mut down = desc[r].clone();
            down.push(r);
            down.sort_unstable();
            for &c in &down {
                for &id in &incoming[c] {
                    let p = messages[id as usize].parent;
                    if down.binary_search(&p).is_err() {
                        m_sets[r].push(id);
                    }
                }
            }
            m_sets[r].sort_unstable();
        }

        // Precompute each message's fold and divide sets with their
        // projections.
        for id in 0..messages.len() {
            let (p, c) = (messages[id].parent, messages[id].child);
            let keep = positions(&vert_sets[c], &vert_sets[p]);
            let n_refs = m_sets[p]
                .iter()
                .filter(|&&m| m_sets[c].binary_search(&m).is_err())
                .map(|&m| {
                    let child = messages[m as usize].child;
                    (m, positions(&vert_sets[child], &vert_sets[p]))
                })
                .collect();
            let d_refs = m_sets[c]
                .iter()
                .filter(|&&m| m as usize != id && m_sets[p].binary_search(&m).is_err())
                .map(|&m| {
                    let child = messages[m as usize].child;
                    (m, positions(&vert_sets[child], &vert_sets[c]))
                })
                .collect();
            messages[id].keep = keep;
            messages[id].n_refs = n_refs;
            messages[id].d_refs = d_refs;
        }

        // Belief source per vertex: its own region when present, else the
        // smallest containing region (then lexicographically least).
        let belief_region = (0..n)
            .map(|v| {
                memb[v]
                    .iter()
                    .copied()
                    .min_by_key(|&r| (vert_sets[r].len(), vert_sets[r].clone()))
            })
            .collect();

        let regions = vert_sets
            .into_iter()
            .enumerate()
            .map(|(r, verts)| Region {
                theta: theta_table(model, &verts),
                verts,
                m_set: std::mem::take(&mut m_sets[r]),
                count: count[r],
            })
            .collect();
        Ok(Self { n, regions, messages, memb, belief_region })
    }

    /// Damped synchronous parent-to-child iteration.
    fn iterate(&self, opts: &GbpOptions) -> (Vec<Vec<f64>>, bool, usize, f64) {
        let mut msgs: Vec<Vec<f64>> = self
            .messages
            .iter()
            .map(|m| vec![0.0; 1 << self.regions[m.child].verts.len()])
            .collect();
        let mut next = msgs.clone();
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        let mut converged = false;
        let mut iterations = 0;
        let mut final_delta = 0.0;

        'outer: for _ in 0..opts.max_iters {
            iterations += 1;
            let mut delta = 0.0f64;
            for (id, msg) in self.messages.iter().enumerate() {
                let parent = &self.regions[msg.parent];
                let child = &self.regions[msg.child];
                let new = &mut next[id];
                new.fill(f64::NEG_INFINITY);
                for ip in 0..parent.theta.len() {
                    let mut v = parent.theta[ip];
                    for (m, pos) in &msg.n_refs {
                        v += msgs[*m as usize][project(ip, pos)];
                    }
                    let ic = project(ip, &msg.keep);
                    new[ic] = lse(new[ic], v);
                }
                for (ic, entry) in new.iter_mut().enumerate() {
                    *entry -= child.theta[ic];
                    for (m, pos) in &msg.d_refs {
                        *entry -= msgs[*m as usize][project(ic, pos)];
                    }
                }
                let peak = new.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let old = &msgs[id];
                let mut peak2 = f64::NEG_INFINITY;
                for (e, &o) in new.iter_mut().zip(old.iter()) {
                    *e = (1.0 - opts.damping) * (*e - peak) + opts.damping * o;
                    peak2 = peak2.max(*e);
                }
                for (e, &o) in new.iter_mut().zip(old.iter()) {
                    *e -= peak2;
                    let change = (*e - o).abs();
                    if !change.is_finite() {
                        // Oscillation overflowed; stop and fall back to
                        // the best iterate instead of reporting the NaN
                        // table as a zero-change fixed point.
                        break 'outer;
                    }
                    delta = delta.max(change);
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
        (msgs, converged, iterations, final_delta)
    }

    /// Log-belief pair `[b(+1), b(-1)]` of one vertex.
    fn vertex_belief(&self, model: &GraphModel, msgs: &[Vec<f64>], v: usize) -> [f64; 2] {
        let Some(r) = self.belief_region[v] else {
            let h = model.vertex_weights()[v];
            return [h, -h];
        };
        let region = &self.regions[r];
        let mut table = region.theta.clone();
        for &m in &region.m_set {
            let child = self.messages[m as usize].child;
            let pos = positions(&self.regions[child].verts, &region.verts);
            for (idx, entry) in table.iter_mut().enumerate() {
                *entry += msgs[m as usize][project(idx, &pos)];
            }
        }
        let t = region.verts.iter().position(|&w| w as usize == v).expect("belief region");
        let mut b = [f64::NEG_INFINITY; 2];
        for (idx, &val) in table.iter().enumerate() {
            let side = (idx >> t) & 1;
            b[side] = lse(b[side], val);
        }
        b
    }
}

/// Generalized belief propagation over the plaquette closure of a square
/// grid with the given side. The model's edges must be a subset of the
/// grid's edges; vertices in no region fall back to field-only beliefs.
pub fn gbp_plaquette(
    model: &GraphModel,
    side: usize,
    opts: &GbpOptions,
) -> Result<GbpRun, MpError> {
    let graph = RegionGraph::build(model, side)?;
    let (msgs, converged, iterations, final_delta) = graph.iterate(opts);

    let mut marginals = Vec::with_capacity(graph.n);
    let mut values = Vec::with_capacity(graph.n);
    for v in 0..graph.n {
        let b = graph.vertex_belief(model, &msgs, v);
        let p = 1.0 / (1.0 + (b[1] - b[0]).exp());
        marginals.push(p);
        values.push(if p >= 0.5 { 1 } else { -1 });
    }
    Ok(GbpRun {
        assignment: Assignment::new(values).expect("signs are valid"),
        marginals,
        converged,
        iterations,
        final_delta,
    })
}
