//! Rounding of relaxation states to assignments.
//!
//! [`sign_round`] reads vertex signs directly off the origin inner
//! products. [`clap`] alternates solving (a lift) with a projection phase
//! that promotes high-confidence vertex vectors onto the origin line,
//! starting at confidence 0.9 and stepping down by 0.1 until something
//! promotes. Pair vectors are never promoted on their own belief: a pair
//! is pinned to the product of its endpoint signs as soon as both
//! endpoints are pinned, which is the only value consistent with an
//! integral completion. When the ladder drops below 0.5 the remaining
//! vertices form a genuinely ambiguous core; small connected components
//! of that core are decoded exactly by conditional enumeration instead of
//! being batch-pinned on weak beliefs. A final greedy single-flip pass
//! polishes the assignment. Promoted slots stay fixed in later lifts, so
//! every round shrinks the active set and the loop terminates.

use crate::model::{Assignment, GraphModel, RegionCovering};
use crate::sdp::{
    residual_norm, sdp_objective, GramIndex, GramState, ReliableSet, Solver, SolverConfig,
    SolverError, SweepStats, SweepTrace,
};

/// Ladder level (in tenths) at which the exact tail decode is attempted
/// instead of batch-pinning weak beliefs.
const TAIL_TENTHS: u8 = 4;

/// Largest connected component of the ambiguous core that is decoded by
/// exhaustive conditional enumeration; larger components fall back to the
/// sign-pinning ladder.
const TAIL_COMPONENT_CAP: usize = 20;

/// Rounds every vertex to the sign of its origin inner product; an exact
/// zero rounds up.
pub fn sign_round(state: &GramState) -> Assignment {
    let n = state.index_set().num_vertices();
    let values = (1..=n)
        .map(|slot| if state.origin_dot(slot) >= 0.0 { 1 } else { -1 })
        .collect();
    Assignment::new(values).expect("signs are valid by construction")
}

/// Book-keeping of the projection ladder: which slots are pinned to a
/// sign of the origin vector, the current confidence threshold in tenths,
/// and the slots pinned by the most recent promotion scan.
#[derive(Debug, Clone)]
pub struct ClapState {
    fixed: Vec<Option<i8>>,
    confidence_tenths: u8,
    promotions: Vec<usize>,
}

impl ClapState {
    pub fn new(num_slots: usize) -> Self {
        Self { fixed: vec![None; num_slots], confidence_tenths: 9, promotions: Vec::new() }
    }

    pub fn confidence(&self) -> f64 {
        f64::from(self.confidence_tenths) / 10.0
    }

    pub fn confidence_tenths(&self) -> u8 {
        self.confidence_tenths
    }

    pub(crate) fn reset_confidence(&mut self) {
        self.confidence_tenths = 9;
    }

    /// Sign a slot is pinned to, if any.
    pub fn sign(&self, slot: usize) -> Option<i8> {
        self.fixed[slot]
    }

    /// Slots pinned by the most recent promotion scan.
    pub fn promotions(&self) -> &[usize] {
        &self.promotions
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed.iter().skip(1).filter(|s| s.is_some()).count()
    }

    pub fn all_fixed(&self) -> bool {
        self.fixed.iter().skip(1).all(|s| s.is_some())
    }

    pub fn reliable_set(&self) -> ReliableSet {
        let mut set = ReliableSet::none(self.fixed.len());
        for (slot, sign) in self.fixed.iter().enumerate().skip(1) {
            if sign.is_some() {
                set.fix(slot);
            }
        }
        set
    }

    fn pin(&mut self, state: &mut GramState, slot: usize, sign: i8) {
        state.assign_signed_origin(slot, sign);
        self.fixed[slot] = Some(sign);
        self.promotions.push(slot);
    }
}

/// One promotion scan: pins every free vertex slot whose origin inner
/// product strictly exceeds the confidence threshold in absolute value,
/// then pins every pair slot whose endpoints are both pinned to the
/// product of the endpoint signs. When the scan pins nothing the
/// confidence steps down one tenth (stopping at zero, where the caller
/// pins the remainder by sign).
///
/// Pair beliefs are deliberately not consulted: far from feasibility the
/// pair vectors track their local coupling reward rather than a
/// consistent second moment, so pinning them on their own belief commits
/// frustrated edges the wrong way.
pub fn promote(state: &mut GramState, clap_state: &mut ClapState) {
    clap_state.promotions.clear();
    let threshold = clap_state.confidence();
    let n = state.index_set().num_vertices();
    for slot in 1..=n {
        if clap_state.fixed[slot].is_some() {
            continue;
        }
        let ip = state.origin_dot(slot);
        if ip.abs() > threshold {
            clap_state.pin(state, slot, if ip >= 0.0 { 1 } else { -1 });
        }
    }
    derive_pair_pins(state, clap_state);
    if clap_state.promotions.is_empty() {
        clap_state.confidence_tenths = clap_state.confidence_tenths.saturating_sub(1);
    }
}

/// Pins every free pair slot whose endpoints are both pinned to the
/// product of the endpoint signs, the only value consistent with an
/// integral completion of the pinned vertices.
fn derive_pair_pins(state: &mut GramState, clap_state: &mut ClapState) {
    let n = state.index_set().num_vertices();
    for slot in (n + 1)..state.num_slots() {
        if clap_state.fixed[slot].is_some() {
            continue;
        }
        if let GramIndex::Pair(i, j) = state.index_set().index_of(slot) {
            let a = clap_state.fixed[1 + i as usize];
            let b = clap_state.fixed[1 + j as usize];
            if let (Some(a), Some(b)) = (a, b) {
                clap_state.pin(state, slot, a * b);
            }
        }
    }
}

/// Exactly decodes small connected components of the free-vertex core by
/// enumerating the conditional objective with all pinned vertices held
/// fixed. Components above [`TAIL_COMPONENT_CAP`] are left free.
fn tail_decode(state: &mut GramState, clap_state: &mut ClapState, model: &GraphModel) {
    let n = model.num_vertices();
    let free: Vec<u32> =
        (0..n as u32).filter(|&v| clap_state.fixed[1 + v as usize].is_none()).collect();
    if free.is_empty() {
        return;
    }
    let is_free = {
        let mut mask = vec![false; n];
        for &v in &free {
            mask[v as usize] = true;
        }
        mask
    };

    // Connected components of the free set under nonzero couplings.
    let mut component = vec![usize::MAX; n];
    let mut components: Vec<Vec<u32>> = Vec::new();
    for &start in &free {
        if component[start as usize] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut queue = vec![start];
        component[start as usize] = id;
        let mut members = Vec::new();
        while let Some(v) = queue.pop() {
            members.push(v);
            for &(u, w) in model.neighbors(v) {
                if w != 0.0 && is_free[u as usize] && component[u as usize] == usize::MAX {
                    component[u as usize] = id;
                    queue.push(u);
                }
            }
        }
        components.push(members);
    }

    for members in components {
        if members.len() > TAIL_COMPONENT_CAP {
            continue;
        }
        let k = members.len();
        let local: std::collections::HashMap<u32, usize> =
            members.iter().enumerate().map(|(l, &v)| (v, l)).collect();
        // Conditional fields absorb couplings to pinned vertices.
        let mut fields = vec![0.0f64; k];
        let mut couplings: Vec<(usize, usize, f64)> = Vec::new();
        for (l, &v) in members.iter().enumerate() {
            fields[l] = model.vertex_weights()[v as usize];
            for &(u, w) in model.neighbors(v) {
                if w == 0.0 {
                    continue;
                }
                if let Some(&m) = local.get(&u) {
                    if l < m {
                        couplings.push((l, m, w));
                    }
                } else if let Some(sign) = clap_state.fixed[1 + u as usize] {
                    fields[l] += w * f64::from(sign);
                }
            }
        }
        let mut best_mask = 0u32;
        let mut best_val = f64::NEG_INFINITY;
        for mask in 0u32..(1u32 << k) {
            let x = |l: usize| if mask >> l & 1 == 1 { 1.0 } else { -1.0 };
            let mut val = 0.0;
            for l in 0..k {
                val += fields[l] * x(l);
            }
            for &(a, b, w) in &couplings {
                val += w * x(a) * x(b);
            }
            if val > best_val {
                best_val = val;
                best_mask = mask;
            }
        }
        for (l, &v) in members.iter().enumerate() {
            let sign = if best_mask >> l & 1 == 1 { 1 } else { -1 };
            clap_state.pin(state, 1 + v as usize, sign);
        }
    }
    derive_pair_pins(state, clap_state);
}

/// Runs promotion scans down the confidence ladder until something pins.
/// When the ladder drops below 0.5 without promotions the ambiguous core
/// is decoded exactly (componentwise, up to a size cap); at confidence
/// zero every remaining free vertex is pinned to the sign of its origin
/// inner product (exact zeros round up) and pairs are derived.
pub(crate) fn project_phase(
    state: &mut GramState,
    clap_state: &mut ClapState,
    model: &GraphModel,
) {
    clap_state.reset_confidence();
    let mut tail_tried = false;
    loop {
        promote(state, clap_state);
        if !clap_state.promotions.is_empty() {
            return;
        }
        if clap_state.confidence_tenths <= TAIL_TENTHS && !tail_tried {
            tail_tried = true;
            tail_decode(state, clap_state, model);
            if !clap_state.promotions.is_empty() {
                return;
            }
        }
        if clap_state.confidence_tenths == 0 {
            let n = state.index_set().num_vertices();
            for slot in 1..=n {
                if clap_state.fixed[slot].is_none() {
                    let sign = if state.origin_dot(slot) >= 0.0 { 1 } else { -1 };
                    clap_state.pin(state, slot, sign);
                }
            }
            derive_pair_pins(state, clap_state);
            return;
        }
    }
}

/// Greedy single-flip ascent: flips any vertex whose flip strictly
/// improves the objective, sweeping until no improving flip remains.
/// Runs in O(degree) per flip via cached local fields.
pub fn greedy_flip_polish(model: &GraphModel, values: &mut [i8]) -> usize {
    let n = model.num_vertices();
    assert_eq!(values.len(), n);
    let x = |v: i8| f64::from(v);
    let mut fields: Vec<f64> = model.vertex_weights().to_vec();
    for i in 0..n {
        for &(j, w) in model.neighbors(i as u32) {
            fields[i] += w * x(values[j as usize]);
        }
    }
    let mut flips = 0usize;
    loop {
        let mut improved = false;
        for i in 0..n {
            let gain = -2.0 * x(values[i]) * fields[i];
            if gain > 1e-12 {
                values[i] = -values[i];
                flips += 1;
                improved = true;
                for &(j, w) in model.neighbors(i as u32) {
                    fields[j as usize] += 2.0 * w * x(values[i]);
                }
            }
        }
        if !improved {
            return flips;
        }
    }
}

/// Result of a full lift-and-project run.
#[derive(Debug, Clone)]
pub struct ClapRun {
    pub assignment: Assignment,
    /// Objective value of the rounded assignment on the model.
    pub objective: f64,
    /// Number of solve phases.
    pub lifts: usize,
    /// Total sweeps across all lifts.
    pub total_sweeps: usize,
    /// Equality residual norm of the final (fully pinned) state.
    pub final_residual: f64,
    /// Flips applied by the final greedy polish.
    pub polish_flips: usize,
    /// Concatenated sweep records with globally increasing numbering.
    pub trace: SweepTrace,
}

/// Confidence-laddered lift-and-project rounding.
///
/// Lifts run the solver in its soft regime regardless of the configured
/// solve mode: rounding quality depends on reaching the basin-insensitive
/// soft optimum, not on feasibility of the intermediate states. The final
/// fully pinned state is integral and hence feasible.
pub fn clap(
    model: &GraphModel,
    cov: &RegionCovering,
    config: &SolverConfig,
) -> Result<ClapRun, SolverError> {
    let lift_config = SolverConfig { mode: crate::sdp::SolveMode::Soft, ..config.clone() };
    let mut solver = Solver::new(model, cov, lift_config)?;
    let mut clap_state = ClapState::new(solver.state().num_slots());
    let mut trace = SweepTrace::new();
    let mut lifts = 0usize;

    loop {
        if config.reset_multipliers_between_lifts && lifts > 0 {
            solver.state_mut().reset_multipliers();
        }
        let reliables = clap_state.reliable_set();
        let outcome = solver.run(&reliables)?;
        lifts += 1;
        let offset = trace.len();
        trace.extend(outcome.trace.into_iter().map(|s| SweepStats {
            sweep: offset + s.sweep,
            ..s
        }));

        project_phase(solver.state_mut(), &mut clap_state, model);
        if clap_state.all_fixed() {
            break;
        }
    }

    let n = model.num_vertices();
    let mut values: Vec<i8> = (1..=n)
        .map(|slot| clap_state.sign(slot).expect("all slots pinned at termination"))
        .collect();
    let polish_flips = greedy_flip_polish(model, &mut values);
    let assignment = Assignment::new(values)?;
    let objective = model.objective_value(&assignment)?;
    let final_residual = residual_norm(solver.state(), solver.catalog());
    let total_sweeps = trace.len();
    debug_assert!(sdp_objective(solver.state(), model).is_finite());

    Ok(ClapRun {
        assignment,
        objective,
        lifts,
        total_sweeps,
        final_residual,
        polish_flips,
        trace,
    })
}
