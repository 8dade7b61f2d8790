use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{validate_covering, GraphModel, ModelError, RegionCovering};

use super::catalog::{compile_constraints, ConstraintCatalog};
use super::index::GramIndex;
use super::state::{init_state, residual_norm, sdp_objective, GramState};
use super::subproblem::{max_quadratic_on_sphere, LocalSystem};

/// How a run drives the constraint machinery.
///
/// Every run opens with a soft stage: a penalty-only solve at the small
/// weight `soft_rho` with the multipliers held at their current values
/// (zero on a fresh state). In this regime the problem is effectively
/// concave in moment space and block-coordinate ascent reaches the same
/// optimum from any random start, which is what makes the beliefs read
/// off the state trustworthy for rounding. Driving feasibility from the
/// start instead — a large penalty weight or early multiplier ascent —
/// commits the iterate to a basin within the first few sweeps, while the
/// penalty targets are still noise, and routinely lands on wrong corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// Stop after the soft stage, when the squared vector movement of a
    /// sweep falls to `movement_tol`. Used by the rounding lifts, which
    /// need trustworthy beliefs rather than feasibility: their final
    /// state is fully pinned and hence feasible by construction.
    Soft,
    /// After the soft stage, switch to multiplier ascent at the full
    /// weight `rho` — one unscaled step on every equality per sweep —
    /// until the progress measure (squared movement plus squared row
    /// residuals) falls to `tol`. Produces converged near-feasible states
    /// whose objective certifies the relaxation value.
    #[default]
    SoftThenConstrained,
}

/// Tuning knobs of the coordinate-ascent solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Dimension of the Gram vectors. Minimum 2.
    pub rank: usize,
    /// Weight of the quadratic constraint penalty in the constrained
    /// stage.
    pub rho: f64,
    /// Penalty weight of the soft stage.
    pub soft_rho: f64,
    /// Constrained-stage progress threshold: a sweep whose total squared
    /// vector movement plus squared pre-update row residuals falls to
    /// this value or below ends the run.
    pub tol: f64,
    /// Soft-stage movement threshold: a sweep whose total squared vector
    /// movement falls to this value or below ends the stage.
    pub movement_tol: f64,
    /// Hard cap on the number of sweeps of a run, both stages combined.
    pub max_sweeps: usize,
    /// Seed for the initial random unit vectors.
    pub seed: u64,
    /// Stage schedule of the run.
    pub mode: SolveMode,
    /// When set, rounding drops accumulated multipliers between lifts
    /// instead of warm-starting from the previous lift.
    pub reset_multipliers_between_lifts: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank: 10,
            rho: 1.0,
            soft_rho: 0.01,
            tol: 1e-4,
            movement_tol: 1e-8,
            max_sweeps: 500,
            seed: 0,
            mode: SolveMode::default(),
            reset_multipliers_between_lifts: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.rank < 2 {
            return Err(SolverError::RankTooSmall(self.rank));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(SolverError::InvalidConfig("penalty weight must be positive"));
        }
        if !(self.soft_rho.is_finite() && self.soft_rho > 0.0) {
            return Err(SolverError::InvalidConfig("soft penalty weight must be positive"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(SolverError::InvalidConfig("tolerance must be positive"));
        }
        if !(self.movement_tol.is_finite() && self.movement_tol > 0.0) {
            return Err(SolverError::InvalidConfig("movement tolerance must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(SolverError::InvalidConfig("at least one sweep is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("rank {0} is below the minimum of 2")]
    RankTooSmall(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("mismatched {0}")]
    StateMismatch(&'static str),
    #[error("sphere subproblem missed the unit norm by {deviation:.3e}")]
    SecularFailure { deviation: f64 },
    #[error("objective worsened over {streak} consecutive sweeps, last value {objective} at sweep {sweep}")]
    Diverged { sweep: usize, objective: f64, streak: usize },
    #[error("covering is unusable: {0}")]
    InvalidCovering(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-sweep progress record.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStats {
    pub sweep: usize,
    pub objective: f64,
    pub residual: f64,
    pub delta: f64,
}

pub type SweepTrace = Vec<SweepStats>;

/// Slots whose vectors are held fixed during sweeps. The origin vector is
/// always fixed and is not part of the count.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliableSet {
    fixed: Vec<bool>,
    count: usize,
}

impl ReliableSet {
    pub fn none(num_slots: usize) -> Self {
        Self { fixed: vec![false; num_slots], count: 0 }
    }

    pub fn fix(&mut self, slot: usize) {
        assert!(slot > 0, "the origin slot is implicitly fixed");
        if !self.fixed[slot] {
            self.fixed[slot] = true;
            self.count += 1;
        }
    }

    pub fn is_fixed(&self, slot: usize) -> bool {
        slot == 0 || self.fixed[slot]
    }

    pub fn num_fixed(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    /// True when every non-origin slot is fixed.
    pub fn all_fixed(&self) -> bool {
        self.count + 1 == self.fixed.len()
    }
}

/// Outcome of one run of sweeps.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: SweepTrace,
    pub converged: bool,
}

/// Outcome of a standalone solve: the final state plus the trace.
#[derive(Debug, Clone)]
pub struct PartialSosOutcome {
    pub state: GramState,
    pub trace: SweepTrace,
    pub converged: bool,
}

/// Consecutive strictly-worsening sweeps tolerated before the run aborts.
const DIVERGENCE_STREAK: usize = 50;

/// The coordinate-ascent solver: a compiled catalog, the evolving state,
/// and the model, kept together so repeated runs (as in rounding) warm
/// start from the previous vectors and multipliers.
#[derive(Debug, Clone)]
pub struct Solver<'m> {
    model: &'m GraphModel,
    catalog: ConstraintCatalog,
    config: SolverConfig,
    state: GramState,
}

impl<'m> Solver<'m> {
    pub fn new(
        model: &'m GraphModel,
        cov: &RegionCovering,
        config: SolverConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        check_covering(model, cov)?;
        let catalog = compile_constraints(cov, model.num_vertices());
        let state = init_state(cov, model, &config)?;
        Ok(Self { model, catalog, config, state })
    }

    /// Builds a solver around an existing state, e.g. one loaded from a
    /// file or carried over from an earlier solve.
    pub fn with_state(
        model: &'m GraphModel,
        cov: &RegionCovering,
        config: SolverConfig,
        state: GramState,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        check_covering(model, cov)?;
        let catalog = compile_constraints(cov, model.num_vertices());
        if state.index_set().as_ref() != catalog.index_set().as_ref() {
            return Err(SolverError::StateMismatch("index sets of state and covering"));
        }
        if !state.multipliers().is_empty() && state.multipliers().len() != catalog.len() {
            return Err(SolverError::StateMismatch("multiplier count"));
        }
        Ok(Self { model, catalog, config, state })
    }

    pub fn model(&self) -> &GraphModel {
        self.model
    }

    pub fn catalog(&self) -> &ConstraintCatalog {
        &self.catalog
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn state(&self) -> &GramState {
        &self.state
    }
    // Temporary calibration override; restore pub(crate) before release.

    pub fn state_mut(&mut self) -> &mut GramState {
        &mut self.state
    }

    pub fn into_state(self) -> GramState {
        self.state
    }

    pub fn objective(&self) -> f64 {
        sdp_objective(&self.state, self.model)
    }

    pub fn residual(&self) -> f64 {
        residual_norm(&self.state, &self.catalog)
    }

    /// Runs sweeps until the active stage's progress measure drops to its
    /// tolerance or the sweep cap is reached. Every non-fixed slot is
    /// updated once per sweep in canonical order. The run opens in the
    /// soft stage (see [`SolveMode`]); in [`SolveMode::SoftThenConstrained`]
    /// it then switches to multiplier ascent, stepping every equality once
    /// per sweep so each block subproblem aims at a fixed Lagrangian for
    /// the whole pass.
    pub fn run(&mut self, reliables: &ReliableSet) -> Result<RunOutcome, SolverError> {
        let num_slots = self.state.num_slots();
        if reliables.len() != num_slots {
            return Err(SolverError::StateMismatch("reliable set size"));
        }
        let catalog_len = self.catalog.len();
        self.state.multipliers_mut().resize(catalog_len, 0.0);

        let rank = self.state.rank();
        let mut g = vec![0.0; rank];
        let mut old = vec![0.0; rank];
        let mut h = DMatrix::zeros(rank, rank);

        let mut trace = SweepTrace::new();
        let mut converged = false;
        let mut prev_objective = f64::NEG_INFINITY;
        let mut worsening_streak = 0usize;
        let mut streak_start_objective = f64::NEG_INFINITY;
        let mut soft_stage = true;

        for sweep in 1..=self.config.max_sweeps {
            let current_rho =
                if soft_stage { self.config.soft_rho } else { self.config.rho };
            let mut delta = 0.0;
            let mut movement = 0.0;
            for slot in 1..num_slots {
                if reliables.is_fixed(slot) {
                    continue;
                }
                let (moved, res_old) = update_slot_vector(
                    &self.catalog,
                    &mut self.state,
                    self.model,
                    current_rho,
                    slot,
                    &mut g,
                    &mut old,
                    &mut h,
                )?;
                movement += moved;
                delta += moved + res_old;
            }
            if !soft_stage {
                step_multipliers(&self.catalog, &mut self.state);
            }
            let objective = sdp_objective(&self.state, self.model);
            if !objective.is_finite() {
                return Err(SolverError::NonFinite("sweep objective"));
            }
            let residual = residual_norm(&self.state, &self.catalog);
            trace.push(SweepStats { sweep, objective, residual, delta });

            if soft_stage {
                // The soft stage maximizes a fixed objective, so apart
                // from floating-point noise it is monotone: a long streak
                // of strictly worsening sweeps that together amount to a
                // large fall is a blow-up.
                let noise = 1e-12 * (1.0 + prev_objective.abs());
                if sweep > 1 && objective < prev_objective - noise {
                    if worsening_streak == 0 {
                        streak_start_objective = prev_objective;
                    }
                    worsening_streak += 1;
                    let fall = streak_start_objective - objective;
                    if worsening_streak >= DIVERGENCE_STREAK
                        && fall > 0.25 * (1.0 + streak_start_objective.abs())
                    {
                        return Err(SolverError::Diverged {
                            sweep,
                            objective,
                            streak: worsening_streak,
                        });
                    }
                } else {
                    worsening_streak = 0;
                }
            } else if residual > 1e6 {
                // The constrained stage legitimately lowers the objective
                // while paying for feasibility, so divergence is detected
                // on the residual instead.
                return Err(SolverError::Diverged {
                    sweep,
                    objective,
                    streak: worsening_streak,
                });
            }
            prev_objective = objective;

            if soft_stage {
                if movement <= self.config.movement_tol {
                    match self.config.mode {
                        SolveMode::Soft => {
                            converged = true;
                            break;
                        }
                        SolveMode::SoftThenConstrained => soft_stage = false,
                    }
                }
            } else if delta <= self.config.tol {
                converged = true;
                break;
            }
        }
        Ok(RunOutcome { trace, converged })
    }
}

/// The vector half of one coordinate update: replaces the slot's Gram
/// vector with the exact maximizer of its local subproblem under the
/// current multipliers, leaving the multipliers untouched. Returns the
/// squared vector movement and the squared pre-update row residuals.
#[allow(clippy::too_many_arguments)]
fn update_slot_vector(
    catalog: &ConstraintCatalog,
    state: &mut GramState,
    model: &GraphModel,
    rho: f64,
    slot: usize,
    g: &mut [f64],
    old: &mut [f64],
    h: &mut DMatrix<f64>,
) -> Result<(f64, f64), SolverError> {
    let rank = state.rank();
    fill_objective_gradient(state, model, slot, g);
    old.copy_from_slice(state.vector(slot));

    let degree = catalog.degree(slot);
    let mut res_old = 0.0;
    let new = if degree == 0 {
        // No consistency rows: the maximizer is the normalized gradient.
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = DVector::from_column_slice(g);
        if norm == 0.0 {
            v.fill(0.0);
            v[0] = 1.0;
        } else {
            v /= norm;
        }
        v
    } else {
        h.fill(0.0);
        for row in catalog.rows_for(slot) {
            let target = state.dot(row.other0 as usize, row.other1 as usize);
            let lam = row.sign * state.multipliers()[row.eq as usize];
            let coef = rho * (target - lam);
            let partner = state.vector(row.partner as usize);
            let mut r = -target;
            for k in 0..rank {
                let pk = partner[k];
                g[k] += coef * pk;
                r += old[k] * pk;
                let hk = rho * pk;
                for l in 0..=k {
                    h[(k, l)] += hk * partner[l];
                }
            }
            res_old += r * r;
        }
        for k in 0..rank {
            for l in k + 1..rank {
                h[(k, l)] = h[(l, k)];
            }
        }
        max_quadratic_on_sphere(h.clone(), DVector::from_column_slice(g))?
    };

    let movement: f64 = new.iter().zip(old.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let stored = state.vector_mut(slot);
    stored.copy_from_slice(new.as_slice());
    // Exponentially decayed components eventually reach the denormal
    // range, where products underflow and arithmetic slows down; they are
    // dead weight either way, so flush them.
    for v in stored.iter_mut() {
        if v.abs() < 1e-250 {
            *v = 0.0;
        }
    }

    Ok((movement, res_old))
}

/// The multiplier ascent step: one unscaled ascent step on every
/// equality, using the residuals of the fully swept vectors. Stepping
/// once per sweep keeps each block subproblem aimed at a fixed Lagrangian
/// for the whole pass, which is what makes the coordinate ascent settle.
fn step_multipliers(catalog: &ConstraintCatalog, state: &mut GramState) {
    for eq in 0..catalog.len() {
        let [a, b, c, d] = catalog.slots(eq);
        let r = state.dot(a as usize, b as usize) - state.dot(c as usize, d as usize);
        state.multipliers_mut()[eq] += r;
    }
}

/// Linear objective term of one slot: for a vertex, the weighted sum of
/// its model neighbors plus its field against the origin; for a covered
/// pair, the coupling (zero when the pair is not a model edge) against
/// the origin plus the cross field terms.
fn fill_objective_gradient(state: &GramState, model: &GraphModel, slot: usize, out: &mut [f64]) {
    let rank = state.rank();
    out.fill(0.0);
    let index = state.index_set();
    match index.index_of(slot) {
        GramIndex::Origin => unreachable!("the origin vector is never updated"),
        GramIndex::Vertex(i) => {
            for &(j, w) in model.neighbors(i) {
                let vj = state.vector(1 + j as usize);
                for k in 0..rank {
                    out[k] += w * vj[k];
                }
            }
            let field = model.vertex_weights()[i as usize];
            if field != 0.0 {
                let origin = state.vector(0);
                for k in 0..rank {
                    out[k] += field * origin[k];
                }
            }
        }
        GramIndex::Pair(i, j) => {
            let coupling = model.edge_weight(i, j).unwrap_or(0.0);
            if coupling != 0.0 {
                let origin = state.vector(0);
                for k in 0..rank {
                    out[k] += coupling * origin[k];
                }
            }
            let fi = model.vertex_weights()[i as usize];
            if fi != 0.0 {
                let vj = state.vector(1 + j as usize);
                for k in 0..rank {
                    out[k] += fi * vj[k];
                }
            }
            let fj = model.vertex_weights()[j as usize];
            if fj != 0.0 {
                let vi = state.vector(1 + i as usize);
                for k in 0..rank {
                    out[k] += fj * vi[k];
                }
            }
        }
    }
}

/// Builds the full local system of one Gram index, in the same row order
/// the sweep uses. Exposed for inspection and for cross-checking the
/// in-place update path.
pub fn assemble_local(
    state: &GramState,
    catalog: &ConstraintCatalog,
    model: &GraphModel,
    target: GramIndex,
) -> Result<LocalSystem, SolverError> {
    let index = state.index_set();
    let slot = index
        .slot(target)
        .ok_or(SolverError::StateMismatch("index not present in state"))?;
    if slot == 0 {
        return Err(SolverError::StateMismatch("the origin has no local system"));
    }
    if !state.multipliers().is_empty() && state.multipliers().len() != catalog.len() {
        return Err(SolverError::StateMismatch("multiplier count"));
    }
    let rank = state.rank();
    let mut c = vec![0.0; rank];
    fill_objective_gradient(state, model, slot, &mut c);

    let m = catalog.degree(slot);
    let mut a = DMatrix::zeros(m, rank);
    let mut b = DVector::zeros(m);
    let mut lambda = DVector::zeros(m);
    for (r, row) in catalog.rows_for(slot).enumerate() {
        a.row_mut(r).copy_from_slice(state.vector(row.partner as usize));
        b[r] = state.dot(row.other0 as usize, row.other1 as usize);
        lambda[r] = row.sign
            * state.multipliers().get(row.eq as usize).copied().unwrap_or(0.0);
    }
    Ok(LocalSystem { a, b, c: DVector::from_vec(c), lambda })
}

fn check_covering(model: &GraphModel, cov: &RegionCovering) -> Result<(), SolverError> {
    let report = validate_covering(model, cov);
    // Uncovered edges are allowed: such pairs simply get no lifted vector
    // (degree-2 relaxations run on a vertex covering). Unknown or missing
    // vertices are not.
    if !report.out_of_range.is_empty() {
        return Err(SolverError::InvalidCovering(format!(
            "{} region vertices out of range",
            report.out_of_range.len()
        )));
    }
    if !report.uncovered_vertices.is_empty() {
        return Err(SolverError::InvalidCovering(format!(
            "{} vertices not covered by any region",
            report.uncovered_vertices.len()
        )));
    }
    Ok(())
}

/// Runs coordinate-ascent sweeps and returns the final state with its
/// trace. `init` defaults to the seeded random state and `reliables` to
/// nothing fixed.
pub fn partial_sos(
    model: &GraphModel,
    cov: &RegionCovering,
    config: &SolverConfig,
    init: Option<GramState>,
    reliables: Option<&ReliableSet>,
) -> Result<PartialSosOutcome, SolverError> {
    let mut solver = match init {
        Some(state) => Solver::with_state(model, cov, config.clone(), state)?,
        None => Solver::new(model, cov, config.clone())?,
    };
    let default_reliables;
    let reliables = match reliables {
        Some(r) => r,
        None => {
            default_reliables = ReliableSet::none(solver.state().num_slots());
            &default_reliables
        }
    };
    let outcome = solver.run(reliables)?;
    Ok(PartialSosOutcome {
        state: solver.into_state(),
        trace: outcome.trace,
        converged: outcome.converged,
    })
}
