//! Chronological environments.
//!
//! An environment is a conditional law over the next percept given the whole
//! interaction so far (all past percepts, all actions up to and including the
//! current one). Implementations expose a step interface around a cloneable
//! conditioning context so planners can branch on hypothetical futures
//! without replaying the history.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{Action, HistoryTape, HistoryViews, Percept, Spaces};

/// Row-normalization tolerance for conditional laws.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A chronological conditional distribution over percepts.
///
/// `Ctx` is an immutable snapshot of everything the law needs from the
/// history; `step_ctx` folds one completed cycle into it. Contexts reached
/// through zero-probability percepts carry no meaning and must not be fed
/// back in.
pub trait Env<S: Scalar> {
    type Ctx: Clone;

    fn spaces(&self) -> &Spaces;

    /// Context of the empty history.
    fn init_ctx(&self) -> Self::Ctx;

    /// Probability of percept `x` in the cycle that `ctx` conditions, given
    /// the current action `y`.
    fn step_prob(&self, ctx: &Self::Ctx, y: Action, x: Percept) -> Result<S>;

    /// Context after the cycle `(y, x)` completes.
    fn step_ctx(&self, ctx: &Self::Ctx, y: Action, x: Percept) -> Result<Self::Ctx>;

    /// True when conditionals provably ignore every action component.
    fn is_action_free(&self) -> bool {
        false
    }

    /// Context after a completed history, or an unreachable-history error if
    /// some prefix cycle has probability zero.
    fn ctx_after(&self, cycles: &[(Action, Percept)]) -> Result<Self::Ctx> {
        let mut ctx = self.init_ctx();
        for (i, &(y, x)) in cycles.iter().enumerate() {
            if self.step_prob(&ctx, y, x)?.is_zero() {
                return Err(Error::UnreachableHistory { cycle: i + 1 });
            }
            ctx = self.step_ctx(&ctx, y, x)?;
        }
        Ok(ctx)
    }

    /// `μ(x | x_{<t} y_{1:t})` for the views of some cycle `t`.
    fn conditional(&self, views: &HistoryViews, x: Percept) -> Result<S> {
        let past: Vec<(Action, Percept)> = views.past_cycles().collect();
        let ctx = self.ctx_after(&past)?;
        self.step_prob(&ctx, views.current_action(), x)
    }

    /// Joint probability of a percept sequence given an action sequence,
    /// i.e. the chain product of per-cycle conditionals. A zero factor makes
    /// the product zero without touching later cycles.
    fn joint(&self, percepts: &[Percept], actions: &[Action]) -> Result<S> {
        if percepts.len() != actions.len() {
            return Err(Error::ShapeMismatch(format!(
                "joint needs equal-length sequences, got {} percepts and {} actions",
                percepts.len(),
                actions.len()
            )));
        }
        let mut ctx = self.init_ctx();
        let mut prob = S::one();
        for (&x, &y) in percepts.iter().zip(actions) {
            let p = self.step_prob(&ctx, y, x)?;
            if p.is_zero() {
                return Ok(S::zero());
            }
            prob = prob * p;
            ctx = self.step_ctx(&ctx, y, x)?;
        }
        Ok(prob)
    }

    /// Draws the next percept from the conditional at `ctx`; deterministic
    /// given the generator state.
    fn sample_percept<R: Rng + ?Sized>(
        &self,
        ctx: &Self::Ctx,
        y: Action,
        rng: &mut R,
    ) -> Result<Percept> {
        let percepts = self.spaces().percepts();
        let mut probs = Vec::with_capacity(percepts.len());
        let mut total = 0.0;
        for &x in &percepts {
            let p = self.step_prob(ctx, y, x)?.to_f64();
            total += p;
            probs.push(p);
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::ModelInvalid(format!(
                "conditional row sums to {total}, not 1"
            )));
        }
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut last = None;
        for (&x, &p) in percepts.iter().zip(&probs) {
            if p == 0.0 {
                continue;
            }
            cum += p;
            last = Some(x);
            if u < cum {
                return Ok(x);
            }
        }
        // u fell into the rounding sliver past the last atom
        last.ok_or_else(|| Error::ModelInvalid("conditional row is all zero".into()))
    }

    /// Like [`sample_percept`](Self::sample_percept), but conditioning on a
    /// tape whose current cycle's action is already committed.
    fn sample_next<R: Rng + ?Sized>(&self, tape: &HistoryTape, rng: &mut R) -> Result<Percept> {
        let y = tape.pending_action().ok_or_else(|| {
            Error::ShapeMismatch("sampling needs a tape ending in an action".into())
        })?;
        let ctx = self.ctx_after(tape.cycles())?;
        self.sample_percept(&ctx, y, rng)
    }
}

/// Checks that every conditional row reachable within `depth` cycles
/// normalizes to 1 and stays in `[0,1]`.
pub fn validate_env<S: Scalar, E: Env<S>>(env: &E, depth: usize) -> Result<()> {
    fn go<S: Scalar, E: Env<S>>(env: &E, ctx: &E::Ctx, left: usize) -> Result<()> {
        let spaces = env.spaces();
        for y in 0..spaces.actions.size() {
            let y = Action(y);
            let mut row = Vec::with_capacity(spaces.percept_count());
            for x in spaces.percepts() {
                let p = env.step_prob(ctx, y, x)?;
                let pf = p.to_f64();
                if !(0.0..=1.0 + NORMALIZATION_TOL).contains(&pf) {
                    return Err(Error::ModelInvalid(format!(
                        "conditional probability {pf} outside [0,1]"
                    )));
                }
                row.push((x, p));
            }
            let total = S::sum(row.iter().map(|(_, p)| p.clone())).to_f64();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::ModelInvalid(format!(
                    "conditional row for action {y} sums to {total}"
                )));
            }
            if left > 0 {
                for (x, p) in row {
                    if p.is_zero() {
                        continue;
                    }
                    let next = env.step_ctx(ctx, y, x)?;
                    go(env, &next, left - 1)?;
                }
            }
        }
        Ok(())
    }
    go(env, &env.init_ctx(), depth.saturating_sub(1))
}

/// A time-invariant loss matrix `ℓ[x][y]` with entries in `[0,1]`, indexed
/// by the canonical percept index and the action index.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix<S> {
    entries: Vec<Vec<S>>,
}

impl<S: Scalar> LossMatrix<S> {
    pub fn new(entries: Vec<Vec<S>>) -> Result<Self> {
        if entries.is_empty() || entries[0].is_empty() {
            return Err(Error::ShapeMismatch("loss matrix must be non-empty".into()));
        }
        let width = entries[0].len();
        for row in &entries {
            if row.len() != width {
                return Err(Error::ShapeMismatch("ragged loss matrix".into()));
            }
            for v in row {
                if *v < S::zero() || *v > S::one() {
                    return Err(Error::ModelInvalid(format!(
                        "loss value {} outside [0,1]",
                        v.to_f64()
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// The symmetric 0-1 loss on a square percept/action pairing.
    pub fn zero_one(size: usize) -> Result<Self> {
        Self::new(
            (0..size)
                .map(|x| {
                    (0..size)
                        .map(|y| if x == y { S::zero() } else { S::one() })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn n_percepts(&self) -> usize {
        self.entries.len()
    }

    pub fn n_actions(&self) -> usize {
        self.entries[0].len()
    }

    pub fn get(&self, percept_index: usize, y: Action) -> Result<S> {
        self.entries
            .get(percept_index)
            .and_then(|row| row.get(y.0))
            .cloned()
            .ok_or_else(|| {
                Error::ShapeMismatch(format!(
                    "loss lookup ({percept_index},{y}) outside {}x{} matrix",
                    self.n_percepts(),
                    self.n_actions()
                ))
            })
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.entries
    }
}

/// Per-cycle loss function: either a time-invariant matrix over the current
/// `(percept, action)` pair or a callable law over the whole history.
#[derive(Clone)]
pub enum LossSpec<S> {
    Matrix(LossMatrix<S>),
    /// `rule(past, y, x)` returns the loss of the cycle `(y, x)` appended to
    /// the completed cycles `past`.
    Rule(Arc<dyn Fn(&[(Action, Percept)], Action, Percept) -> S + Send + Sync>),
}

impl<S: Scalar> LossSpec<S> {
    pub fn eval(
        &self,
        spaces: &Spaces,
        past: &[(Action, Percept)],
        y: Action,
        x: Percept,
    ) -> Result<S> {
        match self {
            LossSpec::Matrix(m) => m.get(spaces.flat_index(x)?, y),
            LossSpec::Rule(f) => Ok(f(past, y, x)),
        }
    }

    /// True when the loss needs the history beyond the current cycle.
    pub fn needs_history(&self) -> bool {
        matches!(self, LossSpec::Rule(_))
    }
}

impl<S> std::fmt::Debug for LossSpec<S>
where
    S: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossSpec::Matrix(m) => f.debug_tuple("Matrix").field(m).finish(),
            LossSpec::Rule(_) => f.write_str("Rule(<callable>)"),
        }
    }
}

/// The conditional laws backing the concrete table-driven environments.
#[derive(Debug, Clone, PartialEq)]
pub enum Law<S> {
    /// Action-free i.i.d. binary source: percept 1 with probability `p`.
    Bernoulli { p: S },
    /// Two-outcome arms with the loss bit embedded in the percept: after
    /// action `y`, percept `(1,1)` with probability `loss1[y]`, else `(0,0)`.
    BanditArms { loss1: Vec<S> },
    /// Memoryless action-conditioned table: `rows[y][obs]`.
    ActionTable { rows: Vec<Vec<S>> },
    /// Markov law `rows[prev][y][next]` with an initial distribution for the
    /// first cycle.
    Markov { rows: Vec<Vec<Vec<S>>>, initial: Vec<S> },
}

/// A concrete chronological environment driven by one of the [`Law`] tables.
///
/// The conditioning context is the previous percept (None on the first
/// cycle), which is all any of the laws consume.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEnv<S> {
    spaces: Spaces,
    law: Law<S>,
}

impl<S: Scalar> TableEnv<S> {
    /// Construction goes through the checked builders in
    /// [`crate::environments`]; this trusts its inputs' shapes.
    pub(crate) fn from_parts(spaces: Spaces, law: Law<S>) -> Self {
        Self { spaces, law }
    }

    pub fn law(&self) -> &Law<S> {
        &self.law
    }

    /// The Markov transition tensor `rows[prev][y][next]` and initial
    /// distribution, when this environment is Markov.
    pub fn markov_parts(&self) -> Option<(&Vec<Vec<Vec<S>>>, &Vec<S>)> {
        match &self.law {
            Law::Markov { rows, initial } => Some((rows, initial)),
            _ => None,
        }
    }
}

impl<S: Scalar> Env<S> for TableEnv<S> {
    type Ctx = Option<Percept>;

    fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    fn init_ctx(&self) -> Self::Ctx {
        None
    }

    fn step_prob(&self, ctx: &Self::Ctx, y: Action, x: Percept) -> Result<S> {
        self.spaces.check_action(y)?;
        self.spaces.check_percept(x)?;
        Ok(match &self.law {
            Law::Bernoulli { p } => {
                if x.obs == 1 {
                    p.clone()
                } else {
                    S::one() - p.clone()
                }
            }
            Law::BanditArms { loss1 } => {
                let q = loss1[y.0].clone();
                match (x.obs, x.loss_level) {
                    (1, Some(1)) => q,
                    (0, Some(0)) => S::one() - q,
                    _ => S::zero(),
                }
            }
            Law::ActionTable { rows } => rows[y.0][x.obs].clone(),
            Law::Markov { rows, initial } => match ctx {
                None => initial[x.obs].clone(),
                Some(prev) => rows[prev.obs][y.0][x.obs].clone(),
            },
        })
    }

    fn step_ctx(&self, _ctx: &Self::Ctx, _y: Action, x: Percept) -> Result<Self::Ctx> {
        Ok(Some(x))
    }

    fn is_action_free(&self) -> bool {
        match &self.law {
            Law::Bernoulli { .. } => true,
            Law::BanditArms { loss1 } => loss1.iter().all(|q| *q == loss1[0]),
            Law::ActionTable { rows } => rows.iter().all(|r| *r == rows[0]),
            Law::Markov { rows, .. } => rows.iter().all(|per_state| {
                per_state.iter().all(|r| *r == per_state[0])
            }),
        }
    }
}

/// Context of a loss-absorbing wrapper: the base context plus, when the loss
/// law needs it, the completed base-form history.
#[derive(Debug, Clone)]
pub struct AbsorbedCtx<C> {
    base: C,
    past: Option<Vec<(Action, Percept)>>,
}

/// Wraps a plain-percept environment so each percept carries its own loss:
/// the wrapped percept `(obs, level)` keeps the base probability of `obs`
/// when `level` encodes exactly the loss of this cycle, and drops to zero
/// otherwise.
pub struct AbsorbedEnv<E, S> {
    base: E,
    loss: LossSpec<S>,
    spaces: Spaces,
}

/// Builds the loss-in-percept form of `env` over a loss grid with `levels`
/// points. Every loss `loss` produces on reachable histories must land
/// exactly on the grid; the first mismatch surfaces as a discretization
/// error when that cycle is evaluated.
pub fn absorb_loss<S: Scalar, E: Env<S>>(
    env: E,
    loss: LossSpec<S>,
    levels: usize,
) -> Result<AbsorbedEnv<E, S>> {
    let base = env.spaces();
    if base.loss_grid.is_some() {
        return Err(Error::ShapeMismatch(
            "base environment already embeds losses".into(),
        ));
    }
    if let LossSpec::Matrix(m) = &loss {
        if m.n_percepts() != base.observations.size() || m.n_actions() != base.actions.size() {
            return Err(Error::ShapeMismatch(format!(
                "loss matrix {}x{} does not fit {} observations x {} actions",
                m.n_percepts(),
                m.n_actions(),
                base.observations.size(),
                base.actions.size()
            )));
        }
    }
    let spaces = Spaces::with_loss_grid(base.observations.size(), base.actions.size(), levels)?;
    Ok(AbsorbedEnv {
        spaces,
        base: env,
        loss,
    })
}

impl<S: Scalar, E: Env<S>> AbsorbedEnv<E, S> {
    pub fn base(&self) -> &E {
        &self.base
    }

    fn consistent_level(
        &self,
        ctx: &AbsorbedCtx<E::Ctx>,
        y: Action,
        obs: usize,
    ) -> Result<usize> {
        let empty = Vec::new();
        let past = ctx.past.as_ref().unwrap_or(&empty);
        let loss = self
            .loss
            .eval(self.base.spaces(), past, y, Percept::plain(obs))?;
        let grid = self.spaces.loss_grid.expect("absorbed spaces carry a grid");
        grid.level_of(loss.to_f64())
    }
}

impl<S: Scalar, E: Env<S>> Env<S> for AbsorbedEnv<E, S> {
    type Ctx = AbsorbedCtx<E::Ctx>;

    fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    fn init_ctx(&self) -> Self::Ctx {
        AbsorbedCtx {
            base: self.base.init_ctx(),
            past: self.loss.needs_history().then(Vec::new),
        }
    }

    fn step_prob(&self, ctx: &Self::Ctx, y: Action, x: Percept) -> Result<S> {
        self.spaces.check_action(y)?;
        self.spaces.check_percept(x)?;
        let base_p = self
            .base
            .step_prob(&ctx.base, y, Percept::plain(x.obs))?;
        if base_p.is_zero() {
            return Ok(S::zero());
        }
        if self.consistent_level(ctx, y, x.obs)? == x.loss_level.unwrap() {
            Ok(base_p)
        } else {
            Ok(S::zero())
        }
    }

    fn step_ctx(&self, ctx: &Self::Ctx, y: Action, x: Percept) -> Result<Self::Ctx> {
        let plain = Percept::plain(x.obs);
        let base = self.base.step_ctx(&ctx.base, y, plain)?;
        let past = ctx.past.as_ref().map(|p| {
            let mut p = p.clone();
            p.push((y, plain));
            p
        });
        Ok(AbsorbedCtx { base, past })
    }
}
