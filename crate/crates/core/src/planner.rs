//! Finite-horizon expectimax: minimal expected cumulative loss under a known
//! environment or a mixture, an exhaustive policy-enumeration oracle to check
//! it against, a value-iteration cross-check for Markov laws, and the greedy
//! reduction test for passive problems.

use crate::env::{Env, LossMatrix, LossSpec, TableEnv};
use crate::error::{Error, Result};
use crate::predictor::PredictorPolicy;
use crate::scalar::Scalar;
use crate::types::{Action, HistoryTape, Percept};
use crate::util::bump;

/// Upper bound on `(percepts x actions)^depth` for the brute-force oracle.
const MAX_LEAVES: f64 = 1e6;
/// Upper bound on the number of enumerable policy tables.
const MAX_TABLES: f64 = (1u64 << 21) as f64;
/// Per-call ceiling on expanded search nodes; a deep fixed horizon aborts
/// with an error instead of grinding.
const MAX_PLAN_NODES: u64 = 1 << 20;

/// How far ahead the planner looks from cycle `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonMode {
    /// Plan all the way to the fixed lifetime `n`.
    Fixed,
    /// Look at most `window` cycles ahead (clipped at the lifetime end).
    Receding { window: usize },
}

/// Where per-cycle losses come from during planning.
#[derive(Debug, Clone)]
pub enum LossSource<S> {
    Explicit(LossSpec<S>),
    /// Read the loss level embedded in each percept.
    Embedded,
}

#[derive(Debug, Clone)]
pub struct PlannerConfig<S> {
    /// Total lifetime in cycles.
    pub total_cycles: usize,
    pub horizon: HorizonMode,
    pub loss: LossSource<S>,
}

impl<S: Scalar> PlannerConfig<S> {
    pub fn fixed(total_cycles: usize, loss: LossSource<S>) -> Self {
        Self {
            total_cycles,
            horizon: HorizonMode::Fixed,
            loss,
        }
    }

    pub fn receding(total_cycles: usize, window: usize, loss: LossSource<S>) -> Self {
        Self {
            total_cycles,
            horizon: HorizonMode::Receding { window },
            loss,
        }
    }

    pub fn validate(&self, spaces: &crate::types::Spaces) -> Result<()> {
        if self.total_cycles == 0 {
            return Err(Error::Config("planner lifetime must be >= 1".into()));
        }
        if let HorizonMode::Receding { window: 0 } = self.horizon {
            return Err(Error::Config("receding window must be >= 1".into()));
        }
        match &self.loss {
            LossSource::Embedded => {
                if spaces.loss_grid.is_none() {
                    return Err(Error::ShapeMismatch(
                        "embedded losses need a loss grid in the percept space".into(),
                    ));
                }
            }
            LossSource::Explicit(LossSpec::Matrix(m)) => {
                if m.n_percepts() != spaces.percept_count()
                    || m.n_actions() != spaces.actions.size()
                {
                    return Err(Error::ShapeMismatch(format!(
                        "loss matrix {}x{} does not fit {} percepts x {} actions",
                        m.n_percepts(),
                        m.n_actions(),
                        spaces.percept_count(),
                        spaces.actions.size()
                    )));
                }
            }
            LossSource::Explicit(LossSpec::Rule(_)) => {}
        }
        Ok(())
    }

    /// Number of cycles the planner considers from cycle `t`.
    pub fn depth_at(&self, t: usize) -> usize {
        let to_end = self.total_cycles + 1 - t;
        match self.horizon {
            HorizonMode::Fixed => to_end,
            HorizonMode::Receding { window } => window.min(to_end),
        }
    }
}

/// Root audit of one planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult<S> {
    pub action: Action,
    /// Minimal expected sum of losses over the planned depth.
    pub value: S,
    /// Expected sum of losses per root action, in action order.
    pub root_values: Vec<S>,
    /// Expectimax nodes expanded.
    pub nodes: u64,
}

fn check_call<S: Scalar, E: Env<S>>(
    env: &E,
    tape: &HistoryTape,
    cfg: &PlannerConfig<S>,
    t: usize,
    need_action: bool,
) -> Result<()> {
    cfg.validate(env.spaces())?;
    if tape.spaces() != env.spaces() {
        return Err(Error::ShapeMismatch(
            "history and environment alphabets differ".into(),
        ));
    }
    if tape.pending_action().is_some() {
        return Err(Error::ShapeMismatch(
            "planning chooses the action; the tape already holds one".into(),
        ));
    }
    let max_t = cfg.total_cycles + if need_action { 0 } else { 1 };
    if t == 0 || t > max_t {
        return Err(Error::CycleOutOfRange {
            index: t,
            len: max_t,
        });
    }
    if tape.len() != t - 1 {
        return Err(Error::ShapeMismatch(format!(
            "cycle {t} needs {} completed cycles, tape has {}",
            t - 1,
            tape.len()
        )));
    }
    Ok(())
}

struct Search<'a, S, E: Env<S>>
where
    S: Scalar,
{
    env: &'a E,
    cfg: &'a PlannerConfig<S>,
    percepts: Vec<Percept>,
    /// Completed cycles behind the node under evaluation: the real history
    /// followed by the hypothetical branch. Only history-dependent loss
    /// rules read it.
    stack: Vec<(Action, Percept)>,
    nodes: u64,
}

impl<'a, S: Scalar, E: Env<S>> Search<'a, S, E> {
    fn new(env: &'a E, cfg: &'a PlannerConfig<S>, tape: &HistoryTape) -> Self {
        Self {
            env,
            cfg,
            percepts: env.spaces().percepts(),
            stack: tape.cycles().to_vec(),
            nodes: 0,
        }
    }

    fn cycle_loss(&self, y: Action, x: Percept) -> Result<S> {
        match &self.cfg.loss {
            LossSource::Explicit(spec) => spec.eval(self.env.spaces(), &self.stack, y, x),
            LossSource::Embedded => {
                let grid = self.env.spaces().loss_grid.expect("validated");
                let level = x.loss_level.expect("checked by the percept space");
                grid.value(level)?;
                Ok(S::from_ratio(level as i64, (grid.levels() - 1) as i64))
            }
        }
    }

    /// Expected-loss-to-go per action, then the minimum of those.
    fn node_values(&mut self, ctx: &E::Ctx, depth: usize) -> Result<Vec<S>> {
        self.nodes += 1;
        if self.nodes > MAX_PLAN_NODES {
            return Err(Error::BudgetExhausted { nodes: self.nodes });
        }
        let n_actions = self.env.spaces().actions.size();
        let mut per_action = Vec::with_capacity(n_actions);
        for a in 0..n_actions {
            let y = Action(a);
            let mut terms = Vec::with_capacity(self.percepts.len());
            for i in 0..self.percepts.len() {
                let x = self.percepts[i];
                let p = self.env.step_prob(ctx, y, x)?;
                if p.is_zero() {
                    continue;
                }
                let loss = self.cycle_loss(y, x)?;
                let continuation = if depth > 1 {
                    let child = self.env.step_ctx(ctx, y, x)?;
                    self.stack.push((y, x));
                    let v = self.best(&child, depth - 1)?;
                    self.stack.pop();
                    v
                } else {
                    S::zero()
                };
                terms.push(p * (loss + continuation));
            }
            per_action.push(S::sum(terms.into_iter()));
        }
        Ok(per_action)
    }

    fn best(&mut self, ctx: &E::Ctx, depth: usize) -> Result<S> {
        let per_action = self.node_values(ctx, depth)?;
        Ok(min_value(per_action))
    }
}

fn min_value<S: Scalar>(values: Vec<S>) -> S {
    let mut best: Option<S> = None;
    for v in values {
        match &best {
            Some(b) if !(v < *b) => {}
            _ => best = Some(v),
        }
    }
    best.expect("at least one action")
}

fn argmin_value<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    best
}

/// Minimal expected sum of losses for cycles `t..` (up to the configured
/// depth), alternating a minimum over actions with an expectation over
/// percepts in chronological order. `t = total_cycles + 1` yields zero.
pub fn expectimax_value<S: Scalar, E: Env<S>>(
    env: &E,
    tape: &HistoryTape,
    cfg: &PlannerConfig<S>,
    t: usize,
) -> Result<S> {
    check_call(env, tape, cfg, t, false)?;
    let depth = cfg.depth_at(t);
    if depth == 0 {
        return Ok(S::zero());
    }
    let ctx = env.ctx_after(tape.cycles())?;
    Search::new(env, cfg, tape).best(&ctx, depth)
}

/// Chooses the action for cycle `t` and reports the per-root-action values.
pub fn select_action<S: Scalar, E: Env<S>>(
    env: &E,
    tape: &HistoryTape,
    cfg: &PlannerConfig<S>,
    t: usize,
) -> Result<PlanResult<S>> {
    check_call(env, tape, cfg, t, true)?;
    let depth = cfg.depth_at(t);
    let ctx = env.ctx_after(tape.cycles())?;
    let mut search = Search::new(env, cfg, tape);
    let root_values = search.node_values(&ctx, depth)?;
    let best = argmin_value(&root_values);
    Ok(PlanResult {
        action: Action(best),
        value: root_values[best].clone(),
        root_values,
        nodes: search.nodes,
    })
}

/// Addresses the decision nodes of a depth-`d` policy tree: one node per
/// percept history shorter than `d`, enumerated shortest-first and in
/// lexicographic percept order within a length.
#[derive(Debug, Clone)]
pub struct PolicyIndexer {
    percepts: usize,
    offsets: Vec<usize>,
    node_count: usize,
}

impl PolicyIndexer {
    pub fn new(percepts: usize, depth: usize) -> Self {
        let mut offsets = Vec::with_capacity(depth);
        let mut total = 0usize;
        let mut level = 1usize;
        for _ in 0..depth {
            offsets.push(total);
            total += level;
            level *= percepts;
        }
        Self {
            percepts,
            offsets,
            node_count: total,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Node id of the decision point after the given percept prefix.
    pub fn index(&self, prefix: &[usize]) -> usize {
        let mut pos = 0usize;
        for &d in prefix {
            pos = pos * self.percepts + d;
        }
        self.offsets[prefix.len()] + pos
    }
}

/// Expected sum of losses of one explicit policy table over the planned
/// depth, by full forward enumeration of percept paths. The table maps
/// [`PolicyIndexer`] node ids to action indices.
pub fn eval_policy_table<S: Scalar, E: Env<S>>(
    env: &E,
    tape: &HistoryTape,
    cfg: &PlannerConfig<S>,
    t: usize,
    table: &[usize],
) -> Result<S> {
    check_call(env, tape, cfg, t, true)?;
    let depth = cfg.depth_at(t);
    let percepts = env.spaces().percepts();
    let indexer = PolicyIndexer::new(percepts.len(), depth);
    if table.len() != indexer.node_count() {
        return Err(Error::ShapeMismatch(format!(
            "policy table has {} entries, tree has {} nodes",
            table.len(),
            indexer.node_count()
        )));
    }
    let root_ctx = env.ctx_after(tape.cycles())?;
    let base_len = tape.len();
    let mut stack: Vec<(Action, Percept)> = tape.cycles().to_vec();
    let eval_loss = |stack: &[(Action, Percept)], y: Action, x: Percept| -> Result<S> {
        match &cfg.loss {
            LossSource::Explicit(spec) => spec.eval(env.spaces(), stack, y, x),
            LossSource::Embedded => {
                let grid = env.spaces().loss_grid.expect("validated");
                let level = x.loss_level.expect("checked by the percept space");
                grid.value(level)?;
                Ok(S::from_ratio(level as i64, (grid.levels() - 1) as i64))
            }
        }
    };
    let mut terms = Vec::new();
    let mut path = vec![0usize; depth];
    loop {
        stack.truncate(base_len);
        let mut ctx = root_ctx.clone();
        let mut weight = S::one();
        let mut losses = Vec::with_capacity(depth);
        let mut dead = false;
        for k in 0..depth {
            let y = Action(table[indexer.index(&path[..k])]);
            let x = percepts[path[k]];
            let p = env.step_prob(&ctx, y, x)?;
            if p.is_zero() {
                dead = true;
                break;
            }
            weight = weight * p;
            losses.push(eval_loss(&stack, y, x)?);
            ctx = env.step_ctx(&ctx, y, x)?;
            stack.push((y, x));
        }
        if !dead {
            terms.push(weight * S::sum(losses.into_iter()));
        }
        if !bump(&mut path, percepts.len()) {
            break;
        }
    }
    Ok(S::sum(terms.into_iter()))
}

/// The expectimax policy spelled out as an explicit table: the planner is
/// re-run at every reachable node. Unreachable nodes keep action 0.
pub fn extract_expectimax_policy<S: Scalar, E: Env<S>>(
    env: &E,
    tape: &HistoryTape,
    cfg: &PlannerConfig<S>,
    t: usize,
) -> Result<Vec<usize>> {
    check_call(env, tape, cfg, t, true)?;
    let depth = cfg.depth_at(t);
    let percepts = env.spaces().percepts();
    let indexer = PolicyIndexer::new(percepts.len(), depth);
    let mut table = vec![0usize; indexer.node_count()];
    fn descend<S: Scalar, E: Env<S>>(
        env: &E,
        cfg: &PlannerConfig<S>,
        branch: &HistoryTape,
        t: usize,
        depth_left: usize,
        prefix: &mut Vec<usize>,
        indexer: &PolicyIndexer,
        percepts: &[Percept],
        table: &mut [usize],
    ) -> Result<()> {
        let res = select_action(env, branch, cfg, t)?;
        table[indexer.index(prefix)] = res.action.0;
        if depth_left > 1 {
            let ctx = env.ctx_after(branch.cycles())?;
            for (i, &x) in percepts.iter().enumerate() {
                if env.step_prob(&ctx, res.action, x)?.is_zero() {
                    continue;
                }
                let child = branch.append_cycle(res.action, x)?;
                prefix.push(i);
                descend(
                    env, cfg, &child, t + 1, depth_left - 1, prefix, indexer, percepts, table,
                )?;
                prefix.pop();
            }
        }
        Ok(())
    }
    descend(
        env,
        cfg,
        tape,
        t,
        depth,
        &mut Vec::new(),
        &indexer,
        &percepts,
        &mut table,
    )?;
    Ok(table)
}

/// Independent planning oracle: enumerates every deterministic policy table
/// for the remaining depth, evaluates each by forward summation, and returns
/// the minimum expected loss. Guarded against blowup.
pub fn brute_force_value<S: Scalar, E: Env<S>>(
    env: &E,
    tape: &HistoryTape,
    cfg: &PlannerConfig<S>,
    t: usize,
) -> Result<S> {
    check_call(env, tape, cfg, t, false)?;
    let depth = cfg.depth_at(t);
    if depth == 0 {
        return Ok(S::zero());
    }
    let spaces = env.spaces();
    let p_count = spaces.percept_count();
    let n_actions = spaces.actions.size();
    let leaves = ((p_count * n_actions) as f64).powi(depth as i32);
    if leaves > MAX_LEAVES {
        return Err(Error::InstanceTooLarge(format!(
            "{leaves:.0} leaves exceed the oracle bound {MAX_LEAVES:.0}"
        )));
    }
    let indexer = PolicyIndexer::new(p_count, depth);
    let tables = (n_actions as f64).powi(indexer.node_count() as i32);
    if tables > MAX_TABLES {
        return Err(Error::InstanceTooLarge(format!(
            "{tables:.0} policies exceed the oracle bound {MAX_TABLES:.0}"
        )));
    }
    let mut table = vec![0usize; indexer.node_count()];
    let mut best: Option<S> = None;
    loop {
        let v = eval_policy_table(env, tape, cfg, t, &table)?;
        match &best {
            Some(b) if !(v < *b) => {}
            _ => best = Some(v),
        }
        if !bump(&mut table, n_actions) {
            break;
        }
    }
    Ok(best.expect("at least one policy"))
}

/// Stage values of backward induction on a Markov law.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration<S> {
    /// `stages[k][s]`: minimal expected loss over `k` remaining cycles when
    /// the previous percept was `s`. `stages[0]` is all zeros.
    pub stages: Vec<Vec<S>>,
    /// Minimal expected loss over the full `n` cycles from an empty history.
    pub root: S,
}

/// Backward induction over the transition tensor of a Markov environment
/// with a per-(state, action) loss matrix. Fails on non-Markov laws.
pub fn value_iteration_mdp<S: Scalar>(
    env: &TableEnv<S>,
    loss: &LossMatrix<S>,
    n: usize,
) -> Result<ValueIteration<S>> {
    let (rows, initial) = env.markov_parts().ok_or_else(|| {
        Error::NotApplicable("value iteration needs a Markov law".into())
    })?;
    let states = rows.len();
    let n_actions = rows[0].len();
    if loss.n_percepts() != states || loss.n_actions() != n_actions {
        return Err(Error::ShapeMismatch(format!(
            "loss matrix {}x{} does not fit {states} states x {n_actions} actions",
            loss.n_percepts(),
            loss.n_actions()
        )));
    }
    let backup = |dist: &[S], cont: &[S]| -> Result<S> {
        let mut per_action = Vec::with_capacity(n_actions);
        for a in 0..n_actions {
            let terms: Result<Vec<S>> = dist
                .iter()
                .enumerate()
                .map(|(next, p)| Ok(p.clone() * (loss.get(next, Action(a))? + cont[next].clone())))
                .collect();
            per_action.push(S::sum(terms?.into_iter()));
        }
        Ok(min_value(per_action))
    };
    let mut stages = vec![vec![S::zero(); states]];
    for k in 1..n.max(1) {
        let prev = &stages[k - 1];
        let mut stage = Vec::with_capacity(states);
        for s in 0..states {
            let mut per_action = Vec::with_capacity(n_actions);
            for a in 0..n_actions {
                let terms: Result<Vec<S>> = rows[s][a]
                    .iter()
                    .enumerate()
                    .map(|(next, p)| {
                        Ok(p.clone() * (loss.get(next, Action(a))? + prev[next].clone()))
                    })
                    .collect();
                per_action.push(S::sum(terms?.into_iter()));
            }
            stage.push(min_value(per_action));
        }
        stages.push(stage);
    }
    let root = if n == 0 {
        S::zero()
    } else {
        backup(initial, &stages[n - 1])?
    };
    Ok(ValueIteration { stages, root })
}

/// Whether the first planned action always equals the one-step greedy choice
/// on an action-free environment with a per-cycle matrix loss, swept
/// exhaustively over every reachable history shorter than the lifetime.
pub fn greedy_reduction_check<E>(
    model: &E,
    loss: &LossMatrix<f64>,
    total_cycles: usize,
) -> Result<bool>
where
    E: Env<f64> + Clone,
{
    if !model.is_action_free() {
        return Err(Error::NotApplicable(
            "the greedy reduction needs an action-free environment".into(),
        ));
    }
    let cfg = PlannerConfig::fixed(
        total_cycles,
        LossSource::Explicit(LossSpec::Matrix(loss.clone())),
    );
    cfg.validate(model.spaces())?;
    let policy = PredictorPolicy::new(model.clone(), loss.clone())?;
    let percepts = model.spaces().percepts();
    let n_actions = model.spaces().actions.size();
    for len in 0..total_cycles {
        let mut combo = vec![0usize; len];
        loop {
            let mut fill = vec![0usize; len];
            loop {
                let mut tape = HistoryTape::new(model.spaces().clone());
                for (i, &pi) in combo.iter().enumerate() {
                    tape.push_cycle(Action(fill[i]), percepts[pi])?;
                }
                match model.ctx_after(tape.cycles()) {
                    Err(Error::UnreachableHistory { .. }) => {}
                    Err(e) => return Err(e),
                    Ok(ctx) => {
                        let planned = select_action(model, &tape, &cfg, len + 1)?.action;
                        let greedy = policy.bayes_action_at(&ctx)?;
                        if planned != greedy {
                            return Ok(false);
                        }
                    }
                }
                if !bump(&mut fill, n_actions) {
                    break;
                }
            }
            if !bump(&mut combo, percepts.len()) {
                break;
            }
        }
    }
    Ok(true)
}
