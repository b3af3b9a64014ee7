//! C interface over the core: opaque handles, integer status codes, and a
//! thread-local message describing the most recent failure.
//!
//! Every fallible call returns [`AxStatus`] and writes through its out
//! pointers only on success. Percepts cross the boundary as observation
//! indices; loss matrices as row-major buffers with one row per percept.

use std::cell::RefCell;
use std::ffi::c_char;
use std::slice;

use aixilab::environments::{make_action_table, make_bernoulli};
use aixilab::{
    select_action, validate_env, Action, Env, Error, HistoryTape, LossMatrix, LossSource,
    LossSpec, MixCtx, Mixture, ModelClass, Percept, PlannerConfig, TableEnv,
};

/// Status of one call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments failed validation: shapes, ranges, alphabets, or call order.
    InvalidArgument = 2,
    /// The conditioning history has probability zero under the model.
    UnreachableHistory = 3,
    /// No class member explains an observed percept.
    ClassExhausted = 4,
    /// A planning call exceeded its node budget.
    BudgetExhausted = 5,
    /// A failure that is not a usage error.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn fail(status: AxStatus, message: &str) -> AxStatus {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend_from_slice(message.as_bytes());
    });
    status
}

fn fail_error(err: Error) -> AxStatus {
    let status = match err {
        Error::UnreachableHistory { .. } => AxStatus::UnreachableHistory,
        Error::ClassExhausted => AxStatus::ClassExhausted,
        Error::BudgetExhausted { .. } => AxStatus::BudgetExhausted,
        Error::Io(_) | Error::Csv(_) => AxStatus::Internal,
        _ => AxStatus::InvalidArgument,
    };
    fail(status, &err.to_string())
}

/// A single chronological environment.
pub struct AxEnv(TableEnv<f64>);

/// A weighted finite set of candidate environments.
pub struct AxModelClass(ModelClass<TableEnv<f64>>);

/// An interactive agent: mixture beliefs over a model class, a loss
/// matrix, a lookahead rule, and the history so far.
pub struct AxAgent {
    mix: Mixture<TableEnv<f64>>,
    planner: PlannerConfig<f64>,
    loss: LossMatrix<f64>,
    tape: HistoryTape,
    ctx: MixCtx<Option<Percept>>,
}

/// Version of the library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ax_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the message of the most recent failure on this thread into `buf`,
/// NUL-terminated and truncated to `cap` bytes. Returns the full message
/// length, excluding the terminator.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn ax_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

unsafe fn read_slice<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(ptr, len))
    }
}

/// Creates an action-free binary source emitting percept 1 with
/// probability `p`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ax_env_new_bernoulli(p: f64, out: *mut *mut AxEnv) -> AxStatus {
    if out.is_null() {
        return fail(AxStatus::NullArgument, "out is null");
    }
    match make_bernoulli(p) {
        Ok(env) => {
            *out = Box::into_raw(Box::new(AxEnv(env)));
            AxStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Creates a memoryless environment from `n_actions` rows of `n_percepts`
/// probabilities each; `rows` is row-major with one row per action.
///
/// # Safety
/// `rows` must point to `n_actions * n_percepts` doubles; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ax_env_new_table(
    rows: *const f64,
    n_actions: usize,
    n_percepts: usize,
    out: *mut *mut AxEnv,
) -> AxStatus {
    if out.is_null() {
        return fail(AxStatus::NullArgument, "out is null");
    }
    let Some(flat) = read_slice(rows, n_actions.saturating_mul(n_percepts)) else {
        return fail(AxStatus::NullArgument, "rows is null");
    };
    if n_actions == 0 || n_percepts == 0 {
        return fail(AxStatus::InvalidArgument, "table must be non-empty");
    }
    let table: Vec<Vec<f64>> = flat.chunks(n_percepts).map(|r| r.to_vec()).collect();
    match make_action_table(table) {
        Ok(env) => {
            *out = Box::into_raw(Box::new(AxEnv(env)));
            AxStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Frees an environment. Null is ignored.
///
/// # Safety
/// `env` must come from an `ax_env_new_*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ax_env_free(env: *mut AxEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Checks that conditional rows are distributions on every history up to
/// `depth` cycles.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ax_env_validate(env: *const AxEnv, depth: usize) -> AxStatus {
    let Some(env) = env.as_ref() else {
        return fail(AxStatus::NullArgument, "env is null");
    };
    match validate_env(&env.0, depth) {
        Ok(()) => AxStatus::Ok,
        Err(e) => fail_error(e),
    }
}

/// Probability of observation `x` given `len` completed cycles (parallel
/// `actions` and `percepts` arrays) and the current action `y`.
///
/// # Safety
/// `actions` and `percepts` must point to `len` entries each; `env` must be
/// a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ax_env_conditional(
    env: *const AxEnv,
    actions: *const u32,
    percepts: *const u32,
    len: usize,
    y: u32,
    x: u32,
    out: *mut f64,
) -> AxStatus {
    let Some(env) = env.as_ref() else {
        return fail(AxStatus::NullArgument, "env is null");
    };
    if out.is_null() {
        return fail(AxStatus::NullArgument, "out is null");
    }
    let (Some(acts), Some(obs)) = (read_slice(actions, len), read_slice(percepts, len)) else {
        return fail(AxStatus::NullArgument, "history arrays are null");
    };
    let cycles: Vec<(Action, Percept)> = acts
        .iter()
        .zip(obs)
        .map(|(&a, &o)| (Action(a as usize), Percept::plain(o as usize)))
        .collect();
    let prob = env
        .0
        .ctx_after(&cycles)
        .and_then(|ctx| env.0.step_prob(&ctx, Action(y as usize), Percept::plain(x as usize)));
    match prob {
        Ok(p) => {
            *out = p;
            AxStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Creates a uniformly weighted model class by copying `len` environments.
///
/// # Safety
/// `members` must point to `len` live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ax_class_new_uniform(
    members: *const *const AxEnv,
    len: usize,
    out: *mut *mut AxModelClass,
) -> AxStatus {
    if out.is_null() {
        return fail(AxStatus::NullArgument, "out is null");
    }
    let Some(handles) = read_slice(members, len) else {
        return fail(AxStatus::NullArgument, "members is null");
    };
    let mut envs = Vec::with_capacity(len);
    for &h in handles {
        let Some(e) = h.as_ref() else {
            return fail(AxStatus::NullArgument, "a member handle is null");
        };
        envs.push(e.0.clone());
    }
    match ModelClass::uniform(envs) {
        Ok(class) => {
            *out = Box::into_raw(Box::new(AxModelClass(class)));
            AxStatus::Ok
        }
        Err(e) => fail_error(e),
    }
}

/// Number of members in a class.
///
/// # Safety
/// `class` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ax_class_len(class: *const AxModelClass) -> usize {
    class.as_ref().map_or(0, |c| c.0.len())
}

/// Frees a model class. Null is ignored.
///
/// # Safety
/// `class` must come from `ax_class_new_uniform` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ax_class_free(class: *mut AxModelClass) {
    if !class.is_null() {
        drop(Box::from_raw(class));
    }
}

/// Creates an agent planning over the mixture of `class` against the loss
/// matrix `loss` (row-major, `n_percepts` rows of `n_actions` entries).
/// The agent lives for `cycles` interaction cycles and looks `window`
/// cycles ahead; `window = 0` plans to the end of life instead.
///
/// # Safety
/// `class` must be live, `loss` must point to `n_percepts * n_actions`
/// doubles, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ax_agent_new(
    class: *const AxModelClass,
    loss: *const f64,
    n_percepts: usize,
    n_actions: usize,
    cycles: usize,
    window: usize,
    out: *mut *mut AxAgent,
) -> AxStatus {
    let Some(class) = class.as_ref() else {
        return fail(AxStatus::NullArgument, "class is null");
    };
    if out.is_null() {
        return fail(AxStatus::NullArgument, "out is null");
    }
    let Some(flat) = read_slice(loss, n_percepts.saturating_mul(n_actions)) else {
        return fail(AxStatus::NullArgument, "loss is null");
    };
    if n_percepts == 0 || n_actions == 0 {
        return fail(AxStatus::InvalidArgument, "loss matrix must be non-empty");
    }
    let entries: Vec<Vec<f64>> = flat.chunks(n_actions).map(|r| r.to_vec()).collect();
    let matrix = match LossMatrix::new(entries) {
        Ok(m) => m,
        Err(e) => return fail_error(e),
    };
    let mix = Mixture::new(class.0.clone());
    let planner = match window {
        0 => PlannerConfig::fixed(cycles, LossSource::Explicit(LossSpec::Matrix(matrix.clone()))),
        w => PlannerConfig::receding(
            cycles,
            w,
            LossSource::Explicit(LossSpec::Matrix(matrix.clone())),
        ),
    };
    if let Err(e) = planner.validate(mix.spaces()) {
        return fail_error(e);
    }
    let tape = HistoryTape::new(mix.spaces().clone());
    let ctx = mix.init_ctx();
    *out = Box::into_raw(Box::new(AxAgent {
        mix,
        planner,
        loss: matrix,
        tape,
        ctx,
    }));
    AxStatus::Ok
}

/// Frees an agent. Null is ignored.
///
/// # Safety
/// `agent` must come from `ax_agent_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ax_agent_free(agent: *mut AxAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Plans and commits the next action. Fails if an action is already
/// pending or the agent's lifetime is over.
///
/// # Safety
/// `agent` must be a live handle; `out_action` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ax_agent_act(agent: *mut AxAgent, out_action: *mut u32) -> AxStatus {
    let Some(agent) = agent.as_mut() else {
        return fail(AxStatus::NullArgument, "agent is null");
    };
    if out_action.is_null() {
        return fail(AxStatus::NullArgument, "out_action is null");
    }
    let t = agent.tape.len() + 1;
    let result = match select_action(&agent.mix, &agent.tape, &agent.planner, t) {
        Ok(r) => r,
        Err(e) => return fail_error(e),
    };
    if let Err(e) = agent.tape.begin_cycle(result.action) {
        return fail_error(e);
    }
    *out_action = result.action.0 as u32;
    AxStatus::Ok
}

/// Feeds the percept resolving the pending action, updates the posterior,
/// and reports the incurred loss through `out_loss` (which may be null).
///
/// # Safety
/// `agent` must be a live handle; `out_loss` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn ax_agent_observe(
    agent: *mut AxAgent,
    percept: u32,
    out_loss: *mut f64,
) -> AxStatus {
    let Some(agent) = agent.as_mut() else {
        return fail(AxStatus::NullArgument, "agent is null");
    };
    let Some(action) = agent.tape.pending_action() else {
        return fail(AxStatus::InvalidArgument, "no pending action to resolve");
    };
    let x = Percept::plain(percept as usize);
    let flat = match agent.mix.spaces().flat_index(x) {
        Ok(i) => i,
        Err(e) => return fail_error(e),
    };
    let loss = match agent.loss.get(flat, action) {
        Ok(l) => l,
        Err(e) => return fail_error(e),
    };
    let ctx = match agent.mix.step_ctx(&agent.ctx, action, x) {
        Ok(c) => c,
        Err(e) => return fail_error(e),
    };
    if let Err(e) = agent.tape.resolve_cycle(x) {
        return fail_error(e);
    }
    agent.ctx = ctx;
    if !out_loss.is_null() {
        *out_loss = loss;
    }
    AxStatus::Ok
}

/// Number of completed interaction cycles.
///
/// # Safety
/// `agent` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ax_agent_cycles(agent: *const AxAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.tape.len())
}

/// Copies the posterior weights, in member order, into `out` (`cap`
/// entries). Fails if `cap` is smaller than the class.
///
/// # Safety
/// `agent` must be a live handle; `out` must point to `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ax_agent_posterior(
    agent: *const AxAgent,
    out: *mut f64,
    cap: usize,
) -> AxStatus {
    let Some(agent) = agent.as_ref() else {
        return fail(AxStatus::NullArgument, "agent is null");
    };
    if out.is_null() {
        return fail(AxStatus::NullArgument, "out is null");
    }
    let weights = agent.ctx.weights();
    if cap < weights.len() {
        return fail(
            AxStatus::InvalidArgument,
            "buffer smaller than the model class",
        );
    }
    std::ptr::copy_nonoverlapping(weights.as_ptr(), out, weights.len());
    AxStatus::Ok
}
