/* C interface to aixilab. Generated by cbindgen; do not edit. */

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of one call.
 */
typedef enum AxStatus {
  AX_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  AX_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments failed validation: shapes, ranges, alphabets, or call order.
   */
  AX_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The conditioning history has probability zero under the model.
   */
  AX_STATUS_UNREACHABLE_HISTORY = 3,
  /**
   * No class member explains an observed percept.
   */
  AX_STATUS_CLASS_EXHAUSTED = 4,
  /**
   * A planning call exceeded its node budget.
   */
  AX_STATUS_BUDGET_EXHAUSTED = 5,
  /**
   * A failure that is not a usage error.
   */
  AX_STATUS_INTERNAL = 6,
} AxStatus;

/**
 * An interactive agent: mixture beliefs over a model class, a loss
 * matrix, a lookahead rule, and the history so far.
 */
typedef struct AxAgent AxAgent;

/**
 * A single chronological environment.
 */
typedef struct AxEnv AxEnv;

/**
 * A weighted finite set of candidate environments.
 */
typedef struct AxModelClass AxModelClass;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library as a static NUL-terminated string.
 */
const char *ax_version(void);

/**
 * Copies the message of the most recent failure on this thread into `buf`,
 * NUL-terminated and truncated to `cap` bytes. Returns the full message
 * length, excluding the terminator.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null.
 */
uintptr_t ax_last_error(char *buf, uintptr_t cap);

/**
 * Creates an action-free binary source emitting percept 1 with
 * probability `p`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AxStatus ax_env_new_bernoulli(double p, struct AxEnv **out);

/**
 * Creates a memoryless environment from `n_actions` rows of `n_percepts`
 * probabilities each; `rows` is row-major with one row per action.
 *
 * # Safety
 * `rows` must point to `n_actions * n_percepts` doubles; `out` must be a
 * valid pointer.
 */
enum AxStatus ax_env_new_table(const double *rows,
                               uintptr_t n_actions,
                               uintptr_t n_percepts,
                               struct AxEnv **out);

/**
 * Frees an environment. Null is ignored.
 *
 * # Safety
 * `env` must come from an `ax_env_new_*` call and not be freed twice.
 */
void ax_env_free(struct AxEnv *env);

/**
 * Checks that conditional rows are distributions on every history up to
 * `depth` cycles.
 *
 * # Safety
 * `env` must be a live handle.
 */
enum AxStatus ax_env_validate(const struct AxEnv *env, uintptr_t depth);

/**
 * Probability of observation `x` given `len` completed cycles (parallel
 * `actions` and `percepts` arrays) and the current action `y`.
 *
 * # Safety
 * `actions` and `percepts` must point to `len` entries each; `env` must be
 * a live handle; `out` must be a valid pointer.
 */
enum AxStatus ax_env_conditional(const struct AxEnv *env,
                                 const uint32_t *actions,
                                 const uint32_t *percepts,
                                 uintptr_t len,
                                 uint32_t y,
                                 uint32_t x,
                                 double *out);

/**
 * Creates a uniformly weighted model class by copying `len` environments.
 *
 * # Safety
 * `members` must point to `len` live handles; `out` must be valid.
 */
enum AxStatus ax_class_new_uniform(const struct AxEnv *const *members,
                                   uintptr_t len,
                                   struct AxModelClass **out);

/**
 * Number of members in a class.
 *
 * # Safety
 * `class` must be a live handle.
 */
uintptr_t ax_class_len(const struct AxModelClass *class_);

/**
 * Frees a model class. Null is ignored.
 *
 * # Safety
 * `class` must come from `ax_class_new_uniform` and not be freed twice.
 */
void ax_class_free(struct AxModelClass *class_);

/**
 * Creates an agent planning over the mixture of `class` against the loss
 * matrix `loss` (row-major, `n_percepts` rows of `n_actions` entries).
 * The agent lives for `cycles` interaction cycles and looks `window`
 * cycles ahead; `window = 0` plans to the end of life instead.
 *
 * # Safety
 * `class` must be live, `loss` must point to `n_percepts * n_actions`
 * doubles, and `out` must be valid.
 */
enum AxStatus ax_agent_new(const struct AxModelClass *class_,
                           const double *loss,
                           uintptr_t n_percepts,
                           uintptr_t n_actions,
                           uintptr_t cycles,
                           uintptr_t window,
                           struct AxAgent **out);

/**
 * Frees an agent. Null is ignored.
 *
 * # Safety
 * `agent` must come from `ax_agent_new` and not be freed twice.
 */
void ax_agent_free(struct AxAgent *agent);

/**
 * Plans and commits the next action. Fails if an action is already
 * pending or the agent's lifetime is over.
 *
 * # Safety
 * `agent` must be a live handle; `out_action` must be valid.
 */
enum AxStatus ax_agent_act(struct AxAgent *agent, uint32_t *out_action);

/**
 * Feeds the percept resolving the pending action, updates the posterior,
 * and reports the incurred loss through `out_loss` (which may be null).
 *
 * # Safety
 * `agent` must be a live handle; `out_loss` must be valid or null.
 */
enum AxStatus ax_agent_observe(struct AxAgent *agent, uint32_t percept, double *out_loss);

/**
 * Number of completed interaction cycles.
 *
 * # Safety
 * `agent` must be a live handle.
 */
uintptr_t ax_agent_cycles(const struct AxAgent *agent);

/**
 * Copies the posterior weights, in member order, into `out` (`cap`
 * entries). Fails if `cap` is smaller than the class.
 *
 * # Safety
 * `agent` must be a live handle; `out` must point to `cap` doubles.
 */
enum AxStatus ax_agent_posterior(const struct AxAgent *agent, double *out, uintptr_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
