/* Two-armed bandit against a mixture agent, via the C interface.
 *
 * Build from the repository root:
 *   cargo build --release -p aixilab-ffi
 *   cc crates/ffi/examples/demo.c -Icrates/ffi/include \
 *      target/release/libaixilab_ffi.a -lm -o demo
 */
#include <stdio.h>
#include <stdlib.h>

#include "aixilab.h"

static void check(AxStatus st, const char *what) {
    if (st != AX_STATUS_OK) {
        char msg[256];
        ax_last_error(msg, sizeof msg);
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)st, msg);
        exit(1);
    }
}

int main(void) {
    printf("aixilab %s\n", ax_version());

    /* candidate worlds, one row of observation probabilities per action:
     * world a makes arm 0 cheap, world b the reverse */
    const double world_a[4] = {0.8, 0.2, 0.2, 0.8};
    const double world_b[4] = {0.2, 0.8, 0.8, 0.2};
    AxEnv *envs[2] = {NULL, NULL};
    check(ax_env_new_table(world_a, 2, 2, &envs[0]), "env a");
    check(ax_env_new_table(world_b, 2, 2, &envs[1]), "env b");

    AxModelClass *class = NULL;
    const AxEnv *members[2] = {envs[0], envs[1]};
    check(ax_class_new_uniform(members, 2, &class), "class");
    ax_env_free(envs[0]);
    ax_env_free(envs[1]);

    /* observation 1 costs 1 under either action */
    const double costs[4] = {0.0, 0.0, 1.0, 1.0};
    AxAgent *agent = NULL;
    check(ax_agent_new(class, costs, 2, 2, 20, 2, &agent), "agent");
    ax_class_free(class);

    /* feed a deterministic stream matching world b's ordering */
    const unsigned truth_percept[2] = {1, 0}; /* arm 0 loses, arm 1 wins */
    double total = 0.0;
    for (int t = 1; t <= 20; t++) {
        uint32_t y = 0;
        double loss = 0.0;
        check(ax_agent_act(agent, &y), "act");
        check(ax_agent_observe(agent, truth_percept[y], &loss), "observe");
        total += loss;
        double w[2];
        check(ax_agent_posterior(agent, w, 2), "posterior");
        printf("cycle %2d  action %u  loss %.0f  posterior (%.3f, %.3f)\n",
               t, y, loss, w[0], w[1]);
    }
    printf("total loss %.0f over %zu cycles\n", total,
           ax_agent_cycles(agent));
    ax_agent_free(agent);
    return 0;
}
