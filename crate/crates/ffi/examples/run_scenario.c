/* Build: cargo build --release -p fairsim-ffi
 *        cc run_scenario.c -I../include ../../../target/release/libfairsim_ffi.a -lpthread -ldl -lm -o run_scenario
 */
#include <stdio.h>

#include "fairsim.h"

int main(int argc, char **argv) {
    const char *name = argc > 1 ? argv[1] : "port_offset_1ms";
    FsScenario *scenario = NULL;
    FsRun *run = NULL;
    uint64_t races = 0, eps = 0;

    if (fs_scenario_bundled(name, &scenario) != FS_STATUS_OK ||
        fs_run(scenario, 1, &run) != FS_STATUS_OK ||
        fs_run_race_count(run, &races) != FS_STATUS_OK ||
        fs_run_epsilon_at(run, 0.99, &eps) != FS_STATUS_OK) {
        fprintf(stderr, "error: %s\n", fs_last_error());
        fs_scenario_free(scenario);
        return 1;
    }
    printf("%s: %llu races, eps(0.99) = %llu ns\n", name, (unsigned long long)races, (unsigned long long)eps);
    fs_run_free(run);
    fs_scenario_free(scenario);
    return 0;
}
