/* Ingest a fixture and print the state rankings.
 *   cc smoke.c -Iinclude -Ltarget/debug -lflowres_ffi -o smoke
 *   ./smoke regions.csv codes.csv flows.csv [adjacency.csv]
 */
#include <stdio.h>

#include "flowres.h"

int main(int argc, char **argv) {
    if (argc < 4) {
        fprintf(stderr, "usage: %s regions.csv codes.csv flows.csv [adjacency.csv]\n", argv[0]);
        return 2;
    }
    FlowresWorkspace *ws = NULL;
    FlowresStatus status = flowres_workspace_ingest(argv[1], argv[2], argv[3], argc > 4 ? argv[4] : NULL, NULL, &ws);
    if (status != FLOWRES_STATUS_OK) {
        fprintf(stderr, "ingest failed (%d): %s\n", status, flowres_last_error());
        return 1;
    }
    FlowresParams params = flowres_params_default();
    char *csv = NULL;
    status = flowres_rankings_csv(ws, 2017, FLOWRES_LEVEL_STATE, FLOWRES_DIRECTION_EXPORT, FLOWRES_RANK_BY_INFLUENCE,
                                  &params, &csv);
    if (status == FLOWRES_STATUS_OK) {
        fputs(csv, stdout);
        flowres_string_free(csv);
    } else {
        fprintf(stderr, "ranking failed (%d): %s\n", status, flowres_last_error());
    }
    flowres_workspace_free(ws);
    return status == FLOWRES_STATUS_OK ? 0 : 1;
}
