#ifndef FLOWRES_H
#define FLOWRES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FlowresStatus {
  FLOWRES_STATUS_OK = 0,
  FLOWRES_STATUS_NULL_ARGUMENT = 1,
  FLOWRES_STATUS_INVALID_ARGUMENT = 2,
  FLOWRES_STATUS_IO = 3,
  FLOWRES_STATUS_PARSE = 4,
  /**
   * Referential or hierarchy violation in the input data.
   */
  FLOWRES_STATUS_INTEGRITY = 5,
  /**
   * No flows match the requested year, level or node.
   */
  FLOWRES_STATUS_EMPTY_SELECTION = 6,
  /**
   * All influence values are zero.
   */
  FLOWRES_STATUS_DEGENERATE = 7,
  FLOWRES_STATUS_INTERNAL = 8,
} FlowresStatus;

typedef enum FlowresLevel {
  FLOWRES_LEVEL_STATE = 0,
  FLOWRES_LEVEL_DIVISION = 1,
  FLOWRES_LEVEL_REGION = 2,
} FlowresLevel;

typedef enum FlowresDirection {
  FLOWRES_DIRECTION_IMPORT = 0,
  FLOWRES_DIRECTION_EXPORT = 1,
} FlowresDirection;

typedef enum FlowresRankBy {
  FLOWRES_RANK_BY_RESILIENCE = 0,
  FLOWRES_RANK_BY_INFLUENCE = 1,
} FlowresRankBy;

/**
 * Opaque handle to a loaded workspace.
 */
typedef struct FlowresWorkspace FlowresWorkspace;

typedef struct FlowresParams {
  /**
   * Divide by sqrt(ATM) when true, otherwise ignore mileage.
   */
  bool atm_sqrt;
  /**
   * Discount for flows between adjacent regions, in (0, 1].
   */
  double ga_factor;
  /**
   * Treat a self-flow as adjacent to itself.
   */
  bool self_flow_adjacent;
  bool include_self_flows;
} FlowresParams;

typedef struct FlowresNodeResilience {
  double resilience;
  double influence;
  /**
   * Adjusted value in millions of dollars.
   */
  double total_adjusted;
} FlowresNodeResilience;

typedef struct FlowresNetworkResilience {
  double import_resilience;
  double export_resilience;
  double overall;
} FlowresNetworkResilience;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *flowres_last_error(void);

/**
 * Defaults: sqrt mileage, ga 0.9, self-flows adjacent and included.
 */
struct FlowresParams flowres_params_default(void);

/**
 * Ingests CSV inputs into a new workspace. `adjacency` and `geojson` may be null.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum FlowresStatus flowres_workspace_ingest(const char *regions,
                                            const char *codes,
                                            const char *flows,
                                            const char *adjacency,
                                            const char *geojson,
                                            struct FlowresWorkspace **out_ws);

/**
 * # Safety
 * `dir` must be NUL-terminated; `out` must be writable.
 */
enum FlowresStatus flowres_workspace_load(const char *dir, struct FlowresWorkspace **out_ws);

/**
 * # Safety
 * `ws` must come from this library; `dir` must be NUL-terminated.
 */
enum FlowresStatus flowres_workspace_save(const struct FlowresWorkspace *ws, const char *dir);

/**
 * Number of stored flows at every level, or 0 for a null handle.
 *
 * # Safety
 * `ws` must be null or come from this library.
 */
size_t flowres_workspace_flow_count(const struct FlowresWorkspace *ws);

/**
 * # Safety
 * `ws` must be null or come from this library, and not be used afterwards.
 */
void flowres_workspace_free(struct FlowresWorkspace *ws);

/**
 * Distance- and adjacency-adjusted value of one flow. A null `params` means defaults.
 *
 * # Safety
 * `params` must be null or valid; `out` must be writable.
 */
enum FlowresStatus flowres_adjusted_value(double value,
                                          double avg_mileage,
                                          bool adjacent,
                                          const struct FlowresParams *params_ptr,
                                          double *out_value);

/**
 * Resilience and influence of one node in the view for `year`, `level` and `direction`.
 *
 * # Safety
 * Pointers must be valid as documented for the other calls.
 */
enum FlowresStatus flowres_node_resilience(const struct FlowresWorkspace *ws,
                                           int32_t year,
                                           enum FlowresLevel lvl,
                                           enum FlowresDirection dir,
                                           const char *node,
                                           const struct FlowresParams *params_ptr,
                                           struct FlowresNodeResilience *out_node);

/**
 * Import, export and overall network resilience for one year and level.
 *
 * # Safety
 * Pointers must be valid as documented for the other calls.
 */
enum FlowresStatus flowres_network_resilience(const struct FlowresWorkspace *ws,
                                              int32_t year,
                                              enum FlowresLevel lvl,
                                              const struct FlowresParams *params_ptr,
                                              struct FlowresNetworkResilience *out_net);

/**
 * Ranked nodes as CSV (`node_id,name,R,V_prime,I`). Free the result with `flowres_string_free`.
 *
 * # Safety
 * Pointers must be valid as documented for the other calls.
 */
enum FlowresStatus flowres_rankings_csv(const struct FlowresWorkspace *ws,
                                        int32_t year,
                                        enum FlowresLevel lvl,
                                        enum FlowresDirection dir,
                                        enum FlowresRankBy by,
                                        const struct FlowresParams *params_ptr,
                                        char **out_csv);

/**
 * The whole graph as Turtle. Free the result with `flowres_string_free`.
 *
 * # Safety
 * Pointers must be valid as documented for the other calls.
 */
enum FlowresStatus flowres_export_turtle(const struct FlowresWorkspace *ws, char **out_ttl);

/**
 * # Safety
 * `s` must be null or a string returned by this library, and not be used afterwards.
 */
void flowres_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWRES_H */
