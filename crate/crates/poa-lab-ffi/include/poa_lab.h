#ifndef POA_LAB_H
#define POA_LAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum PoaStatus {
  POA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  POA_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  POA_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument was rejected (bad JSON, out-of-range value, ...).
   */
  POA_STATUS_INVALID_INPUT = 3,
  /**
   * An enumeration or size cap was exceeded.
   */
  POA_STATUS_CAP_EXCEEDED = 4,
  /**
   * The queried object has no equilibrium.
   */
  POA_STATUS_NO_EQUILIBRIUM = 5,
  /**
   * A numerical routine failed (unbounded supremum, no witness, ...).
   */
  POA_STATUS_NUMERICAL = 6,
  /**
   * An internal panic was caught.
   */
  POA_STATUS_PANIC = 7,
} PoaStatus;

/**
 * Metric selector for the bound functions.
 */
typedef enum PoaMetric {
  POA_METRIC_PRICE_OF_ANARCHY = 0,
  POA_METRIC_COMPETITIVE_RATIO_SELFISH = 1,
  POA_METRIC_COMPETITIVE_RATIO_COOPERATIVE = 2,
} PoaMetric;

/**
 * Opaque game handle.
 */
typedef struct PoaGame PoaGame;

/**
 * Opaque strategy-profile handle; tied to the game it was parsed against.
 */
typedef struct PoaProfile PoaProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parse a game from its JSON representation.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must point to writable
 * storage for a handle. The handle must be released with [`poa_game_free`].
 */
enum PoaStatus poa_game_from_json(const char *json, struct PoaGame **out);

/**
 * Release a game handle; null is ignored.
 *
 * # Safety
 * `game` must be null or a handle not yet freed.
 */
void poa_game_free(struct PoaGame *game);

/**
 * Number of players and resources of a game.
 *
 * # Safety
 * `game` must be a live handle; the out-pointers must be writable.
 */
enum PoaStatus poa_game_counts(const struct PoaGame *game, size_t *players, size_t *resources);

/**
 * Parse a total or partial strategy profile against a game. The JSON form
 * is `{"assignment": {"<player id>": <strategy index or null>, ...}}`;
 * players absent from the map are unassigned.
 *
 * # Safety
 * `game` must be a live handle, `json` a NUL-terminated string and `out`
 * writable. The handle must be released with [`poa_profile_free`] and must
 * not outlive `game`'s use.
 */
enum PoaStatus poa_profile_from_json(const struct PoaGame *game,
                                     const char *json,
                                     struct PoaProfile **out);

/**
 * Release a profile handle; null is ignored.
 *
 * # Safety
 * `profile` must be null or a handle not yet freed.
 */
void poa_profile_free(struct PoaProfile *profile);

/**
 * Social cost `Σ_e x_e f_e(x_e)` of a profile.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PoaStatus poa_social_cost(const struct PoaGame *game,
                               const struct PoaProfile *profile,
                               double *out);

/**
 * Whether a total profile is an ε-approximate pure Nash equilibrium.
 * `worst_ratio` (optional, may be null) receives the largest ratio of a
 * player's current cost to its best deviation cost.
 *
 * # Safety
 * Handles must be live; `is_equilibrium` must be writable.
 */
enum PoaStatus poa_check_equilibrium(const struct PoaGame *game,
                                     const struct PoaProfile *profile,
                                     double eps,
                                     bool *is_equilibrium,
                                     double *worst_ratio);

/**
 * Price of anarchy of a small game by exhaustive enumeration: the worst
 * ε-equilibrium cost over the optimum. Returns
 * [`PoaStatus::NoEquilibrium`] when no ε-equilibrium exists and
 * [`PoaStatus::CapExceeded`] when the profile space exceeds the default
 * enumeration cap.
 *
 * # Safety
 * `game` must be a live handle; `out` must be writable.
 */
enum PoaStatus poa_price_of_anarchy_brute(const struct PoaGame *game, double eps, double *out);

/**
 * Class bound γ for polynomial latencies of degree `d`, in weighted
 * (`weighted = true`) or unweighted games, computed under the default caps.
 * `cap_hit` (optional) reports whether the search reached its cap.
 *
 * # Safety
 * `out` must be writable; `cap_hit` may be null.
 */
enum PoaStatus poa_gamma_bound(bool weighted,
                               enum PoaMetric metric,
                               double eps,
                               size_t d,
                               double *out,
                               bool *cap_hit);

/**
 * The root φ whose power `φ^{d+1}` is the weighted polynomial bound.
 *
 * # Safety
 * `out` must be writable.
 */
enum PoaStatus poa_poly_phi(enum PoaMetric metric, double eps, size_t d, double *out);

/**
 * Price of anarchy of weighted symmetric games on identical resources
 * with latency `t^d`; `lambda` (optional) receives the maximizing λ.
 *
 * # Safety
 * `out` must be writable; `lambda` may be null.
 */
enum PoaStatus poa_corollary_identical(size_t d, double *lambda, double *out);

/**
 * Message describing the last failure on this thread, or null if the last
 * call succeeded. The pointer stays valid until the next call from the
 * same thread; do not free it.
 */
const char *poa_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POA_LAB_H */
