#ifndef RRDPS_H
#define RRDPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Values accepted by the `scope` arguments.
 */
typedef enum RrdpsRateScope {
  /*
   `1/L` multiplies privacy amplification and error correction.
   */
  RRDPS_RATE_SCOPE_WHOLE_BRACKET = 0,
  /*
   `1/L` multiplies privacy amplification only.
   */
  RRDPS_RATE_SCOPE_PRIVACY_ONLY = 1,
} RrdpsRateScope;

/*
 Result code of every fallible call.
 */
typedef enum RrdpsStatus {
  RRDPS_STATUS_OK = 0,
  RRDPS_STATUS_NULL_POINTER = 1,
  RRDPS_STATUS_DOMAIN = 2,
  RRDPS_STATUS_INVALID_ENSEMBLE = 3,
  RRDPS_STATUS_DEGENERATE_DENOMINATOR = 4,
  RRDPS_STATUS_UNDEFINED_QBER = 5,
  RRDPS_STATUS_INADMISSIBLE_PATTERN = 6,
  RRDPS_STATUS_NO_FEASIBLE_POINT = 7,
  /*
   A Rust panic was caught at the boundary.
   */
  RRDPS_STATUS_INTERNAL = 8,
} RrdpsStatus;

/*
 Channel parameters at one train length and distance.
 */
typedef struct RrdpsChannel RrdpsChannel;

/*
 Four-intensity source ensemble.
 */
typedef struct RrdpsEnsemble RrdpsEnsemble;

/*
 Key-rate evaluation of one operating point.
 */
typedef struct RrdpsEvaluation RrdpsEvaluation;

/*
 Optimizer settings; obtain defaults from [`rrdps_search_options_default`].
 */
typedef struct RrdpsSearchOptions {
  uint32_t resolution;
  uint32_t rounds;
  uint32_t multistart;
  uint64_t seed;
  /*
   An [`RrdpsRateScope`] value.
   */
  uint32_t scope;
} RrdpsSearchOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Static description of an [`RrdpsStatus`] value.
 */
const char *rrdps_status_string(uint32_t status);

/*
 Copies the calling thread's last error message into `buf` (NUL
 terminated, truncated to `len - 1` bytes) and returns the full message
 length excluding the terminator.

 # Safety
 `buf` must be valid for `len` bytes or be null.
 */
size_t rrdps_last_error_message(char *buf, size_t len);

/*
 Default channel parameters at train length `train_len` and `distance_km`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum RrdpsStatus rrdps_channel_standard(uint32_t train_len,
                                        double distance_km,
                                        struct RrdpsChannel **out);

/*
 Explicit channel parameters. `base_dark` is the dark count probability
 per pulse; the per-train value is `base_dark * train_len`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum RrdpsStatus rrdps_channel_new(double base_dark,
                                   double misalignment,
                                   double background_error,
                                   double detector_eff,
                                   double loss_db_per_km,
                                   double corr_eff,
                                   uint32_t train_len,
                                   double distance_km,
                                   struct RrdpsChannel **out);

/*
 # Safety
 `channel` must come from an `rrdps_channel_*` constructor and not have
 been freed, or be null.
 */
void rrdps_channel_free(struct RrdpsChannel *channel);

/*
 Fiber transmittance of `channel`.

 # Safety
 Pointers must be valid.
 */
enum RrdpsStatus rrdps_transmittance(const struct RrdpsChannel *channel, double *out);

/*
 Overall gain at mean photon number `intensity`.

 # Safety
 Pointers must be valid.
 */
enum RrdpsStatus rrdps_gain(const struct RrdpsChannel *channel, double intensity, double *out);

/*
 Overall QBER at mean photon number `intensity`.

 # Safety
 Pointers must be valid.
 */
enum RrdpsStatus rrdps_qber(const struct RrdpsChannel *channel, double intensity, double *out);

/*
 Binary entropy in bits.

 # Safety
 `out` must be valid.
 */
enum RrdpsStatus rrdps_binary_entropy(double p, double *out);

/*
 Poisson probability of `k` photons at mean `x`.

 # Safety
 `out` must be valid.
 */
enum RrdpsStatus rrdps_poisson_pmf(uint32_t k, double x, double *out);

/*
 Ensemble with intensities `(mu, nu1, nu2, nu3)`, common relative error
 `delta` and equal selection probabilities.

 # Safety
 `intensities` must point to four doubles; `out` must be valid.
 */
enum RrdpsStatus rrdps_ensemble_new(const double *intensities,
                                    double delta,
                                    struct RrdpsEnsemble **out);

/*
 As [`rrdps_ensemble_new`] with per-source deltas and selection
 probabilities (four doubles each).

 # Safety
 Array arguments must point to four doubles; `out` must be valid.
 */
enum RrdpsStatus rrdps_ensemble_new_full(const double *intensities,
                                         const double *deltas,
                                         const double *select_probs,
                                         struct RrdpsEnsemble **out);

/*
 Writes `(mu, nu1, nu2, nu3)` to `out[0..4]`.

 # Safety
 `ensemble` must be a live handle; `out` must hold four doubles.
 */
enum RrdpsStatus rrdps_ensemble_intensities(const struct RrdpsEnsemble *ensemble, double *out);

/*
 # Safety
 `ensemble` must be a live handle or null.
 */
void rrdps_ensemble_free(struct RrdpsEnsemble *ensemble);

/*
 Validates the ensemble and computes bounds and key rate.

 # Safety
 Handles must be live; `out` must be valid.
 */
enum RrdpsStatus rrdps_evaluate(const struct RrdpsEnsemble *ensemble,
                                const struct RrdpsChannel *channel,
                                uint32_t scope,
                                struct RrdpsEvaluation **out);

/*
 Reported key rate per pulse, clamped at zero.

 # Safety
 `evaluation` must be a live handle.
 */
double rrdps_evaluation_rate(const struct RrdpsEvaluation *evaluation);

/*
 Key rate before clamping.

 # Safety
 `evaluation` must be a live handle.
 */
double rrdps_evaluation_raw_rate(const struct RrdpsEvaluation *evaluation);

/*
 Whether the raw rate is positive.

 # Safety
 `evaluation` must be a live handle.
 */
bool rrdps_evaluation_feasible(const struct RrdpsEvaluation *evaluation);

/*
 Writes the lower bounds on the signal's 0-, 1- and 2-photon gains to
 `out[0..3]`.

 # Safety
 `evaluation` must be a live handle; `out` must hold three doubles.
 */
enum RrdpsStatus rrdps_evaluation_gain_bounds(const struct RrdpsEvaluation *evaluation,
                                              double *out);

/*
 Observed signal gain and QBER.

 # Safety
 Pointers must be valid.
 */
enum RrdpsStatus rrdps_evaluation_signal_stats(const struct RrdpsEvaluation *evaluation,
                                               double *gain,
                                               double *qber);

/*
 # Safety
 `evaluation` must be a live handle or null.
 */
void rrdps_evaluation_free(struct RrdpsEvaluation *evaluation);

struct RrdpsSearchOptions rrdps_search_options_default(void);

/*
 Maximizes the key rate over intensities. `options` may be null for the
 defaults. Both outputs are written on success.

 # Safety
 `channel` must be live; output pointers must be valid.
 */
enum RrdpsStatus rrdps_optimize(const struct RrdpsChannel *channel,
                                double delta,
                                const struct RrdpsSearchOptions *options,
                                struct RrdpsEnsemble **out_ensemble,
                                struct RrdpsEvaluation **out_evaluation);

/*
 Runs the randomized soundness suite for one `delta` over the default
 distances at the default channel, with `patterns` random pattern sets
 per distance. `negate_q1` enables the corrupted-estimator control.

 # Safety
 Output pointers must be valid.
 */
enum RrdpsStatus rrdps_verify(uint32_t train_len,
                              double delta,
                              uint32_t patterns,
                              uint64_t seed,
                              bool negate_q1,
                              bool *out_passed,
                              double *out_worst_margin);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RRDPS_H */
