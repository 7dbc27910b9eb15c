#ifndef QPS_H
#define QPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every entry point.
 */
typedef enum QpsStatus {
  QPS_STATUS_OK = 0,
  QPS_STATUS_NULL_POINTER = 1,
  QPS_STATUS_INVALID_UTF8 = 2,
  QPS_STATUS_DOMAIN = 3,
  QPS_STATUS_DEGENERATE_STATE = 4,
  QPS_STATUS_UNDEFINED_PHASE = 5,
  QPS_STATUS_IMPOSSIBLE_CONDITION = 6,
  QPS_STATUS_DIVISION_BY_ZERO = 7,
  QPS_STATUS_INSUFFICIENT_STATISTICS = 8,
  QPS_STATUS_DEGENERATE_DATA = 9,
  QPS_STATUS_UNDERDETERMINED = 10,
  QPS_STATUS_NON_CONVERGENCE = 11,
  QPS_STATUS_CONFIG = 12,
  QPS_STATUS_MISSING_FIELD = 13,
  QPS_STATUS_PARSE = 14,
  QPS_STATUS_TABLE = 15,
  QPS_STATUS_IO = 16,
  QPS_STATUS_PANIC = 99,
} QpsStatus;

typedef enum QpsSpinBranch {
  QPS_SPIN_BRANCH_UP = 0,
  QPS_SPIN_BRANCH_DOWN = 1,
} QpsSpinBranch;

typedef enum QpsChannel {
  QPS_CHANNEL_CO = 0,
  QPS_CHANNEL_CROSS = 1,
  QPS_CHANNEL_X = 2,
  QPS_CHANNEL_Y = 3,
} QpsChannel;

/**
 * Opaque cavity-plus-dot model.
 */
typedef struct QpsCavity QpsCavity;

typedef struct QpsFidelity {
  double f_up;
  double f_down;
  double r_up_re;
  double r_up_im;
  double r_down_re;
  double r_down_im;
} QpsFidelity;

typedef struct QpsPhaseSwitchSummary {
  /**
   * Conditioned fringe phase relative to the blocked one, radians in `[0, 2π)`.
   */
  double conditioned_shift;
  double unconditioned_shift;
  double conditioned_visibility;
  uint64_t coincidences;
  uint64_t heralds;
} QpsPhaseSwitchSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *qps_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qps_version(void);

/**
 * Create a cavity with no transitions. Free with [`qps_cavity_free`].
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum QpsStatus qps_cavity_new(double kappa, double kappa_ex, struct QpsCavity **out);

/**
 * Build a cavity from the `cavity` and `transitions` sections of a JSON
 * run configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum QpsStatus qps_cavity_from_config_json(const char *json, struct QpsCavity **out);

/**
 * # Safety
 * `cavity` must come from a constructor in this library and not be freed.
 */
enum QpsStatus qps_cavity_add_transition(struct QpsCavity *cavity,
                                         enum QpsSpinBranch branch,
                                         double detuning,
                                         double g,
                                         double gamma);

/**
 * Release a cavity. Null is ignored.
 *
 * # Safety
 * `cavity` must be null or come from a constructor in this library, and must
 * not be used afterwards.
 */
void qps_cavity_free(struct QpsCavity *cavity);

/**
 * # Safety
 * `cavity` must be live; `out_re` and `out_im` writable.
 */
enum QpsStatus qps_cavity_reflection(const struct QpsCavity *cavity,
                                     enum QpsSpinBranch branch,
                                     double detuning,
                                     double *out_re,
                                     double *out_im);

/**
 * Spin-conditional photon phase in `[0, 2π)`.
 *
 * # Safety
 * `cavity` must be live; `out` writable.
 */
enum QpsStatus qps_cavity_conditional_phase(const struct QpsCavity *cavity,
                                            double detuning,
                                            double *out);

/**
 * # Safety
 * `cavity` must be live; `out` writable.
 */
enum QpsStatus qps_cavity_fidelity(const struct QpsCavity *cavity,
                                   double detuning,
                                   struct QpsFidelity *out);

/**
 * Probe spectrum of the spin mixture `(p_up, 1 − p_up)` on `n` strictly
 * increasing detunings, written to `out[0..n]`.
 *
 * # Safety
 * `cavity` must be live; `detunings` readable and `out` writable for `n` values.
 */
enum QpsStatus qps_cavity_spectrum(const struct QpsCavity *cavity,
                                   double p_up,
                                   double probe_fwhm,
                                   enum QpsChannel channel,
                                   const double *detunings,
                                   size_t n,
                                   double *out);

/**
 * `C = 2g²/(κγ)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QpsStatus qps_cooperativity(double g, double kappa, double gamma, double *out);

/**
 * Resonant reflection coefficients for the coupled and uncoupled branch.
 *
 * # Safety
 * `out_up` and `out_down` must be writable.
 */
enum QpsStatus qps_on_resonance(double alpha,
                                double cooperativity,
                                double *out_up,
                                double *out_down);

/**
 * # Safety
 * `out` must be writable.
 */
enum QpsStatus qps_switching_fidelity(double r_re,
                                      double r_im,
                                      enum QpsSpinBranch target,
                                      double *out);

/**
 * `P(τ) = C(τ) / (max C + min C)`.
 *
 * # Safety
 * `counts` readable and `out` writable for `n` values.
 */
enum QpsStatus qps_normalize_coincidences(const uint64_t *counts, size_t n, double *out);

/**
 * Run the photon-conditioned Ramsey Monte Carlo described by a JSON run
 * configuration over its delay grid.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum QpsStatus qps_phase_switch_run(const char *json,
                                    uint64_t shots,
                                    uint64_t seed,
                                    struct QpsPhaseSwitchSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPS_H */
