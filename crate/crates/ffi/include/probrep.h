#ifndef PROBREP_H
#define PROBREP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ProbrepStatus {
  PROBREP_STATUS_OK = 0,
  PROBREP_STATUS_NULL_POINTER = 1,
  PROBREP_STATUS_INVALID_ARGUMENT = 2,
  PROBREP_STATUS_INVALID_STATE = 3,
  PROBREP_STATUS_INVALID_MEASUREMENT = 4,
  PROBREP_STATUS_NUMERICAL_FAILURE = 5,
  PROBREP_STATUS_BUFFER_TOO_SMALL = 6,
  PROBREP_STATUS_PANIC = 7,
} ProbrepStatus;

typedef struct ProbrepDensity ProbrepDensity;

typedef struct ProbrepPovm ProbrepPovm;

typedef struct ProbrepReference ProbrepReference;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t probrep_last_error(char *buf, size_t len);

/**
 * Validates a `dim x dim` density matrix.
 *
 * # Safety
 * `re` and `im` must point to `dim * dim` doubles; `out` must be writable.
 */
enum ProbrepStatus probrep_density_new(size_t dim,
                                       const double *re,
                                       const double *im,
                                       struct ProbrepDensity **out);

/**
 * # Safety
 * `handle` must be null or come from [`probrep_density_new`] and not be freed twice.
 */
void probrep_density_free(struct ProbrepDensity *handle);

/**
 * Validates a POVM of `n_elements` matrices stored back to back.
 *
 * # Safety
 * `re` and `im` must point to `n_elements * dim * dim` doubles; `out` must be writable.
 */
enum ProbrepStatus probrep_povm_new(size_t dim,
                                    size_t n_elements,
                                    const double *re,
                                    const double *im,
                                    struct ProbrepPovm **out);

/**
 * # Safety
 * `handle` must be null or come from [`probrep_povm_new`] and not be freed twice.
 */
void probrep_povm_free(struct ProbrepPovm *handle);

/**
 * Number of outcomes of a POVM, or 0 for a null handle.
 *
 * # Safety
 * `povm` must be null or a live handle.
 */
size_t probrep_povm_len(const struct ProbrepPovm *povm);

/**
 * A certified Weyl-Heisenberg SIC reference in dimension `dim`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ProbrepStatus probrep_reference_sic(size_t dim, uint64_t seed, struct ProbrepReference **out);

/**
 * A random rank-one informationally complete reference.
 *
 * # Safety
 * `out` must be writable.
 */
enum ProbrepStatus probrep_reference_random(size_t dim,
                                            uint64_t seed,
                                            struct ProbrepReference **out);

/**
 * # Safety
 * `handle` must be null or come from a `probrep_reference_*` constructor.
 */
void probrep_reference_free(struct ProbrepReference *handle);

/**
 * `q(j) = tr(rho F_j)` into `out[0..len(povm)]`.
 *
 * # Safety
 * Handles must be live; `out` must point to `len` writable doubles.
 */
enum ProbrepStatus probrep_born_probabilities(const struct ProbrepDensity *rho,
                                              const struct ProbrepPovm *povm,
                                              double *out,
                                              size_t len);

/**
 * Outcome probabilities computed only from the reference probabilities of
 * `rho` and the conditional probabilities of `povm`.
 *
 * # Safety
 * Handles must be live; `out` must point to `len` writable doubles.
 */
enum ProbrepStatus probrep_urgleichung(const struct ProbrepReference *reference,
                                       const struct ProbrepDensity *rho,
                                       const struct ProbrepPovm *povm,
                                       double *out,
                                       size_t len);

/**
 * Largest gap between the quantum prediction and the law of total probability.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ProbrepStatus probrep_classicality_gap(const struct ProbrepReference *reference,
                                            const struct ProbrepDensity *rho,
                                            const struct ProbrepPovm *povm,
                                            double *out);

/**
 * Runs a SIC search and writes the fiducial into `out_re`/`out_im`.
 * Returns `NumericalFailure` when the best candidate does not certify.
 *
 * # Safety
 * `out_re` and `out_im` must point to `len` doubles; the scalar outputs must be writable.
 */
enum ProbrepStatus probrep_sic_search(size_t dim,
                                      uint64_t seed,
                                      size_t restarts,
                                      double *out_re,
                                      double *out_im,
                                      size_t len,
                                      double *out_frame_potential,
                                      double *out_max_deviation);

/**
 * Exact `P(lo <= h <= hi)` for `h ~ Binomial(n, p)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ProbrepStatus probrep_binomial_interval(uint64_t n,
                                             double p,
                                             uint64_t lo,
                                             uint64_t hi,
                                             double *out);

/**
 * CHSH value of a two-qubit pure state with equatorial measurement azimuths
 * `angles = [a1, a2, b1, b2]`.
 *
 * # Safety
 * `state_re`/`state_im` must point to 4 doubles, `angles` to 4, `out` must be writable.
 */
enum ProbrepStatus probrep_chsh(const double *state_re,
                                const double *state_im,
                                const double *angles,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROBREP_H */
