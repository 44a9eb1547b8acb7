#ifndef IONBOOST_H
#define IONBOOST_H

/* This header is generated by cbindgen from ionboost-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of a fallible call.
typedef enum IbStatus {
  IB_STATUS_OK = 0,
  IB_STATUS_NULL_POINTER = 1,
  IB_STATUS_INVALID_ARGUMENT = 2,
  IB_STATUS_RUNTIME_ERROR = 3,
} IbStatus;

// Population geometries; `XorK` takes its order from the `xor_k` argument
// of `ib_population_new`.
typedef enum IbPopulationKind {
  IB_POPULATION_KIND_HALF_PLANE2D = 0,
  IB_POPULATION_KIND_PARITY6D = 1,
  IB_POPULATION_KIND_XOR_K = 2,
  IB_POPULATION_KIND_RING2D = 3,
  IB_POPULATION_KIND_DIAGONAL2D = 4,
} IbPopulationKind;

// Opaque population handle.
typedef struct IbPopulation {
  uint8_t _private[0];
} IbPopulation;

// Opaque training-set handle.
typedef struct IbTrainingSet {
  uint8_t _private[0];
} IbTrainingSet;

// AdaBoost hyperparameters (see the library's `BoostConfig`).
typedef struct IbBoostConfig {
  uint32_t n_steps;
  uint32_t max_depth;
  double learning_rate;
  double err_clip_epsilon;
} IbBoostConfig;

// Opaque boosted-ensemble handle.
typedef struct IbEnsemble {
  uint8_t _private[0];
} IbEnsemble;

// Monte Carlo estimates for one (method, training set) pair.
typedef struct IbIonReport {
  double ion;
  double test_error;
  double bayes_disagreement;
  double training_error;
  uint64_t mc_samples;
  double half_width_95;
} IbIonReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. Never NULL;
// empty before any failure. Valid until the next failing call on the same
// thread.
const char *ib_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ib_version(void);

// Create a population. `xor_k` is only read for `IB_POPULATION_KIND_XOR_K`
// and must be >= 2; `bayes_error` must lie in [0, 0.5).
enum IbStatus ib_population_new(enum IbPopulationKind kind,
                                uint32_t xor_k,
                                double bayes_error,
                                struct IbPopulation **out);

void ib_population_free(struct IbPopulation *pop);

// Input dimension of the population, or 0 for NULL.
uint32_t ib_population_dimension(const struct IbPopulation *pop);

// Bayes label (+1/-1) at `x` (length `dimension`).
enum IbStatus ib_population_bayes_label(const struct IbPopulation *pop,
                                        const double *x,
                                        size_t x_len,
                                        int32_t *out);

// Draw `n` labeled points (labels flipped with the population's Bayes
// error), deterministic in `seed`.
enum IbStatus ib_population_sample(const struct IbPopulation *pop,
                                   uint64_t n,
                                   uint64_t seed,
                                   struct IbTrainingSet **out);

// Replace every label with the population's Bayes label (a fresh handle).
enum IbStatus ib_population_purify(const struct IbPopulation *pop,
                                   const struct IbTrainingSet *ts,
                                   struct IbTrainingSet **out);

void ib_training_set_free(struct IbTrainingSet *ts);

// Number of points, or 0 for NULL.
uint64_t ib_training_set_len(const struct IbTrainingSet *ts);

// Feature dimension, or 0 for NULL.
uint32_t ib_training_set_dimension(const struct IbTrainingSet *ts);

// Run AdaBoost.M1 on a training set.
enum IbStatus ib_adaboost_fit(const struct IbTrainingSet *ts,
                              const struct IbBoostConfig *cfg,
                              struct IbEnsemble **out);

void ib_ensemble_free(struct IbEnsemble *ens);

// Number of fitted stages (may be fewer than `n_steps` on early
// termination), or 0 for NULL.
uint64_t ib_ensemble_stages(const struct IbEnsemble *ens);

// Ensemble margin at `x`.
enum IbStatus ib_ensemble_predict_margin(const struct IbEnsemble *ens,
                                         const double *x,
                                         size_t x_len,
                                         double *out);

// Sign of the ensemble margin at `x` (+1/-1; exact zero maps to +1).
enum IbStatus ib_ensemble_predict_label(const struct IbEnsemble *ens,
                                        const double *x,
                                        size_t x_len,
                                        int32_t *out);

// Influence-of-noise report for AdaBoost on `ts` drawn from `pop`:
// trains on the set and its purified twin, then evaluates both on
// `mc_samples` fresh draws seeded by `seed`.
enum IbStatus ib_estimate_ion_adaboost(const struct IbPopulation *pop,
                                       const struct IbTrainingSet *ts,
                                       const struct IbBoostConfig *cfg,
                                       uint64_t mc_samples,
                                       uint64_t seed,
                                       struct IbIonReport *out);

// Influence-of-noise report for the 1-nearest-neighbor baseline.
enum IbStatus ib_estimate_ion_1nn(const struct IbPopulation *pop,
                                  const struct IbTrainingSet *ts,
                                  uint64_t mc_samples,
                                  uint64_t seed,
                                  struct IbIonReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONBOOST_H */
