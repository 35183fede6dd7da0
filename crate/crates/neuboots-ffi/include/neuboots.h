/* C interface for the neuboots library: bootstrapped neural-network prediction from a single trained model. */

#ifndef NEUBOOTS_H
#define NEUBOOTS_H

/* Generated by cbindgen from the neuboots-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every FFI function.
typedef enum {
  NB_OK = 0,
  // A required pointer argument was null.
  NB_ERR_NULL_ARGUMENT = 1,
  // An argument failed validation (shape, range, enum value).
  NB_ERR_INVALID_ARGUMENT = 2,
  // Input data was rejected (non-finite values, bad labels).
  NB_ERR_DATA = 3,
  // Training or evaluation failed numerically.
  NB_ERR_NUMERIC = 4,
  // File I/O or model (de)serialization failed.
  NB_ERR_IO = 5,
  // A string was not valid UTF-8.
  NB_ERR_UTF8 = 6,
  // Unexpected internal failure (a panic was caught).
  NB_ERR_INTERNAL = 7,
} NbStatus;

// Hidden-layer activation selector.
typedef enum {
  NB_ACT_RELU = 0,
  NB_ACT_TANH = 1,
  NB_ACT_IDENTITY = 2,
} NbActivation;

// Learning-rate schedule selector.
typedef enum {
  NB_LR_CONSTANT = 0,
  NB_LR_COSINE_ANNEALING = 1,
} NbLrSchedule;

// Opaque model handle. Created by the `nb_model_train_*` and
// `nb_model_load` constructors, released with `nb_model_free`.
typedef struct NbModel NbModel;

// SGD hyperparameters for `nb_model_train_*`.
typedef struct {
  double learning_rate;
  double momentum;
  double weight_decay;
  size_t batch_size;
  size_t epochs;
  NbLrSchedule lr_schedule;
  uint64_t seed;
} NbSgdConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent error on this thread. The pointer stays valid
// until the next failing call on the same thread. Never null.
const char *nb_last_error_message(void);

// Library version as a static C string.
const char *nb_version(void);

// Train a regression generator.
//
// `x` is row-major `n x p`; `y` is row-major `n x output_dim`. On success
// `*out` owns the model; release it with `nb_model_free`.
//
// # Safety
// `x` must point to `n * p` readable doubles, `y` to `n * output_dim`,
// `hidden` to `hidden_len` readable values; `cfg` and `out` must be valid.
NbStatus nb_model_train_regression(const double *x,
                                   size_t n,
                                   size_t p,
                                   const double *y,
                                   size_t output_dim,
                                   const size_t *hidden,
                                   size_t hidden_len,
                                   NbActivation activation,
                                   const NbSgdConfig *cfg,
                                   uint64_t seed,
                                   NbModel **out);

// Train a classification generator.
//
// `labels` are class indices in `[0, classes)`, one per row of `x`.
//
// # Safety
// `x` must point to `n * p` readable doubles, `labels` to `n` readable
// values, `hidden` to `hidden_len`; `cfg` and `out` must be valid.
NbStatus nb_model_train_classification(const double *x,
                                       size_t n,
                                       size_t p,
                                       const uint32_t *labels,
                                       size_t classes,
                                       const size_t *hidden,
                                       size_t hidden_len,
                                       NbActivation activation,
                                       const NbSgdConfig *cfg,
                                       uint64_t seed,
                                       NbModel **out);

// Draw `b` bootstrapped predictions for every row of `x`.
//
// `out` receives `b * m * output_dim` doubles laid out as
// `out[draw][row][dim]` (post-softmax probabilities for classification, raw
// outputs for regression).
//
// # Safety
// `model` must be a live handle; `x` must point to `m * p` readable doubles
// and `out` to `b * m * output_dim` writable doubles.
NbStatus nb_model_predict(const NbModel *model,
                          const double *x,
                          size_t m,
                          size_t p,
                          size_t b,
                          uint64_t seed,
                          double *out);

// Deterministic prediction (the unit weight vector): `m * output_dim`
// doubles into `out`.
//
// # Safety
// `model` must be a live handle; `x` must point to `m * p` readable doubles
// and `out` to `m * output_dim` writable doubles.
NbStatus nb_model_predict_mean(const NbModel *model,
                               const double *x,
                               size_t m,
                               size_t p,
                               double *out);

// Save the model (`.json` extension selects JSON, else the flat binary).
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
NbStatus nb_model_save(const NbModel *model, const char *path);

// Load a generator model saved by this library.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
NbStatus nb_model_load(const char *path, NbModel **out);

// Input width the model expects; 0 when `model` is null.
size_t nb_model_input_dim(const NbModel *model);

// Output width per prediction; 0 when `model` is null.
size_t nb_model_output_dim(const NbModel *model);

// Block count `S`; 0 when `model` is null.
size_t nb_model_num_blocks(const NbModel *model);

// Release a model handle. Null is a no-op.
//
// # Safety
// `model` must be a pointer previously returned by a constructor of this
// library, not yet freed.
void nb_model_free(NbModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEUBOOTS_H */
