#ifndef EQTENSOR_H
#define EQTENSOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes.
 */
typedef enum EqStatus {
  EQ_STATUS_OK = 0,
  EQ_STATUS_NULL_POINTER = 1,
  EQ_STATUS_INVALID_ARGUMENT = 2,
  EQ_STATUS_NUMERICAL = 3,
  EQ_STATUS_IO = 4,
  EQ_STATUS_BUFFER_TOO_SMALL = 5,
  EQ_STATUS_PANIC = 6,
} EqStatus;

/*
 Trained model handle.
 */
typedef struct EqModel EqModel;

/*
 Dense tensor handle.
 */
typedef struct EqTensor EqTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread, NUL-terminated and
 truncated to `len` bytes. Returns the full message length including the
 terminator, or 0 when no error was recorded.

 # Safety
 `buf` must point to `len` writable bytes or be null with `len == 0`.
 */
size_t eq_last_error(char *buf, size_t len);

/*
 Creates a tensor of `dim^order` row-major components. `parity` is +1 or -1.

 # Safety
 `data` must point to `len` readable values; `out` must be writable.
 */
enum EqStatus eq_tensor_new(size_t dim,
                            size_t order,
                            int32_t parity,
                            const double *data,
                            size_t len,
                            struct EqTensor **out);

/*
 Releases a tensor. Null is ignored.

 # Safety
 `t` must come from this library and not be used afterwards.
 */
void eq_tensor_free(struct EqTensor *t);

/*
 Reports dimension, order and parity of a tensor. Any output may be null.

 # Safety
 `t` must be a live tensor handle.
 */
enum EqStatus eq_tensor_shape(const struct EqTensor *t,
                              size_t *dim,
                              size_t *order,
                              int32_t *parity);

/*
 Copies the components into `out`. `written` receives the component count
 even when the buffer is too small.

 # Safety
 `out` must point to `out_len` writable values.
 */
enum EqStatus eq_tensor_data(const struct EqTensor *t,
                             double *out,
                             size_t out_len,
                             size_t *written);

/*
 Applies the group element with row-major `dim×dim` matrix `matrix` of the
 group of `metric` (e.g. "euclidean:3", "lorentz") to `t`.

 # Safety
 `metric` must be a NUL-terminated string, `matrix` must hold `dim*dim`
 values and `out` must be writable.
 */
enum EqStatus eq_group_act(const char *metric,
                           const double *matrix,
                           const struct EqTensor *t,
                           struct EqTensor **out);

/*
 Number of isotropic basis elements of the given order and parity.

 # Safety
 `metric` must be a NUL-terminated string and `count` writable.
 */
enum EqStatus eq_basis_count(size_t order, int32_t parity, const char *metric, size_t *count);

/*
 Element `index` of the isotropic basis as a new tensor.

 # Safety
 `metric` must be a NUL-terminated string and `out` writable.
 */
enum EqStatus eq_basis_element(size_t order,
                               int32_t parity,
                               const char *metric,
                               size_t index,
                               struct EqTensor **out);

/*
 Loads a checkpoint written by `eqtensor train`.

 # Safety
 `data` must point to `len` readable bytes and `out` must be writable.
 */
enum EqStatus eq_model_load(const uint8_t *data, size_t len, struct EqModel **out);

/*
 Releases a model. Null is ignored.

 # Safety
 `m` must come from this library and not be used afterwards.
 */
void eq_model_free(struct EqModel *m);

/*
 Evaluates a model on raw inputs.

 Vectors-to-tensor models take `n*d` values (n vectors, row-major) and
 write every output head back to back. Spectral models take a symmetric
 `d×d` matrix. Dense baselines are applied to the raw input without the
 checkpoint's normalization.

 # Safety
 `input` must hold `input_len` values; `out` must hold `out_len`.
 */
enum EqStatus eq_model_forward(const struct EqModel *m,
                               const double *input,
                               size_t input_len,
                               double *out,
                               size_t out_len,
                               size_t *written);

/*
 Runs the equivariance audit suite for `metric` and reports the largest
 defect over audited models and whether all thresholds held.

 # Safety
 `metric` must be a NUL-terminated string; outputs must be writable.
 */
enum EqStatus eq_audit(const char *metric,
                       size_t trials,
                       uint64_t seed,
                       double *max_defect,
                       bool *all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQTENSOR_H */
