/*
 * Copyright 2026 The acausal Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef ACAUSAL_H
#define ACAUSAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum AcStatus {
  AC_STATUS_OK = 0,
  AC_STATUS_NULL_POINTER = 1,
  AC_STATUS_INVALID_UTF8 = 2,
  AC_STATUS_PANIC = 3,
  AC_STATUS_PARSE = 10,
  AC_STATUS_BAD_DIMENSION = 11,
  AC_STATUS_NOT_HERMITIAN = 12,
  AC_STATUS_NOT_PSD = 13,
  AC_STATUS_INVALID_PROCESS_MATRIX = 14,
  AC_STATUS_BAD_PARAMETER = 15,
  AC_STATUS_DEGENERATE_PROCESS = 16,
  AC_STATUS_NOT_UNITARY = 17,
  AC_STATUS_NULL_OUTCOME = 18,
  AC_STATUS_OTHER = 99,
} AcStatus;

/**
 * Separability verdict.
 */
typedef enum AcSeparability {
  AC_SEPARABILITY_SEPARABLE = 0,
  AC_SEPARABILITY_NON_SEPARABLE = 1,
  AC_SEPARABILITY_UNDECIDED = 2,
} AcSeparability;

/**
 * Opaque labeled operator.
 */
typedef struct AcOperator AcOperator;

/**
 * Opaque synthesis result.
 */
typedef struct AcSynthesis AcSynthesis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ac_last_error_message(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ac_string_free(char *s);

/**
 * Parse an operator from its JSON form `{"labels", "re", "im"}`.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum AcStatus ac_operator_from_json(const char *json, struct AcOperator **out);

/**
 * Serialize an operator; release the result with [`ac_string_free`].
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum AcStatus ac_operator_to_json(const struct AcOperator *op, char **out);

/**
 * Total Hilbert-space dimension of the operator.
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum AcStatus ac_operator_dim(const struct AcOperator *op, size_t *out);

/**
 * # Safety
 * `op` must be null or a live handle, which is invalid afterwards.
 */
void ac_operator_free(struct AcOperator *op);

/**
 * The two-qubit-per-party OCB process matrix.
 *
 * # Safety
 * `out` must be writable.
 */
enum AcStatus ac_ocb_process(struct AcOperator **out);

/**
 * The OCB process mixed with white noise of weight `gamma`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AcStatus ac_noisy_ocb(double gamma, struct AcOperator **out);

/**
 * Check the process-matrix conditions at tolerance `tol`.
 *
 * # Safety
 * `op` must be a live handle; `valid` and `forbidden_norm` must be writable.
 */
enum AcStatus ac_process_is_valid(const struct AcOperator *op,
                                  double tol,
                                  bool *valid,
                                  double *forbidden_norm);

/**
 * Decide causal separability. `max_iter == 0` keeps the default cap.
 *
 * # Safety
 * `op` must be a live handle; `status` and `residual` must be writable.
 */
enum AcStatus ac_process_separability(const struct AcOperator *op,
                                      double tol,
                                      size_t max_iter,
                                      enum AcSeparability *status,
                                      double *residual);

/**
 * Synthesize the conditioned circuit realizing a valid process matrix.
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum AcStatus ac_synthesize(const struct AcOperator *op, struct AcSynthesis **out);

/**
 * Probability of the success outcome.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum AcStatus ac_synthesis_p_succ(const struct AcSynthesis *s, double *out);

/**
 * Largest eigenvalue of the synthesized process matrix.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum AcStatus ac_synthesis_lambda_max(const struct AcSynthesis *s, double *out);

/**
 * Serialize a synthesis result; release the result with [`ac_string_free`].
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum AcStatus ac_synthesis_to_json(const struct AcSynthesis *s, char **out);

/**
 * # Safety
 * `s` must be null or a live handle, which is invalid afterwards.
 */
void ac_synthesis_free(struct AcSynthesis *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACAUSAL_H */
