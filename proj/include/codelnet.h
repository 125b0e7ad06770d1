/*
 * codelnet - C API for the codelnet shared library.
 *
 * A from-scratch deep-learning engine and reproducible pipeline for binary
 * classification of two-channel 2D image slices with a multi-scale CNN.
 * All functions return a codelnet_status; on failure the thread-local
 * message from codelnet_last_error() describes what went wrong.
 *
 * Configuration travels as a flat key=value bag (codelnet_options). Every
 * key has a documented default; codelnet_resolve_config() emits the fully
 * resolved set, which reproduces the identical run when fed back in.
 */

#ifndef CODELNET_H
#define CODELNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CODELNET_API __declspec(dllexport)
#else
#define CODELNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status values double as CLI exit codes. */
typedef enum codelnet_status {
    CODELNET_OK = 0,
    CODELNET_ERR_CHECK = 1,    /* a verification (e.g. gradcheck) failed   */
    CODELNET_ERR_IO = 2,       /* missing/corrupt files, unwritable paths  */
    CODELNET_ERR_SPLIT = 3,    /* dataset split infeasible                 */
    CODELNET_ERR_NUMERIC = 4,  /* non-finite values during training        */
    CODELNET_ERR_MISMATCH = 5, /* weights/config disagreement              */
    CODELNET_ERR_ARG = 64      /* bad option keys or values                */
} codelnet_status;

CODELNET_API const char* codelnet_version(void);

/* Message for the most recent failure on this thread; never NULL. */
CODELNET_API const char* codelnet_last_error(void);

/* ------------------------------------------------------------------ */
/* options bag                                                         */

typedef struct codelnet_options codelnet_options;

CODELNET_API codelnet_status codelnet_options_create(codelnet_options** out);
CODELNET_API void codelnet_options_destroy(codelnet_options* options);
CODELNET_API codelnet_status codelnet_options_set(codelnet_options* options, const char* key,
                                                  const char* value);

/* Receives one text line at a time (epoch rows, prediction lines, ...). */
typedef void (*codelnet_line_cb)(const char* line, void* user);

/* Emits the fully resolved configuration, one "key = value" per line. */
CODELNET_API codelnet_status codelnet_resolve_config(const codelnet_options* options,
                                                     codelnet_line_cb on_line, void* user);

/* ------------------------------------------------------------------ */
/* pipeline                                                            */

/* Generates the synthetic phantom dataset under out_dir and copies the
 * manifest path into manifest_path (if non-NULL). */
CODELNET_API codelnet_status codelnet_phantom(const codelnet_options* options, const char* out_dir,
                                              char* manifest_path, size_t manifest_path_len);

/* Full training run: split, preprocess, train; writes weights.cdw and
 * epochs.csv under out_dir. on_line receives the epoch CSV rows and a final
 * validation summary. */
CODELNET_API codelnet_status codelnet_train(const codelnet_options* options, const char* manifest,
                                            const char* out_dir, codelnet_line_cb on_line, void* user);

typedef struct codelnet_eval_result {
    long long tp, fp, tn, fn;
    double sensitivity, specificity, accuracy;
} codelnet_eval_result;

/* Evaluates saved weights on the held-out split of the manifest (or the
 * whole manifest when options key eval_split=all); writes metrics.csv under
 * out_dir and fills *result when non-NULL. */
CODELNET_API codelnet_status codelnet_evaluate(const codelnet_options* options, const char* weights,
                                               const char* manifest, const char* out_dir,
                                               codelnet_eval_result* result);

/* Emits one "id,label,probability" line per slice in the manifest. */
CODELNET_API codelnet_status codelnet_predict(const codelnet_options* options, const char* weights,
                                              const char* manifest, codelnet_line_cb on_line, void* user);

/* Verifies analytic layer gradients against central finite differences in
 * 64-bit; emits one line per op. op_filter may be NULL/"" for all ops.
 * Returns CODELNET_ERR_CHECK if any op exceeds the tolerance. */
CODELNET_API codelnet_status codelnet_gradcheck(const char* op_filter, double tolerance, uint64_t seed,
                                                int cases_per_op, codelnet_line_cb on_line, void* user);

#ifdef __cplusplus
}
#endif

#endif /* CODELNET_H */
