#ifndef VIBAUG_H
#define VIBAUG_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Bit flags for [`VbMetrics::defined`].
#define VB_METRIC_PCC 1

#define VB_METRIC_R2 2

#define VB_METRIC_MRE 4

typedef enum VbStatus {
  VB_STATUS_OK = 0,
  VB_STATUS_NULL_POINTER = 1,
  VB_STATUS_INVALID_UTF8 = 2,
  VB_STATUS_PARSE_ERROR = 3,
  VB_STATUS_INVALID_ARGUMENT = 4,
  VB_STATUS_IO_ERROR = 5,
  VB_STATUS_BUFFER_TOO_SMALL = 6,
  VB_STATUS_PANIC = 7,
} VbStatus;

typedef struct VbModeSet VbModeSet;

typedef struct VbModel VbModel;

typedef struct VbMolecule VbMolecule;

// Metric values; a value is meaningful only when its bit is set in `defined`.
typedef struct VbMetrics {
  double pcc;
  double r2;
  double mre_percent;
  double rmse;
  double mse;
  size_t n;
  uint32_t defined;
} VbMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message (NUL-terminated, truncated to fit) into
// `buf` and returns the full message length excluding the terminator.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t vb_last_error_message(char *buf, size_t len);

// # Safety
// `text` must be a NUL-terminated string; `out` must be valid for writes.
enum VbStatus vb_molecule_parse_xyz(const char *text, struct VbMolecule **out);

// # Safety
// `m` must be null or a handle from this library not yet freed.
void vb_molecule_free(struct VbMolecule *m);

// # Safety
// `m` must be a live handle; `out` must be valid for writes.
enum VbStatus vb_molecule_atom_count(const struct VbMolecule *m, size_t *out);

// Writes `3 × atom_count` coordinates (Å), atom-major.
//
// # Safety
// `m` must be a live handle; `out` must be valid for `len` doubles.
enum VbStatus vb_molecule_coordinates(const struct VbMolecule *m, double *out, size_t len);

// # Safety
// `text` must be a NUL-terminated string, `owner` a live handle and `out`
// valid for writes.
enum VbStatus vb_modeset_parse(const char *text,
                               const struct VbMolecule *owner,
                               struct VbModeSet **out);

// # Safety
// `s` must be null or a handle from this library not yet freed.
void vb_modeset_free(struct VbModeSet *s);

// # Safety
// `out` must be valid for writes.
enum VbStatus vb_max_amplitude(double force_constant, double temperature, double *out);

// Draws one perturbed geometry from stream `(seed, stream_id)`.
//
// # Safety
// `m` and `modes` must be live handles; `out` must be valid for writes.
enum VbStatus vb_perturb(const struct VbMolecule *m,
                         const struct VbModeSet *modes,
                         double temperature,
                         double sigma_fraction,
                         size_t modes_per_sample,
                         uint64_t seed,
                         uint64_t stream_id,
                         struct VbMolecule **out);

// Fills `out[0..444]` with the descriptor vector. `substrate` is 0 (PSF),
// 1 (PES) or 2 (PAN).
//
// # Safety
// `a` and `b` must be live handles; `out` must be valid for `len` doubles.
enum VbStatus vb_encode(double aqueous_conc,
                        double organic_conc,
                        double pressure,
                        uint8_t substrate,
                        const struct VbMolecule *a,
                        const struct VbMolecule *b,
                        double *out,
                        size_t len);

// # Safety
// `y` and `yhat` must be valid for `n` doubles; `out` valid for writes.
enum VbStatus vb_evaluate(const double *y, const double *yhat, size_t n, struct VbMetrics *out);

// Loads a model file written by `vibaug train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid for writes.
enum VbStatus vb_model_load(const char *path, struct VbModel **out);

// Predicts `rows` unscaled descriptor rows (row-major, `cols` = 444).
//
// # Safety
// `model` must be a live handle; `x` valid for `rows × cols` doubles and
// `out` for `rows` doubles.
enum VbStatus vb_model_predict(const struct VbModel *model,
                               const double *x,
                               size_t rows,
                               size_t cols,
                               double *out);

// # Safety
// `m` must be null or a handle from this library not yet freed.
void vb_model_free(struct VbModel *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VIBAUG_H */
