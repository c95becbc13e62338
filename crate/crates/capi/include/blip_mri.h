/*
 * C interface to the compressed quantitative MRI toolkit.
 *
 * Conventions:
 *   - complex arrays are interleaved (re, im) doubles;
 *   - image sequences are voxel-major: voxel i's length-L sequence occupies
 *     entries [i*L, (i+1)*L);
 *   - k-space buffers are frame-major: frame t occupies [t*M, (t+1)*M);
 *   - every function returns a BlipStatus; on failure call
 *     blip_last_error_message() on the same thread for details.
 */

#ifndef BLIP_MRI_H
#define BLIP_MRI_H

/* Generated by cbindgen from blip-mri-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every C-ABI call.
 */
typedef enum BlipStatus {
  BLIP_STATUS_OK = 0,
  BLIP_STATUS_NULL_ARGUMENT = 1,
  BLIP_STATUS_INVALID_ARGUMENT = 2,
  BLIP_STATUS_DIMENSION_MISMATCH = 3,
  BLIP_STATUS_NUMERIC_FAILURE = 4,
  BLIP_STATUS_IO_FAILURE = 5,
  BLIP_STATUS_PANIC = 6,
} BlipStatus;

/**
 * Opaque response dictionary handle.
 */
typedef struct BlipDictionary BlipDictionary;

/**
 * Opaque sampling plan handle.
 */
typedef struct BlipPlan BlipPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to at least `cap` writable bytes.
 */
size_t blip_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *blip_version(void);

/**
 * Simulate one unit-density response. `out` receives `seq_len` interleaved
 * complex samples.
 *
 * # Safety
 * `flip_angles` and `rep_times` must point to `seq_len` doubles; `out` must
 * have room for `2 * seq_len` doubles.
 */
enum BlipStatus blip_simulate_response(double t1_ms,
                                       double t2_ms,
                                       double df_hz,
                                       const double *flip_angles,
                                       const double *rep_times,
                                       size_t seq_len,
                                       double *out);

/**
 * Build a response dictionary over the Cartesian product of the given
 * axes (filtered to `t2 <= t1`) under the given excitation.
 *
 * # Safety
 * Axis pointers must address the stated number of doubles; `flip_angles`
 * and `rep_times` must address `seq_len` doubles; `out` must be valid.
 */
enum BlipStatus blip_dictionary_build(const double *t1_values,
                                      size_t num_t1,
                                      const double *t2_values,
                                      size_t num_t2,
                                      const double *df_values,
                                      size_t num_df,
                                      const double *flip_angles,
                                      const double *rep_times,
                                      size_t seq_len,
                                      struct BlipDictionary **out);

/**
 * Load a dictionary from the binary format written by `blip_dictionary_save`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum BlipStatus blip_dictionary_load(const char *path, struct BlipDictionary **out);

/**
 * Save a dictionary to disk.
 *
 * # Safety
 * `dict` must be a live handle; `path` must be NUL-terminated.
 */
enum BlipStatus blip_dictionary_save(const struct BlipDictionary *dict, const char *path);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `dict` must be null or a live handle.
 */
size_t blip_dictionary_num_atoms(const struct BlipDictionary *dict);

/**
 * Sequence length, or 0 for a null handle.
 *
 * # Safety
 * `dict` must be null or a live handle.
 */
size_t blip_dictionary_seq_len(const struct BlipDictionary *dict);

/**
 * Release a dictionary handle. Null is a no-op.
 *
 * # Safety
 * `dict` must be null or a handle not yet freed.
 */
void blip_dictionary_free(struct BlipDictionary *dict);

/**
 * Create a sampling plan. `cols = 0` selects a 1-D grid of `rows` voxels;
 * `decimate_cols != 0` decimates the column axis instead of rows.
 *
 * # Safety
 * `out` must be valid.
 */
enum BlipStatus blip_plan_create(size_t p,
                                 size_t num_frames,
                                 size_t rows,
                                 size_t cols,
                                 int32_t decimate_cols,
                                 uint64_t seed,
                                 struct BlipPlan **out);

/**
 * Samples kept per frame, or 0 for a null handle.
 *
 * # Safety
 * `plan` must be null or a live handle.
 */
size_t blip_plan_samples_per_frame(const struct BlipPlan *plan);

/**
 * Release a plan handle. Null is a no-op.
 *
 * # Safety
 * `plan` must be null or a handle not yet freed.
 */
void blip_plan_free(struct BlipPlan *plan);

/**
 * Apply the observation map. `image` holds `N*L` interleaved complex
 * entries (voxel-major); `out_kspace` receives `M*L` entries (frame-major).
 *
 * # Safety
 * Buffers must match the plan's dimensions.
 */
enum BlipStatus blip_forward(const struct BlipPlan *plan, const double *image, double *out_kspace);

/**
 * Apply the adjoint map: zero-fill and inverse DFT per frame.
 *
 * # Safety
 * Buffers must match the plan's dimensions.
 */
enum BlipStatus blip_adjoint(const struct BlipPlan *plan, const double *kspace, double *out_image);

/**
 * Project every voxel sequence onto the dictionary cone and read out the
 * matched parameters.
 *
 * # Safety
 * `image` and `out_image` hold `num_voxels * L` interleaved complex
 * entries; the map outputs hold `num_voxels` doubles each.
 */
enum BlipStatus blip_project_image(const struct BlipDictionary *dict,
                                   const double *image,
                                   size_t num_voxels,
                                   double *out_image,
                                   double *out_rho,
                                   double *out_t1,
                                   double *out_t2,
                                   double *out_df);

/**
 * Iterated-projection reconstruction from undersampled k-space.
 * `fixed_mu > 0` selects the fixed stepsize; otherwise the adaptive rule
 * is used. Map outputs may not be null; `out_iterations` may be null.
 *
 * # Safety
 * `kspace` holds `M*L` interleaved complex entries for the plan;
 * `out_image` holds `N*L`; map outputs hold `N` doubles each.
 */
enum BlipStatus blip_reconstruct(const struct BlipDictionary *dict,
                                 const struct BlipPlan *plan,
                                 const double *kspace,
                                 size_t max_iters,
                                 double halt_tol,
                                 double fixed_mu,
                                 double *out_image,
                                 double *out_rho,
                                 double *out_t1,
                                 double *out_t2,
                                 double *out_df,
                                 size_t *out_iterations);

/**
 * Matched-filter baseline: back projection scaled by `N/M`, then one
 * projection onto the dictionary cone.
 *
 * # Safety
 * Buffer contracts as in `blip_reconstruct`.
 */
enum BlipStatus blip_mrf_baseline(const struct BlipDictionary *dict,
                                  const struct BlipPlan *plan,
                                  const double *kspace,
                                  double *out_image,
                                  double *out_rho,
                                  double *out_t1,
                                  double *out_t2,
                                  double *out_df);

/**
 * Image-sequence signal-to-error ratio in dB (clamped at +300).
 *
 * # Safety
 * `truth` and `estimate` hold `num_voxels * num_frames` interleaved
 * complex entries each.
 */
enum BlipStatus blip_ser_db(const double *truth,
                            const double *estimate,
                            size_t num_voxels,
                            size_t num_frames,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLIP_MRI_H */
