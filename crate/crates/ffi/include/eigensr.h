#ifndef EIGENSR_H
#define EIGENSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum EsrStatus {
  ESR_STATUS_OK = 0,
  ESR_STATUS_NULL_POINTER = 1,
  ESR_STATUS_INVALID_ARGUMENT = 2,
  ESR_STATUS_DIMENSION_MISMATCH = 3,
  ESR_STATUS_NON_FINITE = 4,
  ESR_STATUS_FORMAT = 5,
  ESR_STATUS_IO = 6,
  ESR_STATUS_CHECKPOINT = 7,
  ESR_STATUS_SCALE_MISMATCH = 8,
  ESR_STATUS_DEGENERATE = 9,
  ESR_STATUS_PANIC = 10,
  ESR_STATUS_OTHER = 11,
} EsrStatus;

/**
 * A hyperspectral cube, `bands × height × width`, band-major.
 */
typedef struct EsrCube EsrCube;

/**
 * A single-channel super-resolution operator.
 */
typedef struct EsrModel EsrModel;

/**
 * Scores of a prediction against a reference.
 */
typedef struct EsrMetrics {
  /**
   * Mean PSNR over finite bands, dB. `+inf` when every band is exact.
   */
  double psnr;
  /**
   * Bands with zero error, excluded from the PSNR mean.
   */
  size_t psnr_infinite_bands;
  /**
   * Mean SSIM. Only meaningful when `ssim_valid` is nonzero.
   */
  double ssim;
  /**
   * Zero when the bands are smaller than the SSIM window.
   */
  int32_t ssim_valid;
  /**
   * Mean spectral angle, degrees.
   */
  double sam;
  double peak;
} EsrMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *esr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *esr_version(void);

/**
 * Copies `len` values (band-major) into a new cube.
 *
 * # Safety
 * `data` must point to `len` readable doubles; `out` must be writable.
 */
enum EsrStatus esr_cube_new(size_t bands,
                            size_t height,
                            size_t width,
                            const double *data,
                            size_t len,
                            struct EsrCube **out);

/**
 * Reads a `.hsc` or `.npy` cube.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum EsrStatus esr_cube_read(const char *path, struct EsrCube **out);

/**
 * Writes a cube; the format follows the file extension.
 *
 * # Safety
 * `cube` must be a live handle and `path` a NUL-terminated string.
 */
enum EsrStatus esr_cube_write(const struct EsrCube *cube, const char *path);

/**
 * Shape of a cube. Any of the out pointers may be null.
 *
 * # Safety
 * `cube` must be a live handle.
 */
enum EsrStatus esr_cube_shape(const struct EsrCube *cube,
                              size_t *bands,
                              size_t *height,
                              size_t *width);

/**
 * Borrowed pointer to the cube's values, band-major; null for a null handle.
 * Valid until the cube is freed.
 *
 * # Safety
 * `cube` must be a live handle or null.
 */
const double *esr_cube_data(const struct EsrCube *cube);

/**
 * # Safety
 * `cube` must come from this library and not be freed twice. Null is ignored.
 */
void esr_cube_free(struct EsrCube *cube);

/**
 * The plain bicubic operator at an integer scale of at least 2.
 *
 * # Safety
 * `out` must be writable.
 */
enum EsrStatus esr_model_bicubic(size_t scale, struct EsrModel **out);

/**
 * Loads trained weights from a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum EsrStatus esr_model_load(const char *path, struct EsrModel **out);

/**
 * Upscaling factor of a model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t esr_model_scale(const struct EsrModel *model);

/**
 * # Safety
 * `model` must come from this library and not be freed twice. Null is ignored.
 */
void esr_model_free(struct EsrModel *model);

/**
 * Single-pass eigenimage super-resolution. `rank` 0 picks the default.
 *
 * # Safety
 * `cube` and `model` must be live handles; `out` must be writable.
 */
enum EsrStatus esr_infer_alpha(const struct EsrCube *cube,
                               const struct EsrModel *model,
                               size_t rank,
                               struct EsrCube **out);

/**
 * Iterative eigenimage super-resolution. `rank` and `iterations` 0 and a
 * non-positive `lambda` pick the defaults.
 *
 * # Safety
 * `cube` and `model` must be live handles; `out` must be writable.
 */
enum EsrStatus esr_infer_beta(const struct EsrCube *cube,
                              const struct EsrModel *model,
                              size_t rank,
                              size_t iterations,
                              double lambda,
                              struct EsrCube **out);

/**
 * PSNR, SSIM and SAM of `pred` against `reference`. A non-positive `peak`
 * uses the reference maximum.
 *
 * # Safety
 * `pred` and `reference` must be live handles; `out` must be writable.
 */
enum EsrStatus esr_evaluate(const struct EsrCube *pred,
                            const struct EsrCube *reference,
                            double peak,
                            struct EsrMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIGENSR_H */
