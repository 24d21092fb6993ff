#ifndef FLOWDEBLUR_H
#define FLOWDEBLUR_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum FdStatus {
  FD_STATUS_OK = 0,
  FD_STATUS_NULL_POINTER = 1,
  FD_STATUS_SHAPE = 2,
  FD_STATUS_PARAMETER = 3,
  FD_STATUS_IO = 4,
  FD_STATUS_IMAGE = 5,
  FD_STATUS_FORMAT = 6,
  FD_STATUS_NUMERICAL = 7,
  FD_STATUS_EXTERNAL = 8,
  FD_STATUS_PANIC = 9,
} FdStatus;

typedef enum FdBoundary {
  FD_BOUNDARY_REPLICATE = 0,
  FD_BOUNDARY_ZERO = 1,
} FdBoundary;

typedef enum FdPrior {
  FD_PRIOR_IDENTITY = 0,
  FD_PRIOR_TV = 1,
} FdPrior;

typedef struct FdFlow FdFlow;

typedef struct FdImage FdImage;

/**
 * Options for [`fd_hqs_deblur`]. Start from [`fd_deblur_options_default`].
 */
typedef struct FdDeblurOptions {
  /**
   * Strictly increasing coupling weights; null selects the default schedule.
   */
  const double *betas;
  size_t n_betas;
  double cg_tol;
  uint32_t cg_max_iter;
  /**
   * The stored flow is reused on every pass.
   */
  uint32_t global_iterations;
  enum FdBoundary boundary;
  enum FdPrior prior;
  /**
   * Uniform TV weight; zero or less halves a default weight per level.
   */
  double tv_weight;
  uint32_t tv_inner_iters;
} FdDeblurOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *fd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fd_version(void);

/**
 * Black image.
 *
 * # Safety
 * `out` must be writable.
 */
enum FdStatus fd_image_new(size_t width, size_t height, size_t channels, struct FdImage **out);

/**
 * Copies `width * height * channels` planar floats.
 *
 * # Safety
 * `data` must point to that many floats; `out` must be writable.
 */
enum FdStatus fd_image_from_data(size_t width,
                                 size_t height,
                                 size_t channels,
                                 const float *data,
                                 struct FdImage **out);

/**
 * # Safety
 * `image` must come from this library or be null.
 */
void fd_image_free(struct FdImage *image);

/**
 * # Safety
 * `image` must be a live handle or null (returns 0).
 */
size_t fd_image_width(const struct FdImage *image);

/**
 * # Safety
 * As [`fd_image_width`].
 */
size_t fd_image_height(const struct FdImage *image);

/**
 * # Safety
 * As [`fd_image_width`].
 */
size_t fd_image_channels(const struct FdImage *image);

/**
 * Borrowed planar samples, valid while the handle lives.
 *
 * # Safety
 * As [`fd_image_width`].
 */
const float *fd_image_data(const struct FdImage *image);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FdStatus fd_image_read_png(const char *path_, struct FdImage **out);

/**
 * `bit_depth` is 8 or 16.
 *
 * # Safety
 * `image` must be live and `path` NUL-terminated.
 */
enum FdStatus fd_image_write_png(const struct FdImage *image,
                                 const char *path_,
                                 uint32_t bit_depth);

/**
 * Copies `width * height` floats from each of `u` and `v`. Both null gives a
 * zero flow.
 *
 * # Safety
 * `u` and `v` must each point to `width * height` floats or both be null.
 */
enum FdStatus fd_flow_new(size_t width,
                          size_t height,
                          const float *u,
                          const float *v,
                          struct FdFlow **out);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum FdStatus fd_flow_read(const char *path_, struct FdFlow **out);

/**
 * # Safety
 * `flow` must be live and `path` NUL-terminated.
 */
enum FdStatus fd_flow_write(const struct FdFlow *flow, const char *path_);

/**
 * # Safety
 * `flow` must come from this library or be null.
 */
void fd_flow_free(struct FdFlow *flow);

/**
 * # Safety
 * `flow` must be live or null (returns 0).
 */
size_t fd_flow_width(const struct FdFlow *flow);

/**
 * # Safety
 * As [`fd_flow_width`].
 */
size_t fd_flow_height(const struct FdFlow *flow);

/**
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum FdStatus fd_forward_blur(const struct FdImage *sharp,
                              const struct FdFlow *flow,
                              enum FdBoundary boundary_,
                              struct FdImage **out);

/**
 * # Safety
 * As [`fd_forward_blur`].
 */
enum FdStatus fd_adjoint_blur(const struct FdImage *residual,
                              const struct FdFlow *flow,
                              enum FdBoundary boundary_,
                              struct FdImage **out);

/**
 * PSNR in dB against a reference; identical images give +infinity.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum FdStatus fd_psnr(const struct FdImage *a, const struct FdImage *b, double *out);

/**
 * # Safety
 * As [`fd_psnr`].
 */
enum FdStatus fd_ssim(const struct FdImage *a, const struct FdImage *b, double *out);

struct FdDeblurOptions fd_deblur_options_default(void);

/**
 * Non-blind restoration of `observed` under a known flow.
 *
 * # Safety
 * Handles must be live; `options` may be null for defaults; `out` must be
 * writable.
 */
enum FdStatus fd_hqs_deblur(const struct FdImage *observed,
                            const struct FdFlow *flow,
                            const struct FdDeblurOptions *options,
                            struct FdImage **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWDEBLUR_H */
