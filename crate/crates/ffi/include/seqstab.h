/* C interface to the seqstab sequence-stabilization library. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a C-ABI call.
typedef enum SeqstabStatus {
  // The call succeeded.
  SEQSTAB_STATUS_OK = 0,
  // A required pointer argument was null.
  SEQSTAB_STATUS_NULL_POINTER = 1,
  // The input data was rejected (shape, finiteness, size overflow).
  SEQSTAB_STATUS_INVALID_INPUT = 2,
  // The configuration was rejected (ensemble size, head count, …).
  SEQSTAB_STATUS_INVALID_CONFIG = 3,
  // An internal panic was caught at the boundary.
  SEQSTAB_STATUS_PANICKED = 4,
} SeqstabStatus;

// Opaque handle to an in-memory control sequence (`frames × dims` doubles).
typedef struct SeqstabSequence SeqstabSequence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread.
//
// The pointer stays valid until the next failing `seqstab_*` call on the
// same thread. Never null; initially the empty string.
//
// # Safety
//
// The returned pointer must not be freed or written through.
const char *seqstab_last_error_message(void);

// Creates a sequence handle from a row-major `frames × dims` buffer.
//
// Returns null if `data` is null, the shape is degenerate (`frames < 2` or
// `dims < 1`), or any entry is non-finite; the reason is available from
// [`seqstab_last_error_message`].
//
// # Safety
//
// `data` must point to at least `frames * dims` readable doubles.
struct SeqstabSequence *seqstab_sequence_create(const double *data, size_t frames, size_t dims);

// Releases a handle returned by this library. Null is a no-op.
//
// # Safety
//
// `seq` must be null or a live handle from this library; the handle must
// not be used afterwards.
void seqstab_sequence_free(struct SeqstabSequence *seq);

// Number of frames in the sequence; 0 if `seq` is null.
//
// # Safety
//
// `seq` must be null or a live handle from this library.
size_t seqstab_sequence_frames(const struct SeqstabSequence *seq);

// Number of dimensions per frame; 0 if `seq` is null.
//
// # Safety
//
// `seq` must be null or a live handle from this library.
size_t seqstab_sequence_dims(const struct SeqstabSequence *seq);

// Copies the sequence out as a row-major `frames × dims` buffer.
//
// `len` must equal `frames * dims` exactly.
//
// # Safety
//
// `seq` must be a live handle; `out` must point to `len` writable doubles.
enum SeqstabStatus seqstab_sequence_copy_data(const struct SeqstabSequence *seq,
                                              double *out,
                                              size_t len);

// Stabilizes `seq` with an `m`-member spline ensemble and writes a new
// handle to `out`.
//
// `inlier_fraction` is the fraction of ensemble members kept per
// timestamp (pass 2.0/3.0 for the default policy). On failure `out` is
// untouched.
//
// # Safety
//
// `seq` must be a live handle; `out` must be a valid location for one
// pointer. The new handle must be released with
// [`seqstab_sequence_free`].
enum SeqstabStatus seqstab_stabilize(const struct SeqstabSequence *seq,
                                     size_t m,
                                     double inlier_fraction,
                                     struct SeqstabSequence **out);

// Root-mean-square difference between two sequences of identical shape.
//
// # Safety
//
// `a` and `b` must be live handles; `out` must be a valid location for
// one double.
enum SeqstabStatus seqstab_rmse(const struct SeqstabSequence *a,
                                const struct SeqstabSequence *b,
                                double *out);

// Mean squared second difference of a sequence (larger = jerkier).
//
// # Safety
//
// `seq` must be a live handle; `out` must be a valid location for one
// double.
enum SeqstabStatus seqstab_roughness(const struct SeqstabSequence *seq, double *out);

// Mean per-pixel Euclidean displacement over `count` flow fields.
//
// `u` and `v` each hold `count` consecutive row-major `height × width`
// planes: entry `f*height*width + y*width + x` is the component at pixel
// `(x, y)` of field `f`.
//
// # Safety
//
// `u` and `v` must point to `count * width * height` readable doubles;
// `out` must be a valid location for one double.
enum SeqstabStatus seqstab_flv(const double *u,
                               const double *v,
                               size_t width,
                               size_t height,
                               size_t count,
                               double *out);

// Fuses per-frame latent codes with multi-head cross-attention.
//
// Buffer layout, all row-major and frame-major:
// * `queries`, `keys`: `frame_count × key_dim`;
// * `latents`: `frame_count × layers × channels`;
// * `out`: one `layers × channels` code.
//
// `heads` must divide both `key_dim` and `channels`.
//
// # Safety
//
// The buffers must be readable (resp. writable for `out`) at the sizes
// implied by the layout above.
enum SeqstabStatus seqstab_aggregate(const double *queries,
                                     const double *keys,
                                     const double *latents,
                                     size_t frame_count,
                                     size_t key_dim,
                                     size_t layers,
                                     size_t channels,
                                     size_t heads,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
