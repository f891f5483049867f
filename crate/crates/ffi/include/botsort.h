#ifndef BOTSORT_H
#define BOTSORT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BotsortStatus {
  BOTSORT_STATUS_OK = 0,
  BOTSORT_STATUS_NULL_POINTER = 1,
  BOTSORT_STATUS_INVALID_ARGUMENT = 2,
  BOTSORT_STATUS_INVALID_BOX = 3,
  BOTSORT_STATUS_DEGENERATE_WARP = 4,
  BOTSORT_STATUS_NUMERICAL = 5,
  BOTSORT_STATUS_FRAME_ORDER = 6,
  BOTSORT_STATUS_MISSING_EMBEDDING = 7,
  BOTSORT_STATUS_BUFFER_TOO_SMALL = 8,
  BOTSORT_STATUS_IMAGE_ERROR = 9,
  BOTSORT_STATUS_UNDEFINED_METRIC = 10,
  BOTSORT_STATUS_DUPLICATE_ID = 11,
  BOTSORT_STATUS_INTERNAL = 99,
} BotsortStatus;

/**
 * Opaque evaluation accumulator.
 */
typedef struct BotsortEvaluator BotsortEvaluator;

/**
 * Opaque tracker handle.
 */
typedef struct BotsortTracker BotsortTracker;

/**
 * Row-major 2x3 affine map from previous-frame to current-frame pixels.
 */
typedef struct BotsortWarp {
  double a11;
  double a12;
  double a13;
  double a21;
  double a22;
  double a23;
} BotsortWarp;

typedef struct BotsortConfig {
  double tau;
  double eta;
  double low_floor;
  double match_thresh_first;
  double match_thresh_second;
  double match_thresh_unconfirmed;
  uint32_t track_buffer;
  double alpha;
  double theta_iou;
  double theta_emb;
  bool use_reid;
  bool require_embeddings;
  bool use_cmc;
  bool cmc_cov;
  bool output_pred;
  uint32_t pred_horizon;
  double sigma_p;
  double sigma_v;
  double sigma_m;
} BotsortConfig;

/**
 * Axis-aligned box in pixels: top-left corner and extent.
 */
typedef struct BotsortBox {
  double x;
  double y;
  double w;
  double h;
} BotsortBox;

typedef struct BotsortDetection {
  struct BotsortBox bbox;
  double score;
} BotsortDetection;

typedef struct BotsortTrackOutput {
  uint64_t track_id;
  struct BotsortBox bbox;
  double score;
  /**
   * True for an extrapolated box of a just-lost track.
   */
  bool predicted;
} BotsortTrackOutput;

typedef struct BotsortEvalSummary {
  double mota;
  double idf1;
  uint64_t fp;
  uint64_t fn_;
  uint64_t idsw;
  uint64_t num_gt;
  uint64_t num_pred;
  uint64_t idtp;
  uint64_t idfp;
  uint64_t idfn;
} BotsortEvalSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a
 * success. Valid until the next botsort call on the same thread.
 */
const char *botsort_last_error(void);

/**
 * Library version, NUL-terminated, static.
 */
const char *botsort_version(void);

struct BotsortWarp botsort_warp_identity(void);

/**
 * Default configuration (BoT-SORT without ReID, CMC on).
 */
struct BotsortConfig botsort_config_default(void);

/**
 * Creates a tracker. `config` may be null for defaults.
 *
 * # Safety
 * `config` must be null or point to a valid config; `out` must be valid for writes.
 */
enum BotsortStatus botsort_tracker_new(const struct BotsortConfig *config,
                                       struct BotsortTracker **out);

/**
 * # Safety
 * `tracker` must be null or a handle from `botsort_tracker_new` not yet freed.
 */
void botsort_tracker_free(struct BotsortTracker *tracker);

/**
 * Advances the tracker by one frame. Frames must be consecutive.
 *
 * `embeddings` is null or `num_dets * dim` floats, one row per detection;
 * `has_embedding` is null (every row present) or `num_dets` flags. Rows are
 * normalized here. `warp` null means identity. Up to `capacity` outputs,
 * sorted by id, are copied to `out`, and `*out_len` receives the total. If
 * the total exceeds `capacity` the step still happened, the status is
 * `BufferTooSmall`, and the full list stays available through
 * `botsort_tracker_last_outputs`.
 *
 * # Safety
 * All non-null pointers must be valid for the stated lengths.
 */
enum BotsortStatus botsort_tracker_step(struct BotsortTracker *tracker,
                                        uint32_t frame,
                                        const struct BotsortDetection *dets,
                                        size_t num_dets,
                                        const float *embeddings,
                                        size_t dim,
                                        const uint8_t *has_embedding,
                                        const struct BotsortWarp *warp,
                                        struct BotsortTrackOutput *out,
                                        size_t capacity,
                                        size_t *out_len);

/**
 * Copies the outputs of the most recent step.
 *
 * # Safety
 * As for `botsort_tracker_step`.
 */
enum BotsortStatus botsort_tracker_last_outputs(const struct BotsortTracker *tracker,
                                                struct BotsortTrackOutput *out,
                                                size_t capacity,
                                                size_t *out_len);

/**
 * Upper bound on the outputs of the next step given `num_dets` detections.
 *
 * # Safety
 * `tracker` must be a live handle.
 */
size_t botsort_tracker_max_outputs(const struct BotsortTracker *tracker, size_t num_dets);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum BotsortStatus botsort_evaluator_new(double iou_thresh, struct BotsortEvaluator **out);

/**
 * # Safety
 * `ev` must be null or a live handle.
 */
void botsort_evaluator_free(struct BotsortEvaluator *ev);

/**
 * Adds one frame; frame numbers must strictly increase.
 *
 * # Safety
 * Arrays must be valid for their lengths.
 */
enum BotsortStatus botsort_evaluator_add_frame(struct BotsortEvaluator *ev,
                                               uint32_t frame,
                                               const int64_t *gt_ids,
                                               const struct BotsortBox *gt_boxes,
                                               size_t num_gt,
                                               const int64_t *pred_ids,
                                               const struct BotsortBox *pred_boxes,
                                               size_t num_pred);

/**
 * # Safety
 * `ev` must be a live handle and `out` valid for writes.
 */
enum BotsortStatus botsort_evaluator_summary(const struct BotsortEvaluator *ev,
                                             struct BotsortEvalSummary *out);

/**
 * Cumulative MOTA after each added frame, NaN where still undefined.
 * `*out_len` receives the number of frames.
 *
 * # Safety
 * `out` must be valid for `capacity` doubles.
 */
enum BotsortStatus botsort_evaluator_cmota(const struct BotsortEvaluator *ev,
                                           double *out,
                                           size_t capacity,
                                           size_t *out_len);

/**
 * Estimates the warp from `prev` to `cur`, both `width * height` row-major
 * grayscale images. When there is too little texture or motion information
 * the identity is written and `*fallback` is set to true.
 *
 * # Safety
 * Image buffers must hold `width * height` floats; `out` must be valid.
 */
enum BotsortStatus botsort_gmc_estimate(const float *prev,
                                        const float *cur,
                                        size_t width,
                                        size_t height,
                                        size_t downscale,
                                        uint64_t seed,
                                        struct BotsortWarp *out,
                                        bool *fallback);

/**
 * Validates a warp (finite entries, non-degenerate linear part).
 */
enum BotsortStatus botsort_warp_validate(struct BotsortWarp warp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOTSORT_H */
