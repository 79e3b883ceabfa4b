#ifndef WII_H
#define WII_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Values per interleaved IQ snapshot and per feature matrix.
 */
#define WII_IQ_LEN 256

#define WII_NUM_CLASSES 15

typedef enum WiiStatus {
  WII_STATUS_OK = 0,
  WII_STATUS_NULL_POINTER = 1,
  WII_STATUS_INVALID_ARGUMENT = 2,
  WII_STATUS_INVALID_CONFIG = 3,
  WII_STATUS_IO = 4,
  /**
   * Malformed file, JSON or tensor shape.
   */
  WII_STATUS_FORMAT = 5,
  WII_STATUS_PANIC = 6,
} WiiStatus;

/**
 * Dataset held in memory; opaque to C.
 */
typedef struct WiiDataset WiiDataset;

/**
 * Loaded model; opaque to C.
 */
typedef struct WiiModel WiiModel;

typedef struct WiiRecordMeta {
  /**
   * Bit `c` set when class `c` is present.
   */
  uint16_t labels;
  /**
   * -1 for single-label records.
   */
  int16_t utilized_class;
  uint8_t num_interferers;
  /**
   * NaN when unknown, +inf for noise-free records.
   */
  double snr_db;
  uint64_t seed;
} WiiRecordMeta;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the calling thread's last error message, excluding the
 * terminating NUL.
 */
size_t wii_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t wii_last_error_message(char *buf, size_t len);

/**
 * NUL-terminated library version; static storage.
 */
const char *wii_version(void);

/**
 * Synthesizes one unit-power burst of `class_index` (0..15) using the
 * class's `variant_index`-th modulation variant; writes 256 values to `out_iq`.
 *
 * # Safety
 * `out_iq` must be valid for 256 writes.
 */
enum WiiStatus wii_synthesize_burst(uint32_t class_index,
                                    uint32_t variant_index,
                                    uint64_t seed,
                                    double *out_iq);

/**
 * Number of modulation variants of a class, or 0 for an invalid class.
 */
uint32_t wii_variant_count(uint32_t class_index);

/**
 * Writes the 128 x 2 feature matrix of a snapshot, row-major, to `out`.
 *
 * # Safety
 * `iq` must be valid for 256 reads and `out` for 256 writes.
 */
enum WiiStatus wii_features(const double *iq, bool centered, bool normalize, double *out);

/**
 * Label bitmask of the classes whose score is strictly above `threshold`.
 *
 * # Safety
 * `scores` must be valid for 15 reads.
 */
enum WiiStatus wii_apply_threshold(const double *scores, double threshold, uint16_t *out_labels);

/**
 * Loads a model file; on success `*out` owns a handle for [`wii_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum WiiStatus wii_model_load(const char *path, struct WiiModel **out);

/**
 * Number of model outputs, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t wii_model_output_len(const struct WiiModel *model);

/**
 * Scores one snapshot; writes `wii_model_output_len` values to `out_scores`.
 *
 * # Safety
 * `model` must be a live handle, `iq` valid for 256 reads and `out_scores`
 * for `wii_model_output_len(model)` writes.
 */
enum WiiStatus wii_model_predict(const struct WiiModel *model,
                                 const double *iq,
                                 double *out_scores);

/**
 * # Safety
 * `model` must be null or a handle from [`wii_model_load`] not freed before.
 */
void wii_model_free(struct WiiModel *model);

/**
 * Reads a whole dataset file into memory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum WiiStatus wii_dataset_load(const char *path, struct WiiDataset **out);

/**
 * Record count, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t wii_dataset_len(const struct WiiDataset *dataset);

/**
 * Copies record `index`. Either output may be null to skip it.
 *
 * # Safety
 * `dataset` must be a live handle; `out_iq` null or valid for 256 writes;
 * `out_meta` null or valid for one write.
 */
enum WiiStatus wii_dataset_record(const struct WiiDataset *dataset,
                                  size_t index,
                                  double *out_iq,
                                  struct WiiRecordMeta *out_meta);

/**
 * # Safety
 * `dataset` must be null or a handle from [`wii_dataset_load`] not freed before.
 */
void wii_dataset_free(struct WiiDataset *dataset);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WII_H */
