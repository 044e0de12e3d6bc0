#ifndef AUTOSEG_H
#define AUTOSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum AutosegStatus {
  AUTOSEG_STATUS_OK = 0,
  AUTOSEG_STATUS_NULL_POINTER = 1,
  AUTOSEG_STATUS_INVALID_INPUT = 2,
  AUTOSEG_STATUS_INVALID_CONFIG = 3,
  AUTOSEG_STATUS_IO = 4,
  AUTOSEG_STATUS_NUMERICAL = 5,
  AUTOSEG_STATUS_UNDEFINED = 6,
  AUTOSEG_STATUS_PANIC = 7,
} AutosegStatus;

typedef enum AutosegPeltCost {
  AUTOSEG_PELT_COST_NORMAL_MEAN = 0,
  AUTOSEG_PELT_COST_NORMAL_MEAN_VARIANCE = 1,
  AUTOSEG_PELT_COST_EXPONENTIAL = 2,
  AUTOSEG_PELT_COST_POISSON = 3,
} AutosegPeltCost;

typedef enum AutosegBocpdModel {
  // Gamma(1, 1) precision prior on standardised data, hazard 1/1000.
  AUTOSEG_BOCPD_MODEL_GAMMA_PRECISION = 0,
  // Normal(1.15e5, 1e4^2) mean prior, noise estimated from the data,
  // hazard 1/250.
  AUTOSEG_BOCPD_MODEL_GAUSSIAN = 1,
} AutosegBocpdModel;

// Opaque detection result: breakpoints and, for the autoencoder, the
// distance curve.
typedef struct AutosegDetection AutosegDetection;

// Opaque multichannel time series.
typedef struct AutosegSeries AutosegSeries;

// Autoencoder detector settings. Obtain defaults from
// `autoseg_detect_params_default` and override fields as needed.
typedef struct AutosegDetectParams {
  size_t window_size;
  // 0 selects half the window, rounded up.
  size_t stride;
  size_t depth;
  double feature_ratio;
  size_t epochs;
  double learning_rate;
  double weight_decay;
  uint64_t seed;
  double min_prominence;
  size_t min_separation;
} AutosegDetectParams;

// Evaluation of one detection at one toleration distance.
typedef struct AutosegEval {
  size_t correct;
  size_t ground_truth;
  size_t alarms;
  double tpr;
  double fpr;
  double pr;
  // `INFINITY` when there are no alarms.
  double mse;
  // NaN when `pl_defined` is false.
  double pl;
  bool pl_defined;
} AutosegEval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *autoseg_last_error(void);

// Library version as a static NUL-terminated string.
const char *autoseg_version(void);

// Copy `channels * len` channel-major values (channel 0 first) into a new
// series.
//
// # Safety
// `values` must point to `channels * len` readable doubles and `out` must
// be a valid pointer to write the handle to.
enum AutosegStatus autoseg_series_new(const double *values,
                                      size_t channels,
                                      size_t len,
                                      struct AutosegSeries **out);

// Load a numeric CSV. With `channels_as_rows` each row is a channel;
// otherwise each column is.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum AutosegStatus autoseg_series_load_csv(const char *path,
                                           bool channels_as_rows,
                                           bool header,
                                           struct AutosegSeries **out);

// Number of timestamps; 0 for a null handle.
//
// # Safety
// `series` must be null or a live handle.
size_t autoseg_series_len(const struct AutosegSeries *series);

// Number of channels; 0 for a null handle.
//
// # Safety
// `series` must be null or a live handle.
size_t autoseg_series_channels(const struct AutosegSeries *series);

// # Safety
// `series` must be null or a handle not yet freed.
void autoseg_series_free(struct AutosegSeries *series);

struct AutosegDetectParams autoseg_detect_params_default(void);

// Run the autoencoder detector.
//
// # Safety
// `series` and `params` must be live, `out` a valid pointer.
enum AutosegStatus autoseg_detect(const struct AutosegSeries *series,
                                  const struct AutosegDetectParams *params,
                                  struct AutosegDetection **out);

// Run PELT. `cost` is an `AutosegPeltCost` value; a `penalty` of 0 or
// less selects BIC.
//
// # Safety
// `series` must be live, `out` a valid pointer.
enum AutosegStatus autoseg_pelt(const struct AutosegSeries *series,
                                uint32_t cost,
                                double penalty,
                                size_t min_segment,
                                struct AutosegDetection **out);

// Run BOCPD from an `AutosegBocpdModel` preset. `hazard_rate <= 0` keeps the preset's value;
// `threshold` is the changepoint probability cutoff (0.5 is conventional).
//
// # Safety
// `series` must be live, `out` a valid pointer.
enum AutosegStatus autoseg_bocpd(const struct AutosegSeries *series,
                                 uint32_t model,
                                 double hazard_rate,
                                 double threshold,
                                 struct AutosegDetection **out);

// Borrow the breakpoints; the array lives as long as the handle.
//
// # Safety
// `detection` must be null or live; `len` must be valid to write.
const size_t *autoseg_detection_breakpoints(const struct AutosegDetection *detection, size_t *len);

// Borrow the distance curve. Returns false (and zero length) for
// detections without one, such as the baselines.
//
// # Safety
// `detection` must be null or live; the out-pointers must be valid to
// write.
bool autoseg_detection_curve(const struct AutosegDetection *detection,
                             const size_t **timestamps,
                             const double **values,
                             size_t *len);

// Serialise to JSON. Free the string with `autoseg_string_free`.
//
// # Safety
// `detection` must be live, `out` a valid pointer.
enum AutosegStatus autoseg_detection_to_json(const struct AutosegDetection *detection, char **out);

// # Safety
// `detection` must be null or a handle not yet freed.
void autoseg_detection_free(struct AutosegDetection *detection);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void autoseg_string_free(char *s);

// Score a detection against sorted ground-truth breakpoints of a series of
// length `series_len`, at toleration distance `tau` samples.
//
// # Safety
// `truth` must point to `n_truth` values, `detection` must be live and
// `out` valid to write.
enum AutosegStatus autoseg_evaluate(const size_t *truth,
                                    size_t n_truth,
                                    size_t series_len,
                                    const struct AutosegDetection *detection,
                                    size_t tau,
                                    struct AutosegEval *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTOSEG_H */
