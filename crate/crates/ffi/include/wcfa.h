#ifndef WCFA_H
#define WCFA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible C-ABI call.
 */
typedef enum {
  WCFA_STATUS_OK = 0,
  /**
   * File could not be read or written.
   */
  WCFA_STATUS_IO_ERROR = 1,
  /**
   * Input file or argument failed to parse.
   */
  WCFA_STATUS_PARSE_ERROR = 2,
  /**
   * Arguments violate a precondition.
   */
  WCFA_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A panic or internal invariant failure; report as a bug.
   */
  WCFA_STATUS_INTERNAL_ERROR = 4,
} WcfaStatus;

/**
 * Computed result curve.
 */
typedef struct WcfaCurve WcfaCurve;

/**
 * Fitted or loaded model artifact.
 */
typedef struct WcfaModel WcfaModel;

/**
 * Loaded, immutable score table.
 */
typedef struct WcfaTable WcfaTable;

/**
 * Optional knobs for `wcfa_fit`; zero-initialize and override what you
 * need, zero fields fall back to defaults.
 */
typedef struct {
  uint64_t seed;
  uint32_t steps;
  uint32_t batch_size;
  uint32_t trials_per_estimate;
  uint32_t n_train_max;
  uint32_t scores_per_pair;
  double learning_rate;
  double sigmoid_scale;
  double softmax_scale;
} WcfaFitOptions;

/**
 * One curve record.
 */
typedef struct {
  uint64_t n;
  double tau;
  double p_fa;
  double ci_lo;
  double ci_hi;
} WcfaCurveRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (UTF-8, NUL-terminated) into `buf` and
 * returns the full message length in bytes (excluding the NUL). Pass a
 * null `buf` to query the needed capacity.
 */
size_t wcfa_last_error(char *buf, size_t len);

/**
 * Loads and groups a score file. `format` is `"csv"` or `"jsonl"`;
 * `partition` may be null to accept a single-partition file as-is.
 */
WcfaStatus wcfa_table_load(const char *path,
                           const char *format,
                           const char *partition,
                           WcfaTable **out);

void wcfa_table_free(WcfaTable *table);

/**
 * Number of distinct ordered speaker pairs.
 */
size_t wcfa_table_pair_count(const WcfaTable *table);

/**
 * Total number of retained scores.
 */
size_t wcfa_table_score_count(const WcfaTable *table);

/**
 * Empirical worst-case FA curve over the given `N` grid and thresholds,
 * with 99% percentile-bootstrap confidence intervals.
 */
WcfaStatus wcfa_estimate(const WcfaTable *table,
                         const uint64_t *n_grid,
                         size_t n_count,
                         const double *taus,
                         size_t tau_count,
                         uint32_t trials,
                         uint64_t seed,
                         WcfaCurve **out);

/**
 * Fits a score model discriminatively. `family` is `"gaussian-ls"`,
 * `"pwl-ls"` or `"plda"`; `dim` applies to PLDA; `warp` adds a learnable
 * monotone score warp. `options` may be null for defaults.
 */
WcfaStatus wcfa_fit(const WcfaTable *table,
                    const char *family,
                    uint32_t dim,
                    bool warp,
                    const WcfaFitOptions *options,
                    WcfaModel **out);

/**
 * Loads a model artifact saved by `wcfa_fit`/`wcfa_model_save`.
 */
WcfaStatus wcfa_model_load(const char *path, WcfaModel **out);

WcfaStatus wcfa_model_save(const WcfaModel *model, const char *path);

void wcfa_model_free(WcfaModel *model);

/**
 * Model-based worst-case FA curve; `N` may far exceed any observed
 * population.
 */
WcfaStatus wcfa_extrapolate(const WcfaModel *model,
                            const uint64_t *n_grid,
                            size_t n_count,
                            const double *taus,
                            size_t tau_count,
                            uint32_t trials,
                            uint32_t scores_per_pair,
                            uint64_t seed,
                            WcfaCurve **out);

/**
 * Number of rows in a curve.
 */
size_t wcfa_curve_len(const WcfaCurve *curve);

/**
 * Copies row `index` into `row`.
 */
WcfaStatus wcfa_curve_row(const WcfaCurve *curve, size_t index, WcfaCurveRow *row);

/**
 * Writes a curve to disk; `format` is `"csv"`, `"json"` or `"svg"`.
 */
WcfaStatus wcfa_curve_write(const WcfaCurve *curve, const char *path, const char *format);

void wcfa_curve_free(WcfaCurve *curve);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WCFA_H */
