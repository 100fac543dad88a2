#ifndef SAT2BINPACK_H
#define SAT2BINPACK_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum S2bStatus {
  S2B_STATUS_OK = 0,
  S2B_STATUS_NULL_POINTER = 1,
  S2B_STATUS_INVALID_UTF8 = 2,
  S2B_STATUS_PARSE_ERROR = 3,
  S2B_STATUS_REDUCTION_ERROR = 4,
  S2B_STATUS_VERIFY_ERROR = 5,
  S2B_STATUS_INVALID_ARGUMENT = 6,
  S2B_STATUS_INFEASIBLE_GUESS = 7,
  S2B_STATUS_PANIC = 8,
} S2bStatus;

typedef enum S2bChiMode {
  S2B_CHI_MODE_FULL = 0,
  S2B_CHI_MODE_REDUCED = 1,
} S2bChiMode;

/**
 * Parsed CNF formula.
 */
typedef struct S2bFormula S2bFormula;

/**
 * Reduction of one formula: equality system, aggregated equation and
 * instance family.
 */
typedef struct S2bReduction S2bReduction;

/**
 * Outcome of an end-to-end run.
 */
typedef struct S2bReport S2bReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *s2b_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void s2b_string_free(char *s);

/**
 * Parses DIMACS CNF text.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum S2bStatus s2b_formula_from_dimacs(const char *text, struct S2bFormula **out);

/**
 * # Safety
 * `f` must be null or a handle from `s2b_formula_from_dimacs`, not yet freed.
 */
void s2b_formula_free(struct S2bFormula *f);

/**
 * # Safety
 * `f` must be a live formula handle; `out` must be writable.
 */
enum S2bStatus s2b_formula_num_vars(const struct S2bFormula *f, size_t *out);

/**
 * # Safety
 * `f` must be a live formula handle; `out` must be writable.
 */
enum S2bStatus s2b_formula_num_clauses(const struct S2bFormula *f, size_t *out);

/**
 * Normalizes the formula and builds every stage. `gamma = 0` picks the
 * default base `4n + 1`.
 *
 * # Safety
 * `f` must be a live formula handle; `out` must be writable.
 */
enum S2bStatus s2b_reduction_new(const struct S2bFormula *f,
                                 uint64_t gamma,
                                 struct S2bReduction **out);

/**
 * # Safety
 * `r` must be null or a handle from `s2b_reduction_new`, not yet freed.
 */
void s2b_reduction_free(struct S2bReduction *r);

/**
 * Variables after normalization.
 *
 * # Safety
 * `r` must be a live reduction handle; `out` must be writable.
 */
enum S2bStatus s2b_reduction_num_vars(const struct S2bReduction *r, size_t *out);

/**
 * Clauses after normalization.
 *
 * # Safety
 * `r` must be a live reduction handle; `out` must be writable.
 */
enum S2bStatus s2b_reduction_num_clauses(const struct S2bReduction *r, size_t *out);

/**
 * Rows of the equality system.
 *
 * # Safety
 * `r` must be a live reduction handle; `out` must be writable.
 */
enum S2bStatus s2b_reduction_ilp_rows(const struct S2bReduction *r, size_t *out);

/**
 * Variables of the equality system.
 *
 * # Safety
 * `r` must be a live reduction handle; `out` must be writable.
 */
enum S2bStatus s2b_reduction_ilp_vars(const struct S2bReduction *r, size_t *out);

/**
 * Item types of every instance in the family.
 *
 * # Safety
 * `r` must be a live reduction handle; `out` must be writable.
 */
enum S2bStatus s2b_reduction_item_types(const struct S2bReduction *r, size_t *out);

/**
 * Enumerates the equality system and reports how many solutions it has.
 *
 * # Safety
 * `r` must be a live reduction handle; `out` must be writable.
 */
enum S2bStatus s2b_reduction_count_solutions(const struct S2bReduction *r, size_t *out);

/**
 * Text form of the instance for guess `chi[0..4]`: a header line
 * `D capacity bins`, then one `size multiplicity` line per item type.
 *
 * # Safety
 * `r` must be a live reduction handle, `chi` must point to four values and
 * `out` must be writable. Free the string with `s2b_string_free`.
 */
enum S2bStatus s2b_reduction_instance_text(const struct S2bReduction *r,
                                           const uint32_t *chi,
                                           char **out);

/**
 * Runs the full pipeline and cross-checks it against brute force.
 *
 * # Safety
 * `f` must be a live formula handle; `out` must be writable.
 */
enum S2bStatus s2b_solve(const struct S2bFormula *f,
                         enum S2bChiMode mode,
                         uint32_t jobs,
                         struct S2bReport **out);

/**
 * # Safety
 * `r` must be null or a handle from `s2b_solve`, not yet freed.
 */
void s2b_report_free(struct S2bReport *r);

/**
 * # Safety
 * `r` must be a live report handle; `out` must be writable.
 */
enum S2bStatus s2b_report_sat(const struct S2bReport *r, bool *out);

/**
 * # Safety
 * `r` must be a live report handle; `out` must be writable.
 */
enum S2bStatus s2b_report_bp(const struct S2bReport *r, bool *out);

/**
 * # Safety
 * `r` must be a live report handle; `out` must be writable.
 */
enum S2bStatus s2b_report_agreement(const struct S2bReport *r, bool *out);

/**
 * # Safety
 * `r` must be a live report handle; `out` must be writable. Free the string
 * with `s2b_string_free`.
 */
enum S2bStatus s2b_report_to_json(const struct S2bReport *r, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAT2BINPACK_H */
