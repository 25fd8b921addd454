/* C interface to the slfa library: structured latent factor analysis by
 * constrained joint maximum likelihood.
 *
 * All objects are opaque handles created by the library and released with the
 * matching *_free function (passing NULL is allowed). Functions that can fail
 * return an slfa_status; on failure the message is available from
 * slfa_last_error() on the same thread until the next failing call.
 * Strings returned through char** are owned by the caller and released with
 * slfa_string_free. Matrix indices are 0-based; factor numbers in reports and
 * in slfa_eval_scores are 1-based.
 */
#ifndef SLFA_SLFA_H
#define SLFA_SLFA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SLFA_BUILDING_LIBRARY)
#    define SLFA_API __declspec(dllexport)
#  else
#    define SLFA_API __declspec(dllimport)
#  endif
#else
#  define SLFA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum slfa_status {
  SLFA_OK = 0,
  SLFA_ERR_INVALID_ARGUMENT = 1, /* null handle, bad index, bad flag value */
  SLFA_ERR_SHAPE = 2,            /* dimensions do not conform */
  SLFA_ERR_DOMAIN = 3,           /* value outside the family's support */
  SLFA_ERR_DESIGN = 4,           /* design unusable for the request */
  SLFA_ERR_CAPACITY = 5,         /* problem too large for exact enumeration */
  SLFA_ERR_DIVERGED = 6,         /* objective became non-finite */
  SLFA_ERR_PARSE = 7,            /* malformed CSV */
  SLFA_ERR_IO = 8,               /* file could not be read or written */
  SLFA_ERR_CONFIG = 9,           /* invalid configuration */
  SLFA_ERR_INTERNAL = 10
} slfa_status;

typedef enum slfa_family {
  SLFA_FAMILY_GAUSSIAN = 0,
  SLFA_FAMILY_BERNOULLI = 1,
  SLFA_FAMILY_POISSON = 2
} slfa_family;

typedef struct slfa_matrix slfa_matrix;
typedef struct slfa_design slfa_design;
typedef struct slfa_fit_options slfa_fit_options;
typedef struct slfa_fit slfa_fit;
typedef struct slfa_study_config slfa_study_config;
typedef struct slfa_study slfa_study;

SLFA_API const char* slfa_version(void);
SLFA_API const char* slfa_last_error(void);
SLFA_API const char* slfa_status_name(slfa_status status);
SLFA_API void slfa_string_free(char* s);

/* "gaussian", "bernoulli", "poisson" (also "linear", "logit", "mirt"). */
SLFA_API slfa_status slfa_family_parse(const char* name, slfa_family* out);

/* ---- matrices (double, NaN marks a missing cell) ---- */
SLFA_API slfa_status slfa_matrix_create(size_t rows, size_t cols, slfa_matrix** out);
SLFA_API slfa_status slfa_matrix_from_rows(const double* row_major, size_t rows, size_t cols,
                                           slfa_matrix** out);
/* Empty fields are read as NaN when allow_missing is nonzero, else rejected. */
SLFA_API slfa_status slfa_matrix_read_csv(const char* path, int allow_missing, slfa_matrix** out);
SLFA_API slfa_status slfa_matrix_parse_csv(const char* text, int allow_missing,
                                           slfa_matrix** out);
/* 17 significant digits; NaN written as an empty field. */
SLFA_API slfa_status slfa_matrix_write_csv(const slfa_matrix* m, const char* path);
SLFA_API slfa_status slfa_matrix_to_csv(const slfa_matrix* m, char** out);
SLFA_API size_t slfa_matrix_rows(const slfa_matrix* m);
SLFA_API size_t slfa_matrix_cols(const slfa_matrix* m);
SLFA_API slfa_status slfa_matrix_get(const slfa_matrix* m, size_t i, size_t j, double* out);
SLFA_API slfa_status slfa_matrix_set(slfa_matrix* m, size_t i, size_t j, double value);
/* Copies rows*cols values in row-major order; len must be at least that. */
SLFA_API slfa_status slfa_matrix_copy_rows(const slfa_matrix* m, double* out, size_t len);
/* Non-missing cells become 1 if value > threshold, else 0. */
SLFA_API slfa_status slfa_matrix_binarize(slfa_matrix* m, double threshold);
/* Hides observed cells at random so that about n_expected of the rows*cols
 * cells stay observed (each independently with probability n/(rows*cols)). */
SLFA_API slfa_status slfa_matrix_random_mask(slfa_matrix* m, double n_expected, uint64_t seed);
SLFA_API size_t slfa_matrix_missing_count(const slfa_matrix* m);
SLFA_API void slfa_matrix_free(slfa_matrix* m);

/* ---- design (Q) matrices ---- */
SLFA_API slfa_status slfa_design_read_csv(const char* path, slfa_design** out);
SLFA_API slfa_status slfa_design_parse_csv(const char* text, slfa_design** out);
SLFA_API slfa_status slfa_design_from_matrix(const slfa_matrix* m, slfa_design** out);
SLFA_API size_t slfa_design_items(const slfa_design* q);
SLFA_API size_t slfa_design_factors(const slfa_design* q);
/* Per-factor identifiability verdicts as JSON. all_identifiable may be NULL. */
SLFA_API slfa_status slfa_design_report(const slfa_design* q, int intercept_mode, double eps_p,
                                        char** json_out, int* all_identifiable);
SLFA_API void slfa_design_free(slfa_design* q);

/* ---- fitting ---- */
SLFA_API slfa_status slfa_fit_options_create(slfa_fit_options** out);
/* Overrides the given fields from a JSON object (see fit_config_from_json). */
SLFA_API slfa_status slfa_fit_options_load_json(slfa_fit_options* o, const char* json);
SLFA_API slfa_status slfa_fit_options_to_json(const slfa_fit_options* o, char** out);
SLFA_API slfa_status slfa_fit_options_set_cprime(slfa_fit_options* o, double c_prime);
SLFA_API slfa_status slfa_fit_options_set_max_iters(slfa_fit_options* o, int iters);
SLFA_API slfa_status slfa_fit_options_set_inner_steps(slfa_fit_options* o, int steps);
SLFA_API slfa_status slfa_fit_options_set_tol(slfa_fit_options* o, double tol);
SLFA_API slfa_status slfa_fit_options_set_seed(slfa_fit_options* o, uint64_t seed);
/* threads < 1 means all available cores. */
SLFA_API slfa_status slfa_fit_options_set_threads(slfa_fit_options* o, int threads);
SLFA_API slfa_status slfa_fit_options_set_intercept(slfa_fit_options* o, int intercept_mode);
SLFA_API slfa_status slfa_fit_options_set_line_search(slfa_fit_options* o, double backtrack,
                                                      double initial_step, int max_halvings,
                                                      double armijo);
SLFA_API void slfa_fit_options_free(slfa_fit_options* o);

/* Fits y (N x J, NaN = missing) under design q (J x K). dispersion is the
 * Gaussian variance and must be 1 for the other families. */
SLFA_API slfa_status slfa_fit_run(const slfa_matrix* y, const slfa_design* q, slfa_family family,
                                  double dispersion, const slfa_fit_options* options,
                                  slfa_fit** out);
SLFA_API slfa_status slfa_fit_scores(const slfa_fit* f, slfa_matrix** out);   /* N x K */
SLFA_API slfa_status slfa_fit_loadings(const slfa_fit* f, slfa_matrix** out); /* J x K */
/* Negative log-likelihood at the start and after each outer iteration. */
SLFA_API size_t slfa_fit_trace_length(const slfa_fit* f);
SLFA_API slfa_status slfa_fit_trace(const slfa_fit* f, double* out, size_t len);
SLFA_API int slfa_fit_converged(const slfa_fit* f);
SLFA_API int slfa_fit_iterations(const slfa_fit* f);
SLFA_API size_t slfa_fit_stalled_updates(const slfa_fit* f);
SLFA_API double slfa_fit_observed_fraction(const slfa_fit* f);
SLFA_API void slfa_fit_free(slfa_fit* f);

/* Sum over observed cells of y*m - b(m) with m = theta * a^T. */
SLFA_API slfa_status slfa_log_likelihood(const slfa_matrix* y, const slfa_matrix* theta,
                                         const slfa_matrix* a, slfa_family family,
                                         double dispersion, double* out);

/* ---- simulation studies ---- */
SLFA_API slfa_status slfa_study_config_read(const char* path, slfa_study_config** out);
SLFA_API slfa_status slfa_study_config_parse(const char* json, slfa_study_config** out);
SLFA_API slfa_status slfa_study_config_to_json(const slfa_study_config* c, char** out);
SLFA_API slfa_status slfa_study_config_set_seed(slfa_study_config* c, uint64_t seed);
/* Expected number of observed cells per data set; <= 0 clears it. */
SLFA_API slfa_status slfa_study_config_set_missing_n(slfa_study_config* c, double n_expected);
SLFA_API void slfa_study_config_free(slfa_study_config* c);

/* threads < 1 means all available cores; output does not depend on it. */
SLFA_API slfa_status slfa_study_run(const slfa_study_config* c, int threads, slfa_study** out);
SLFA_API size_t slfa_study_record_count(const slfa_study* s);
SLFA_API size_t slfa_study_failure_count(const slfa_study* s);
/* Tidy per-replication records: J,N,replication,metric,value. */
SLFA_API slfa_status slfa_study_records_csv(const slfa_study* s, char** out);
/* J,metric,median,q25,q75,count over successful replications. */
SLFA_API slfa_status slfa_study_aggregate_csv(const slfa_study* s, char** out);
/* Median of a records metric at each grid point; len must be >= grid size. */
SLFA_API slfa_status slfa_study_medians(const slfa_study* s, const char* metric, double* out,
                                        size_t len);
SLFA_API void slfa_study_free(slfa_study* s);

/* ---- score-recovery metrics ---- */
/* Compares column k (1-based) of two N x K score matrices after sign
 * alignment. JSON fields: factor, sign, sine, wasserstein, kendall,
 * classification, tau_lower, tau_upper. */
SLFA_API slfa_status slfa_eval_scores(const slfa_matrix* truth, const slfa_matrix* estimate,
                                      size_t k, double q_lower, double q_upper, char** json_out);

#ifdef __cplusplus
}
#endif

#endif
