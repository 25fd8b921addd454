#include "slfa/slfa.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include <json.hpp>

#include "slfa/design.hpp"
#include "slfa/error.hpp"
#include "slfa/estimator.hpp"
#include "slfa/io.hpp"
#include "slfa/metrics.hpp"
#include "slfa/model.hpp"
#include "slfa/parallel.hpp"
#include "slfa/simulation.hpp"

struct slfa_matrix {
  slfa::Matrix m;
};
struct slfa_design {
  slfa::DesignMatrix q;
};
struct slfa_fit_options {
  slfa::FitConfig config;
};
struct slfa_fit {
  slfa::FitResult result;
  double observed_fraction = 1.0;
};
struct slfa_study_config {
  slfa::StudyConfig config;
};
struct slfa_study {
  slfa::StudyConfig config;
  std::vector<slfa::ReplicationRecord> records;
};

namespace {

thread_local std::string last_error;

slfa_status status_of(slfa::ErrorKind kind) {
  using slfa::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidArgument:
      return SLFA_ERR_INVALID_ARGUMENT;
    case ErrorKind::Shape:
      return SLFA_ERR_SHAPE;
    case ErrorKind::Domain:
      return SLFA_ERR_DOMAIN;
    case ErrorKind::Design:
      return SLFA_ERR_DESIGN;
    case ErrorKind::Capacity:
      return SLFA_ERR_CAPACITY;
    case ErrorKind::Diverged:
      return SLFA_ERR_DIVERGED;
    case ErrorKind::Parse:
      return SLFA_ERR_PARSE;
    case ErrorKind::Io:
      return SLFA_ERR_IO;
    case ErrorKind::Config:
      return SLFA_ERR_CONFIG;
  }
  return SLFA_ERR_INTERNAL;
}

template <typename F>
slfa_status guarded(F&& body) {
  try {
    body();
    return SLFA_OK;
  } catch (const slfa::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return SLFA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return SLFA_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return SLFA_ERR_INTERNAL;
  }
}

template <typename T>
const T& need(const T* p, const char* what) {
  if (p == nullptr) slfa::fail(slfa::ErrorKind::InvalidArgument, std::string(what) + " is null");
  return *p;
}
template <typename T>
T& need(T* p, const char* what) {
  if (p == nullptr) slfa::fail(slfa::ErrorKind::InvalidArgument, std::string(what) + " is null");
  return *p;
}

std::string need_str(const char* p, const char* what) {
  if (p == nullptr) slfa::fail(slfa::ErrorKind::InvalidArgument, std::string(what) + " is null");
  return p;
}

void need_out(const void* p) {
  if (p == nullptr) slfa::fail(slfa::ErrorKind::InvalidArgument, "output pointer is null");
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

slfa::ModelFamily make_family(slfa_family family, double dispersion) {
  switch (family) {
    case SLFA_FAMILY_GAUSSIAN:
      return slfa::ModelFamily::make(slfa::FamilyKind::Gaussian, dispersion);
    case SLFA_FAMILY_BERNOULLI:
      return slfa::ModelFamily::make(slfa::FamilyKind::Bernoulli, dispersion);
    case SLFA_FAMILY_POISSON:
      return slfa::ModelFamily::make(slfa::FamilyKind::Poisson, dispersion);
  }
  slfa::fail(slfa::ErrorKind::InvalidArgument, "unknown family code");
}

void check_index(const slfa_matrix& m, size_t i, size_t j) {
  if (i >= static_cast<size_t>(m.m.rows()) || j >= static_cast<size_t>(m.m.cols()))
    slfa::fail(slfa::ErrorKind::InvalidArgument,
               "index (" + std::to_string(i) + ", " + std::to_string(j) + ") outside a " +
                   std::to_string(m.m.rows()) + " x " + std::to_string(m.m.cols()) + " matrix");
}

}  // namespace

extern "C" {

const char* slfa_version(void) { return SLFA_VERSION; }

const char* slfa_last_error(void) { return last_error.c_str(); }

const char* slfa_status_name(slfa_status status) {
  switch (status) {
    case SLFA_OK:
      return "ok";
    case SLFA_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case SLFA_ERR_SHAPE:
      return "shape mismatch";
    case SLFA_ERR_DOMAIN:
      return "domain error";
    case SLFA_ERR_DESIGN:
      return "design error";
    case SLFA_ERR_CAPACITY:
      return "capacity exceeded";
    case SLFA_ERR_DIVERGED:
      return "diverged";
    case SLFA_ERR_PARSE:
      return "parse error";
    case SLFA_ERR_IO:
      return "i/o error";
    case SLFA_ERR_CONFIG:
      return "configuration error";
    case SLFA_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

void slfa_string_free(char* s) { delete[] s; }

slfa_status slfa_family_parse(const char* name, slfa_family* out) {
  return guarded([&] {
    need_out(out);
    switch (slfa::parse_family(need_str(name, "family name"))) {
      case slfa::FamilyKind::Gaussian:
        *out = SLFA_FAMILY_GAUSSIAN;
        break;
      case slfa::FamilyKind::Bernoulli:
        *out = SLFA_FAMILY_BERNOULLI;
        break;
      case slfa::FamilyKind::Poisson:
        *out = SLFA_FAMILY_POISSON;
        break;
    }
  });
}

slfa_status slfa_matrix_create(size_t rows, size_t cols, slfa_matrix** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_matrix{slfa::Matrix::Zero(static_cast<Eigen::Index>(rows),
                                              static_cast<Eigen::Index>(cols))};
  });
}

slfa_status slfa_matrix_from_rows(const double* row_major, size_t rows, size_t cols,
                                  slfa_matrix** out) {
  return guarded([&] {
    need_out(out);
    if (row_major == nullptr && rows * cols > 0)
      slfa::fail(slfa::ErrorKind::InvalidArgument, "data pointer is null");
    auto* h = new slfa_matrix{slfa::Matrix(rows, cols)};
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) h->m(i, j) = row_major[i * cols + j];
    *out = h;
  });
}

slfa_status slfa_matrix_read_csv(const char* path, int allow_missing, slfa_matrix** out) {
  return guarded([&] {
    need_out(out);
    auto csv = slfa::read_matrix_csv(need_str(path, "path"), allow_missing != 0);
    *out = new slfa_matrix{std::move(csv.values)};
  });
}

slfa_status slfa_matrix_parse_csv(const char* text, int allow_missing, slfa_matrix** out) {
  return guarded([&] {
    need_out(out);
    auto csv = slfa::parse_matrix_csv(need_str(text, "text"), allow_missing != 0);
    *out = new slfa_matrix{std::move(csv.values)};
  });
}

slfa_status slfa_matrix_write_csv(const slfa_matrix* m, const char* path) {
  return guarded([&] {
    slfa::write_text_file(need_str(path, "path"), slfa::matrix_to_csv(need(m, "matrix").m));
  });
}

slfa_status slfa_matrix_to_csv(const slfa_matrix* m, char** out) {
  return guarded([&] {
    need_out(out);
    *out = dup_string(slfa::matrix_to_csv(need(m, "matrix").m));
  });
}

size_t slfa_matrix_rows(const slfa_matrix* m) { return m ? static_cast<size_t>(m->m.rows()) : 0; }

size_t slfa_matrix_cols(const slfa_matrix* m) { return m ? static_cast<size_t>(m->m.cols()) : 0; }

slfa_status slfa_matrix_get(const slfa_matrix* m, size_t i, size_t j, double* out) {
  return guarded([&] {
    need_out(out);
    check_index(need(m, "matrix"), i, j);
    *out = m->m(i, j);
  });
}

slfa_status slfa_matrix_set(slfa_matrix* m, size_t i, size_t j, double value) {
  return guarded([&] {
    check_index(need(m, "matrix"), i, j);
    m->m(i, j) = value;
  });
}

slfa_status slfa_matrix_copy_rows(const slfa_matrix* m, double* out, size_t len) {
  return guarded([&] {
    need_out(out);
    const auto& mat = need(m, "matrix").m;
    const auto rows = static_cast<size_t>(mat.rows());
    const auto cols = static_cast<size_t>(mat.cols());
    if (len < rows * cols)
      slfa::fail(slfa::ErrorKind::InvalidArgument, "output buffer too small");
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) out[i * cols + j] = mat(i, j);
  });
}

slfa_status slfa_matrix_binarize(slfa_matrix* m, double threshold) {
  return guarded([&] {
    if (!std::isfinite(threshold))
      slfa::fail(slfa::ErrorKind::InvalidArgument, "binarize threshold must be finite");
    auto& mat = need(m, "matrix").m;
    for (Eigen::Index j = 0; j < mat.cols(); ++j)
      for (Eigen::Index i = 0; i < mat.rows(); ++i)
        if (!std::isnan(mat(i, j))) mat(i, j) = mat(i, j) > threshold ? 1.0 : 0.0;
  });
}

slfa_status slfa_matrix_random_mask(slfa_matrix* m, double n_expected, uint64_t seed) {
  return guarded([&] {
    auto& mat = need(m, "matrix").m;
    slfa::Rng rng(seed);
    const auto mask = slfa::gen_mask(n_expected, static_cast<std::size_t>(mat.rows()),
                                     static_cast<std::size_t>(mat.cols()), rng);
    for (Eigen::Index j = 0; j < mat.cols(); ++j)
      for (Eigen::Index i = 0; i < mat.rows(); ++i)
        if (!mask(i, j)) mat(i, j) = std::numeric_limits<double>::quiet_NaN();
  });
}

size_t slfa_matrix_missing_count(const slfa_matrix* m) {
  return m ? static_cast<size_t>(m->m.array().isNaN().count()) : 0;
}

void slfa_matrix_free(slfa_matrix* m) { delete m; }

slfa_status slfa_design_read_csv(const char* path, slfa_design** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_design{slfa::read_design_csv(need_str(path, "path"))};
  });
}

slfa_status slfa_design_parse_csv(const char* text, slfa_design** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_design{slfa::parse_design_csv(need_str(text, "text"))};
  });
}

slfa_status slfa_design_from_matrix(const slfa_matrix* m, slfa_design** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_design{slfa::DesignMatrix::from_matrix(need(m, "matrix").m)};
  });
}

size_t slfa_design_items(const slfa_design* q) { return q ? q->q.items() : 0; }

size_t slfa_design_factors(const slfa_design* q) { return q ? q->q.factors() : 0; }

slfa_status slfa_design_report(const slfa_design* q, int intercept_mode, double eps_p,
                               char** json_out, int* all_identifiable) {
  return guarded([&] {
    need_out(json_out);
    const auto report = slfa::identifiability_report(need(q, "design").q, intercept_mode != 0,
                                                     eps_p);
    *json_out = dup_string(report.to_json(2));
    if (all_identifiable) *all_identifiable = report.all_identifiable() ? 1 : 0;
  });
}

void slfa_design_free(slfa_design* q) { delete q; }

slfa_status slfa_fit_options_create(slfa_fit_options** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_fit_options{};
  });
}

slfa_status slfa_fit_options_load_json(slfa_fit_options* o, const char* json) {
  return guarded([&] {
    auto& opts = need(o, "fit options");
    opts.config = slfa::fit_config_from_json(need_str(json, "json"), opts.config);
  });
}

slfa_status slfa_fit_options_to_json(const slfa_fit_options* o, char** out) {
  return guarded([&] {
    need_out(out);
    *out = dup_string(slfa::fit_config_to_json(need(o, "fit options").config));
  });
}

slfa_status slfa_fit_options_set_cprime(slfa_fit_options* o, double c_prime) {
  return guarded([&] {
    if (!(c_prime > 0) || !std::isfinite(c_prime))
      slfa::fail(slfa::ErrorKind::Config, "c_prime must be positive");
    need(o, "fit options").config.c_prime = c_prime;
  });
}

slfa_status slfa_fit_options_set_max_iters(slfa_fit_options* o, int iters) {
  return guarded([&] {
    if (iters < 1) slfa::fail(slfa::ErrorKind::Config, "max_outer_iters must be >= 1");
    need(o, "fit options").config.max_outer_iters = iters;
  });
}

slfa_status slfa_fit_options_set_inner_steps(slfa_fit_options* o, int steps) {
  return guarded([&] {
    if (steps < 1) slfa::fail(slfa::ErrorKind::Config, "inner_steps must be >= 1");
    need(o, "fit options").config.inner_steps = steps;
  });
}

slfa_status slfa_fit_options_set_tol(slfa_fit_options* o, double tol) {
  return guarded([&] {
    if (!(tol > 0)) slfa::fail(slfa::ErrorKind::Config, "tol_rel_obj must be positive");
    need(o, "fit options").config.tol_rel_obj = tol;
  });
}

slfa_status slfa_fit_options_set_seed(slfa_fit_options* o, uint64_t seed) {
  return guarded([&] { need(o, "fit options").config.seed = seed; });
}

slfa_status slfa_fit_options_set_threads(slfa_fit_options* o, int threads) {
  return guarded([&] { need(o, "fit options").config.threads = threads; });
}

slfa_status slfa_fit_options_set_intercept(slfa_fit_options* o, int intercept_mode) {
  return guarded([&] { need(o, "fit options").config.intercept_mode = intercept_mode != 0; });
}

slfa_status slfa_fit_options_set_line_search(slfa_fit_options* o, double backtrack,
                                             double initial_step, int max_halvings,
                                             double armijo) {
  return guarded([&] {
    auto& opts = need(o, "fit options");
    slfa::FitConfig c = opts.config;
    c.line_search.backtrack = backtrack;
    c.line_search.initial_step = initial_step;
    c.line_search.max_halvings = max_halvings;
    c.line_search.armijo = armijo;
    c.validate();
    opts.config = c;
  });
}

void slfa_fit_options_free(slfa_fit_options* o) { delete o; }

slfa_status slfa_fit_run(const slfa_matrix* y, const slfa_design* q, slfa_family family,
                         double dispersion, const slfa_fit_options* options, slfa_fit** out) {
  return guarded([&] {
    need_out(out);
    const auto data = slfa::ResponseData::from_nan_missing(need(y, "response matrix").m);
    slfa::FitConfig config = options ? options->config : slfa::FitConfig{};
    config.threads = slfa::resolve_threads(config.threads);
    auto result = slfa::fit(data, need(q, "design").q, make_family(family, dispersion), config);
    *out = new slfa_fit{std::move(result), data.observed_fraction()};
  });
}

slfa_status slfa_fit_scores(const slfa_fit* f, slfa_matrix** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_matrix{need(f, "fit").result.theta_hat};
  });
}

slfa_status slfa_fit_loadings(const slfa_fit* f, slfa_matrix** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_matrix{need(f, "fit").result.a_hat};
  });
}

size_t slfa_fit_trace_length(const slfa_fit* f) {
  return f ? f->result.objective_trace.size() : 0;
}

slfa_status slfa_fit_trace(const slfa_fit* f, double* out, size_t len) {
  return guarded([&] {
    need_out(out);
    const auto& trace = need(f, "fit").result.objective_trace;
    if (len < trace.size()) slfa::fail(slfa::ErrorKind::InvalidArgument, "output buffer too small");
    std::copy(trace.begin(), trace.end(), out);
  });
}

int slfa_fit_converged(const slfa_fit* f) { return f && f->result.converged ? 1 : 0; }

int slfa_fit_iterations(const slfa_fit* f) { return f ? f->result.iters_used : 0; }

size_t slfa_fit_stalled_updates(const slfa_fit* f) { return f ? f->result.stalled_updates : 0; }

double slfa_fit_observed_fraction(const slfa_fit* f) { return f ? f->observed_fraction : 0.0; }

void slfa_fit_free(slfa_fit* f) { delete f; }

slfa_status slfa_log_likelihood(const slfa_matrix* y, const slfa_matrix* theta,
                                const slfa_matrix* a, slfa_family family, double dispersion,
                                double* out) {
  return guarded([&] {
    need_out(out);
    const auto data = slfa::ResponseData::from_nan_missing(need(y, "response matrix").m);
    const auto fam = make_family(family, dispersion);
    data.validate(fam);
    *out = slfa::log_likelihood(data, need(theta, "theta").m, need(a, "loadings").m, fam);
  });
}

slfa_status slfa_study_config_read(const char* path, slfa_study_config** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_study_config{slfa::StudyConfig::from_json_file(need_str(path, "path"))};
  });
}

slfa_status slfa_study_config_parse(const char* json, slfa_study_config** out) {
  return guarded([&] {
    need_out(out);
    *out = new slfa_study_config{slfa::StudyConfig::from_json(need_str(json, "json"))};
  });
}

slfa_status slfa_study_config_to_json(const slfa_study_config* c, char** out) {
  return guarded([&] {
    need_out(out);
    *out = dup_string(need(c, "study config").config.to_json(2));
  });
}

slfa_status slfa_study_config_set_seed(slfa_study_config* c, uint64_t seed) {
  return guarded([&] { need(c, "study config").config.seed = seed; });
}

slfa_status slfa_study_config_set_missing_n(slfa_study_config* c, double n_expected) {
  return guarded([&] {
    auto& cfg = need(c, "study config").config;
    slfa::StudyConfig next = cfg;
    if (n_expected > 0) {
      next.missing_n = n_expected;
      next.observed_fraction.reset();
    } else {
      next.missing_n.reset();
    }
    next.validate();
    cfg = next;
  });
}

void slfa_study_config_free(slfa_study_config* c) { delete c; }

slfa_status slfa_study_run(const slfa_study_config* c, int threads, slfa_study** out) {
  return guarded([&] {
    need_out(out);
    const auto& cfg = need(c, "study config").config;
    auto records = slfa::run_study(cfg, slfa::resolve_threads(threads));
    *out = new slfa_study{cfg, std::move(records)};
  });
}

size_t slfa_study_record_count(const slfa_study* s) { return s ? s->records.size() : 0; }

size_t slfa_study_failure_count(const slfa_study* s) {
  if (!s) return 0;
  size_t n = 0;
  for (const auto& r : s->records) n += r.ok ? 0 : 1;
  return n;
}

slfa_status slfa_study_records_csv(const slfa_study* s, char** out) {
  return guarded([&] {
    need_out(out);
    *out = dup_string(slfa::records_csv(need(s, "study").records));
  });
}

slfa_status slfa_study_aggregate_csv(const slfa_study* s, char** out) {
  return guarded([&] {
    need_out(out);
    *out = dup_string(slfa::aggregate_csv(need(s, "study").records));
  });
}

slfa_status slfa_study_medians(const slfa_study* s, const char* metric, double* out, size_t len) {
  return guarded([&] {
    need_out(out);
    const auto medians = slfa::median_by_j(need(s, "study").records, need_str(metric, "metric"));
    if (len < medians.size()) slfa::fail(slfa::ErrorKind::InvalidArgument, "output buffer too small");
    std::copy(medians.begin(), medians.end(), out);
  });
}

void slfa_study_free(slfa_study* s) { delete s; }

slfa_status slfa_eval_scores(const slfa_matrix* truth, const slfa_matrix* estimate, size_t k,
                             double q_lower, double q_upper, char** json_out) {
  return guarded([&] {
    need_out(json_out);
    const auto& t = need(truth, "true scores").m;
    const auto& h = need(estimate, "estimated scores").m;
    if (t.rows() != h.rows() || t.cols() != h.cols())
      slfa::fail(slfa::ErrorKind::Shape,
                 "score matrices differ in shape: " + std::to_string(t.rows()) + " x " +
                     std::to_string(t.cols()) + " vs " + std::to_string(h.rows()) + " x " +
                     std::to_string(h.cols()));
    if (k < 1 || k > static_cast<size_t>(t.cols()))
      slfa::fail(slfa::ErrorKind::InvalidArgument,
                 "factor " + std::to_string(k) + " outside 1.." + std::to_string(t.cols()));
    if (t.array().isNaN().any() || h.array().isNaN().any())
      slfa::fail(slfa::ErrorKind::Domain, "score matrices must not contain missing cells");
    const auto r =
        slfa::factor_recovery(t, h, static_cast<Eigen::Index>(k - 1), q_lower, q_upper);
    nlohmann::ordered_json j;
    j["factor"] = k;
    j["sign"] = r.sign;
    j["sine"] = r.sine;
    j["wasserstein"] = r.wasserstein;
    j["kendall"] = r.kendall;
    j["classification"] = r.classification;
    j["tau_lower"] = r.tau_lower;
    j["tau_upper"] = r.tau_upper;
    j["quantiles"] = {q_lower, q_upper};
    *json_out = dup_string(j.dump(2));
  });
}

}  // extern "C"
