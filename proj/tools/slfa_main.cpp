// slfa command-line tool: check, fit, study, eval.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "slfa/slfa.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotIdentifiable = 2;
constexpr int kExitDiverged = 3;

struct CliError {
  int code;
  std::string message;
};

void check(slfa_status s, const std::string& context) {
  if (s == SLFA_OK) return;
  std::string msg = context + ": " + slfa_last_error();
  throw CliError{s == SLFA_ERR_DIVERGED ? kExitDiverged : kExitInput, msg};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using MatrixPtr = std::unique_ptr<slfa_matrix, Deleter<slfa_matrix, slfa_matrix_free>>;
using DesignPtr = std::unique_ptr<slfa_design, Deleter<slfa_design, slfa_design_free>>;
using OptionsPtr =
    std::unique_ptr<slfa_fit_options, Deleter<slfa_fit_options, slfa_fit_options_free>>;
using FitPtr = std::unique_ptr<slfa_fit, Deleter<slfa_fit, slfa_fit_free>>;
using StudyConfigPtr =
    std::unique_ptr<slfa_study_config, Deleter<slfa_study_config, slfa_study_config_free>>;
using StudyPtr = std::unique_ptr<slfa_study, Deleter<slfa_study, slfa_study_free>>;

std::string take_string(char* s) {
  std::string out(s ? s : "");
  slfa_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitInput, "cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw CliError{kExitInput, "cannot write '" + path.string() + "'"};
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw CliError{kExitInput, "SHA-256 digest failed"};
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

ordered_json file_entry(const std::string& path) {
  return {{"path", path}, {"sha256", sha256_hex(read_file(path))}};
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// --threads, else SLFA_THREADS, else all cores (0).
int thread_count(int flag) {
  if (flag >= 0) return flag;
  if (const char* env = std::getenv("SLFA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0)
      throw CliError{kExitInput, std::string("SLFA_THREADS must be a non-negative integer, got '") +
                                     env + "'"};
    return static_cast<int>(v);
  }
  return 0;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{kExitInput, "cannot create output directory '" + dir + "': " + ec.message()};
  return fs::path(dir);
}

ordered_json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
  ordered_json m;
  m["command"] = command;
  m["argv"] = argv;
  m["version"] = slfa_version();
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CheckArgs {
  std::string q_file;
  bool intercept = false;
  double eps_p = 0.0;
  std::string out;
};

int run_check(const CheckArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  slfa_design* raw = nullptr;
  check(slfa_design_read_csv(a.q_file.c_str(), &raw), "reading design");
  DesignPtr q(raw);
  char* json = nullptr;
  int all = 0;
  check(slfa_design_report(q.get(), a.intercept ? 1 : 0, a.eps_p, &json, &all), "checking design");
  const std::string report = take_string(json);
  std::cout << report << "\n";
  if (!a.out.empty()) {
    const fs::path dir = prepare_out_dir(a.out);
    write_file(dir / "report.json", report + "\n");
    ordered_json m = base_manifest("check", argv);
    m["config"] = {{"intercept_mode", a.intercept}, {"eps_p", a.eps_p}};
    m["seed"] = nullptr;
    m["inputs"] = {{"design", file_entry(a.q_file)}};
    m["all_identifiable"] = all != 0;
    m["outputs"] = {"report.json"};
    m["timing"] = {{"wall_seconds", seconds_since(t0)}};
    write_file(dir / "manifest.json", m.dump(2) + "\n");
  }
  return all ? kExitOk : kExitNotIdentifiable;
}

struct FitArgs {
  std::string y_file;
  std::string q_file;
  std::string family = "gaussian";
  double dispersion = 1.0;
  std::string config_file;
  int k = 0;
  double cprime = 0;
  double tol = 0;
  int max_iters = 0;
  int inner_steps = 0;
  long long seed = -1;
  int threads = -1;
  bool intercept = false;
  std::string binarize;
  double missing_n = 0;
  std::string out;
};

int run_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  slfa_family family;
  check(slfa_family_parse(a.family.c_str(), &family), "--family");

  slfa_fit_options* raw_opts = nullptr;
  check(slfa_fit_options_create(&raw_opts), "fit options");
  OptionsPtr opts(raw_opts);
  if (!a.config_file.empty())
    check(slfa_fit_options_load_json(opts.get(), read_file(a.config_file).c_str()),
          "reading " + a.config_file);
  if (a.cprime != 0) check(slfa_fit_options_set_cprime(opts.get(), a.cprime), "--cprime");
  if (a.tol != 0) check(slfa_fit_options_set_tol(opts.get(), a.tol), "--tol");
  if (a.max_iters != 0) check(slfa_fit_options_set_max_iters(opts.get(), a.max_iters), "--max-iters");
  if (a.inner_steps != 0)
    check(slfa_fit_options_set_inner_steps(opts.get(), a.inner_steps), "--inner-steps");
  if (a.seed >= 0)
    check(slfa_fit_options_set_seed(opts.get(), static_cast<uint64_t>(a.seed)), "--seed");
  if (a.intercept) check(slfa_fit_options_set_intercept(opts.get(), 1), "--intercept");
  const int threads = thread_count(a.threads);
  check(slfa_fit_options_set_threads(opts.get(), threads), "--threads");
  const ordered_json config = ordered_json::parse(take_string([&] {
    char* s = nullptr;
    check(slfa_fit_options_to_json(opts.get(), &s), "fit options");
    return s;
  }()));

  slfa_matrix* raw_y = nullptr;
  check(slfa_matrix_read_csv(a.y_file.c_str(), 1, &raw_y), "reading responses");
  MatrixPtr y(raw_y);
  slfa_design* raw_q = nullptr;
  check(slfa_design_read_csv(a.q_file.c_str(), &raw_q), "reading design");
  DesignPtr q(raw_q);
  if (a.k > 0 && static_cast<size_t>(a.k) != slfa_design_factors(q.get()))
    throw CliError{kExitInput, "--k " + std::to_string(a.k) + " but the design has " +
                                   std::to_string(slfa_design_factors(q.get())) + " factors"};
  if (slfa_matrix_cols(y.get()) != slfa_design_items(q.get()))
    throw CliError{kExitInput, "responses have " + std::to_string(slfa_matrix_cols(y.get())) +
                                   " columns but the design has " +
                                   std::to_string(slfa_design_items(q.get())) + " items"};
  std::optional<double> binarize;
  if (!a.binarize.empty()) {
    char* end = nullptr;
    const double t = std::strtod(a.binarize.c_str(), &end);
    if (end == a.binarize.c_str() || *end != '\0')
      throw CliError{kExitInput, "--binarize needs a number, got '" + a.binarize + "'"};
    check(slfa_matrix_binarize(y.get(), t), "--binarize");
    binarize = t;
  }
  const uint64_t seed = config["seed"].get<uint64_t>();
  if (a.missing_n > 0)
    check(slfa_matrix_random_mask(y.get(), a.missing_n, seed), "--missing-n");

  slfa_fit* raw_fit = nullptr;
  check(slfa_fit_run(y.get(), q.get(), family, a.dispersion, opts.get(), &raw_fit), "fit");
  FitPtr fit(raw_fit);

  const fs::path dir = prepare_out_dir(a.out);
  slfa_matrix* raw_theta = nullptr;
  slfa_matrix* raw_a = nullptr;
  check(slfa_fit_scores(fit.get(), &raw_theta), "fit scores");
  MatrixPtr theta(raw_theta);
  check(slfa_fit_loadings(fit.get(), &raw_a), "fit loadings");
  MatrixPtr loadings(raw_a);
  check(slfa_matrix_write_csv(theta.get(), (dir / "theta_hat.csv").c_str()), "writing theta_hat.csv");
  check(slfa_matrix_write_csv(loadings.get(), (dir / "a_hat.csv").c_str()), "writing a_hat.csv");

  std::vector<double> trace(slfa_fit_trace_length(fit.get()));
  check(slfa_fit_trace(fit.get(), trace.data(), trace.size()), "fit trace");
  std::string trace_csv = "iteration,objective\n";
  for (size_t t = 0; t < trace.size(); ++t)
    trace_csv += std::to_string(t) + "," + format_double(trace[t]) + "\n";
  write_file(dir / "trace.csv", trace_csv);

  ordered_json m = base_manifest("fit", argv);
  m["config"] = config;
  m["family"] = a.family;
  m["dispersion"] = a.dispersion;
  m["seed"] = seed;
  m["threads"] = threads;
  m["preprocessing"] = {{"binarize", binarize ? ordered_json(*binarize) : ordered_json(nullptr)},
                        {"missing_n", a.missing_n > 0 ? ordered_json(a.missing_n)
                                                      : ordered_json(nullptr)}};
  ordered_json inputs = {{"responses", file_entry(a.y_file)}, {"design", file_entry(a.q_file)}};
  if (!a.config_file.empty()) inputs["config"] = file_entry(a.config_file);
  m["inputs"] = inputs;
  m["data"] = {{"persons", slfa_matrix_rows(y.get())},
               {"items", slfa_matrix_cols(y.get())},
               {"factors", slfa_design_factors(q.get())},
               {"missing_cells", slfa_matrix_missing_count(y.get())},
               {"observed_fraction", slfa_fit_observed_fraction(fit.get())}};
  m["result"] = {{"converged", slfa_fit_converged(fit.get()) != 0},
                 {"iterations", slfa_fit_iterations(fit.get())},
                 {"stalled_updates", slfa_fit_stalled_updates(fit.get())},
                 {"final_objective", trace.empty() ? 0.0 : trace.back()}};
  m["outputs"] = {"theta_hat.csv", "a_hat.csv", "trace.csv"};
  m["timing"] = {{"wall_seconds", seconds_since(t0)}};
  write_file(dir / "manifest.json", m.dump(2) + "\n");

  std::cerr << "fit: " << slfa_fit_iterations(fit.get()) << " iterations, "
            << (slfa_fit_converged(fit.get()) ? "converged" : "not converged")
            << ", objective " << (trace.empty() ? 0.0 : trace.back()) << "\n";
  return kExitOk;
}

struct StudyArgs {
  std::string config_file;
  long long seed = -1;
  int threads = -1;
  double missing_n = 0;
  std::string out;
};

int run_study(const StudyArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  slfa_study_config* raw_cfg = nullptr;
  check(slfa_study_config_read(a.config_file.c_str(), &raw_cfg), "reading " + a.config_file);
  StudyConfigPtr cfg(raw_cfg);
  if (a.seed >= 0)
    check(slfa_study_config_set_seed(cfg.get(), static_cast<uint64_t>(a.seed)), "--seed");
  if (a.missing_n > 0) check(slfa_study_config_set_missing_n(cfg.get(), a.missing_n), "--missing-n");
  const int threads = thread_count(a.threads);
  const ordered_json config = ordered_json::parse(take_string([&] {
    char* s = nullptr;
    check(slfa_study_config_to_json(cfg.get(), &s), "study config");
    return s;
  }()));

  slfa_study* raw_study = nullptr;
  check(slfa_study_run(cfg.get(), threads, &raw_study), "study");
  StudyPtr study(raw_study);

  const fs::path dir = prepare_out_dir(a.out);
  char* records = nullptr;
  check(slfa_study_records_csv(study.get(), &records), "records");
  write_file(dir / "records.csv", take_string(records));
  char* aggregate = nullptr;
  check(slfa_study_aggregate_csv(study.get(), &aggregate), "aggregate");
  write_file(dir / "aggregate.csv", take_string(aggregate));

  ordered_json m = base_manifest("study", argv);
  m["config"] = config;
  m["seed"] = config["seed"];
  m["threads"] = threads;
  m["inputs"] = {{"config", file_entry(a.config_file)}};
  m["replications"] = {{"records", slfa_study_record_count(study.get())},
                       {"failed", slfa_study_failure_count(study.get())}};
  m["outputs"] = {"records.csv", "aggregate.csv"};
  m["timing"] = {{"wall_seconds", seconds_since(t0)}};
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  std::cerr << "study: " << slfa_study_record_count(study.get()) << " replications, "
            << slfa_study_failure_count(study.get()) << " failed\n";
  return kExitOk;
}

struct EvalArgs {
  std::string truth_file;
  std::string hat_file;
  int k = 1;
  std::vector<double> quantiles{0.55, 0.65};
  std::string out;
};

int run_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.quantiles.size() != 2) throw CliError{kExitInput, "--quantiles needs two values"};
  slfa_matrix* raw_t = nullptr;
  check(slfa_matrix_read_csv(a.truth_file.c_str(), 0, &raw_t), "reading " + a.truth_file);
  MatrixPtr truth(raw_t);
  slfa_matrix* raw_h = nullptr;
  check(slfa_matrix_read_csv(a.hat_file.c_str(), 0, &raw_h), "reading " + a.hat_file);
  MatrixPtr hat(raw_h);
  if (a.k < 1) throw CliError{kExitInput, "--k is 1-based"};
  char* json = nullptr;
  check(slfa_eval_scores(truth.get(), hat.get(), static_cast<size_t>(a.k), a.quantiles[0],
                         a.quantiles[1], &json),
        "eval");
  const std::string metrics = take_string(json);
  std::cout << metrics << "\n";
  if (!a.out.empty()) {
    const fs::path dir = prepare_out_dir(a.out);
    write_file(dir / "metrics.json", metrics + "\n");
    ordered_json m = base_manifest("eval", argv);
    m["config"] = {{"factor", a.k}, {"quantiles", a.quantiles}};
    m["seed"] = nullptr;
    m["inputs"] = {{"truth", file_entry(a.truth_file)}, {"estimate", file_entry(a.hat_file)}};
    m["outputs"] = {"metrics.json"};
    m["timing"] = {{"wall_seconds", seconds_since(t0)}};
    write_file(dir / "manifest.json", m.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Structured latent factor analysis: design checks, fitting, studies, metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(slfa_version()));

  CheckArgs ca;
  auto* check_cmd = app.add_subcommand("check", "Check factor identifiability of a Q-matrix");
  check_cmd->add_option("q_file", ca.q_file, "J x K binary design CSV")->required();
  check_cmd->add_flag("--intercept", ca.intercept, "Factor 1 is an intercept");
  check_cmd->add_option("--eps-p", ca.eps_p, "Ignore item types with proportion <= this");
  check_cmd->add_option("--out", ca.out, "Directory for report.json and manifest.json");

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit scores and loadings to a response matrix");
  fit_cmd->add_option("y_file", fa.y_file, "N x J response CSV; empty fields are missing")
      ->required();
  fit_cmd->add_option("q_file", fa.q_file, "J x K binary design CSV")->required();
  fit_cmd->add_option("--family", fa.family, "gaussian, bernoulli or poisson")
      ->check(CLI::IsMember({"gaussian", "bernoulli", "poisson", "linear", "logit", "mirt"}));
  fit_cmd->add_option("--dispersion", fa.dispersion, "Gaussian noise variance");
  fit_cmd->add_option("--config", fa.config_file, "Fit settings JSON");
  fit_cmd->add_option("--k", fa.k, "Expected number of factors (checked against the design)");
  fit_cmd->add_option("--cprime", fa.cprime, "Norm bound for score and loading rows");
  fit_cmd->add_option("--tol", fa.tol, "Relative objective change that stops the fit");
  fit_cmd->add_option("--max-iters", fa.max_iters, "Maximum outer iterations");
  fit_cmd->add_option("--inner-steps", fa.inner_steps, "Gradient steps per block");
  fit_cmd->add_option("--seed", fa.seed, "Seed for the starting values");
  fit_cmd->add_option("--threads", fa.threads, "Worker threads (0 = all cores)");
  fit_cmd->add_flag("--intercept", fa.intercept, "Fix factor 1 scores at 1, center the rest");
  fit_cmd->add_option("--binarize", fa.binarize, "Map values > t to 1 and the rest to 0");
  fit_cmd->add_option("--missing-n", fa.missing_n,
                      "Hide cells at random, keeping about this many observed");
  fit_cmd->add_option("--out", fa.out, "Output directory")->required();

  StudyArgs sa;
  auto* study_cmd = app.add_subcommand("study", "Run a simulation study from a JSON config");
  study_cmd->add_option("config", sa.config_file, "Study config JSON")->required();
  study_cmd->add_option("--seed", sa.seed, "Override the config seed");
  study_cmd->add_option("--threads", sa.threads, "Worker threads (0 = all cores)");
  study_cmd->add_option("--missing-n", sa.missing_n, "Expected observed cells per data set");
  study_cmd->add_option("--out", sa.out, "Output directory")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Score-recovery metrics for one factor");
  eval_cmd->add_option("theta_true", ea.truth_file, "True N x K scores CSV")->required();
  eval_cmd->add_option("theta_hat", ea.hat_file, "Estimated N x K scores CSV")->required();
  eval_cmd->add_option("--k", ea.k, "Factor to compare (1-based)");
  eval_cmd->add_option("--quantiles", ea.quantiles, "Lower and upper threshold quantiles")
      ->delimiter(',')
      ->expected(2);
  eval_cmd->add_option("--out", ea.out, "Directory for metrics.json and manifest.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*check_cmd) return run_check(ca, args);
    if (*fit_cmd) return run_fit(fa, args);
    if (*study_cmd) return run_study(sa, args);
    if (*eval_cmd) return run_eval(ea, args);
  } catch (const CliError& e) {
    std::cerr << "slfa: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "slfa: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
