#include "slfa/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "slfa/error.hpp"
#include "slfa/io.hpp"
#include "slfa/metrics.hpp"
#include "slfa/parallel.hpp"

namespace slfa {

namespace {

FactorSet set_of(std::initializer_list<std::size_t> one_based) {
  FactorSet s = 0;
  for (std::size_t k : one_based) s |= singleton(k - 1);
  return s;
}

}  // namespace

std::vector<FactorSet> design_patterns(DesignKind kind, std::size_t factors,
                                       const std::vector<FactorSet>& custom) {
  auto need = [&](std::size_t k, const char* name) {
    if (factors != k)
      fail(ErrorKind::InvalidArgument, std::string(name) + " design needs K = " +
                                           std::to_string(k) + ", got " +
                                           std::to_string(factors));
  };
  switch (kind) {
    case DesignKind::Simple: {
      if (factors == 0 || factors > kMaxFactors)
        fail(ErrorKind::InvalidArgument, "simple design needs 1 <= K <= 32");
      std::vector<FactorSet> p;
      for (std::size_t k = 0; k < factors; ++k) p.push_back(singleton(k));
      return p;
    }
    case DesignKind::Mixed:
      need(5, "mixed");
      return {set_of({1, 2, 3}), set_of({2, 3, 4}), set_of({3, 4, 5}), set_of({4, 5, 1}),
              set_of({5, 1, 2})};
    case DesignKind::StudyII:
      need(2, "studyII");
      return {set_of({1}), set_of({1, 2})};
    case DesignKind::Table1:
      need(3, "table1");
      return {set_of({1, 2}), set_of({1, 3}), set_of({2, 3})};
    case DesignKind::Custom: {
      if (custom.empty()) fail(ErrorKind::InvalidArgument, "custom design needs patterns");
      const FactorSet all = factors >= 32 ? ~FactorSet{0} : (FactorSet{1} << factors) - 1;
      for (FactorSet s : custom)
        if ((s & ~all) != 0)
          fail(ErrorKind::InvalidArgument, "custom pattern " + format_set(s) +
                                               " uses a factor beyond K = " +
                                               std::to_string(factors));
      return custom;
    }
  }
  fail(ErrorKind::InvalidArgument, "unknown design kind");
}

GeneratedDesign gen_design(DesignKind kind, std::size_t items, std::size_t factors,
                           const std::vector<FactorSet>& custom) {
  const auto patterns = design_patterns(kind, factors, custom);
  GeneratedDesign out{DesignMatrix(items, factors), items % patterns.size() != 0};
  for (std::size_t j = 0; j < items; ++j) {
    const FactorSet s = patterns[j % patterns.size()];
    for (std::size_t k = 0; k < factors; ++k) out.q.set(j, k, contains(s, k));
  }
  return out;
}

Matrix sample_ball(std::size_t count, std::size_t factors, double radius, Rng& rng,
                   BallDistribution dist) {
  if (!(radius > 0)) fail(ErrorKind::InvalidArgument, "ball radius must be positive");
  const auto n = static_cast<Eigen::Index>(count);
  const auto k = static_cast<Eigen::Index>(factors);
  Matrix out(n, k);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector z(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dist == BallDistribution::TruncatedNormal) {
      do {
        for (Eigen::Index c = 0; c < k; ++c) z(c) = 0.5 * radius * gauss(rng);
      } while (z.norm() > radius);
      out.row(i) = z.transpose();
      continue;
    }
    double norm = 0.0;
    do {
      for (Eigen::Index c = 0; c < k; ++c) z(c) = gauss(rng);
      norm = z.norm();
    } while (norm == 0.0);
    double r = radius;
    if (dist == BallDistribution::UniformBall)
      r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(factors));
    out.row(i) = (z * (r / norm)).transpose();
  }
  return out;
}

Loadings apply_design(const Matrix& a_raw, const DesignMatrix& q) {
  if (a_raw.rows() != static_cast<Eigen::Index>(q.items()) ||
      a_raw.cols() != static_cast<Eigen::Index>(q.factors()))
    fail(ErrorKind::Shape, "apply_design: loadings and design shapes differ");
  Loadings a = a_raw;
  for (Eigen::Index j = 0; j < a.rows(); ++j)
    for (Eigen::Index k = 0; k < a.cols(); ++k)
      if (!q(static_cast<std::size_t>(j), static_cast<std::size_t>(k))) a(j, k) = 0.0;
  return a;
}

ResponseData::Mask gen_mask(double n_expected, std::size_t rows, std::size_t cols, Rng& rng) {
  const double cells = static_cast<double>(rows) * static_cast<double>(cols);
  if (!(n_expected > 0) || n_expected > cells)
    fail(ErrorKind::InvalidArgument, "expected observation count must lie in (0, NJ]");
  const double p = n_expected / cells;
  ResponseData::Mask mask(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::bernoulli_distribution draw(p);
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j) mask(i, j) = (p >= 1.0 || draw(rng)) ? 1 : 0;
  return mask;
}

void StudyConfig::validate() const {
  if (factors == 0) fail(ErrorKind::Config, "factors must be >= 1");
  if (j_grid.empty()) fail(ErrorKind::Config, "J_grid must not be empty");
  if (std::any_of(j_grid.begin(), j_grid.end(), [](std::size_t j) { return j == 0; }))
    fail(ErrorKind::Config, "J_grid entries must be positive");
  if (!n_list.empty() && n_list.size() != j_grid.size())
    fail(ErrorKind::Config, "N_list must have one entry per J_grid entry");
  if (n_list.empty() && !(n_multiplier > 0)) fail(ErrorKind::Config, "N_multiplier must be > 0");
  if (!(radius > 0)) fail(ErrorKind::Config, "radius must be positive");
  if (!(cprime_multiplier > 0)) fail(ErrorKind::Config, "cprime_multiplier must be positive");
  if (replications < 1) fail(ErrorKind::Config, "replications must be >= 1");
  if (!(quantile_lower >= 0 && quantile_lower < quantile_upper && quantile_upper <= 1))
    fail(ErrorKind::Config, "quantiles must satisfy 0 <= q- < q+ <= 1");
  if (metric_factor >= factors) fail(ErrorKind::Config, "metric_factor out of range");
  if (observed_fraction && !(*observed_fraction > 0 && *observed_fraction <= 1))
    fail(ErrorKind::Config, "observed_fraction must lie in (0, 1]");
  try {
    design_patterns(design, factors, custom_patterns);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
}

std::size_t StudyConfig::persons_for(std::size_t grid_index) const {
  if (!n_list.empty()) return n_list.at(grid_index);
  return static_cast<std::size_t>(
      std::llround(n_multiplier * static_cast<double>(j_grid.at(grid_index))));
}

namespace {

using nlohmann::json;

DesignKind parse_design_kind(const std::string& s) {
  if (s == "simple") return DesignKind::Simple;
  if (s == "mixed") return DesignKind::Mixed;
  if (s == "studyII" || s == "study2") return DesignKind::StudyII;
  if (s == "table1") return DesignKind::Table1;
  fail(ErrorKind::Config, "unknown design '" + s + "'");
}

std::string design_name(DesignKind d) {
  switch (d) {
    case DesignKind::Simple:
      return "simple";
    case DesignKind::Mixed:
      return "mixed";
    case DesignKind::StudyII:
      return "studyII";
    case DesignKind::Table1:
      return "table1";
    case DesignKind::Custom:
      return "custom";
  }
  return "custom";
}

BallDistribution parse_ball(const std::string& s) {
  if (s == "uniform-ball") return BallDistribution::UniformBall;
  if (s == "uniform-sphere") return BallDistribution::UniformSphere;
  if (s == "truncated-normal") return BallDistribution::TruncatedNormal;
  fail(ErrorKind::Config, "unknown ball distribution '" + s + "'");
}

std::string ball_name(BallDistribution b) {
  switch (b) {
    case BallDistribution::UniformBall:
      return "uniform-ball";
    case BallDistribution::UniformSphere:
      return "uniform-sphere";
    case BallDistribution::TruncatedNormal:
      return "truncated-normal";
  }
  return "uniform-ball";
}

}  // namespace

StudyConfig StudyConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("study config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Config, "study config must be a JSON object");
  static const std::set<std::string> known{
      "name",       "family",        "dispersion",        "factors",     "design",
      "J_grid",     "N_multiplier",  "N_list",            "radius",      "cprime_multiplier",
      "replications", "seed",        "missing_n",         "observed_fraction", "quantiles",
      "ball",       "metric_factor", "fit"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) fail(ErrorKind::Config, "unknown study config key '" + key + "'");

  StudyConfig c;
  try {
    c.name = j.value("name", c.name);
    const std::string family = j.value("family", std::string("gaussian"));
    c.family = ModelFamily::make(parse_family(family), j.value("dispersion", 1.0));
    c.factors = j.value("factors", c.factors);
    if (j.contains("design")) {
      const auto& d = j["design"];
      if (d.is_string()) {
        c.design = parse_design_kind(d.get<std::string>());
      } else if (d.is_object() && d.contains("patterns")) {
        c.design = DesignKind::Custom;
        for (const auto& pattern : d["patterns"]) {
          FactorSet s = 0;
          for (const auto& k : pattern) {
            const auto idx = k.get<std::size_t>();
            if (idx < 1 || idx > kMaxFactors) fail(ErrorKind::Config, "pattern factor out of range");
            s |= singleton(idx - 1);
          }
          c.custom_patterns.push_back(s);
        }
      } else {
        fail(ErrorKind::Config, "design must be a name or {\"patterns\": [...]}");
      }
    }
    if (j.contains("J_grid")) c.j_grid = j["J_grid"].get<std::vector<std::size_t>>();
    c.n_multiplier = j.value("N_multiplier", c.n_multiplier);
    if (j.contains("N_list")) c.n_list = j["N_list"].get<std::vector<std::size_t>>();
    c.radius = j.value("radius", c.radius);
    c.cprime_multiplier = j.value("cprime_multiplier", c.cprime_multiplier);
    c.replications = j.value("replications", c.replications);
    c.seed = j.value("seed", c.seed);
    if (j.contains("missing_n") && !j["missing_n"].is_null())
      c.missing_n = j["missing_n"].get<double>();
    if (j.contains("observed_fraction") && !j["observed_fraction"].is_null())
      c.observed_fraction = j["observed_fraction"].get<double>();
    if (j.contains("quantiles")) {
      const auto q = j["quantiles"].get<std::vector<double>>();
      if (q.size() != 2) fail(ErrorKind::Config, "quantiles must have two entries");
      c.quantile_lower = q[0];
      c.quantile_upper = q[1];
    }
    if (j.contains("ball")) c.ball = parse_ball(j["ball"].get<std::string>());
    if (j.contains("metric_factor")) {
      const auto k = j["metric_factor"].get<std::size_t>();
      if (k < 1) fail(ErrorKind::Config, "metric_factor is 1-based");
      c.metric_factor = k - 1;
    }
    if (j.contains("fit")) {
      const auto& f = j["fit"];
      static const std::set<std::string> fit_keys{"max_outer_iters", "inner_steps", "tol_rel_obj"};
      for (const auto& [key, value] : f.items())
        if (!fit_keys.count(key)) fail(ErrorKind::Config, "unknown fit key '" + key + "'");
      c.max_outer_iters = f.value("max_outer_iters", c.max_outer_iters);
      c.inner_steps = f.value("inner_steps", c.inner_steps);
      c.tol_rel_obj = f.value("tol_rel_obj", c.tol_rel_obj);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("study config has a wrongly typed field: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    fail(ErrorKind::Config, e.what());
  }
  c.validate();
  return c;
}

StudyConfig StudyConfig::from_json_file(const std::string& path) {
  return from_json(read_text_file(path));
}

std::string StudyConfig::to_json(int indent) const {
  json j;
  j["name"] = name;
  j["family"] = std::string(slfa::to_string(family.kind()));
  j["dispersion"] = family.dispersion();
  j["factors"] = factors;
  if (design == DesignKind::Custom) {
    json patterns = json::array();
    for (FactorSet s : custom_patterns) {
      json p = json::array();
      for (std::size_t k : members(s)) p.push_back(k + 1);
      patterns.push_back(p);
    }
    j["design"] = {{"patterns", patterns}};
  } else {
    j["design"] = design_name(design);
  }
  j["J_grid"] = j_grid;
  if (n_list.empty())
    j["N_multiplier"] = n_multiplier;
  else
    j["N_list"] = n_list;
  j["radius"] = radius;
  j["cprime_multiplier"] = cprime_multiplier;
  j["replications"] = replications;
  j["seed"] = seed;
  j["missing_n"] = missing_n ? json(*missing_n) : json(nullptr);
  j["observed_fraction"] = observed_fraction ? json(*observed_fraction) : json(nullptr);
  j["quantiles"] = {quantile_lower, quantile_upper};
  j["ball"] = ball_name(ball);
  j["metric_factor"] = metric_factor + 1;
  j["fit"] = {{"max_outer_iters", max_outer_iters},
              {"inner_steps", inner_steps},
              {"tol_rel_obj", tol_rel_obj}};
  return j.dump(indent);
}

namespace {

ReplicationRecord run_replication(const StudyConfig& config, std::size_t grid_index, int rep) {
  const auto start = std::chrono::steady_clock::now();
  ReplicationRecord rec;
  rec.items = config.j_grid[grid_index];
  rec.persons = config.persons_for(grid_index);
  rec.replication = rep;
  std::seed_seq seq{static_cast<std::uint64_t>(config.seed & 0xffffffffu),
                    static_cast<std::uint64_t>(config.seed >> 32),
                    static_cast<std::uint64_t>(rec.items), static_cast<std::uint64_t>(rep)};
  Rng rng(seq);
  try {
    const auto K = config.factors;
    const DesignMatrix q = gen_design(config.design, rec.items, K, config.custom_patterns).q;
    const FactorScores theta = sample_ball(rec.persons, K, config.radius, rng, config.ball);
    const Loadings a = apply_design(sample_ball(rec.items, K, config.radius, rng, config.ball), q);
    const Matrix y = sample_responses(config.family, theta, a, rng);
    std::optional<double> n_obs = config.missing_n;
    const double cells = static_cast<double>(rec.persons) * static_cast<double>(rec.items);
    if (!n_obs && config.observed_fraction && *config.observed_fraction < 1.0)
      n_obs = *config.observed_fraction * cells;
    ResponseData data = n_obs ? ResponseData(y, gen_mask(*n_obs, rec.persons, rec.items, rng))
                              : ResponseData(y);
    rec.observed_fraction = data.observed_fraction();

    rec.gamma_theta = gamma_hat(theta);
    const TypePartition partition = type_partition(q);
    rec.gamma_a_min = std::numeric_limits<double>::infinity();
    for (FactorSet s : partition.active_types()) {
      const auto& rows = partition.rows.at(s);
      const auto cols = members(s);
      if (cols.empty()) continue;
      Matrix block(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
          block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              a(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
      rec.gamma_a_min = std::min(rec.gamma_a_min, gamma_hat(block));
    }
    if (!std::isfinite(rec.gamma_a_min)) rec.gamma_a_min = 0.0;
    rec.sigma_nj = signal_index(theta, a, q, config.metric_factor);

    FitConfig fc;
    fc.c_prime = config.cprime_multiplier * config.radius;
    fc.max_outer_iters = config.max_outer_iters;
    fc.inner_steps = config.inner_steps;
    fc.tol_rel_obj = config.tol_rel_obj;
    fc.seed = rng();
    fc.threads = 1;
    const FitResult fit_result = fit(data, q, config.family, fc);
    rec.iterations = fit_result.iters_used;
    rec.converged = fit_result.converged;
    for (std::size_t t = 1; t < fit_result.objective_trace.size(); ++t)
      rec.trace_rise = std::max(rec.trace_rise, fit_result.objective_trace[t] -
                                                    fit_result.objective_trace[t - 1]);

    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(K); ++k)
      rec.sine.push_back(sin_angle_factor(theta, fit_result.theta_hat, k));
    rec.frobenius = frobenius_scaled(fit_result.theta_hat * fit_result.a_hat.transpose(),
                                     theta * a.transpose());
    const FactorRecovery fr =
        factor_recovery(theta, fit_result.theta_hat, static_cast<Eigen::Index>(config.metric_factor),
                        config.quantile_lower, config.quantile_upper);
    rec.wasserstein = fr.wasserstein;
    rec.kendall = fr.kendall;
    rec.classification = fr.classification;
    rec.tau_lower = fr.tau_lower;
    rec.tau_upper = fr.tau_upper;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<std::pair<std::string, double>> metric_rows(const ReplicationRecord& r) {
  if (!r.ok) return {{"failed", 1.0}};
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t k = 0; k < r.sine.size(); ++k)
    out.emplace_back("sin_factor_" + std::to_string(k + 1), r.sine[k]);
  out.emplace_back("frobenius", r.frobenius);
  out.emplace_back("wasserstein", r.wasserstein);
  out.emplace_back("kendall", r.kendall);
  out.emplace_back("classification", r.classification);
  out.emplace_back("tau_lower", r.tau_lower);
  out.emplace_back("tau_upper", r.tau_upper);
  out.emplace_back("iterations", r.iterations);
  out.emplace_back("converged", r.converged ? 1.0 : 0.0);
  out.emplace_back("observed_fraction", r.observed_fraction);
  out.emplace_back("gamma_theta", r.gamma_theta);
  out.emplace_back("gamma_a_min", r.gamma_a_min);
  out.emplace_back("sigma_nj", r.sigma_nj);
  return out;
}

}  // namespace

std::vector<ReplicationRecord> run_study(const StudyConfig& config, int threads) {
  config.validate();
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  const std::size_t cells = config.j_grid.size() * reps;
  std::vector<ReplicationRecord> records(cells);
  parallel_for(cells, resolve_threads(threads), [&](std::size_t idx) {
    records[idx] = run_replication(config, idx / reps, static_cast<int>(idx % reps));
  });
  return records;
}

std::string records_csv(const std::vector<ReplicationRecord>& records) {
  std::string out = "J,N,replication,metric,value\n";
  for (const auto& r : records)
    for (const auto& [metric, value] : metric_rows(r))
      out += std::to_string(r.items) + "," + std::to_string(r.persons) + "," +
             std::to_string(r.replication) + "," + metric + "," + format_double(value) + "\n";
  return out;
}

namespace {

double sample_quantile(std::vector<double> x, double p) {
  Vector v = Eigen::Map<Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  return quantile(v, p);
}

// Grid-ordered (J, metric) -> values over successful replications.
std::vector<std::pair<std::size_t, std::vector<std::pair<std::string, std::vector<double>>>>>
group(const std::vector<ReplicationRecord>& records) {
  std::vector<std::pair<std::size_t, std::vector<std::pair<std::string, std::vector<double>>>>> g;
  for (const auto& r : records) {
    if (g.empty() || g.back().first != r.items) g.push_back({r.items, {}});
    if (!r.ok) continue;
    auto& metrics = g.back().second;
    for (const auto& [name, value] : metric_rows(r)) {
      auto it = std::find_if(metrics.begin(), metrics.end(),
                             [&](const auto& m) { return m.first == name; });
      if (it == metrics.end()) {
        metrics.push_back({name, {}});
        it = std::prev(metrics.end());
      }
      it->second.push_back(value);
    }
  }
  return g;
}

}  // namespace

std::string aggregate_csv(const std::vector<ReplicationRecord>& records) {
  std::string out = "J,metric,median,q25,q75,count\n";
  for (const auto& [j, metrics] : group(records))
    for (const auto& [name, values] : metrics)
      out += std::to_string(j) + "," + name + "," + format_double(sample_quantile(values, 0.5)) +
             "," + format_double(sample_quantile(values, 0.25)) + "," +
             format_double(sample_quantile(values, 0.75)) + "," + std::to_string(values.size()) +
             "\n";
  return out;
}

std::vector<double> median_by_j(const std::vector<ReplicationRecord>& records,
                                const std::string& metric) {
  std::vector<double> out;
  for (const auto& [j, metrics] : group(records)) {
    auto it = std::find_if(metrics.begin(), metrics.end(),
                           [&](const auto& m) { return m.first == metric; });
    out.push_back(it == metrics.end() || it->second.empty()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : sample_quantile(it->second, 0.5));
  }
  return out;
}

}  // namespace slfa
