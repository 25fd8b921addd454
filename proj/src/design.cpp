#include "slfa/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "slfa/error.hpp"

namespace slfa {

std::vector<std::size_t> members(FactorSet s) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < kMaxFactors; ++k)
    if (contains(s, k)) out.push_back(k);
  return out;
}

std::string format_set(FactorSet s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (std::size_t k : members(s)) {
    if (!first) os << ',';
    os << k + 1;
    first = false;
  }
  os << '}';
  return os.str();
}

DesignMatrix::DesignMatrix(std::size_t items, std::size_t factors)
    : items_(items), factors_(factors), entries_(items * factors, 0) {
  if (factors > kMaxFactors)
    fail(ErrorKind::Capacity, "at most " + std::to_string(kMaxFactors) + " factors supported");
}

DesignMatrix::DesignMatrix(const std::vector<std::vector<int>>& rows)
    : DesignMatrix(rows.size(), rows.empty() ? 0 : rows.front().size()) {
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != factors_) fail(ErrorKind::Shape, "ragged design rows");
    for (std::size_t k = 0; k < factors_; ++k) {
      if (rows[j][k] != 0 && rows[j][k] != 1)
        fail(ErrorKind::InvalidArgument, "design entries must be 0 or 1");
      entries_[j * factors_ + k] = static_cast<std::uint8_t>(rows[j][k]);
    }
  }
}

void DesignMatrix::set(std::size_t j, std::size_t k, bool on) {
  entries_[j * factors_ + k] = on ? 1 : 0;
}

FactorSet DesignMatrix::row_set(std::size_t j) const {
  FactorSet s = 0;
  for (std::size_t k = 0; k < factors_; ++k)
    if ((*this)(j, k)) s |= singleton(k);
  return s;
}

std::vector<std::size_t> DesignMatrix::zero_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < items_; ++j)
    if (row_set(j) == 0) out.push_back(j);
  return out;
}

Matrix DesignMatrix::to_matrix() const {
  Matrix m(static_cast<Eigen::Index>(items_), static_cast<Eigen::Index>(factors_));
  for (std::size_t j = 0; j < items_; ++j)
    for (std::size_t k = 0; k < factors_; ++k)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = (*this)(j, k) ? 1.0 : 0.0;
  return m;
}

DesignMatrix DesignMatrix::from_matrix(const Matrix& m) {
  DesignMatrix q(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.rows(); ++j)
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      const double v = m(j, k);
      if (v != 0.0 && v != 1.0)
        fail(ErrorKind::InvalidArgument, "design entry at row " + std::to_string(j + 1) +
                                             ", column " + std::to_string(k + 1) +
                                             " is not 0 or 1");
      q.set(static_cast<std::size_t>(j), static_cast<std::size_t>(k), v == 1.0);
    }
  return q;
}

double TypePartition::proportion(FactorSet s) const {
  auto it = rows.find(s);
  if (it == rows.end() || items == 0) return 0.0;
  return static_cast<double>(it->second.size()) / static_cast<double>(items);
}

std::vector<FactorSet> TypePartition::active_types(double eps) const {
  std::vector<FactorSet> out;
  for (const auto& [s, r] : rows)
    if (proportion(s) > eps) out.push_back(s);
  return out;
}

std::vector<std::size_t> TypePartition::empty_rows() const {
  auto it = rows.find(FactorSet{0});
  return it == rows.end() ? std::vector<std::size_t>{} : it->second;
}

TypePartition type_partition(const DesignMatrix& q) {
  TypePartition p;
  p.items = q.items();
  p.factors = q.factors();
  for (std::size_t j = 0; j < q.items(); ++j) p.rows[q.row_set(j)].push_back(j);
  return p;
}

FactorVerdict check_identifiability(const TypePartition& partition, std::size_t k,
                                    bool intercept_mode, double eps_p) {
  if (k >= partition.factors)
    fail(ErrorKind::InvalidArgument, "factor index " + std::to_string(k + 1) +
                                         " out of range (K = " +
                                         std::to_string(partition.factors) + ")");
  FactorSet all = 0;
  for (std::size_t f = 0; f < partition.factors; ++f) all |= singleton(f);

  FactorSet witness = all;
  bool any = false;
  for (FactorSet s : partition.active_types(eps_p)) {
    if (!contains(s, k)) continue;
    witness &= s;
    any = true;
  }
  if (!any) witness = 0;  // empty intersection convention

  const FactorSet target = intercept_mode ? (singleton(0) | singleton(k)) : singleton(k);
  return FactorVerdict{k, any && witness == target, witness};
}

bool IdentifiabilityReport::all_identifiable() const {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const FactorVerdict& v) { return v.identifiable; });
}

std::string IdentifiabilityReport::to_json(int indent) const {
  using nlohmann::json;
  json j;
  j["items"] = partition.items;
  j["factors"] = partition.factors;
  j["intercept_mode"] = intercept_mode;
  j["eps_p"] = eps_p;
  j["all_identifiable"] = all_identifiable();
  json factors = json::array();
  for (const auto& v : verdicts) {
    json w = json::array();
    for (std::size_t m : members(v.witness)) w.push_back(m + 1);
    factors.push_back({{"factor", v.factor + 1}, {"identifiable", v.identifiable}, {"witness", w}});
  }
  j["verdicts"] = factors;
  json types = json::array();
  for (const auto& [s, r] : partition.rows) {
    json set = json::array();
    for (std::size_t m : members(s)) set.push_back(m + 1);
    types.push_back({{"type", set}, {"count", r.size()}, {"proportion", partition.proportion(s)}});
  }
  j["types"] = types;
  json empty = json::array();
  for (std::size_t r : partition.empty_rows()) empty.push_back(r + 1);
  j["zero_rows"] = empty;
  j["sigma_nj"] = sigma_nj ? json(*sigma_nj) : json(nullptr);
  return j.dump(indent);
}

IdentifiabilityReport identifiability_report(const DesignMatrix& q, bool intercept_mode,
                                             double eps_p) {
  if (!(eps_p >= 0.0) || eps_p >= 1.0)
    fail(ErrorKind::InvalidArgument, "eps_p must lie in [0, 1)");
  IdentifiabilityReport r;
  r.intercept_mode = intercept_mode;
  r.eps_p = eps_p;
  r.partition = type_partition(q);
  for (std::size_t k = 0; k < q.factors(); ++k)
    r.verdicts.push_back(check_identifiability(r.partition, k, intercept_mode, eps_p));
  return r;
}

namespace {

struct CollectionSearch {
  std::vector<FactorSet> candidates;  // active types containing k
  FactorSet target;
  std::vector<FactorSet> chosen;
  std::vector<std::vector<FactorSet>> found;

  bool minimal() const {
    for (std::size_t skip = 0; skip < chosen.size(); ++skip) {
      FactorSet rest = ~FactorSet{0};
      for (std::size_t i = 0; i < chosen.size(); ++i)
        if (i != skip) rest &= chosen[i];
      if (chosen.size() == 1 || rest == target) return false;
    }
    return true;
  }

  // Members of a minimal collection each drop an element no other member
  // drops, so every accepted extension must strictly shrink the intersection.
  void extend(std::size_t from, FactorSet current) {
    if (current == target) {
      if (chosen.size() == 1 || minimal()) found.push_back(chosen);
      return;
    }
    for (std::size_t i = from; i < candidates.size(); ++i) {
      const FactorSet next = current & candidates[i];
      if (next == current) continue;
      chosen.push_back(candidates[i]);
      extend(i + 1, next);
      chosen.pop_back();
    }
  }
};

}  // namespace

std::vector<std::vector<FactorSet>> feasible_collections(std::span<const FactorSet> active_types,
                                                         std::size_t k, std::size_t factors) {
  if (factors > kMaxEnumerationFactors)
    fail(ErrorKind::Capacity, "feasible-collection enumeration supports at most " +
                                  std::to_string(kMaxEnumerationFactors) + " factors");
  if (k >= factors) fail(ErrorKind::InvalidArgument, "factor index out of range");
  CollectionSearch search;
  search.target = singleton(k);
  for (FactorSet s : active_types)
    if (contains(s, k)) search.candidates.push_back(s);
  std::sort(search.candidates.begin(), search.candidates.end());
  search.candidates.erase(std::unique(search.candidates.begin(), search.candidates.end()),
                          search.candidates.end());
  FactorSet all = 0;
  for (std::size_t f = 0; f < factors; ++f) all |= singleton(f);
  search.extend(0, all);
  return search.found;
}

double gamma_hat(const Matrix& w) {
  if (w.rows() < 1) fail(ErrorKind::InvalidArgument, "gamma_hat needs at least one row");
  if (w.cols() == 0) return 0.0;
  if (w.rows() < w.cols()) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(w);
  return svd.singularValues()(w.cols() - 1) / std::sqrt(static_cast<double>(w.rows()));
}

double signal_index(const FactorScores& theta, const Loadings& loadings, const DesignMatrix& q,
                    std::size_t k) {
  if (static_cast<Eigen::Index>(q.items()) != loadings.rows() ||
      static_cast<Eigen::Index>(q.factors()) != loadings.cols() ||
      theta.cols() != loadings.cols())
    fail(ErrorKind::Shape, "signal_index: shapes of theta, loadings and design disagree");
  if (k >= q.factors()) fail(ErrorKind::InvalidArgument, "factor index out of range");
  const TypePartition p = type_partition(q);
  const std::vector<FactorSet> active = p.active_types();
  const auto collections = feasible_collections(active, k, q.factors());
  const double sqrt_j = std::sqrt(static_cast<double>(q.items()));

  std::map<FactorSet, double> block_strength;
  auto strength = [&](FactorSet s) {
    auto it = block_strength.find(s);
    if (it != block_strength.end()) return it->second;
    const auto rows = p.rows.at(s);
    const auto cols = members(s);
    double value = 0.0;
    if (rows.size() >= cols.size() && !cols.empty()) {
      Matrix block(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
          block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              loadings(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
      Eigen::JacobiSVD<Matrix> svd(block);
      value = svd.singularValues()(static_cast<Eigen::Index>(cols.size()) - 1);
    }
    block_strength.emplace(s, value);
    return value;
  };

  double best = 0.0;
  for (const auto& collection : collections) {
    double weakest = std::numeric_limits<double>::infinity();
    for (FactorSet s : collection) weakest = std::min(weakest, strength(s));
    best = std::max(best, weakest);
  }
  const double design_term = best / sqrt_j;
  const double person_term = theta.rows() >= 1 ? gamma_hat(theta) : 0.0;
  return std::min(design_term, person_term);
}

}  // namespace slfa
