#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slfa/model.hpp"

namespace slfa {

// Subset of factors {0..K-1} as a bit mask; bit k set means factor k (0-based).
using FactorSet = std::uint32_t;
inline constexpr std::size_t kMaxFactors = 32;
inline constexpr std::size_t kMaxEnumerationFactors = 20;

inline FactorSet singleton(std::size_t k) { return FactorSet{1} << k; }
inline bool contains(FactorSet s, std::size_t k) { return (s >> k) & 1u; }
std::vector<std::size_t> members(FactorSet s);
// 1-based rendering, e.g. "{1,3}".
std::string format_set(FactorSet s);

// J x K binary Q-matrix.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(std::size_t items, std::size_t factors);
  explicit DesignMatrix(const std::vector<std::vector<int>>& rows);

  std::size_t items() const { return items_; }
  std::size_t factors() const { return factors_; }
  bool operator()(std::size_t j, std::size_t k) const { return entries_[j * factors_ + k] != 0; }
  void set(std::size_t j, std::size_t k, bool on);
  FactorSet row_set(std::size_t j) const;
  std::vector<std::size_t> zero_rows() const;
  // As a 0/1 double matrix.
  Matrix to_matrix() const;
  static DesignMatrix from_matrix(const Matrix& m);

  bool operator==(const DesignMatrix&) const = default;

 private:
  std::size_t items_ = 0;
  std::size_t factors_ = 0;
  std::vector<std::uint8_t> entries_;
};

// Rows grouped by the exact set of factors they load on.
struct TypePartition {
  std::size_t items = 0;
  std::size_t factors = 0;
  std::map<FactorSet, std::vector<std::size_t>> rows;

  double proportion(FactorSet s) const;
  // Types with proportion strictly greater than eps.
  std::vector<FactorSet> active_types(double eps = 0.0) const;
  // Rows with no factor at all (type {}); permitted but reported.
  std::vector<std::size_t> empty_rows() const;
};

TypePartition type_partition(const DesignMatrix& q);

struct FactorVerdict {
  std::size_t factor = 0;  // 0-based
  bool identifiable = false;
  // Intersection of all active types containing the factor; 0 when none.
  FactorSet witness = 0;
};

// Verdict for factor k. Plain mode asks for witness == {k}; intercept mode
// (factor 0 is the intercept) asks for witness == {0, k}. Types with
// proportion <= eps_p are ignored.
FactorVerdict check_identifiability(const TypePartition& partition, std::size_t k,
                                    bool intercept_mode, double eps_p = 0.0);

struct IdentifiabilityReport {
  bool intercept_mode = false;
  double eps_p = 0.0;
  TypePartition partition;
  std::vector<FactorVerdict> verdicts;
  std::optional<double> sigma_nj;

  bool all_identifiable() const;
  std::string to_json(int indent = 2) const;
};

IdentifiabilityReport identifiability_report(const DesignMatrix& q, bool intercept_mode,
                                             double eps_p = 0.0);

// Minimal collections of the given types whose intersection is exactly {k}.
// A collection is minimal when dropping any member enlarges the intersection.
// Throws ErrorKind::Capacity when factors > kMaxEnumerationFactors.
std::vector<std::vector<FactorSet>> feasible_collections(std::span<const FactorSet> active_types,
                                                         std::size_t k, std::size_t factors);

// Signal-strength index for factor k: the smaller of the best feasible
// collection's weakest scaled block singular value and sigma_K(theta)/sqrt(N).
double signal_index(const FactorScores& theta, const Loadings& loadings, const DesignMatrix& q,
                    std::size_t k);

// sigma_n(W) / sqrt(m) for an m x n matrix; 0 when m < n.
double gamma_hat(const Matrix& w);

}  // namespace slfa
