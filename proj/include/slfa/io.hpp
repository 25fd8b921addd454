#pragma once

#include <string>
#include <vector>

#include "slfa/design.hpp"
#include "slfa/estimator.hpp"
#include "slfa/model.hpp"

namespace slfa {

// 17 significant digits, so that parsing the text gives back the same double.
std::string format_double(double x);

struct CsvMatrix {
  Matrix values;  // NaN marks an empty (missing) field
  std::vector<std::string> header;
};

// Comma-separated numeric matrix with an optional header row. A first row
// containing any non-numeric, non-empty field is taken as the header. Empty
// fields become NaN when allow_missing is set and are an error otherwise.
// Errors name the offending line and column.
CsvMatrix parse_matrix_csv(const std::string& text, bool allow_missing,
                           const std::string& source = "<input>");
CsvMatrix read_matrix_csv(const std::string& path, bool allow_missing);

// NaN is written as an empty field.
std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header = {});
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

DesignMatrix read_design_csv(const std::string& path);
DesignMatrix parse_design_csv(const std::string& text, const std::string& source = "<input>");

// Fit settings as JSON. Keys: c_prime, max_outer_iters, inner_steps,
// tol_rel_obj, intercept_mode, seed and line_search {backtrack, initial_step,
// max_halvings, armijo, remember_steps}. Missing keys keep the values of
// `base`; unknown keys are an error.
FitConfig fit_config_from_json(const std::string& text, const FitConfig& base = {});
std::string fit_config_to_json(const FitConfig& config, int indent = 2);

}  // namespace slfa
