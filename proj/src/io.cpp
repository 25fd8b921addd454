#include "slfa/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "slfa/error.hpp"

#include <json.hpp>

namespace slfa {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& field, double& out) {
  if (field.empty()) return false;
  const char* begin = field.c_str();
  char* end = nullptr;
  errno = 0;
  out = std::strtod(begin, &end);
  return end == begin + field.size() && errno != ERANGE && std::isfinite(out);
}

std::string where(const std::string& source, std::size_t line, std::size_t col) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

CsvMatrix parse_matrix_csv(const std::string& text, bool allow_missing,
                           const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  CsvMatrix out;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    for (auto& f : fields) f = trim(f);
    if (rows.empty() && out.header.empty()) {
      bool header = false;
      double tmp;
      for (const auto& f : fields)
        if (!f.empty() && !parse_number(f, tmp)) header = true;
      if (header) {
        out.header = fields;
        width = fields.size();
        continue;
      }
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      fail(ErrorKind::Parse, where(source, line_no, 1) + ": expected " + std::to_string(width) +
                                 " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (fields[c].empty()) {
        if (!allow_missing)
          fail(ErrorKind::Parse, where(source, line_no, c + 1) + ": empty field");
        row[c] = std::numeric_limits<double>::quiet_NaN();
      } else if (!parse_number(fields[c], row[c])) {
        fail(ErrorKind::Parse,
             where(source, line_no, c + 1) + ": '" + fields[c] + "' is not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

CsvMatrix read_matrix_csv(const std::string& path, bool allow_missing) {
  return parse_matrix_csv(read_text_file(path), allow_missing, path);
}

std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c) out += ',';
      out += header[c];
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      if (!std::isnan(m(i, j))) out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

DesignMatrix parse_design_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<int>> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    for (auto& f : fields) f = trim(f);
    if (rows.empty() && !header_seen) {
      bool header = false;
      double tmp;
      for (const auto& f : fields)
        if (!f.empty() && !parse_number(f, tmp)) header = true;
      if (header) {
        header_seen = true;
        width = fields.size();
        continue;
      }
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      fail(ErrorKind::Parse, where(source, line_no, 1) + ": expected " + std::to_string(width) +
                                 " fields, found " + std::to_string(fields.size()));
    std::vector<int> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (fields[c] == "0") {
        row[c] = 0;
      } else if (fields[c] == "1") {
        row[c] = 1;
      } else {
        fail(ErrorKind::Parse, where(source, line_no, c + 1) + ": design cell '" + fields[c] +
                                   "' must be 0 or 1");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::Parse, source + ": design has no rows");
  if (width > kMaxFactors)
    fail(ErrorKind::Capacity, source + ": at most " + std::to_string(kMaxFactors) + " factors");
  return DesignMatrix(rows);
}

DesignMatrix read_design_csv(const std::string& path) {
  return parse_design_csv(read_text_file(path), path);
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& what) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) fail(ErrorKind::Config, "unknown " + what + " key '" + key + "'");
}

}  // namespace

FitConfig fit_config_from_json(const std::string& text, const FitConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("fit config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Config, "fit config must be a JSON object");
  reject_unknown(j,
                 {"c_prime", "max_outer_iters", "inner_steps", "tol_rel_obj", "intercept_mode",
                  "seed", "line_search"},
                 "fit config");
  FitConfig c = base;
  try {
    c.c_prime = j.value("c_prime", c.c_prime);
    c.max_outer_iters = j.value("max_outer_iters", c.max_outer_iters);
    c.inner_steps = j.value("inner_steps", c.inner_steps);
    c.tol_rel_obj = j.value("tol_rel_obj", c.tol_rel_obj);
    c.intercept_mode = j.value("intercept_mode", c.intercept_mode);
    c.seed = j.value("seed", c.seed);
    if (j.contains("line_search")) {
      const auto& ls = j["line_search"];
      if (!ls.is_object()) fail(ErrorKind::Config, "line_search must be an object");
      reject_unknown(ls, {"backtrack", "initial_step", "max_halvings", "armijo", "remember_steps"},
                     "line_search");
      c.line_search.backtrack = ls.value("backtrack", c.line_search.backtrack);
      c.line_search.initial_step = ls.value("initial_step", c.line_search.initial_step);
      c.line_search.max_halvings = ls.value("max_halvings", c.line_search.max_halvings);
      c.line_search.armijo = ls.value("armijo", c.line_search.armijo);
      c.line_search.remember_steps = ls.value("remember_steps", c.line_search.remember_steps);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("fit config has a wrongly typed field: ") + e.what());
  }
  c.validate();
  return c;
}

std::string fit_config_to_json(const FitConfig& c, int indent) {
  json j;
  j["c_prime"] = c.c_prime;
  j["max_outer_iters"] = c.max_outer_iters;
  j["inner_steps"] = c.inner_steps;
  j["tol_rel_obj"] = c.tol_rel_obj;
  j["intercept_mode"] = c.intercept_mode;
  j["seed"] = c.seed;
  j["line_search"] = {{"backtrack", c.line_search.backtrack},
                      {"initial_step", c.line_search.initial_step},
                      {"max_halvings", c.line_search.max_halvings},
                      {"armijo", c.line_search.armijo},
                      {"remember_steps", c.line_search.remember_steps}};
  return j.dump(indent);
}

}  // namespace slfa
