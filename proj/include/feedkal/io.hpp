#ifndef FEEDKAL_IO_HPP
#define FEEDKAL_IO_HPP

#include "feedkal/model.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace feedkal {

/// Malformed or unreadable input files.
struct InputError : Error {
  using Error::Error;
};

/**
 * Contents of a system definition file.
 *
 * JSON object with row-major 2-D arrays under "A","B","G","C","D","H","Cm",
 * "Dm","Hm","Q","R","N", plus "dt" and optional "continuous". B, D, Dm and N
 * default to zeros of the implied shape.
 */
struct SystemFile {
  bool continuous = false;
  std::optional<double> dt;
  ContinuousSystem csys;  ///< valid when continuous
  DiscreteSystem dsys;    ///< valid when !continuous
};

namespace detail {

inline Matrix json_matrix(const nlohmann::json& j, const std::string& key) {
  const auto& a = j.at(key);
  if (!a.is_array()) throw InputError("\"" + key + "\" must be a 2-D array");
  const auto rows = static_cast<Eigen::Index>(a.size());
  Eigen::Index cols = -1;
  for (const auto& r : a) {
    if (!r.is_array()) throw InputError("\"" + key + "\" must be a 2-D array");
    if (cols < 0) cols = static_cast<Eigen::Index>(r.size());
    if (static_cast<Eigen::Index>(r.size()) != cols) {
      throw InputError("\"" + key + "\" has ragged rows");
    }
  }
  Matrix m(rows, std::max<Eigen::Index>(cols, 0));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      const auto& v = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      if (!v.is_number()) throw InputError("\"" + key + "\" has a non-numeric entry");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

template <typename System>
void fill_system(const nlohmann::json& j, System& s) {
  for (const char* key : {"A", "G", "C", "H", "Cm", "Hm", "Q", "R"}) {
    if (!j.contains(key)) throw InputError(std::string("missing key \"") + key + "\"");
  }
  s.A = json_matrix(j, "A");
  s.G = json_matrix(j, "G");
  s.C = json_matrix(j, "C");
  s.H = json_matrix(j, "H");
  s.Cm = json_matrix(j, "Cm");
  s.Hm = json_matrix(j, "Hm");
  s.Q = json_matrix(j, "Q");
  s.R = json_matrix(j, "R");

  const auto nx = s.A.rows();
  const auto ny = s.C.rows();
  const auto nz = s.Cm.rows();
  const auto nw = s.G.cols();

  Eigen::Index nu = 0;
  for (const char* key : {"B", "D", "Dm"}) {
    if (j.contains(key)) {
      nu = json_matrix(j, key).cols();
      break;
    }
  }
  s.B = j.contains("B") ? json_matrix(j, "B") : Matrix::Zero(nx, nu);
  s.D = j.contains("D") ? json_matrix(j, "D") : Matrix::Zero(ny, nu);
  s.Dm = j.contains("Dm") ? json_matrix(j, "Dm") : Matrix::Zero(nz, nu);
  s.N = j.contains("N") ? json_matrix(j, "N") : Matrix::Zero(nw, nz);
}

}  // namespace detail

inline SystemFile parse_system_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw InputError("system file must contain a JSON object");

  SystemFile f;
  try {
    f.continuous = j.value("continuous", false);
    if (j.contains("dt")) f.dt = j.at("dt").get<double>();
    if (f.continuous) {
      detail::fill_system(j, f.csys);
    } else {
      detail::fill_system(j, f.dsys);
      f.dsys.dt = f.dt.value_or(1.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad system file: ") + e.what());
  }
  return f;
}

inline SystemFile load_system_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open system file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system_json(ss.str());
}

/// Resolves a loaded file into the discrete system the filters run on.
/// dt_override applies to continuous files; discrete files keep their own dt.
inline DiscreteSystem to_discrete(const SystemFile& f, std::optional<double> dt_override,
                                  DiscretizationMethod method) {
  if (!f.continuous) return f.dsys;
  const auto dt = dt_override ? dt_override : f.dt;
  if (!dt) throw InputError("continuous system needs a sample period (\"dt\" or --dt)");
  return discretize(f.csys, *dt, method);
}

/// Writes via a temporary file and rename, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename " + tmp.string() + ": " + ec.message());
}

/// Scientific notation, 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;
};

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i) out += ',';
    out += t.header[i];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < t.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.data.cols(); ++c) {
      if (c) out += ',';
      out += format_double(t.data(r, c));
    }
    out += '\n';
  }
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV");
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  }
  std::vector<double> values;
  Eigen::Index rows = 0;
  const auto cols = static_cast<Eigen::Index>(t.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Eigen::Index n = 0;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw InputError("bad CSV number: " + cell);
      values.push_back(v);
      ++n;
    }
    if (n != cols) throw InputError("CSV row " + std::to_string(rows + 1) + " has wrong width");
    ++rows;
  }
  t.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace feedkal

#endif  // FEEDKAL_IO_HPP
