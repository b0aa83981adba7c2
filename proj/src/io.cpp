#include "pwreg/io.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace pwreg {
namespace {

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

bool parse_double(const std::string& tok, Scalar& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream is(line);
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      toks.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  toks.push_back(cur);
  return toks;
}

PointCloud rows_to_cloud(const std::string& path, const std::vector<std::vector<Scalar>>& rows) {
  if (rows.empty()) throw std::runtime_error(path + ": no points");
  Matrix pts(Eigen::Index(rows.size()), Eigen::Index(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      pts(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
  return PointCloud(std::move(pts));
}

PointCloud load_columns(const std::string& path, bool comma) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<std::vector<Scalar>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t want = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = comma ? split_csv(line) : split_ws(line);
    if (toks.empty() || (toks.size() == 1 && toks[0].empty())) continue;
    std::vector<Scalar> row;
    row.reserve(toks.size());
    bool ok = true;
    for (const auto& t : toks) {
      Scalar v;
      if (!parse_double(t, v)) {
        ok = false;
        break;
      }
      row.push_back(v);
    }
    if (!ok) {
      // A csv header line is tolerated once, before any data.
      if (comma && first_data && rows.empty()) continue;
      fail(path, lineno, "malformed coordinate '" + line + "'");
    }
    if (first_data) {
      want = row.size();
      if (want < 1 || want > 3)
        fail(path, lineno, "dimension must be 1, 2 or 3, got " + std::to_string(want));
      first_data = false;
    } else if (row.size() != want) {
      fail(path, lineno, "inconsistent dimension: expected " + std::to_string(want) +
                             " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows_to_cloud(path, rows);
}

PointCloud load_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) fail(path, lineno, std::string("unexpected end of file in ") + what);
    ++lineno;
  };

  next_line("header");
  if (split_ws(line) != std::vector<std::string>{"ply"}) fail(path, lineno, "not a ply file");

  long vertex_count = -1;
  int prop_index = 0;
  int ix = -1, iy = -1, iz = -1;
  int vertex_props = 0;
  bool in_vertex_element = false;
  while (true) {
    next_line("header");
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "comment") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii") fail(path, lineno, "only ascii ply supported");
    } else if (toks[0] == "element") {
      if (toks.size() == 3 && toks[1] == "vertex") {
        vertex_count = std::stol(toks[2]);
        in_vertex_element = true;
      } else {
        in_vertex_element = false;
      }
    } else if (toks[0] == "property" && in_vertex_element) {
      if (toks.size() >= 2 && toks[1] == "list")
        fail(path, lineno, "list property on vertex element unsupported");
      const std::string& name = toks.back();
      if (name == "x") ix = prop_index;
      if (name == "y") iy = prop_index;
      if (name == "z") iz = prop_index;
      ++prop_index;
      ++vertex_props;
    } else if (toks[0] == "end_header") {
      break;
    }
  }
  if (vertex_count < 0) fail(path, lineno, "missing 'element vertex'");
  if (ix < 0 || iy < 0 || iz < 0) fail(path, lineno, "vertex element lacks x/y/z properties");

  std::vector<std::vector<Scalar>> rows;
  rows.reserve(std::size_t(vertex_count));
  for (long v = 0; v < vertex_count; ++v) {
    next_line("vertex data");
    auto toks = split_ws(line);
    if (int(toks.size()) < vertex_props)
      fail(path, lineno, "expected " + std::to_string(vertex_props) + " vertex properties");
    std::vector<Scalar> row(3);
    int idx[3] = {ix, iy, iz};
    for (int c = 0; c < 3; ++c) {
      if (!parse_double(toks[std::size_t(idx[c])], row[std::size_t(c)]))
        fail(path, lineno, "malformed coordinate '" + toks[std::size_t(idx[c])] + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows_to_cloud(path, rows);
}

std::string fmt_row(const RowVector& row, char sep) {
  std::string out;
  char buf[40];
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", row(j));
    if (j) out += sep;
    out += buf;
  }
  return out;
}

}  // namespace

CloudFormat format_from_extension(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".csv") return CloudFormat::csv;
  if (ext == ".ply") return CloudFormat::ply_ascii;
  return CloudFormat::xyz_text;
}

PointCloud load_cloud(const std::string& path, CloudFormat format) {
  switch (format) {
    case CloudFormat::xyz_text:
      return load_columns(path, false);
    case CloudFormat::csv:
      return load_columns(path, true);
    case CloudFormat::ply_ascii:
      return load_ply(path);
  }
  throw std::logic_error("unreachable");
}

void save_cloud(const std::string& path, const PointCloud& cloud, CloudFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const Eigen::Index n = cloud.size();
  switch (format) {
    case CloudFormat::xyz_text:
      for (Eigen::Index i = 0; i < n; ++i) out << fmt_row(cloud.pts.row(i), ' ') << '\n';
      break;
    case CloudFormat::csv: {
      const char* headers[] = {"x", "x,y", "x,y,z"};
      out << headers[cloud.dim() - 1] << '\n';
      for (Eigen::Index i = 0; i < n; ++i) out << fmt_row(cloud.pts.row(i), ',') << '\n';
      break;
    }
    case CloudFormat::ply_ascii: {
      if (cloud.dim() != 3)
        throw std::invalid_argument("ply output requires 3-D points");
      out << "ply\nformat ascii 1.0\nelement vertex " << n
          << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
      for (Eigen::Index i = 0; i < n; ++i) out << fmt_row(cloud.pts.row(i), ' ') << '\n';
      break;
    }
  }
  if (!out.good()) throw std::runtime_error(path + ": write failed");
}

}  // namespace pwreg
