#include "primseg/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace primseg::io {

namespace {

std::string location(const std::filesystem::path& path, size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::vector<double> parse_numbers(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    double v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) throw Error("bad number '" + tok + "' at " + where, "io");
    out.push_back(v);
  }
  return out;
}

Cloud build_cloud(const std::vector<double>& pos, const std::vector<double>& nrm, size_t count) {
  if (count == 0) throw Error("empty input", "io");
  Points<double> p(static_cast<Eigen::Index>(count), 3);
  for (size_t i = 0; i < count; ++i)
    for (int c = 0; c < 3; ++c) p(static_cast<Eigen::Index>(i), c) = pos[3 * i + static_cast<size_t>(c)];
  std::optional<Points<double>> n;
  if (!nrm.empty()) {
    n.emplace(static_cast<Eigen::Index>(count), 3);
    for (size_t i = 0; i < count; ++i)
      for (int c = 0; c < 3; ++c) (*n)(static_cast<Eigen::Index>(i), c) = nrm[3 * i + static_cast<size_t>(c)];
  }
  return Cloud(std::move(p), std::move(n));
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string(), "io");
  return in;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string(), "io");
    out << content;
    if (!out.flush()) throw Error("write failed for " + path.string(), "io");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename into " + path.string() + ": " + ec.message(), "io");
  }
}

Cloud read_xyz(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<double> pos, nrm;
  size_t count = 0, lineno = 0;
  int width = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto v = parse_numbers(line, location(path, lineno));
    if (v.size() != 3 && v.size() != 6) throw Error("expected 3 or 6 values at " + location(path, lineno), "io");
    if (width == 0) width = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != width) throw Error("inconsistent column count at " + location(path, lineno), "io");
    pos.insert(pos.end(), v.begin(), v.begin() + 3);
    if (width == 6) nrm.insert(nrm.end(), v.begin() + 3, v.end());
    ++count;
  }
  return build_cloud(pos, nrm, count);
}

std::string format_xyz(const Cloud& cloud) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.positions().row(i);
    out << p(0) << ' ' << p(1) << ' ' << p(2);
    if (cloud.has_normals()) {
      const auto n = cloud.normals().row(i);
      out << ' ' << n(0) << ' ' << n(1) << ' ' << n(2);
    }
    out << '\n';
  }
  return out.str();
}

Cloud read_ply(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::string line;
  size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "ply") throw Error("missing ply magic in " + path.string(), "io");

  size_t vertex_count = 0;
  bool in_vertex = false;
  std::vector<std::string> props;
  while (true) {
    if (!next()) throw Error("unterminated ply header in " + path.string(), "io");
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw Error("only ascii ply is supported (" + location(path, lineno) + ")", "io");
    } else if (key == "element") {
      std::string name;
      size_t count = 0;
      ss >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) vertex_count = count;
    } else if (key == "property" && in_vertex) {
      std::string type, name;
      ss >> type;
      if (type == "list") throw Error("list properties on vertices unsupported", "io");
      ss >> name;
      props.push_back(name);
    } else if (key == "end_header") {
      break;
    }
  }
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(props.begin(), props.end(), name);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const int ix = col("x"), iy = col("y"), iz = col("z");
  const int inx = col("nx"), iny = col("ny"), inz = col("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw Error("ply vertex lacks x/y/z in " + path.string(), "io");
  const bool has_n = inx >= 0 && iny >= 0 && inz >= 0;

  std::vector<double> pos, nrm;
  pos.reserve(3 * vertex_count);
  for (size_t v = 0; v < vertex_count; ++v) {
    if (!next()) throw Error("ply ended early in " + path.string(), "io");
    const auto vals = parse_numbers(line, location(path, lineno));
    if (vals.size() < props.size()) throw Error("short vertex row at " + location(path, lineno), "io");
    pos.insert(pos.end(), {vals[ix], vals[iy], vals[iz]});
    if (has_n) nrm.insert(nrm.end(), {vals[inx], vals[iny], vals[inz]});
  }
  return build_cloud(pos, nrm, vertex_count);
}

Cloud read_cloud(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("input file not found: " + path.string(), "io");
  if (path.extension() == ".ply") return read_ply(path);
  return read_xyz(path);
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<int> labels;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    int v = 0;
    const char* b = line.data() + first;
    const char* e = line.data() + line.find_last_not_of(" \t\r") + 1;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) throw Error("bad label at " + location(path, lineno), "io");
    labels.push_back(v);
  }
  return labels;
}

std::string format_labels(const std::vector<int>& labels) {
  std::string out;
  out.reserve(labels.size() * 3);
  for (int l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

std::string format_lower_triangle(const Eigen::MatrixXd& a) {
  std::ostringstream out;
  out << std::setprecision(17) << a.rows() << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) out << (j ? " " : "") << a(i, j);
    out << '\n';
  }
  return out.str();
}

Eigen::MatrixXd parse_lower_triangle(const std::string& text) {
  std::istringstream in(text);
  Eigen::Index n = 0;
  if (!(in >> n) || n <= 0) throw Error("bad matrix dump header", "io");
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      if (!(in >> a(i, j))) throw Error("matrix dump truncated at row " + std::to_string(i), "io");
      a(j, i) = a(i, j);
    }
  return a;
}

}  // namespace primseg::io
