#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fem.hpp"
#include "geometry.hpp"

namespace hvi {

/// Shortest text that round-trips a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

using Cell = std::variant<double, long long, std::string>;

/// In-memory CSV table with RFC-4180 quoting and LF line ends.
class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != header_.size()) throw std::invalid_argument("csv: row width does not match the header");
    rows_.push_back(std::move(row));
  }

  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    std::vector<std::string> head;
    for (const auto& h : header_) head.push_back(csv_quote(h));
    append_line(out, head);
    for (const auto& row : rows_) {
      std::vector<std::string> cells;
      for (const auto& c : row) cells.push_back(render(c));
      append_line(out, cells);
    }
    return out;
  }

  void write(const std::filesystem::path& path) const { write_text(path, str()); }

  static void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << text;
  }

private:
  static std::string render(const Cell& c) {
    if (auto d = std::get_if<double>(&c)) return format_double(*d);
    if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
    return csv_quote(std::get<std::string>(c));
  }

  static void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

/// Nodal field as (node, x, y, value).
inline CsvTable field_table(const TriMesh& mesh, const FeField& v, const std::string& name = "value") {
  CsvTable t({"node", "x", "y", name});
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    t.add({static_cast<long long>(i), mesh.nodes[i].x, mesh.nodes[i].y, v[static_cast<Eigen::Index>(i)]});
  return t;
}

/// Mesh dump: nodes.csv (id,x,y), tris.csv (id,n0,n1,n2), edges.csv (n0,n1,tag).
inline std::vector<std::filesystem::path> dump_mesh(const TriMesh& mesh, const std::filesystem::path& dir) {
  CsvTable nodes({"id", "x", "y"});
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    nodes.add({static_cast<long long>(i), mesh.nodes[i].x, mesh.nodes[i].y});
  CsvTable tris({"id", "n0", "n1", "n2"});
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    tris.add({static_cast<long long>(t), static_cast<long long>(tri[0]), static_cast<long long>(tri[1]),
              static_cast<long long>(tri[2])});
  }
  CsvTable edges({"n0", "n1", "tag"});
  for (const auto& e : mesh.boundary_edges)
    edges.add({static_cast<long long>(e.n0), static_cast<long long>(e.n1), std::string(to_string(e.tag))});
  const std::vector<std::filesystem::path> out{dir / "nodes.csv", dir / "tris.csv", dir / "edges.csv"};
  nodes.write(out[0]);
  tris.write(out[1]);
  edges.write(out[2]);
  return out;
}

/// Coordinate text format: "rows cols nnz" then one "i j value" line per entry.
inline std::string coo_text(const SpMat& m) {
  std::ostringstream os;
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) os << it.row() << ' ' << it.col() << ' ' << format_double(it.value()) << '\n';
  return os.str();
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// key=value lines in insertion order.
using Summary = std::vector<std::pair<std::string, std::string>>;

inline std::string summary_text(const Summary& s) {
  std::string out;
  for (const auto& [k, v] : s) out += k + "=" + v + "\n";
  return out;
}

/// manifest.txt: a creation timestamp followed by "sha256  file" lines for
/// every artifact (paths relative to dir).
inline std::filesystem::path write_manifest(const std::filesystem::path& dir, const std::vector<std::filesystem::path>& files) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  std::string text = std::string("# created ") + stamp + "\n";
  for (const auto& f : files) text += sha256_hex(read_file(f)) + "  " + std::filesystem::relative(f, dir).generic_string() + "\n";
  const auto path = dir / "manifest.txt";
  CsvTable::write_text(path, text);
  return path;
}

} // namespace hvi
