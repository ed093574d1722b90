#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"
#include "activesplat/splat.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace activesplat {

/// Parsed ASCII PLY: one table of rows per element, values widened to double.
struct PlyTable {
  struct Property {
    std::string name;
    std::string type;
    bool is_list = false;
  };
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
    /// Scalar properties only; list properties are parsed and dropped.
    std::vector<std::vector<double>> rows;
    std::size_t first_line = 0;

    std::optional<std::size_t> column(std::string_view prop) const {
      std::size_t col = 0;
      for (const auto& p : properties) {
        if (p.is_list) continue;
        if (p.name == prop) return col;
        ++col;
      }
      return std::nullopt;
    }
    const Property* property(std::string_view prop) const {
      for (const auto& p : properties)
        if (p.name == prop) return &p;
      return nullptr;
    }
  };
  std::vector<std::string> comments;
  std::vector<Element> elements;

  const Element* element(std::string_view name) const {
    for (const auto& e : elements)
      if (e.name == name) return &e;
    return nullptr;
  }
};

namespace detail {

inline bool known_ply_type(std::string_view t) {
  static constexpr std::string_view types[] = {"char",  "uchar",  "short",  "ushort", "int",     "uint",
                                               "float", "double", "int8",   "uint8",  "int16",   "uint16",
                                               "int32", "uint32", "float32", "float64"};
  for (auto k : types)
    if (k == t) return true;
  return false;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline double parse_number(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw ParseError("not a number: '" + tok + "'", line);
  return v;
}

}  // namespace detail

inline PlyTable read_ply_table(std::istream& in) {
  PlyTable t;
  std::string line;
  std::size_t ln = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next() || line != "ply") throw ParseError("missing 'ply' magic", ln == 0 ? 1 : ln);
  bool format_seen = false;
  for (;;) {
    if (!next()) throw ParseError("unexpected end of header", ln + 1);
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 3 || tok[1] != "ascii") throw ParseError("only 'format ascii 1.0' is supported", ln);
      format_seen = true;
    } else if (tok[0] == "comment" || tok[0] == "obj_info") {
      t.comments.push_back(line.size() > tok[0].size() + 1 ? line.substr(tok[0].size() + 1) : std::string());
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", ln);
      PlyTable::Element e;
      e.name = tok[1];
      const double n = detail::parse_number(tok[2], ln);
      if (n < 0 || n != std::floor(n)) throw ParseError("element count must be a nonnegative integer", ln);
      e.count = static_cast<std::size_t>(n);
      t.elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (t.elements.empty()) throw ParseError("property before any element", ln);
      PlyTable::Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        if (!detail::known_ply_type(tok[2]) || !detail::known_ply_type(tok[3]))
          throw ParseError("unknown list property type", ln);
        p.is_list = true;
        p.type = tok[3];
        p.name = tok[4];
      } else if (tok.size() == 3) {
        if (!detail::known_ply_type(tok[1])) throw ParseError("unknown property type '" + tok[1] + "'", ln);
        p.type = tok[1];
        p.name = tok[2];
      } else {
        throw ParseError("malformed property line", ln);
      }
      t.elements.back().properties.push_back(std::move(p));
    } else {
      throw ParseError("unknown header keyword '" + tok[0] + "'", ln);
    }
  }
  if (!format_seen) throw ParseError("missing format line", ln);

  for (auto& e : t.elements) {
    e.first_line = ln + 1;
    e.rows.reserve(e.count);
    for (std::size_t r = 0; r < e.count; ++r) {
      if (!next()) throw ParseError("expected " + std::to_string(e.count) + " '" + e.name + "' rows", ln + 1);
      auto tok = detail::split_ws(line);
      std::size_t k = 0;
      std::vector<double> row;
      for (const auto& p : e.properties) {
        if (k >= tok.size()) throw ParseError("too few values in row", ln);
        const double v = detail::parse_number(tok[k++], ln);
        if (p.is_list) {
          if (v < 0 || v != std::floor(v)) throw ParseError("bad list length", ln);
          const auto n = static_cast<std::size_t>(v);
          if (k + n > tok.size()) throw ParseError("too few values in list", ln);
          for (std::size_t j = 0; j < n; ++j) detail::parse_number(tok[k++], ln);
        } else {
          row.push_back(v);
        }
      }
      if (k != tok.size()) throw ParseError("too many values in row", ln);
      e.rows.push_back(std::move(row));
    }
  }
  return t;
}

namespace detail {

inline std::vector<std::size_t> require_columns(const PlyTable::Element& e,
                                                std::initializer_list<std::string_view> names) {
  std::vector<std::size_t> cols;
  std::string missing;
  for (auto n : names) {
    auto c = e.column(n);
    if (!c) {
      missing += missing.empty() ? "" : ", ";
      missing += n;
    } else {
      cols.push_back(*c);
    }
  }
  if (!missing.empty()) throw SchemaError("element '" + e.name + "' is missing properties: " + missing);
  return cols;
}

inline bool is_integer_type(std::string_view t) {
  return t != "float" && t != "double" && t != "float32" && t != "float64";
}

}  // namespace detail

/// Point cloud from an ASCII PLY with vertex x,y,z,red,green,blue. Integer color channels are
/// read as 0..255, floating channels as 0..1. Provenance is marked external.
inline PointCloud read_point_cloud_ply(std::istream& in) {
  const PlyTable t = read_ply_table(in);
  const auto* v = t.element("vertex");
  if (!v) throw SchemaError("missing element 'vertex'");
  const auto cols = detail::require_columns(*v, {"x", "y", "z", "red", "green", "blue"});
  const bool byte_color = detail::is_integer_type(v->property("red")->type);
  PointCloud pc;
  for (std::size_t r = 0; r < v->rows.size(); ++r) {
    const auto& row = v->rows[r];
    Vec3 p(row[cols[0]], row[cols[1]], row[cols[2]]);
    Vec3 c(row[cols[3]], row[cols[4]], row[cols[5]]);
    if (byte_color) c /= 255.0;
    if (!p.allFinite()) throw ParseError("non-finite position", v->first_line + r);
    if ((c.array() < 0.0).any() || (c.array() > 1.0).any())
      throw ParseError("color outside [0,1]", v->first_line + r);
    pc.add(p, c, {PointCloud::kExternalView});
  }
  return pc;
}

inline PointCloud read_point_cloud_ply(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open '" + path + "'");
  return read_point_cloud_ply(f);
}

/// ASCII PLY with double-precision positions and colors, so export/ingest round-trips exactly.
inline void write_point_cloud_ply(const PointCloud& pc, std::ostream& os) {
  os << "ply\nformat ascii 1.0\nelement vertex " << pc.size() << "\n";
  for (const char* n : {"x", "y", "z", "red", "green", "blue"}) os << "property double " << n << "\n";
  os << "end_header\n" << std::setprecision(17);
  for (const auto& p : pc.points)
    os << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << p.color.x() << ' '
       << p.color.y() << ' ' << p.color.z() << '\n';
  if (!os) throw IoFailure("write failed");
}

inline void write_point_cloud_ply(const PointCloud& pc, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open '" + path + "' for writing");
  write_point_cloud_ply(pc, f);
}

/// Zeroth-order spherical harmonic constant used by the usual splat PLY color encoding.
inline constexpr double kShC0 = 0.28209479177387814;

/// Splat model in the common splat-PLY layout (f_dc, logit opacity, log scales, wxyz rotation).
inline void write_splat_ply(const SplatModel& m, std::ostream& os) {
  os << std::setprecision(17);
  os << "ply\nformat ascii 1.0\ncomment background " << m.background.x() << ' ' << m.background.y() << ' '
     << m.background.z() << "\nelement vertex " << m.size() << "\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                        "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"})
    os << "property float " << n << "\n";
  os << "end_header\n";
  for (const auto& g : m.gaussians) {
    const Vec3 dc = (g.color.array() - 0.5) / kShC0;
    const double op = std::clamp(g.opacity, 1e-12, 1.0 - 1e-12);
    const Quat q = g.rotation.normalized();
    os << g.mean.x() << ' ' << g.mean.y() << ' ' << g.mean.z() << " 0 0 0 " << dc.x() << ' ' << dc.y() << ' '
       << dc.z() << ' ' << std::log(op / (1.0 - op)) << ' ' << std::log(g.scale.x()) << ' ' << std::log(g.scale.y())
       << ' ' << std::log(g.scale.z()) << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << '\n';
  }
  if (!os) throw IoFailure("write failed");
}

inline void write_splat_ply(const SplatModel& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open '" + path + "' for writing");
  write_splat_ply(m, f);
}

inline SplatModel read_splat_ply(std::istream& in) {
  const PlyTable t = read_ply_table(in);
  const auto* v = t.element("vertex");
  if (!v) throw SchemaError("missing element 'vertex'");
  const auto c = detail::require_columns(*v, {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                                              "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"});
  SplatModel m;
  for (const auto& comment : t.comments) {
    std::istringstream is(comment);
    std::string key;
    Vec3 bg;
    if (is >> key && key == "background" && is >> bg.x() >> bg.y() >> bg.z()) m.background = bg;
  }
  for (std::size_t r = 0; r < v->rows.size(); ++r) {
    const auto& row = v->rows[r];
    Gaussian3D g;
    g.mean = Vec3(row[c[0]], row[c[1]], row[c[2]]);
    g.color = (Vec3(row[c[3]], row[c[4]], row[c[5]]) * kShC0).array() + 0.5;
    g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
    g.opacity = 1.0 / (1.0 + std::exp(-row[c[6]]));
    g.scale = Vec3(std::exp(row[c[7]]), std::exp(row[c[8]]), std::exp(row[c[9]]));
    Quat q(row[c[10]], row[c[11]], row[c[12]], row[c[13]]);
    if (q.norm() < 1e-12) throw ParseError("zero rotation quaternion", v->first_line + r);
    g.rotation = q.normalized();
    m.gaussians.push_back(g);
  }
  return m;
}

inline SplatModel read_splat_ply(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open '" + path + "'");
  return read_splat_ply(f);
}

}  // namespace activesplat
