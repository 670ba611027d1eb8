#pragma once

// Extended Wavefront OBJ with per-vertex colors. Dialect:
//   v <x> <y> <z> [<r> <g> <b>]
//   f <i> <j> <k>              (1-based, triangles only)
//   # comment
// Floats are written with six decimal places and LF line endings, so a
// write -> parse round trip is lossless at that precision.

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "nexus/mesh.hpp"

namespace nexus {

struct ColoredObjDocument {
  std::vector<MeshVertex> vertices;
  std::vector<std::array<uint32_t, 3>> faces;  // 0-based internally
  bool operator==(const ColoredObjDocument&) const = default;
};

namespace detail {

inline bool parse_real(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline bool parse_index(std::string_view tok, long& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

inline std::string format_real6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace detail

// Quantize to the 6-decimal grid the writer emits.
inline double quantize6(double x) {
  double q = 0.0;
  detail::parse_real(detail::format_real6(x), q);
  return q;
}

inline ColoredObjDocument parse_obj(std::string_view text) {
  ColoredObjDocument doc;
  std::vector<std::pair<size_t, size_t>> face_lines;  // face index -> line number

  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;

    const auto fail = [&](const char* why) -> Error {
      return Error(Errc::parse_error, "obj line " + std::to_string(line_no) + ": " + why);
    };

    if (toks[0] == "v") {
      if (toks.size() != 4 && toks.size() != 7) throw fail("expected 3 or 6 vertex components");
      double c[6] = {};
      for (size_t i = 1; i < toks.size(); ++i)
        if (!detail::parse_real(toks[i], c[i - 1])) throw fail("malformed number");
      MeshVertex v;
      v.position = {c[0], c[1], c[2]};
      if (toks.size() == 7) v.color = Vec3{c[3], c[4], c[5]};
      doc.vertices.push_back(v);
    } else if (toks[0] == "f") {
      if (toks.size() != 4) throw fail("expected exactly 3 face indices");
      std::array<uint32_t, 3> f{};
      for (int i = 0; i < 3; ++i) {
        long idx = 0;
        if (!detail::parse_index(toks[i + 1], idx)) throw fail("malformed face index");
        if (idx < 1) throw fail("face indices are 1-based");
        f[i] = static_cast<uint32_t>(idx - 1);
      }
      face_lines.emplace_back(doc.faces.size(), line_no);
      doc.faces.push_back(f);
    } else {
      throw fail("unsupported directive");
    }
  }

  for (const auto& [fi, ln] : face_lines)
    for (uint32_t idx : doc.faces[fi])
      if (idx >= doc.vertices.size())
        throw Error(Errc::parse_error,
                    "obj line " + std::to_string(ln) + ": face index out of range");
  return doc;
}

inline std::string write_obj(const ColoredObjDocument& doc) {
  std::string out;
  out.reserve(doc.vertices.size() * 32 + doc.faces.size() * 16);
  for (const auto& v : doc.vertices) {
    out += "v ";
    out += detail::format_real6(v.position.x);
    out += ' ';
    out += detail::format_real6(v.position.y);
    out += ' ';
    out += detail::format_real6(v.position.z);
    if (v.color) {
      out += ' ';
      out += detail::format_real6(v.color->x);
      out += ' ';
      out += detail::format_real6(v.color->y);
      out += ' ';
      out += detail::format_real6(v.color->z);
    }
    out += '\n';
  }
  for (const auto& f : doc.faces) {
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' +
           std::to_string(f[2] + 1) + '\n';
  }
  return out;
}

inline ColoredObjDocument obj_from_mesh(const TriangleMesh& mesh) {
  return {mesh.vertices, mesh.triangles};
}

inline TriangleMesh mesh_from_obj(const ColoredObjDocument& doc, uint32_t chunk_id) {
  return make_triangle_mesh(chunk_id, doc.vertices, doc.faces);
}

}  // namespace nexus
