#pragma once

// Minimal image containers plus binary PPM (P6, 8-bit RGB) and PGM
// (P5, 16-bit big-endian) codecs for the capture directory layout.

#include <cstdint>
#include <string>
#include <vector>

#include "nexus/core.hpp"

namespace nexus::replica {

template <typename T>
struct Image {
  int width = 0, height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  T& at(int x, int y) { return data[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return data[size_t(y) * width + x]; }

  bool operator==(const Image&) const = default;
};

using ColorImage = Image<std::array<uint8_t, 3>>;
using DepthImage = Image<uint16_t>;  // millimeters, 0 = invalid
using MaskImage = Image<uint8_t>;   // 0 | 1

namespace detail {

// Reads one PNM header token, skipping whitespace and '#' comments.
inline std::string pnm_token(const std::string& bytes, size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  const size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw Error(Errc::parse_error, "truncated pnm header");
  return bytes.substr(start, pos - start);
}

inline long pnm_int(const std::string& bytes, size_t& pos) {
  const std::string tok = pnm_token(bytes, pos);
  try {
    size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::parse_error, "malformed pnm header number");
  }
}

}  // namespace detail

inline std::string write_ppm(const ColorImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.reserve(out.size() + img.data.size() * 3);
  for (const auto& px : img.data) out.append({char(px[0]), char(px[1]), char(px[2])});
  return out;
}

inline ColorImage parse_ppm(const std::string& bytes) {
  size_t pos = 0;
  if (detail::pnm_token(bytes, pos) != "P6") throw Error(Errc::parse_error, "expected P6 magic");
  const long w = detail::pnm_int(bytes, pos);
  const long h = detail::pnm_int(bytes, pos);
  const long maxval = detail::pnm_int(bytes, pos);
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(Errc::parse_error, "unsupported ppm format");
  ++pos;  // single whitespace after maxval
  if (bytes.size() - pos < size_t(w) * h * 3) throw Error(Errc::parse_error, "ppm pixel data truncated");
  ColorImage img(int(w), int(h));
  for (size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = {uint8_t(bytes[pos]), uint8_t(bytes[pos + 1]), uint8_t(bytes[pos + 2])};
    pos += 3;
  }
  return img;
}

// 16-bit PGM stores samples big-endian per the format spec.
inline std::string write_pgm16(const DepthImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n65535\n";
  out.reserve(out.size() + img.data.size() * 2);
  for (uint16_t v : img.data) out.append({char(v >> 8), char(v & 0xff)});
  return out;
}

inline DepthImage parse_pgm16(const std::string& bytes) {
  size_t pos = 0;
  if (detail::pnm_token(bytes, pos) != "P5") throw Error(Errc::parse_error, "expected P5 magic");
  const long w = detail::pnm_int(bytes, pos);
  const long h = detail::pnm_int(bytes, pos);
  const long maxval = detail::pnm_int(bytes, pos);
  if (w <= 0 || h <= 0 || maxval != 65535) throw Error(Errc::parse_error, "unsupported pgm format");
  ++pos;
  if (bytes.size() - pos < size_t(w) * h * 2) throw Error(Errc::parse_error, "pgm pixel data truncated");
  DepthImage img(int(w), int(h));
  for (size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = uint16_t((uint8_t(bytes[pos]) << 8) | uint8_t(bytes[pos + 1]));
    pos += 2;
  }
  return img;
}

}  // namespace nexus::replica
