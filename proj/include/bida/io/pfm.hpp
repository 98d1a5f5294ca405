// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "bida/field.hpp"
#include "bida/io/binary.hpp"

namespace bida::io {

namespace detail {
// Whitespace-separated header tokens of netpbm-style formats.  `pos` ends
// one byte past the single whitespace that terminates the last token.
class HeaderScanner {
 public:
  HeaderScanner(const std::vector<unsigned char>& bytes, const std::string& path) : b_(bytes), path_(path) {}

  std::string token(bool allow_comments = false) {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (allow_comments && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    std::string t;
    while (pos_ < b_.size() && !std::isspace(b_[pos_])) t.push_back(char(b_[pos_++]));
    if (t.empty()) throw IoError(IoErrc::malformed_header, path_ + ": header ends early");
    return t;
  }

  long long integer(bool allow_comments = false) {
    const auto t = token(allow_comments);
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw IoError(IoErrc::malformed_header, path_ + ": expected a positive integer, got '" + t + "'");
      }
    }
    if (t.size() > 12) throw IoError(IoErrc::size_overflow, path_ + ": dimension " + t);
    return std::stoll(t);
  }

  /// Consumes the single whitespace byte that separates header and payload.
  std::size_t payload_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) {
      throw IoError(IoErrc::malformed_header, path_ + ": missing separator before payload");
    }
    return pos_ + 1;
  }

 private:
  const std::vector<unsigned char>& b_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline void check_raster_size(long long w, long long h, long long bytes_per_pixel, const std::string& path) {
  if (w <= 0 || h <= 0) throw IoError(IoErrc::malformed_header, path + ": dimensions must be positive");
  constexpr long long kMaxPixels = 1LL << 28;
  if (w > kMaxPixels || h > kMaxPixels || w * h > kMaxPixels || w * h * bytes_per_pixel > (1LL << 31)) {
    throw IoError(IoErrc::size_overflow, path + ": " + std::to_string(w) + "x" + std::to_string(h));
  }
}
}  // namespace detail

/// Parses a grayscale PFM image from memory.  A negative scale marks
/// little-endian data; rows are stored bottom to top.
template <typename Real = float>
ScalarField<Real> decode_pfm(const std::vector<unsigned char>& bytes, const std::string& path = "<memory>") {
  detail::HeaderScanner scan(bytes, path);
  const auto magic = scan.token();
  if (magic == "PF") throw IoError(IoErrc::unsupported, path + ": colour PFM is not supported");
  if (magic != "Pf") throw IoError(IoErrc::bad_magic, path + ": expected 'Pf'");
  const long long w = scan.integer();
  const long long h = scan.integer();
  detail::check_raster_size(w, h, 4, path);
  const auto scale_text = scan.token();
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_text, &used);
    if (used != scale_text.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw IoError(IoErrc::malformed_header, path + ": bad scale '" + scale_text + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw IoError(IoErrc::malformed_header, path + ": scale must be non-zero");
  const bool little = scale < 0.0;
  const std::size_t start = scan.payload_start();
  const std::size_t need = std::size_t(w) * std::size_t(h) * 4;
  if (bytes.size() - std::min(bytes.size(), start) < need) {
    throw IoError(IoErrc::truncated, path + ": expected " + std::to_string(need) + " payload bytes");
  }
  std::vector<Real> data(std::size_t(w * h));
  for (long long row = 0; row < h; ++row) {
    const long long y = h - 1 - row;
    for (long long x = 0; x < w; ++x) {
      const float v = load<float>(bytes.data() + start + std::size_t((row * w + x) * 4), little);
      if (!std::isfinite(v)) throw IoError(IoErrc::non_finite, path + ": non-finite sample");
      data[std::size_t(y * w + x)] = Real(v);
    }
  }
  return ScalarField<Real>(int(h), int(w), std::move(data));
}

template <typename Real = float>
ScalarField<Real> read_pfm(const std::filesystem::path& path) {
  return decode_pfm<Real>(read_file(path), path.string());
}

/// Little-endian PFM ("Pf\nW H\n-1.0\n" + float32 rows, bottom row first).
template <typename Real>
std::vector<unsigned char> encode_pfm(const ScalarField<Real>& f) {
  const std::string header = "Pf\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n-1.0\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + f.pixels() * 4);
  for (int y = f.height() - 1; y >= 0; --y)
    for (int x = 0; x < f.width(); ++x) store_le(out, float(f.at(y, x)));
  return out;
}

template <typename Real>
void write_pfm(const std::filesystem::path& path, const ScalarField<Real>& f) {
  write_file(path, encode_pfm(f));
}

}  // namespace bida::io
