// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "bida/field.hpp"
#include "bida/io/binary.hpp"
#include "bida/io/pfm.hpp"

namespace bida::io {

/// Binary P6 with maxval 255; samples map to v / 255.
template <typename Real = float>
ChannelField<Real> decode_ppm(const std::vector<unsigned char>& bytes, const std::string& path = "<memory>") {
  detail::HeaderScanner scan(bytes, path);
  const auto magic = scan.token(true);
  if (magic != "P6") throw IoError(IoErrc::bad_magic, path + ": expected 'P6'");
  const long long w = scan.integer(true);
  const long long h = scan.integer(true);
  detail::check_raster_size(w, h, 3, path);
  const long long maxval = scan.integer(true);
  if (maxval != 255) throw IoError(IoErrc::unsupported, path + ": maxval " + std::to_string(maxval) + " (need 255)");
  const std::size_t start = scan.payload_start();
  const std::size_t need = std::size_t(w * h * 3);
  if (bytes.size() - std::min(bytes.size(), start) < need) throw IoError(IoErrc::truncated, path + ": payload too short");
  std::vector<Real> data(need);
  for (std::size_t i = 0; i < need; ++i) data[i] = Real(bytes[start + i]) / Real(255);
  return ChannelField<Real>(int(h), int(w), 3, std::move(data));
}

template <typename Real = float>
ChannelField<Real> read_ppm(const std::filesystem::path& path) {
  return decode_ppm<Real>(read_file(path), path.string());
}

/// Values are clamped to [0, 1] and rounded to the nearest level.
template <typename Real>
std::vector<unsigned char> encode_ppm(const ChannelField<Real>& f) {
  if (f.channels() != 3) throw ShapeError("ppm: need 3 channels, got " + std::to_string(f.channels()));
  const std::string header = "P6\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  for (Real v : f.values()) {
    const double q = std::round(std::clamp(double(v), 0.0, 1.0) * 255.0);
    out.push_back(static_cast<unsigned char>(q));
  }
  return out;
}

template <typename Real>
void write_ppm(const std::filesystem::path& path, const ChannelField<Real>& f) {
  write_file(path, encode_ppm(f));
}

}  // namespace bida::io
