// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bida/field.hpp"
#include "bida/io/binary.hpp"
#include "bida/io/pfm.hpp"

namespace bida::io {

/// "PIEH" read as a little-endian float.
inline constexpr float kFloMagic = 202021.25f;

/// Middlebury .flo: magic, int32 width, int32 height, then interleaved
/// (u, v) float32 values, rows top to bottom, all little-endian.
template <typename Real = float>
VectorField<Real> decode_flo(const std::vector<unsigned char>& bytes, const std::string& path = "<memory>") {
  if (bytes.size() < 12) throw IoError(IoErrc::truncated, path + ": header shorter than 12 bytes");
  if (load<float>(bytes.data()) != kFloMagic) throw IoError(IoErrc::bad_magic, path + ": not a .flo file");
  const auto w = load<std::int32_t>(bytes.data() + 4);
  const auto h = load<std::int32_t>(bytes.data() + 8);
  detail::check_raster_size(w, h, 8, path);
  const std::size_t n = std::size_t(w) * std::size_t(h) * 2;
  if (bytes.size() - 12 < n * 4) throw IoError(IoErrc::truncated, path + ": payload too short");
  std::vector<Real> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float v = load<float>(bytes.data() + 12 + i * 4);
    if (!std::isfinite(v)) throw IoError(IoErrc::non_finite, path + ": non-finite sample");
    data[i] = Real(v);
  }
  return VectorField<Real>(h, w, std::move(data));
}

template <typename Real = float>
VectorField<Real> read_flo(const std::filesystem::path& path) {
  return decode_flo<Real>(read_file(path), path.string());
}

template <typename Real>
std::vector<unsigned char> encode_flo(const VectorField<Real>& f) {
  std::vector<unsigned char> out;
  out.reserve(12 + f.size() * 4);
  store_le(out, kFloMagic);
  store_le(out, std::int32_t(f.width()));
  store_le(out, std::int32_t(f.height()));
  for (Real v : f.values()) store_le(out, float(v));
  return out;
}

template <typename Real>
void write_flo(const std::filesystem::path& path, const VectorField<Real>& f) {
  write_file(path, encode_flo(f));
}

}  // namespace bida::io
