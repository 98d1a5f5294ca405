// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bida/io/binary.hpp"
#include "bida/tensor.hpp"

namespace bida::io {

/// Weight container: "BDWT", u32 LE header length, JSON header
///   {"format": "bdwt", "version": 1,
///    "tensors": [{"name", "dtype": "f32", "shape", "offset"}]}
/// then the float32 LE payload.  Offsets are byte offsets into the payload.
template <typename Real>
std::vector<unsigned char> encode_weights(const WeightBank<Real>& bank) {
  nlohmann::json header;
  header["format"] = "bdwt";
  header["version"] = 1;
  header["tensors"] = nlohmann::json::array();
  std::vector<unsigned char> payload;
  for (const auto& [name, t] : bank.tensors()) {
    header["tensors"].push_back(
        {{"name", name}, {"dtype", "f32"}, {"shape", t.shape}, {"offset", payload.size()}});
    for (Real v : t.values) store_le(payload, float(v));
  }
  const std::string text = header.dump();
  std::vector<unsigned char> out = {'B', 'D', 'W', 'T'};
  store_le(out, std::uint32_t(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

template <typename Real = float>
WeightBank<Real> decode_weights(const std::vector<unsigned char>& bytes, const std::string& path = "<memory>") {
  if (bytes.size() < 8) throw IoError(IoErrc::truncated, path + ": shorter than the weight header");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "BDWT")) throw IoError(IoErrc::bad_magic, path + ": expected BDWT");
  const auto header_len = load<std::uint32_t>(bytes.data() + 4);
  if (bytes.size() - 8 < header_len) throw IoError(IoErrc::truncated, path + ": header length exceeds file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoErrc::malformed_header, path + ": " + e.what());
  }
  const std::size_t payload_start = 8 + std::size_t(header_len);
  const std::size_t payload_size = bytes.size() - payload_start;

  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset, bytes;
  };
  std::vector<Entry> entries;
  try {
    if (header.value("format", "") != "bdwt") throw IoError(IoErrc::malformed_header, path + ": format is not bdwt");
    if (header.value("version", 0) != 1) throw IoError(IoErrc::unsupported, path + ": unknown container version");
    for (const auto& t : header.at("tensors")) {
      Entry e;
      e.name = t.at("name").get<std::string>();
      if (t.at("dtype").get<std::string>() != "f32") {
        throw IoError(IoErrc::unsupported, path + ": tensor '" + e.name + "' dtype is not f32");
      }
      for (const auto& d : t.at("shape")) {
        const auto v = d.get<long long>();
        if (v <= 0 || v > (1LL << 30)) throw IoError(IoErrc::size_overflow, path + ": bad extent in '" + e.name + "'");
        e.shape.push_back(int(v));
      }
      e.offset = t.at("offset").get<std::size_t>();
      const std::size_t n = shape_numel(e.shape);
      if (n > (std::size_t(1) << 30)) throw IoError(IoErrc::size_overflow, path + ": tensor '" + e.name + "'");
      e.bytes = n * 4;
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoErrc::malformed_header, path + ": " + e.what());
  }

  std::set<std::string> names;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t end = 0;
  for (const auto& e : entries) {
    if (!names.insert(e.name).second) throw IoError(IoErrc::malformed_header, path + ": duplicate tensor '" + e.name + "'");
    if (e.offset % 4 != 0) throw IoError(IoErrc::malformed_header, path + ": misaligned offset for '" + e.name + "'");
    if (e.offset > payload_size || payload_size - e.offset < e.bytes) {
      throw IoError(IoErrc::truncated, path + ": tensor '" + e.name + "' runs past the payload");
    }
    spans.emplace_back(e.offset, e.offset + e.bytes);
    end = std::max(end, e.offset + e.bytes);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) throw IoError(IoErrc::malformed_header, path + ": overlapping tensors");
  }
  if (end != payload_size) throw IoError(IoErrc::malformed_header, path + ": payload length does not match the header");

  WeightBank<Real> bank;
  for (const auto& e : entries) {
    std::vector<Real> values(e.bytes / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float v = load<float>(bytes.data() + payload_start + e.offset + i * 4);
      if (!std::isfinite(v)) throw IoError(IoErrc::non_finite, path + ": tensor '" + e.name + "'");
      values[i] = Real(v);
    }
    bank.set(e.name, Tensor<Real>(e.shape, std::move(values)));
  }
  return bank;
}

template <typename Real = float>
WeightBank<Real> read_weights(const std::filesystem::path& path) {
  return decode_weights<Real>(read_file(path), path.string());
}

template <typename Real>
void write_weights(const std::filesystem::path& path, const WeightBank<Real>& bank) {
  write_file(path, encode_weights(bank));
}

}  // namespace bida::io
