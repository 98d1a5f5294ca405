// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bida/field.hpp"
#include "bida/io/binary.hpp"
#include "bida/io/flo.hpp"
#include "bida/io/pfm.hpp"
#include "bida/io/ppm.hpp"
#include "bida/synthgen.hpp"
#include "bida/warp.hpp"

namespace bida::io {

namespace fs = std::filesystem;

inline constexpr int kManifestSchema = 1;

/// On-disk description of one stereo clip.  Paths are relative to `base`
/// (the manifest's directory).
struct SequenceManifest {
  fs::path base;
  std::string clip_id;
  double frame_rate = 30.0;
  Calibration calibration;
  std::vector<std::string> left;
  std::vector<std::string> right;
  std::map<std::string, std::vector<std::string>> disparities;
  std::vector<std::string> flow_forward;
  std::vector<std::string> flow_backward;
  std::map<std::string, std::vector<std::string>> masks;

  std::size_t frames() const noexcept { return left.size(); }
  fs::path resolve(const std::string& rel) const { return base / rel; }

  /// Structural checks (counts, calibration); file contents are checked by load_clip.
  void validate() const {
    const std::size_t T = left.size();
    if (T == 0) throw ValidationError("manifest: no frames");
    if (right.size() != T) throw ValidationError("manifest: left/right frame counts differ");
    if (flow_forward.size() + 1 != T || flow_backward.size() + 1 != T) {
      throw ValidationError("manifest: need " + std::to_string(T - 1) + " flows per direction");
    }
    for (const auto& [key, seq] : disparities) {
      if (seq.size() != T) throw ValidationError("manifest: disparity '" + key + "' has the wrong frame count");
    }
    for (const auto& [key, seq] : masks) {
      if (seq.empty()) throw ValidationError("manifest: mask '" + key + "' is empty");
    }
    if (!(frame_rate > 0.0)) throw ValidationError("manifest: frame_rate must be > 0");
    try {
      calibration.validate();
    } catch (const ValueError& e) {
      throw ValidationError(std::string("manifest: ") + e.what());
    }
  }

  const std::vector<std::string>& disparity(const std::string& key) const {
    auto it = disparities.find(key);
    if (it == disparities.end()) throw ValidationError("manifest: no disparity sequence '" + key + "'");
    return it->second;
  }
};

namespace detail {
inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}
}  // namespace detail

inline SequenceManifest parse_manifest(const std::string& text, const fs::path& base) {
  SequenceManifest m;
  m.base = base;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("schema", 0) != kManifestSchema) throw ValidationError("manifest: unsupported schema");
    m.clip_id = j.value("clip_id", std::string("clip"));
    m.frame_rate = j.value("frame_rate", 30.0);
    const auto& cal = j.at("calibration");
    m.calibration = {cal.at("focal_px").get<double>(), cal.at("baseline_m").get<double>()};
    m.left = detail::string_list(j, "left");
    m.right = detail::string_list(j, "right");
    m.flow_forward = detail::string_list(j, "flow_forward");
    m.flow_backward = detail::string_list(j, "flow_backward");
    if (j.contains("disparities")) {
      for (const auto& [k, v] : j.at("disparities").items()) m.disparities[k] = v.get<std::vector<std::string>>();
    }
    if (j.contains("masks")) {
      for (const auto& [k, v] : j.at("masks").items()) m.masks[k] = v.get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

inline SequenceManifest load_manifest(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  return parse_manifest(text, path.parent_path());
}

inline std::string manifest_json(const SequenceManifest& m) {
  nlohmann::ordered_json j;
  j["schema"] = kManifestSchema;
  j["clip_id"] = m.clip_id;
  j["frame_rate"] = m.frame_rate;
  j["calibration"] = {{"focal_px", m.calibration.focal_px}, {"baseline_m", m.calibration.baseline_m}};
  j["left"] = m.left;
  j["right"] = m.right;
  j["disparities"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.disparities) j["disparities"][k] = v;
  j["flow_forward"] = m.flow_forward;
  j["flow_backward"] = m.flow_backward;
  if (!m.masks.empty()) {
    j["masks"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.masks) j["masks"][k] = v;
  }
  return j.dump(2) + "\n";
}

inline void save_manifest(const fs::path& path, const SequenceManifest& m) { write_text(path, manifest_json(m)); }

/// Same clip, with every path re-expressed relative to `new_base`.
inline SequenceManifest rebase(const SequenceManifest& m, const fs::path& new_base) {
  const auto target = fs::absolute(new_base).lexically_normal();
  auto fix = [&](std::vector<std::string>& v) {
    for (auto& p : v) p = fs::absolute(m.resolve(p)).lexically_normal().lexically_relative(target).generic_string();
  };
  SequenceManifest out = m;
  out.base = new_base;
  fix(out.left);
  fix(out.right);
  fix(out.flow_forward);
  fix(out.flow_backward);
  for (auto& [_, v] : out.disparities) fix(v);
  for (auto& [_, v] : out.masks) fix(v);
  return out;
}

/// A clip read from disk.
template <typename Real>
struct LoadedClip {
  SequenceManifest manifest;
  ChannelSequence<Real> left;
  ChannelSequence<Real> right;
  ClipFlows<Real> flows;
  std::map<std::string, ScalarSequence<Real>> disparities;
  std::map<std::string, ScalarSequence<Real>> masks;

  int height() const { return left.at(0).height(); }
  int width() const { return left.at(0).width(); }
  std::size_t frames() const { return left.size(); }

  const ScalarSequence<Real>& disparity(const std::string& key) const {
    auto it = disparities.find(key);
    if (it == disparities.end()) throw ValidationError("clip: no disparity sequence '" + key + "'");
    return it->second;
  }
};

/// Reads every raster referenced by the manifest and rejects any dimension
/// disagreement before returning.
template <typename Real = float>
LoadedClip<Real> load_clip(const SequenceManifest& m) {
  m.validate();
  LoadedClip<Real> c;
  c.manifest = m;
  auto wrap = [&](const std::string& rel, auto&& reader) {
    try {
      return reader(m.resolve(rel));
    } catch (const IoError& e) {
      throw ValidationError(std::string("manifest: ") + e.what());
    } catch (const Error& e) {
      throw ValidationError("manifest: " + rel + ": " + e.what());
    }
  };
  for (const auto& p : m.left) c.left.push_back(wrap(p, [](const fs::path& f) { return read_ppm<Real>(f); }));
  for (const auto& p : m.right) c.right.push_back(wrap(p, [](const fs::path& f) { return read_ppm<Real>(f); }));
  for (const auto& p : m.flow_forward) c.flows.forward.push_back(wrap(p, [](const fs::path& f) { return read_flo<Real>(f); }));
  for (const auto& p : m.flow_backward) c.flows.backward.push_back(wrap(p, [](const fs::path& f) { return read_flo<Real>(f); }));
  for (const auto& [k, seq] : m.disparities)
    for (const auto& p : seq) c.disparities[k].push_back(wrap(p, [](const fs::path& f) { return read_pfm<Real>(f); }));
  for (const auto& [k, seq] : m.masks)
    for (const auto& p : seq) c.masks[k].push_back(wrap(p, [](const fs::path& f) { return read_pfm<Real>(f); }));

  const int h = c.left[0].height();
  const int w = c.left[0].width();
  auto check = [&](int fh, int fw, const std::string& what) {
    if (fh != h || fw != w) {
      throw ValidationError("manifest: " + what + " is " + std::to_string(fh) + "x" + std::to_string(fw) +
                            ", expected " + std::to_string(h) + "x" + std::to_string(w));
    }
  };
  for (std::size_t t = 0; t < c.left.size(); ++t) {
    check(c.left[t].height(), c.left[t].width(), m.left[t]);
    check(c.right[t].height(), c.right[t].width(), m.right[t]);
  }
  for (std::size_t t = 0; t < c.flows.forward.size(); ++t) {
    check(c.flows.forward[t].height(), c.flows.forward[t].width(), m.flow_forward[t]);
    check(c.flows.backward[t].height(), c.flows.backward[t].width(), m.flow_backward[t]);
  }
  for (const auto& [k, seq] : c.disparities)
    for (std::size_t t = 0; t < seq.size(); ++t) check(seq[t].height(), seq[t].width(), m.disparities.at(k)[t]);
  for (const auto& [k, seq] : c.masks)
    for (std::size_t t = 0; t < seq.size(); ++t) check(seq[t].height(), seq[t].width(), m.masks.at(k)[t]);
  return c;
}

inline std::string frame_name(const std::string& stem, std::size_t t, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%03zu.", t);
  return stem + buf + ext;
}

/// Writes a sequence of disparity maps as PFM files named <stem>_NNN.pfm
/// inside `dir`; returns the file names.
template <typename Real>
std::vector<std::string> write_disparities(const fs::path& dir, const std::string& stem, const ScalarSequence<Real>& seq) {
  std::vector<std::string> names;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    names.push_back(frame_name(stem, t, "pfm"));
    write_pfm(dir / names.back(), seq[t]);
  }
  return names;
}

/// Writes a generated bundle (images, flows, disparities, analytic masks)
/// and its manifest.json into `dir`.
template <typename Real>
SequenceManifest write_bundle(const fs::path& dir, const SequenceBundle<Real>& b) {
  fs::create_directories(dir);
  SequenceManifest m;
  m.base = dir;
  m.clip_id = b.clip_id;
  m.frame_rate = b.frame_rate;
  m.calibration = b.calibration;
  for (std::size_t t = 0; t < b.frames(); ++t) {
    m.left.push_back(frame_name("left", t, "ppm"));
    write_ppm(dir / m.left.back(), b.left[t]);
    m.right.push_back(frame_name("right", t, "ppm"));
    write_ppm(dir / m.right.back(), b.right[t]);
  }
  for (std::size_t t = 0; t < b.flows.forward.size(); ++t) {
    m.flow_forward.push_back(frame_name("flow_fwd", t, "flo"));
    write_flo(dir / m.flow_forward.back(), b.flows.forward[t]);
    m.flow_backward.push_back(frame_name("flow_bwd", t, "flo"));
    write_flo(dir / m.flow_backward.back(), b.flows.backward[t]);
  }
  m.disparities["gt"] = write_disparities(dir, "disp_gt", b.disparity_gt);
  for (const auto& [k, seq] : b.predictions) m.disparities[k] = write_disparities(dir, "disp_" + k, seq);
  if (!b.visible_next.empty()) m.masks["visible_next"] = write_disparities(dir, "mask_visible_next", b.visible_next);
  if (!b.visible_prev.empty()) m.masks["visible_prev"] = write_disparities(dir, "mask_visible_prev", b.visible_prev);
  if (!b.visible_right.empty()) m.masks["visible_right"] = write_disparities(dir, "mask_visible_right", b.visible_right);
  save_manifest(dir / "manifest.json", m);
  return m;
}

}  // namespace bida::io
