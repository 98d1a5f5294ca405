// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "bida/synthgen.hpp"

namespace bida::io {

/// Optional noise block of a scene file: {"sigma": px, "seed": n, "key": "noisy"}.
struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string key = "noisy";
};

struct SceneFile {
  SceneSpec scene;
  std::optional<NoiseSpec> noise;
};

/// Scene description.  Without "layers" a random layered scene is drawn
/// from "seed" (see random_scene_spec).
///
///   {"seed": 3, "height": 64, "width": 64, "frames": 5,
///    "calibration": {"focal_px": 100, "baseline_m": 0.1},
///    "layers": [{"disparity": 12, "velocity": [2, 0], "extent": [x, y, w, h], "texture_seed": 1},
///               {"disparity": 4, "velocity": [0, 0], "texture_seed": 0}],
///    "noise": {"sigma": 0.5, "seed": 7}}
inline SceneFile parse_scene(const std::string& text) {
  SceneFile f;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto seed = j.value("seed", std::uint64_t(0));
    const int h = j.value("height", 64);
    const int w = j.value("width", 64);
    const int T = j.value("frames", 5);
    if (j.contains("layers")) {
      SceneSpec& s = f.scene;
      s.seed = seed;
      s.height = h;
      s.width = w;
      s.frames = T;
      for (const auto& l : j.at("layers")) {
        LayerSpec layer;
        layer.disparity = l.at("disparity").get<double>();
        if (l.contains("velocity")) {
          layer.vx = l.at("velocity").at(0).get<double>();
          layer.vy = l.at("velocity").at(1).get<double>();
        }
        if (l.contains("extent")) {
          const auto& e = l.at("extent");
          layer.extent = Rect{e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>(), e.at(3).get<double>()};
        }
        layer.texture_seed = l.value("texture_seed", std::uint64_t(0));
        s.layers.push_back(layer);
      }
    } else {
      f.scene = random_scene_spec(seed, h, w, T, j.value("foreground_layers", 2));
    }
    if (j.contains("calibration")) {
      f.scene.calibration = {j.at("calibration").at("focal_px").get<double>(),
                             j.at("calibration").at("baseline_m").get<double>()};
    }
    f.scene.frame_rate = j.value("frame_rate", 30.0);
    if (j.contains("noise")) {
      NoiseSpec n;
      n.sigma = j.at("noise").value("sigma", 0.0);
      n.seed = j.at("noise").value("seed", std::uint64_t(0));
      n.key = j.at("noise").value("key", std::string("noisy"));
      f.noise = n;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scene: ") + e.what());
  }
  f.scene.validate();
  return f;
}

}  // namespace bida::io
