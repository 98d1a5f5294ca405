// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <string>

#include <json.hpp>

#include "bida/metrics.hpp"

namespace bida::io {

inline constexpr int kReportSchema = 1;

inline nlohmann::ordered_json report_json(const MetricReport& r, const std::string& pred_key) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["clip_id"] = r.clip_id;
  j["prediction"] = pred_key;
  j["frames"] = r.frames;
  j["calibration"] = {{"focal_px", r.calibration.focal_px}, {"baseline_m", r.calibration.baseline_m}};
  j["masks_used"] = r.masks_used;
  j["flow_provider"] = r.flow_provider;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.scalars) j["metrics"][k] = v;
  j["per_frame"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.per_frame) j["per_frame"][k] = v;
  return j;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per value: metric,index,value (index "all" for aggregates).
inline std::string report_csv(const MetricReport& r) {
  std::string out = "metric,index,value\n";
  for (const auto& [k, v] : r.scalars) out += k + ",all," + format_number(v) + "\n";
  for (const auto& [k, v] : r.per_frame)
    for (std::size_t i = 0; i < v.size(); ++i) out += k + "," + std::to_string(i) + "," + format_number(v[i]) + "\n";
  return out;
}

}  // namespace bida::io
