// SPDX-License-Identifier: Apache-2.0
// Command-line front end: synthetic data, metrics, alignment dumps,
// BiDAStereo inference, stabilizer training/inference and gradient checks.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bida/bida.hpp"

namespace fs = std::filesystem;
using namespace bida;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

using Clip = io::LoadedClip<float>;

Clip load(const std::string& manifest) { return io::load_clip<float>(io::load_manifest(manifest)); }

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

/// Writes `seq` under `key` and a manifest in `out` that points back at the
/// input rasters.
void write_with_manifest(const fs::path& out, const Clip& clip, const std::string& key, const ScalarSequence<float>& seq) {
  auto m = io::rebase(clip.manifest, out);
  m.disparities[key] = io::write_disparities(out, "disp_" + key, seq);
  io::save_manifest(out / "manifest.json", m);
}

// ---- gen ------------------------------------------------------------------
struct GenArgs {
  std::string spec;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const auto scene = io::parse_scene(io::read_text(a.spec));
  auto bundle = generate<float>(scene.scene);
  if (scene.noise) perturb(bundle, scene.noise->sigma, scene.noise->seed, scene.noise->key);
  prepare_out_dir(a.out);
  io::write_bundle(a.out, bundle);
  std::printf("wrote %zu frames (%dx%d) to %s\n", bundle.frames(), bundle.height(), bundle.width(), a.out.c_str());
  return 0;
}

// ---- metrics --------------------------------------------------------------
struct MetricsArgs {
  std::string manifest;
  std::string pred_key;
  std::string gt_key = "gt";
  std::string report;
  std::string csv;
  std::string valid_key;
  std::string tcm_flows;
};

int run_metrics(const MetricsArgs& a) {
  const auto clip = load(a.manifest);
  ClipEvaluationInput<float> in;
  in.clip_id = clip.manifest.clip_id;
  in.calibration = clip.manifest.calibration;
  in.left = clip.left;
  in.flows = clip.flows;
  in.disparity_gt = clip.disparity(a.gt_key);
  in.disparity_pred = clip.disparity(a.pred_key);
  if (!a.valid_key.empty()) {
    auto it = clip.masks.find(a.valid_key);
    if (it == clip.masks.end()) throw ValidationError("manifest has no mask '" + a.valid_key + "'");
    in.valid = it->second;
  }
  std::unique_ptr<FlowProvider<float>> provider;
  if (a.tcm_flows.empty()) {
    provider = std::make_unique<BlockMatchingFlow<float>>();
  } else {
    // Directory with tcm_pred_NNN.flo and tcm_gt_NNN.flo, one per transition.
    VectorSequence<float> pred, gt;
    for (std::size_t t = 0; t + 1 < clip.frames(); ++t) {
      pred.push_back(io::read_flo<float>(fs::path(a.tcm_flows) / io::frame_name("tcm_pred", t, "flo")));
      gt.push_back(io::read_flo<float>(fs::path(a.tcm_flows) / io::frame_name("tcm_gt", t, "flo")));
    }
    provider = std::make_unique<PrecomputedFlow<float>>(std::move(pred), std::move(gt));
  }
  const auto report = evaluate_clip(in, *provider);
  const auto j = io::report_json(report, a.pred_key);
  io::write_text(a.report, j.dump(2) + "\n");
  if (!a.csv.empty()) io::write_text(a.csv, io::report_csv(report));
  for (const auto& [k, v] : report.scalars) std::printf("%-12s %.6g\n", k.c_str(), v);
  return 0;
}

// ---- align ----------------------------------------------------------------
struct AlignArgs {
  std::string manifest;
  std::string key = "gt";
  std::string out;
};

int run_align(const AlignArgs& a) {
  const auto clip = load(a.manifest);
  const auto& d = clip.disparity(a.key);
  prepare_out_dir(a.out);
  nlohmann::ordered_json index;
  index["schema"] = 1;
  index["clip_id"] = clip.manifest.clip_id;
  index["key"] = a.key;
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    const auto prev = io::frame_name("aligned_prev_" + a.key, t, "pfm");
    const auto next = io::frame_name("aligned_next_" + a.key, t, "pfm");
    io::write_pfm(fs::path(a.out) / prev, aligned_prev(d, clip.flows, t));
    io::write_pfm(fs::path(a.out) / next, aligned_next(d, clip.flows, t));
    const auto left_prev = io::frame_name("aligned_prev_left", t, "ppm");
    const auto left_next = io::frame_name("aligned_next_left", t, "ppm");
    io::write_ppm(fs::path(a.out) / left_prev, aligned_prev(clip.left, clip.flows, t));
    io::write_ppm(fs::path(a.out) / left_next, aligned_next(clip.left, clip.flows, t));
    nlohmann::ordered_json frame{{"prev", prev}, {"next", next}, {"left_prev", left_prev}, {"left_next", left_next}};
    if (t > 0) {
      frame["mask_prev"] = io::frame_name("mask_prev", t, "pfm");
      io::write_pfm(fs::path(a.out) / frame["mask_prev"].get<std::string>(), prev_visibility_mask(clip.flows, t));
    }
    if (t + 1 < clip.frames()) {
      frame["mask_next"] = io::frame_name("mask_next", t, "pfm");
      io::write_pfm(fs::path(a.out) / frame["mask_next"].get<std::string>(), next_visibility_mask(clip.flows, t));
    }
    index["frames"].push_back(frame);
  }
  io::write_text(fs::path(a.out) / "align.json", index.dump(2) + "\n");
  return 0;
}

// ---- infer ----------------------------------------------------------------
struct InferArgs {
  std::string manifest;
  std::string weights;
  int iters = 20;
  std::string out;
  std::string key = "bidastereo";
  std::uint64_t motion_seed = 0;
};

int run_infer(const InferArgs& a) {
  const auto clip = load(a.manifest);
  const auto weights = io::read_weights<float>(a.weights);
  auto cfg = bidastereo_config_from(weights);
  cfg.iterations = a.iters;
  cfg.motion_seed = a.motion_seed;
  if (clip.height() % 16 != 0 || clip.width() % 16 != 0) {
    throw ValidationError("infer: frame size must be divisible by 16");
  }
  const auto d = run_bidastereo(clip.left, clip.right, clip.flows, weights, cfg);
  prepare_out_dir(a.out);
  write_with_manifest(a.out, clip, a.key, d);
  return 0;
}

// ---- stabilize ------------------------------------------------------------
struct StabilizeArgs {
  std::string manifest;
  std::string weights;
  std::string pred_key = "noisy";
  std::string out;
  std::string key = "stabilized";
  bool normalize = false;
};

int run_stabilize(const StabilizeArgs& a) {
  const auto clip = load(a.manifest);
  const auto weights = io::read_weights<float>(a.weights);
  auto cfg = stabilizer_config_from(weights);
  cfg.normalize_input = a.normalize;
  const auto result = stabilize(clip.disparity(a.pred_key), clip.flows, weights, cfg);
  prepare_out_dir(a.out);
  write_with_manifest(a.out, clip, a.key, result.corrected);
  return 0;
}

// ---- train-toy ------------------------------------------------------------
struct TrainArgs {
  std::string manifest;
  std::string pred_key = "noisy";
  std::string gt_key = "gt";
  std::string out;
  std::string curve;
  std::string optimizer = "sgd";
  TrainOptions opt;
  int width = 16;
  bool normalize = false;
};

int run_train(TrainArgs a) {
  const auto clip = load(a.manifest);
  a.opt.optimizer = parse_optimizer(a.optimizer);
  StabilizerConfig cfg;
  cfg.feature_channels = cfg.hidden_channels = cfg.fusion_channels = a.width;
  cfg.normalize_input = a.normalize;
  std::string csv = "step,spatial,temporal,total\n";
  const auto result = train_stabilizer(clip.disparity(a.pred_key), clip.disparity(a.gt_key), clip.flows, cfg, a.opt,
                                       [&](const LossPoint& p) {
                                         csv += std::to_string(p.step) + "," + io::format_number(p.spatial) + "," +
                                                io::format_number(p.temporal) + "," + io::format_number(p.total) + "\n";
                                       });
  io::write_weights(a.out, result.weights);
  io::write_text(a.curve.empty() ? a.out + ".loss.csv" : a.curve, csv);
  std::printf("total loss %.6g -> %.6g after %d steps\n", result.curve.front().total, result.curve.back().total,
              a.opt.steps);
  return 0;
}

// ---- init-weights ---------------------------------------------------------
struct InitArgs {
  std::string model = "stabilizer";
  std::uint64_t seed = 0;
  bool zero = false;
  std::string out;
};

int run_init(const InitArgs& a) {
  if (a.model == "stabilizer") {
    const StabilizerConfig cfg;
    io::write_weights(a.out, a.zero ? zero_stabilizer_weights<float>(cfg) : init_stabilizer_weights<float>(cfg, a.seed));
  } else if (a.model == "bidastereo") {
    const BiDAStereoConfig cfg;
    io::write_weights(a.out, a.zero ? zero_bidastereo_weights<float>(cfg) : init_bidastereo_weights<float>(cfg, a.seed));
  } else {
    throw ValidationError("unknown model '" + a.model + "' (stabilizer|bidastereo)");
  }
  return 0;
}

// ---- gradcheck ------------------------------------------------------------
struct GradcheckArgs {
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  int height = 32;
  int width = 64;
  int frames = 5;
};

int run_gradcheck(const GradcheckArgs& a) {
  StabilizerCheckOptions o;
  o.height = a.height;
  o.width = a.width;
  o.frames = a.frames;
  const auto report = check_stabilizer_gradients(a.seed, o);
  for (const auto& e : report.entries) {
    std::printf("%-22s analytic % .12e numeric % .12e rel %.3e\n", e.name.c_str(), e.analytic, e.numeric, e.rel_error);
  }
  const bool ok = report.passed(a.tolerance);
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", report.max_rel_error, a.tolerance, ok ? "PASS" : "FAIL");
  return ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporally consistent stereo toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Render a synthetic stereo clip");
  g->add_option("--spec", gen.spec, "Scene JSON")->required();
  g->add_option("--out", gen.out, "Output directory")->required();

  MetricsArgs met;
  auto* m = app.add_subcommand("metrics", "Evaluate a predicted disparity sequence");
  m->add_option("--manifest", met.manifest)->required();
  m->add_option("--pred-key", met.pred_key, "Disparity sequence to evaluate")->required();
  m->add_option("--gt-key", met.gt_key, "Ground-truth disparity sequence");
  m->add_option("--report", met.report, "JSON report path")->required();
  m->add_option("--csv", met.csv, "Optional CSV export");
  m->add_option("--valid-key", met.valid_key, "Manifest mask restricting EPE/TEPE pixels");
  m->add_option("--tcm-flows", met.tcm_flows, "Directory of precomputed TCM flows (tcm_pred_NNN.flo, tcm_gt_NNN.flo)");

  AlignArgs al;
  auto* a = app.add_subcommand("align", "Dump neighbour disparities and images aligned onto each frame");
  a->add_option("--manifest", al.manifest)->required();
  a->add_option("--key", al.key, "Disparity sequence to align");
  a->add_option("--out", al.out)->required();

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Run BiDAStereo");
  i->add_option("--manifest", inf.manifest)->required();
  i->add_option("--weights", inf.weights)->required();
  i->add_option("--iters", inf.iters, "Update iterations per stage")->check(CLI::NonNegativeNumber);
  i->add_option("--out", inf.out)->required();
  i->add_option("--key", inf.key, "Name of the output disparity sequence");
  i->add_option("--motion-seed", inf.motion_seed, "Seed of the initial motion state");

  StabilizeArgs st;
  auto* s = app.add_subcommand("stabilize", "Apply the stabilizer to a disparity sequence");
  s->add_option("--manifest", st.manifest)->required();
  s->add_option("--weights", st.weights)->required();
  s->add_option("--pred-key", st.pred_key, "Input disparity sequence");
  s->add_option("--out", st.out)->required();
  s->add_option("--key", st.key, "Name of the output disparity sequence");
  s->add_flag("--normalize", st.normalize, "Scale inputs by the clip's mean |d| (must match training)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train-toy", "Fit the stabilizer to one clip");
  t->add_option("--manifest", tr.manifest)->required();
  t->add_option("--pred-key", tr.pred_key, "Input disparity sequence");
  t->add_option("--gt-key", tr.gt_key, "Target disparity sequence");
  t->add_option("--steps", tr.opt.steps)->check(CLI::NonNegativeNumber);
  t->add_option("--lr", tr.opt.lr);
  t->add_option("--lambda", tr.opt.lambda, "Temporal loss weight");
  t->add_option("--optimizer", tr.optimizer, "sgd|adamw");
  t->add_option("--seed", tr.opt.seed, "Weight initialisation seed");
  t->add_option("--width", tr.width, "Channel width of every stabilizer layer")->check(CLI::PositiveNumber);
  t->add_flag("--normalize", tr.normalize, "Scale inputs by the clip's mean |d|");
  t->add_option("--out", tr.out, "Output weights (.bdwt)")->required();
  t->add_option("--curve", tr.curve, "Loss curve CSV (default <out>.loss.csv)");

  InitArgs in;
  auto* w = app.add_subcommand("init-weights", "Write freshly initialised weights");
  w->add_option("--model", in.model, "stabilizer|bidastereo");
  w->add_option("--seed", in.seed);
  w->add_flag("--zero", in.zero, "All-zero weights");
  w->add_option("--out", in.out)->required();

  GradcheckArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Finite-difference check of the stabilizer gradients");
  c->add_option("--seed", gc.seed);
  c->add_option("--tolerance", gc.tolerance);
  c->add_option("--height", gc.height);
  c->add_option("--width", gc.width);
  c->add_option("--frames", gc.frames);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*g) return run_gen(gen);
    if (*m) return run_metrics(met);
    if (*a) return run_align(al);
    if (*i) return run_infer(inf);
    if (*s) return run_stabilize(st);
    if (*t) return run_train(tr);
    if (*w) return run_init(in);
    if (*c) return run_gradcheck(gc);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
