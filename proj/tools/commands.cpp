#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "fcndepth/architectures.hpp"
#include "fcndepth/bench.hpp"
#include "fcndepth/interleave.hpp"
#include "fcndepth/io.hpp"
#include "fcndepth/losses.hpp"
#include "fcndepth/synthetic.hpp"
#include "fcndepth/upconv.hpp"
#include "fcndepth/weights.hpp"

namespace fcndepth::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kVerifyTolFloat = 1e-5;
constexpr double kVerifyTolDouble = 1e-10;

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

int width_divisor(bool full_width) { return full_width ? 1 : 8; }

// --- infer -----------------------------------------------------------------

struct InferArgs {
  std::string model, weights, input, output;
  bool full_width = false;
};

int cmd_infer(const InferArgs& a, Streams io) {
  const auto spec = parse_model_spec(a.model, width_divisor(a.full_width));
  const auto graph = build_model(spec);
  const auto weights = load_weights(fs::path(a.weights));
  const auto image = read_ppm(fs::path(a.input));
  if (image.width != spec.input_w || image.height != spec.input_h) {
    io.err << "error: image '" << a.input << "' is " << image.width << "x" << image.height
           << ", model " << spec.str() << " expects " << spec.input_w << "x" << spec.input_h
           << "\n";
    return kExitUsage;
  }
  const auto depth = infer(graph, weights, image_to_tensor(image));
  write_depth(tensor_to_depth(depth), fs::path(a.output));
  io.err << "wrote " << depth.w() << "x" << depth.h() << " depth map to " << a.output << "\n";
  return kExitOk;
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
  std::string model, block;
  std::string resolution = "320x240";
  int iters = kMinBenchIterations;
  int warmup = 2;
  int cin = 256;
  int cout = 128;
  std::uint64_t seed = 1;
  bool full_width = false;
};

ordered_json report_json(const BenchReport& r) {
  ordered_json j;
  j["target"] = r.target;
  j["warmup"] = r.warmup;
  j["iterations"] = r.iterations;
  j["mean_s"] = r.mean_s;
  j["min_s"] = r.min_s;
  j["p50_s"] = r.p50_s;
  j["p95_s"] = r.p95_s;
  j["macs"] = r.macs;
  return j;
}

int cmd_bench(const BenchArgs& a, Streams io) {
  if (a.model.empty() == a.block.empty()) {
    io.err << "error: bench needs exactly one of --model or --block\n";
    return kExitUsage;
  }
  const auto [w, h] = parse_resolution(a.resolution);
  BenchReport report;
  ordered_json doc;
  doc["schema"] = "fcndepth.bench/1";

  if (!a.model.empty()) {
    auto spec = parse_model_spec(a.model + "@" + a.resolution, width_divisor(a.full_width));
    const auto graph = build_model(spec);
    const auto weights = random_weights(graph, a.seed);
    Rng rng(a.seed);
    const auto image = random_tensor<float>(graph.input_shape(), rng, 0.0, 1.0);
    report = run_benchmark(spec.str(), [&] { infer(graph, weights, image); }, a.warmup, a.iters,
                           graph.mac_count());
    doc["kind"] = "model";
  } else {
    Rng rng(a.seed);
    const Shape4 in{1, h, w, a.cin};
    const auto input = random_tensor<float>(in, rng);
    UpConvWeights<float> up{random_kernel<float>(5, 5, a.cin, a.cout, rng),
                            random_batchnorm<float>(a.cout, rng)};
    const auto split = split_weights_5x5(up);
    std::function<void()> body;
    std::uint64_t macs = 0;
    if (a.block == "upconv_naive") {
      body = [&] { upconv_block_naive(input, up); };
      macs = upconv_naive_macs(in, a.cout);
    } else if (a.block == "upconv_fast") {
      body = [&] { upconv_block_fast(input, split); };
      macs = upconv_fast_macs(in, a.cout);
    } else if (a.block == "interleave" || a.block == "interleave_reference") {
      const Shape4 q{1, h, w, a.cin};
      const auto p0 = random_tensor<float>(q, rng), p1 = random_tensor<float>(q, rng),
                 p2 = random_tensor<float>(q, rng), p3 = random_tensor<float>(q, rng);
      const bool single = a.block == "interleave";
      body = [&, single, p0, p1, p2, p3] {
        InterleaveInputs<float> parts{p0, p1, p2, p3};
        if (single)
          interleave4(parts);
        else
          interleave4_reference(parts);
      };
    } else {
      io.err << "error: unknown block '" << a.block
             << "' (upconv_naive, upconv_fast, interleave, interleave_reference)\n";
      return kExitUsage;
    }
    std::ostringstream name;
    name << a.block << "@" << w << "x" << h << "x" << a.cin << "->" << a.cout;
    report = run_benchmark(name.str(), body, a.warmup, a.iters, macs);
    doc["kind"] = "block";
  }
  doc["resolution"] = a.resolution;
  const auto fields = report_json(report);
  for (const auto& [k, v] : fields.items()) doc[k] = v;
  io.out << doc.dump() << "\n";
  io.err << std::setprecision(6) << report.target << ": mean " << report.mean_s << " s, min "
         << report.min_s << " s, p50 " << report.p50_s << " s, p95 " << report.p95_s << " s, "
         << report.macs << " MACs over " << report.iterations << " iterations\n";
  return kExitOk;
}

// --- verify ----------------------------------------------------------------

struct VerifyArgs {
  int seeds = 100;
  bool inject_fault = false;
};

int cmd_verify(const VerifyArgs& a, Streams io) {
  if (a.seeds < 1) {
    io.err << "error: --seeds must be >= 1\n";
    return kExitUsage;
  }
  double worst_f = 0.0, worst_d = 0.0;
  std::size_t interleave_mismatches = 0;
  for (int s = 0; s < a.seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    const Shape4 in{rng.integer(1, 2), rng.integer(2, 12), rng.integer(2, 12), rng.integer(1, 8)};
    VerifyOptions opts;
    opts.cout = rng.integer(1, 8);
    opts.corrupt_tap_mapping = a.inject_fault;
    const auto seed = rng.next();
    worst_f = std::max(worst_f, verify_equivalence<float>(in, seed, opts));
    worst_d = std::max(worst_d, verify_equivalence<double>(in, seed, opts));

    const Shape4 q{rng.integer(1, 4), rng.integer(1, 16), rng.integer(1, 16), rng.integer(1, 8)};
    const auto p0 = random_tensor<float>(q, rng), p1 = random_tensor<float>(q, rng),
               p2 = random_tensor<float>(q, rng), p3 = random_tensor<float>(q, rng);
    InterleaveInputs<float> parts{p0, p1, p2, p3};
    if (!(interleave4(parts) == interleave4_reference(parts))) ++interleave_mismatches;
  }
  const bool ok = worst_f <= kVerifyTolFloat && worst_d <= kVerifyTolDouble &&
                  interleave_mismatches == 0;
  ordered_json doc;
  doc["schema"] = "fcndepth.verify/1";
  doc["seeds"] = a.seeds;
  doc["upconv_max_abs_diff_f32"] = worst_f;
  doc["upconv_max_abs_diff_f64"] = worst_d;
  doc["tolerance_f32"] = kVerifyTolFloat;
  doc["tolerance_f64"] = kVerifyTolDouble;
  doc["interleave_mismatches"] = interleave_mismatches;
  doc["fault_injected"] = a.inject_fault;
  doc["pass"] = ok;
  io.out << doc.dump() << "\n";
  io.err << std::setprecision(3) << "upconv naive vs fast: worst |diff| f32 " << worst_f
         << ", f64 " << worst_d << "; interleave mismatches " << interleave_mismatches << " -> "
         << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitFailure;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt;
};

std::set<std::string> depth_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("'" + dir.string() + "' is not a directory");
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".dpth")
      names.insert(entry.path().filename().string());
  return names;
}

int cmd_eval(const EvalArgs& a, Streams io) {
  const auto pred_names = depth_files(a.pred);
  const auto gt_names = depth_files(a.gt);
  if (pred_names != gt_names || pred_names.empty()) {
    std::vector<std::string> only_pred, only_gt;
    std::set_difference(pred_names.begin(), pred_names.end(), gt_names.begin(), gt_names.end(),
                        std::back_inserter(only_pred));
    std::set_difference(gt_names.begin(), gt_names.end(), pred_names.begin(), pred_names.end(),
                        std::back_inserter(only_gt));
    io.err << "error: prediction and ground-truth sets differ (" << only_pred.size()
           << " only in --pred, " << only_gt.size() << " only in --gt"
           << (pred_names.empty() ? ", no .dpth files" : "") << ")\n";
    return kExitUsage;
  }
  MetricsAccumulator acc;
  for (const auto& name : pred_names) {
    const auto pred = depth_to_tensor(read_depth(fs::path(a.pred) / name));
    const auto gt = depth_to_tensor(read_depth(fs::path(a.gt) / name));
    if (pred.shape() != gt.shape()) {
      io.err << "error: '" << name << "' has size " << pred.w() << "x" << pred.h()
             << " in --pred but " << gt.w() << "x" << gt.h() << " in --gt\n";
      return kExitUsage;
    }
    acc.add(DepthPair<float>{pred, gt});
  }
  const auto m = acc.report();
  ordered_json doc;
  doc["schema"] = "fcndepth.eval/1";
  doc["pairs"] = pred_names.size();
  doc["pixels"] = m.pixels;
  doc["mse"] = m.mse;
  doc["rel"] = m.rel;
  doc["delta1"] = m.delta1;
  doc["delta2"] = m.delta2;
  doc["delta3"] = m.delta3;
  io.out << doc.dump() << "\n";
  io.err << std::setprecision(4) << "MSE " << m.mse << "  REL " << m.rel << "  d1 " << m.delta1
         << "  d2 " << m.delta2 << "  d3 " << m.delta3 << "  (" << pred_names.size()
         << " pairs)\n";
  return kExitOk;
}

// --- gen-synthetic -----------------------------------------------------------

struct GenArgs {
  int count = 8;
  std::string resolution = "320x240";
  std::string out;
  std::uint64_t seed = 0;
};

std::string scene_stem(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", i);
  return buf;
}

int cmd_gen_synthetic(const GenArgs& a, Streams io) {
  if (a.count < 1) {
    io.err << "error: --count must be >= 1\n";
    return kExitUsage;
  }
  const auto [w, h] = parse_resolution(a.resolution);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  Rng rng(a.seed);
  ordered_json manifest;
  manifest["schema"] = "fcndepth.synthetic/1";
  manifest["seed"] = a.seed;
  manifest["width"] = w;
  manifest["height"] = h;
  const auto cam = PinholeCamera::for_resolution(w, h);
  manifest["camera"] = {{"focal", cam.focal}, {"cx", cam.cx}, {"cy", cam.cy}};
  ordered_json scenes = ordered_json::array();
  for (int i = 0; i < a.count; ++i) {
    const Scene scene = random_scene(rng, w, h);
    const auto sample = render_scene(scene, w, h);
    const auto stem = scene_stem(i);
    write_ppm(sample.image, dir / (stem + ".ppm"));
    write_depth(sample.depth, dir / (stem + ".dpth"));
    ordered_json s;
    s["name"] = stem;
    s["kind"] = to_string(scene.kind);
    s["plane"] = {scene.background.nx, scene.background.ny, scene.background.nz,
                  scene.background.offset};
    if (scene.kind == SceneKind::box) {
      s["box"] = {scene.box_x0, scene.box_y0, scene.box_x1, scene.box_y1};
      s["box_depth"] = scene.box_depth;
    }
    scenes.push_back(std::move(s));
  }
  manifest["scenes"] = std::move(scenes);
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  io.err << "wrote " << a.count << " scenes to " << dir.string() << "\n";
  return kExitOk;
}

// --- convert / init-weights / trace -----------------------------------------

struct ConvertArgs {
  std::string weights, out;
};

int cmd_convert(const ConvertArgs& a, Streams io) {
  const auto naive = load_weights(fs::path(a.weights));
  WeightContainer fast;
  try {
    fast = convert_upconv_weights(naive);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  save_weights(fast, fs::path(a.out));
  io.err << "converted " << naive.size() << " entries into " << fast.size() << "\n";
  return kExitOk;
}

struct InitArgs {
  std::string model, out;
  std::uint64_t seed = 0;
  bool full_width = false;
};

int cmd_init_weights(const InitArgs& a, Streams io) {
  const auto graph = build_model(parse_model_spec(a.model, width_divisor(a.full_width)));
  const auto weights = random_weights(graph, a.seed);
  save_weights(weights, fs::path(a.out));
  io.err << "wrote " << weights.size() << " entries for " << graph.spec().str() << "\n";
  return kExitOk;
}

struct TraceArgs {
  std::string model;
  bool full_width = false;
};

int cmd_trace(const TraceArgs& a, Streams io) {
  const auto graph = build_model(parse_model_spec(a.model, width_divisor(a.full_width)));
  ordered_json doc;
  doc["schema"] = "fcndepth.trace/1";
  doc["model"] = graph.spec().str();
  doc["standard_preset"] = is_standard_preset(graph.spec());
  doc["macs"] = graph.mac_count();
  ordered_json layers = ordered_json::array();
  for (const auto& [name, s] : shape_trace(graph))
    layers.push_back({{"name", name}, {"shape", {s.n, s.h, s.w, s.c}}});
  doc["layers"] = std::move(layers);
  io.out << doc.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Streams io{out, err};
  CLI::App app{"Depth-reconstruction FCNN inference kernels"};
  app.name("fcndepth");
  app.require_subcommand(1);

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Run a model on a P6 image, write a DPTH raster");
  infer_cmd->add_option("--model", infer_args.model, "preset or encoder+decoder+skips, optionally @WxH")->required();
  infer_cmd->add_option("--weights", infer_args.weights, "weight container")->required();
  infer_cmd->add_option("--input", infer_args.input, "P6 image")->required();
  infer_cmd->add_option("--output", infer_args.output, "depth raster to write")->required();
  infer_cmd->add_flag("--full-width", infer_args.full_width, "use full ResNet50 channel widths");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Time a model or a single block");
  bench_cmd->add_option("--model", bench_args.model, "model preset");
  bench_cmd->add_option("--block", bench_args.block, "upconv_naive|upconv_fast|interleave|interleave_reference");
  bench_cmd->add_option("--resolution", bench_args.resolution, "WxH (model input or block input)");
  bench_cmd->add_option("--iters", bench_args.iters, "timed iterations (>= 10)");
  bench_cmd->add_option("--warmup", bench_args.warmup, "untimed warmup iterations");
  bench_cmd->add_option("--cin", bench_args.cin, "block input channels");
  bench_cmd->add_option("--cout", bench_args.cout, "block output channels");
  bench_cmd->add_option("--seed", bench_args.seed, "weight/input seed");
  bench_cmd->add_flag("--full-width", bench_args.full_width, "use full ResNet50 channel widths");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Check interleave and up-convolution equivalences");
  verify_cmd->add_option("--seeds", verify_args.seeds, "number of random cases");
  verify_cmd->add_flag("--inject-fault", verify_args.inject_fault, "corrupt the tap mapping (negative control)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Pooled depth metrics over matching DPTH files");
  eval_cmd->add_option("--pred", eval_args.pred, "prediction directory")->required();
  eval_cmd->add_option("--gt", eval_args.gt, "ground-truth directory")->required();

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write synthetic image/depth pairs");
  gen_cmd->add_option("--count", gen_args.count, "number of scenes");
  gen_cmd->add_option("--resolution", gen_args.resolution, "WxH");
  gen_cmd->add_option("--out", gen_args.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen_args.seed, "scene seed");

  ConvertArgs convert_args;
  auto* convert_cmd = app.add_subcommand("convert", "Split 5x5 up-convolution weights for the interleaved decoder");
  convert_cmd->add_option("--weights", convert_args.weights, "input container")->required();
  convert_cmd->add_option("--out", convert_args.out, "output container")->required();

  InitArgs init_args;
  auto* init_cmd = app.add_subcommand("init-weights", "Write deterministic random weights for a model");
  init_cmd->add_option("--model", init_args.model, "model spec")->required();
  init_cmd->add_option("--out", init_args.out, "output container")->required();
  init_cmd->add_option("--seed", init_args.seed, "seed");
  init_cmd->add_flag("--full-width", init_args.full_width, "use full ResNet50 channel widths");

  TraceArgs trace_args;
  auto* trace_cmd = app.add_subcommand("trace", "Print per-layer output shapes");
  trace_cmd->add_option("--model", trace_args.model, "model spec")->required();
  trace_cmd->add_flag("--full-width", trace_args.full_width, "use full ResNet50 channel widths");

  std::vector<std::string> argv_store{"fcndepth"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*infer_cmd) return cmd_infer(infer_args, io);
    if (*bench_cmd) return cmd_bench(bench_args, io);
    if (*verify_cmd) return cmd_verify(verify_args, io);
    if (*eval_cmd) return cmd_eval(eval_args, io);
    if (*gen_cmd) return cmd_gen_synthetic(gen_args, io);
    if (*convert_cmd) return cmd_convert(convert_args, io);
    if (*init_cmd) return cmd_init_weights(init_args, io);
    if (*trace_cmd) return cmd_trace(trace_args, io);
  } catch (const MissingWeightError& e) {
    err << "error: " << e.what() << " (layer " << e.layer() << ")\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace fcndepth::cli
