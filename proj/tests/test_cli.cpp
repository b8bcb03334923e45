#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <iterator>
#include <sstream>

#include "commands.hpp"
#include "fcndepth/architectures.hpp"
#include "fcndepth/io.hpp"
#include "fcndepth/losses.hpp"
#include "fcndepth/upconv.hpp"
#include "fcndepth/weights.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fcndepth;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = fcndepth::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("fcndepth_cli_" + tag)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

void write_test_image(const fs::path& path, int w, int h) {
  RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>((i * 37) % 251);
  write_ppm(img, path);
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli({}).code == fcndepth::cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == fcndepth::cli::kExitUsage);
  CHECK(run_cli({"infer", "--model", "basic_deconv"}).code == fcndepth::cli::kExitUsage);
  CHECK(run_cli({"verify", "--seeds", "0"}).code == fcndepth::cli::kExitUsage);
  CHECK(run_cli({"bench", "--block", "upconv_naive", "--iters", "3"}).code == fcndepth::cli::kExitUsage);
  CHECK(run_cli({"bench", "--block", "nope", "--iters", "10", "--resolution", "4x4"}).code ==
        fcndepth::cli::kExitUsage);
  CHECK(run_cli({"trace", "--model", "basic_deconv@100x100"}).code == fcndepth::cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == fcndepth::cli::kExitOk);
}

TEST_CASE("infer: writes a depth raster with the input dimensions, deterministically") {
  TempDir dir("infer");
  write_test_image(dir / "in.ppm", 64, 48);
  REQUIRE(run_cli({"init-weights", "--model", "lite_interl_t@64x48", "--out", (dir / "w.fcnw").string(),
               "--seed", "4"})
              .code == 0);
  const std::vector<std::string> args{"infer",   "--model",  "lite_interl_t@64x48",
                                      "--weights", (dir / "w.fcnw").string(),
                                      "--input", (dir / "in.ppm").string(),
                                      "--output", (dir / "a.dpth").string()};
  REQUIRE(run_cli(args).code == 0);
  auto again = args;
  again.back() = (dir / "b.dpth").string();
  REQUIRE(run_cli(again).code == 0);
  const auto depth = read_depth(dir / "a.dpth");
  CHECK(depth.width == 64);
  CHECK(depth.height == 48);
  CHECK(slurp(dir / "a.dpth") == slurp(dir / "b.dpth"));

  // Matches the library path.
  const auto graph = build_model(make_preset("lite_interl_t", 64, 48));
  const auto expect = infer(graph, random_weights(graph, 4), image_to_tensor(read_ppm(dir / "in.ppm")));
  CHECK(tensor_to_depth(expect) == depth);

  write_test_image(dir / "small.ppm", 32, 48);
  auto wrong_size = args;
  wrong_size[6] = (dir / "small.ppm").string();
  CHECK(run_cli(wrong_size).code == fcndepth::cli::kExitUsage);
}

TEST_CASE("infer: a missing weight exits 2 and names the layer") {
  TempDir dir("missing");
  write_test_image(dir / "in.ppm", 64, 48);
  const auto graph = build_model(make_preset("basic_sc_nonbt", 64, 48));
  auto w = random_weights(graph, 1);
  REQUIRE(w.erase("dec/b2/nonbt1/k31"));
  save_weights(w, dir / "w.fcnw");
  const auto r = run_cli({"infer", "--model", "basic_sc_nonbt@64x48", "--weights",
                      (dir / "w.fcnw").string(), "--input", (dir / "in.ppm").string(), "--output",
                      (dir / "o.dpth").string()});
  CHECK(r.code == fcndepth::cli::kExitUsage);
  CHECK(r.err.find("dec/b2/nonbt1") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o.dpth"));
}

TEST_CASE("verify: exit-code gate and negative control") {
  const auto ok = run_cli({"verify", "--seeds", "10"});
  CHECK(ok.code == fcndepth::cli::kExitOk);
  const auto doc = json::parse(ok.out);
  CHECK(doc["schema"] == "fcndepth.verify/1");
  CHECK(doc["pass"] == true);
  CHECK(doc["upconv_max_abs_diff_f32"].get<double>() <= 1e-5);
  CHECK(doc["upconv_max_abs_diff_f64"].get<double>() <= 1e-10);
  CHECK(doc["interleave_mismatches"] == 0);

  const auto bad = run_cli({"verify", "--seeds", "3", "--inject-fault"});
  CHECK(bad.code == fcndepth::cli::kExitFailure);
  CHECK(json::parse(bad.out)["pass"] == false);

  CHECK(run_cli({"verify", "--seeds", "1"}).out == run_cli({"verify", "--seeds", "1"}).out);
}

TEST_CASE("gen-synthetic: deterministic corpus with analytic depth") {
  TempDir a("gen_a"), b("gen_b"), c("gen_c");
  for (const auto* d : {&a, &b})
    REQUIRE(run_cli({"gen-synthetic", "--count", "6", "--resolution", "32x24", "--out", d->str(),
                 "--seed", "7"})
                .code == 0);
  REQUIRE(run_cli({"gen-synthetic", "--count", "6", "--resolution", "32x24", "--out", c.str(),
               "--seed", "8"})
              .code == 0);
  bool any_differs = false;
  for (int i = 0; i < 6; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%04d", i);
    for (const char* ext : {".ppm", ".dpth"}) {
      CHECK(slurp(a / (std::string(stem) + ext)) == slurp(b / (std::string(stem) + ext)));
      any_differs = any_differs || slurp(a / (std::string(stem) + ext)) != slurp(c / (std::string(stem) + ext));
    }
  }
  CHECK(any_differs);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));

  const auto manifest = json::parse(slurp(a / "manifest.json"));
  const double f = manifest["camera"]["focal"].get<double>();
  const double cx = manifest["camera"]["cx"].get<double>();
  const double cy = manifest["camera"]["cy"].get<double>();
  for (const auto& scene : manifest["scenes"]) {
    const auto depth = read_depth(a / (scene["name"].get<std::string>() + ".dpth"));
    const auto plane = scene["plane"];
    for (std::uint32_t v = 0; v < depth.height; ++v)
      for (std::uint32_t u = 0; u < depth.width; ++u) {
        double want = plane[3].get<double>() /
                      (plane[0].get<double>() * (u + 0.5 - cx) / f +
                       plane[1].get<double>() * (v + 0.5 - cy) / f + plane[2].get<double>());
        if (scene["kind"] == "box") {
          const auto box = scene["box"];
          if (static_cast<int>(u) >= box[0] && static_cast<int>(u) < box[2] &&
              static_cast<int>(v) >= box[1] && static_cast<int>(v) < box[3])
            want = scene["box_depth"].get<double>();
        }
        CHECK(std::abs(depth.at(u, v) - want) <= 1e-5 * want);
      }
  }
}

TEST_CASE("eval: identical copies, constructed pair, mismatched sets") {
  TempDir gt("eval_gt"), pred("eval_pred"), other("eval_other");
  REQUIRE(run_cli({"gen-synthetic", "--count", "3", "--resolution", "16x16", "--out", gt.str()}).code ==
          0);
  for (const auto& e : fs::directory_iterator(gt.str()))
    if (e.path().extension() == ".dpth") fs::copy_file(e.path(), pred / e.path().filename().string());
  const auto same = run_cli({"eval", "--pred", pred.str(), "--gt", gt.str()});
  REQUIRE(same.code == 0);
  const auto doc = json::parse(same.out);
  CHECK(doc["schema"] == "fcndepth.eval/1");
  CHECK(doc["mse"] == 0.0);
  CHECK(doc["delta1"] == 1.0);
  CHECK(doc["pairs"] == 3);
  CHECK(doc["pixels"] == 3 * 256);

  DepthRaster g{3, 1, {1, 2, 4}}, p{3, 1, {1, 2.4f, 8}};
  write_depth(g, other / "x.dpth");
  TempDir other_pred("eval_other_pred");
  write_depth(p, other_pred / "x.dpth");
  const auto one = json::parse(run_cli({"eval", "--pred", other_pred.str(), "--gt", other.str()}).out);
  const auto gt_t = depth_to_tensor(g), pred_t = depth_to_tensor(p);
  const auto m = compute_metrics(DepthPair{pred_t, gt_t});
  CHECK(one["mse"].get<double>() == m.mse);
  CHECK(one["rel"].get<double>() == m.rel);
  CHECK(one["delta1"].get<double>() == m.delta1);
  CHECK(one["delta3"].get<double>() == m.delta3);

  CHECK(run_cli({"eval", "--pred", other.str(), "--gt", gt.str()}).code == fcndepth::cli::kExitUsage);
  write_depth(DepthRaster{2, 1, {1, 1}}, other_pred / "x.dpth");
  CHECK(run_cli({"eval", "--pred", other_pred.str(), "--gt", other.str()}).code == fcndepth::cli::kExitUsage);
}

TEST_CASE("convert: naive container to fast, end-to-end agreement, refuses fast input") {
  TempDir dir("convert");
  write_test_image(dir / "in.ppm", 96, 64);
  REQUIRE(run_cli({"init-weights", "--model", "basic_sc_upconv@96x64", "--out",
               (dir / "naive.fcnw").string(), "--seed", "3"})
              .code == 0);
  REQUIRE(run_cli({"convert", "--weights", (dir / "naive.fcnw").string(), "--out",
               (dir / "fast.fcnw").string()})
              .code == 0);
  REQUIRE(run_cli({"infer", "--model", "basic_sc_upconv@96x64", "--weights",
               (dir / "naive.fcnw").string(), "--input", (dir / "in.ppm").string(), "--output",
               (dir / "naive.dpth").string()})
              .code == 0);
  REQUIRE(run_cli({"infer", "--model", "basic_sc_interl@96x64", "--weights",
               (dir / "fast.fcnw").string(), "--input", (dir / "in.ppm").string(), "--output",
               (dir / "fast.dpth").string()})
              .code == 0);
  const auto a = read_depth(dir / "naive.dpth");
  const auto b = read_depth(dir / "fast.dpth");
  double worst = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(a.values[i] - b.values[i])));
  CHECK(worst <= 1e-4);

  CHECK(run_cli({"convert", "--weights", (dir / "fast.fcnw").string(), "--out",
             (dir / "again.fcnw").string()})
            .code == fcndepth::cli::kExitUsage);
  CHECK(run_cli({"convert", "--weights", (dir / "in.ppm").string(), "--out",
             (dir / "x.fcnw").string()})
            .code == fcndepth::cli::kExitUsage);
}

TEST_CASE("init-weights output is byte-identical and round-trips") {
  TempDir dir("init");
  for (const char* name : {"a.fcnw", "b.fcnw"})
    REQUIRE(run_cli({"init-weights", "--model", "basic_sc_deconv", "--out", (dir / name).string(),
                 "--seed", "11"})
                .code == 0);
  const auto bytes = slurp(dir / "a.fcnw");
  CHECK(bytes == slurp(dir / "b.fcnw"));
  save_weights(load_weights(dir / "a.fcnw"), dir / "c.fcnw");
  CHECK(slurp(dir / "c.fcnw") == bytes);
}

TEST_CASE("bench: stable schema and report invariants") {
  const auto r = run_cli({"bench", "--block", "upconv_fast", "--resolution", "8x6", "--cin", "8",
                      "--cout", "4", "--iters", "10", "--warmup", "1"});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["schema"] == "fcndepth.bench/1");
  CHECK(doc["kind"] == "block");
  CHECK(doc["iterations"] == 10);
  CHECK(doc["warmup"] == 1);
  CHECK(doc["macs"] == upconv_fast_macs({1, 6, 8, 8}, 4));
  CHECK(doc["min_s"].get<double>() <= doc["p50_s"].get<double>());
  CHECK(doc["p50_s"].get<double>() <= doc["p95_s"].get<double>());
  CHECK(doc["mean_s"].get<double>() > 0.0);

  const auto m = json::parse(
      run_cli({"bench", "--model", "lite_interl_t", "--resolution", "64x48", "--iters", "10"}).out);
  CHECK(m["kind"] == "model");
  CHECK(m["macs"] == build_model(make_preset("lite_interl_t", 64, 48)).mac_count());
}

TEST_CASE("trace reports layers and shapes") {
  const auto r = run_cli({"trace", "--model", "basic_deconv@640x480", "--full-width"});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["standard_preset"] == true);
  bool found = false;
  for (const auto& l : doc["layers"])
    found = found || (l["name"] == "enc/s4/b3/relu" && l["shape"] == json::array({1, 15, 20, 2048}));
  CHECK(found);
  CHECK(doc["layers"].back()["shape"] == json::array({1, 480, 640, 1}));
}

#ifdef FCNDEPTH_BINARY
TEST_CASE("the installed binary uses the same exit codes") {
  const std::string bin = FCNDEPTH_BINARY;
  CHECK(std::system((bin + " verify --seeds 2 > /dev/null 2>&1").c_str()) == 0);
  const int fault = std::system((bin + " verify --seeds 2 --inject-fault > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(fault) == 1);
  const int usage = std::system((bin + " infer > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(usage) == 2);
}
#endif
