#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "fcndepth/upconv.hpp"
#include "fcndepth/weights.hpp"

using namespace fcndepth;

namespace {

std::string serialize(const WeightContainer& w) {
  std::ostringstream out(std::ios::binary);
  save_weights(w, out);
  return out.str();
}

WeightContainer parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return load_weights(in);
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& s, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(s, v);
}

}  // namespace

TEST_CASE("byte layout of a hand-built container") {
  WeightContainer w;
  ConvKernel<float> k(1, 1, 1, 2, true);
  k.weights << 1.5f, -2.0f;
  *k.bias << 0.25f, 0.5f;
  w.insert("a", k);

  std::string want = "FCNW";
  want.push_back(1);
  put_u16(want, 1);
  want += "a";
  want.push_back(0);
  want.push_back(4);
  for (std::uint32_t d : {1u, 1u, 1u, 2u}) put_u32(want, d);
  put_f32(want, 1.5f);
  put_f32(want, -2.0f);
  put_u16(want, 6);
  want += "a/bias";
  want.push_back(0);
  want.push_back(1);
  put_u32(want, 2);
  put_f32(want, 0.25f);
  put_f32(want, 0.5f);
  CHECK(serialize(w) == want);
  CHECK(parse(want) == w);
}

TEST_CASE("batch norm record layout") {
  WeightContainer w;
  BatchNormParams<float> p(2, 0.0f);
  p.mean << 1, 2;
  p.variance << 3, 4;
  p.gamma << 5, 6;
  p.beta << 7, 8;
  w.insert("bn", p);
  const auto bytes = serialize(w);
  REQUIRE(bytes.size() == 5 + 2 + 2 + 2 + 8 + 10 * 4);
  CHECK(bytes[9] == 1);
  CHECK(bytes[10] == 2);
  const auto back = parse(bytes);
  CHECK(back.batchnorm("bn") == p);
}

TEST_CASE("save then load is bit- and byte-identical for every preset") {
  for (const auto& preset : standard_presets()) {
    const auto g = build_model(make_preset(preset.name));
    const auto w = random_weights(g, 5);
    const auto bytes = serialize(w);
    const auto back = parse(bytes);
    CHECK(back == w);
    CHECK(serialize(back) == bytes);
  }
}

TEST_CASE("path overloads round-trip") {
  const auto g = build_model(make_preset("lite_interl_t"));
  const auto w = random_weights(g, 6);
  const auto path = std::filesystem::temp_directory_path() / "fcndepth_test_weights.fcnw";
  save_weights(w, path);
  CHECK(load_weights(path) == w);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_weights(path), Error);
}

TEST_CASE("format errors") {
  const auto g = build_model(make_preset("basic_deconv", 64, 48));
  const auto bytes = serialize(random_weights(g, 7));

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(parse(bad_magic), FormatError);

  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(parse(bad_version), FormatError);

  CHECK(parse(bytes.substr(0, 5)).size() == 0);
  for (std::size_t cut : {std::size_t{2}, std::size_t{6}, std::size_t{40},
                          bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(parse(bytes.substr(0, cut)), FormatError);

  auto bad_kind = bytes;
  bad_kind[5 + 2 + bytes[5]] = 7;
  CHECK_THROWS_AS(parse(bad_kind), FormatError);

  WeightContainer one;
  one.insert("x", ConvKernel<float>(1, 1, 1, 1));
  const auto single = serialize(one);
  CHECK_THROWS_AS(parse(single + single.substr(5)), FormatError);
  CHECK_THROWS_AS(one.insert("x", BatchNormParams<float>(1)), FormatError);

  std::string orphan = "FCNW";
  orphan.push_back(1);
  put_u16(orphan, 6);
  orphan += "z/bias";
  orphan.push_back(0);
  orphan.push_back(1);
  put_u32(orphan, 1);
  put_f32(orphan, 1.0f);
  CHECK_THROWS_AS(parse(orphan), FormatError);
}

TEST_CASE("random containers resolve every graph slot") {
  for (const auto& preset : standard_presets()) {
    const auto g = build_model(make_preset(preset.name));
    const auto w = random_weights(g, 8);
    CHECK_NOTHROW(check_weights(g, w));
    CHECK(w.size() == g.weight_slots().size());
    CHECK(random_weights(g, 8) == w);
  }
  const auto g = build_model(make_preset("basic_sc_nonbt"));
  auto w = random_weights(g, 8);
  w.erase("dec/b3/nonbt2/k13");
  try {
    check_weights(g, w);
    FAIL("expected a missing-weight error");
  } catch (const MissingWeightError& e) {
    CHECK(e.layer() == "dec/b3/nonbt2");
    CHECK(e.entry() == "dec/b3/nonbt2/k13");
  }
}

TEST_CASE("convert_upconv_weights") {
  const auto naive_graph = build_model(make_preset("basic_sc_upconv"));
  const auto fast_graph = build_model(make_preset("basic_sc_interl"));
  const auto naive = random_weights(naive_graph, 9);
  const auto fast = convert_upconv_weights(naive);
  CHECK_NOTHROW(check_weights(fast_graph, fast));
  CHECK_THROWS_AS(check_weights(naive_graph, fast), MissingWeightError);
  CHECK(fast.size() == naive.size() + 3 * 5);

  const auto& full = naive.conv("dec/b2/upconv/conv5x5");
  const auto split = split_weights_5x5(UpConvWeights<float>{full, naive.batchnorm("dec/b2/upconv/bn")});
  CHECK(fast.conv("dec/b2/upconv/k33") == split.k33);
  CHECK(fast.conv("dec/b2/upconv/k32") == split.k32);
  CHECK(fast.conv("dec/b2/upconv/k23") == split.k23);
  CHECK(fast.conv("dec/b2/upconv/k22") == split.k22);
  CHECK(fast.conv("enc/stem/conv") == naive.conv("enc/stem/conv"));

  std::vector<float> before, after;
  for (const auto& [name, e] : naive)
    if (name.ends_with("/conv5x5")) {
      const auto& k = std::get<ConvKernel<float>>(e);
      before.insert(before.end(), k.weights.data(), k.weights.data() + k.weights.size());
    }
  for (const auto& [name, e] : fast)
    if (name.ends_with("/k33") || name.ends_with("/k32") || name.ends_with("/k23") ||
        name.ends_with("/k22")) {
      const auto& k = std::get<ConvKernel<float>>(e);
      after.insert(after.end(), k.weights.data(), k.weights.data() + k.weights.size());
    }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  CHECK(before == after);

  CHECK_THROWS_AS(convert_upconv_weights(fast), Error);
  CHECK_THROWS_AS(convert_upconv_weights(random_weights(build_model(make_preset("basic_deconv")), 1)),
                  Error);
}

TEST_CASE("container accessors") {
  WeightContainer w;
  w.insert("k", ConvKernel<float>(3, 3, 2, 2));
  w.insert("b", BatchNormParams<float>(2));
  CHECK(w.contains("k"));
  CHECK_FALSE(w.contains("q"));
  CHECK(w.find("q") == nullptr);
  CHECK_THROWS_AS(w.batchnorm("k"), Error);
  CHECK_THROWS_AS(w.conv("b"), Error);
  CHECK_THROWS_AS(w.conv("q"), Error);
  CHECK(w.begin()->first == "b");
}
