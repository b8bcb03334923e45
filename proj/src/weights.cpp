#include "fcndepth/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "fcndepth/error.hpp"
#include "fcndepth/random.hpp"
#include "fcndepth/upconv.hpp"

namespace fcndepth {

static_assert(std::endian::native == std::endian::little,
              "weight container I/O assumes a little-endian host");

void WeightContainer::insert(std::string name, WeightEntry entry) {
  const auto [it, inserted] = entries_.emplace(std::move(name), std::move(entry));
  if (!inserted) throw FormatError("duplicate weight entry '" + it->first + "'");
}

void WeightContainer::insert_or_assign(std::string name, WeightEntry entry) {
  entries_.insert_or_assign(std::move(name), std::move(entry));
}

const WeightEntry* WeightContainer::find(std::string_view name) const {
  const auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

const ConvKernel<float>& WeightContainer::conv(std::string_view name) const {
  const auto* e = find(name);
  if (!e) throw Error("no weight entry '" + std::string(name) + "'");
  const auto* k = std::get_if<ConvKernel<float>>(e);
  if (!k) throw Error("weight entry '" + std::string(name) + "' is not a convolution");
  return *k;
}

const BatchNormParams<float>& WeightContainer::batchnorm(std::string_view name) const {
  const auto* e = find(name);
  if (!e) throw Error("no weight entry '" + std::string(name) + "'");
  const auto* p = std::get_if<BatchNormParams<float>>(e);
  if (!p) throw Error("weight entry '" + std::string(name) + "' is not batch norm");
  return *p;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kBiasSuffix = "/bias";

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_floats(std::ostream& out, const float* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
}

void put_record(std::ostream& out, const std::string& name, WeightKind kind,
                const std::vector<std::uint32_t>& dims, const std::vector<const float*>& rows,
                std::size_t row_len) {
  if (name.size() > 0xFFFF) throw FormatError("weight name too long: " + name);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put<std::uint32_t>(out, d);
  for (const float* row : rows) put_floats(out, row, row_len);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw FormatError(std::string("truncated weight container while reading ") + what);
  return value;
}

std::vector<float> get_floats(std::istream& in, std::size_t count, const std::string& name) {
  std::vector<float> data(count);
  if (!in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(count * sizeof(float))))
    throw FormatError("truncated weight container in data of '" + name + "'");
  return data;
}

VectorX<float> to_vector(const float* data, std::size_t count) {
  return Eigen::Map<const VectorX<float>>(data, static_cast<Eigen::Index>(count));
}

}  // namespace

void save_weights(const WeightContainer& weights, std::ostream& out) {
  out.write(kWeightMagic, 4);
  put<std::uint8_t>(out, kWeightVersion);
  for (const auto& [name, entry] : weights) {
    if (const auto* k = std::get_if<ConvKernel<float>>(&entry)) {
      k->validate();
      put_record(out, name, WeightKind::conv,
                 {static_cast<std::uint32_t>(k->kh), static_cast<std::uint32_t>(k->kw),
                  static_cast<std::uint32_t>(k->cin), static_cast<std::uint32_t>(k->cout)},
                 {k->weights.data()}, k->weight_count());
      if (k->bias)
        put_record(out, name + std::string(kBiasSuffix), WeightKind::conv,
                   {static_cast<std::uint32_t>(k->cout)}, {k->bias->data()},
                   static_cast<std::size_t>(k->cout));
    } else {
      const auto& p = std::get<BatchNormParams<float>>(entry);
      p.validate();
      const std::vector<float> eps(static_cast<std::size_t>(p.channels()), p.eps);
      put_record(out, name, WeightKind::batchnorm,
                 {5u, static_cast<std::uint32_t>(p.channels())},
                 {p.mean.data(), p.variance.data(), p.gamma.data(), p.beta.data(), eps.data()},
                 static_cast<std::size_t>(p.channels()));
    }
  }
  if (!out) throw Error("failed writing weight container");
}

void save_weights(const WeightContainer& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_weights(weights, out);
}

WeightContainer load_weights(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kWeightMagic, 4) != 0)
    throw FormatError("not a weight container (bad magic)");
  const auto version = get<std::uint8_t>(in, "version");
  if (version != kWeightVersion)
    throw FormatError("unsupported weight container version " + std::to_string(version));

  WeightContainer result;
  std::map<std::string, VectorX<float>> biases;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto name_len = get<std::uint16_t>(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError("truncated weight container in name");
    const auto kind = get<std::uint8_t>(in, "kind");
    const auto rank = get<std::uint8_t>(in, "rank");
    std::vector<std::uint32_t> dims(rank);
    std::size_t count = 1;
    for (auto& d : dims) {
      d = get<std::uint32_t>(in, "dims");
      if (d == 0) throw FormatError("zero dimension in '" + name + "'");
      count *= d;
    }
    if (count > (std::size_t{1} << 32)) throw FormatError("implausible record size in '" + name + "'");
    const auto data = get_floats(in, count, name);

    if (kind == static_cast<std::uint8_t>(WeightKind::conv) && rank == 4) {
      ConvKernel<float> k(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                          static_cast<int>(dims[2]), static_cast<int>(dims[3]));
      k.weights = to_vector(data.data(), count);
      result.insert(name, std::move(k));
    } else if (kind == static_cast<std::uint8_t>(WeightKind::conv) && rank == 1) {
      if (!name.ends_with(kBiasSuffix)) throw FormatError("rank-1 conv record '" + name + "' is not a bias");
      if (!biases.emplace(name.substr(0, name.size() - kBiasSuffix.size()),
                          to_vector(data.data(), count))
               .second)
        throw FormatError("duplicate weight entry '" + name + "'");
    } else if (kind == static_cast<std::uint8_t>(WeightKind::batchnorm) && rank == 2 &&
               dims[0] == 5) {
      const std::size_t c = dims[1];
      BatchNormParams<float> p;
      p.mean = to_vector(data.data(), c);
      p.variance = to_vector(data.data() + c, c);
      p.gamma = to_vector(data.data() + 2 * c, c);
      p.beta = to_vector(data.data() + 3 * c, c);
      p.eps = data[4 * c];
      for (std::size_t i = 1; i < c; ++i)
        if (data[4 * c + i] != p.eps) throw FormatError("inconsistent eps in '" + name + "'");
      try {
        p.validate();
      } catch (const ShapeError& e) {
        throw FormatError("invalid batch norm '" + name + "': " + e.what());
      }
      result.insert(name, std::move(p));
    } else {
      throw FormatError("unsupported record kind " + std::to_string(kind) + " / rank " +
                        std::to_string(rank) + " for '" + name + "'");
    }
  }

  for (auto& [owner, bias] : biases) {
    const WeightEntry* e = result.find(owner);
    const auto* k = e ? std::get_if<ConvKernel<float>>(e) : nullptr;
    if (!k) throw FormatError("bias record for unknown kernel '" + owner + "'");
    if (bias.size() != k->cout) throw FormatError("bias length mismatch for '" + owner + "'");
    ConvKernel<float> with_bias = *k;
    with_bias.bias = std::move(bias);
    result.insert_or_assign(owner, std::move(with_bias));
  }
  return result;
}

WeightContainer load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open weight file '" + path.string() + "'");
  return load_weights(in);
}

// ---------------------------------------------------------------------------
// Generation and conversion

namespace {

ConvKernel<float> he_kernel(int kh, int kw, int cin, int cout, bool bias, Rng& rng) {
  const double limit = std::sqrt(6.0 / (static_cast<double>(kh) * kw * cin));
  ConvKernel<float> k(kh, kw, cin, cout, bias);
  fill_uniform(k.weights, rng, -limit, limit);
  if (k.bias) fill_uniform(*k.bias, rng, -0.1, 0.1);
  return k;
}

std::string_view strip_suffix(std::string_view name, std::string_view suffix) {
  return name.substr(0, name.size() - suffix.size());
}

}  // namespace

namespace {

constexpr float kResidualGammaScale = 0.1f;

// Closing batch norm of a residual branch: gamma scaled down.
BatchNormParams<float> residual_aware_batchnorm(const WeightSlot& slot, Rng& rng) {
  auto p = random_batchnorm<float>(slot.cout, rng);
  if (slot.name.size() >= 5 && slot.name.compare(slot.name.size() - 5, 5, "/3/bn") == 0)
    p.gamma *= kResidualGammaScale;
  return p;
}

}  // namespace

WeightContainer random_weights(const LayerGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  WeightContainer weights;
  for (const auto& layer : graph.layers()) {
    if (layer.kind == LayerKind::upconv_fast) {
      // Draw exactly what the naive twin would draw, then split it.
      UpConvWeights<float> full{he_kernel(5, 5, layer.cin, layer.cout, false, rng),
                                random_batchnorm<float>(layer.cout, rng)};
      auto split = split_weights_5x5(full);
      weights.insert(layer.name + "/k33", std::move(split.k33));
      weights.insert(layer.name + "/k32", std::move(split.k32));
      weights.insert(layer.name + "/k23", std::move(split.k23));
      weights.insert(layer.name + "/k22", std::move(split.k22));
      weights.insert(layer.name + "/bn", std::move(split.bn));
      continue;
    }
    for (const auto& slot : weight_slots(layer)) {
      if (slot.kind == WeightKind::conv)
        weights.insert(slot.name, he_kernel(slot.kh, slot.kw, slot.cin, slot.cout, slot.bias, rng));
      else
        weights.insert(slot.name, residual_aware_batchnorm(slot, rng));
    }
  }
  return weights;
}

WeightContainer zero_weights(const LayerGraph& graph, float beta) {
  WeightContainer weights;
  for (const auto& slot : graph.weight_slots()) {
    if (slot.kind == WeightKind::conv) {
      weights.insert(slot.name, ConvKernel<float>(slot.kh, slot.kw, slot.cin, slot.cout, slot.bias));
    } else {
      BatchNormParams<float> p(slot.cout);
      p.beta.setConstant(beta);
      weights.insert(slot.name, std::move(p));
    }
  }
  return weights;
}

WeightContainer convert_upconv_weights(const WeightContainer& naive) {
  constexpr std::string_view kConvSuffix = "/conv5x5";
  WeightContainer out;
  std::size_t converted = 0;
  for (const auto& [name, entry] : naive) {
    const auto* k = std::get_if<ConvKernel<float>>(&entry);
    if (!k || !std::string_view(name).ends_with(kConvSuffix)) {
      if (!out.contains(name)) out.insert(name, entry);
      continue;
    }
    if (k->kh != 5 || k->kw != 5)
      throw Error("up-convolution kernel '" + name + "' is not 5x5");
    const std::string block(strip_suffix(name, kConvSuffix));
    const std::string bn_name = block + "/bn";
    const auto* bn_entry = naive.find(bn_name);
    const auto* bn = bn_entry ? std::get_if<BatchNormParams<float>>(bn_entry) : nullptr;
    if (!bn) throw Error("up-convolution block '" + block + "' has no batch norm entry");
    auto split = split_weights_5x5(UpConvWeights<float>{*k, *bn});
    out.insert(block + "/k33", std::move(split.k33));
    out.insert(block + "/k32", std::move(split.k32));
    out.insert(block + "/k23", std::move(split.k23));
    out.insert(block + "/k22", std::move(split.k22));
    ++converted;
  }
  if (converted == 0)
    throw Error("weight container holds no 5x5 up-convolution kernels to convert");
  return out;
}

}  // namespace fcndepth
