#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>

#include "fcndepth/architectures.hpp"
#include "fcndepth/tensor.hpp"

namespace fcndepth {

using WeightEntry = std::variant<ConvKernel<float>, BatchNormParams<float>>;

/// Named convolution kernels and batch-norm parameters, ordered by name.
class WeightContainer {
 public:
  using Map = std::map<std::string, WeightEntry, std::less<>>;

  /// Throws FormatError on a duplicate name.
  void insert(std::string name, WeightEntry entry);
  void insert_or_assign(std::string name, WeightEntry entry);
  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }
  const WeightEntry* find(std::string_view name) const;
  bool erase(std::string_view name) { return entries_.erase(std::string(name)) > 0; }

  const ConvKernel<float>& conv(std::string_view name) const;
  const BatchNormParams<float>& batchnorm(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  friend bool operator==(const WeightContainer&, const WeightContainer&) = default;

 private:
  Map entries_;
};

// Binary layout, little-endian throughout:
//   "FCNW" u8 version=1
//   repeated: u16 name_len, name (UTF-8), u8 kind (0 conv, 1 batchnorm),
//             u8 rank, u32 dims[rank], f32 data[prod(dims)]
// conv:      rank 4, dims (kh, kw, cin, cout), weights in that order. A bias is a
//            separate rank-1 conv record "<name>/bias" with dims (cout).
// batchnorm: rank 2, dims (5, C), rows mean, variance, gamma, beta, eps (eps
//            repeated per channel).
inline constexpr char kWeightMagic[4] = {'F', 'C', 'N', 'W'};
inline constexpr std::uint8_t kWeightVersion = 1;

void save_weights(const WeightContainer& weights, std::ostream& out);
void save_weights(const WeightContainer& weights, const std::filesystem::path& path);
WeightContainer load_weights(std::istream& in);
WeightContainer load_weights(const std::filesystem::path& path);

/// Deterministic random weights covering every slot of the graph. Kernels use
/// He-uniform scaling; the batch norm closing each residual branch has gamma
/// scaled by 0.1 so activations stay O(1) through the encoder. Fast up-convolution slots receive the split of the 5x5
/// kernel drawn for the naive form, so a naive graph and its fast twin built
/// from the same seed are related by convert_upconv_weights.
WeightContainer random_weights(const LayerGraph& graph, std::uint64_t seed);

/// Every weight slot of the graph with all conv weights and biases zero and
/// identity-statistics batch norm with beta = `beta`.
WeightContainer zero_weights(const LayerGraph& graph, float beta = 0.0f);

/// Rewrites every "<block>/conv5x5" up-convolution kernel into
/// "<block>/k33", "/k32", "/k23", "/k22". Throws Error when the container holds
/// no 5x5 up-convolution kernel (including when it is already converted).
WeightContainer convert_upconv_weights(const WeightContainer& naive);

/// Checks that every graph slot resolves to exactly one entry of the right
/// kind and extents; throws MissingWeightError / LayerError otherwise.
void check_weights(const LayerGraph& graph, const WeightContainer& weights);

}  // namespace fcndepth
