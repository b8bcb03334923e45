#pragma once

// Encoder/decoder depth networks as executable layer graphs.
//
// Encoder: ResNet50 (7x7/2 stem, 2x2 max-pool, bottleneck stacks 3/4/6/3);
// "lite" drops the last stack. Decoder: one 2x upsampling block per encoder
// halving that is not yet undone (5 for basic, 4 for lite), each block halving
// the channel count, followed by a head convolution to one depth channel.
// Decoder blocks crop to the resolution of their mirror encoder stage, so any
// input divisible by 16 maps back to a full-resolution depth map.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fcndepth/kernels.hpp"
#include "fcndepth/tensor.hpp"

namespace fcndepth {

class WeightContainer;

enum class EncoderKind { basic, lite_basic };
enum class DecoderKind { deconv, upsampling_nonbt, upconv_naive, upconv_fast };
enum class SkipKind { none, full, outer_middle };

std::string_view to_string(EncoderKind kind);
std::string_view to_string(DecoderKind kind);
std::string_view to_string(SkipKind kind);

struct ModelSpec {
  EncoderKind encoder = EncoderKind::basic;
  DecoderKind decoder = DecoderKind::upsampling_nonbt;
  SkipKind skips = SkipKind::full;
  int input_h = 240;
  int input_w = 320;
  /// Channel widths are the ResNet50 widths divided by this (1 = full widths).
  int width_divisor = 8;

  void validate() const;
  /// Preset name when the combination is one of the evaluated architectures,
  /// otherwise "encoder+decoder+skips".
  std::string name() const;
  /// "<name>@<W>x<H>", with "/full" appended for full widths.
  std::string str() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct Preset {
  std::string_view name;
  std::string_view label;
  EncoderKind encoder;
  DecoderKind decoder;
  SkipKind skips;
};

/// The six evaluated architectures. The interleaved ones (interl, interl + T)
/// run the fast up-convolution at inference.
const std::vector<Preset>& standard_presets();

/// True for the six presets and for their naive up-convolution twins, which
/// are the same networks in training form.
bool is_standard_preset(const ModelSpec& spec);

ModelSpec make_preset(std::string_view name, int input_w = 320, int input_h = 240,
                      int width_divisor = 8);

/// Parses "<preset>[@WxH]" or "<encoder>+<decoder>+<skips>[@WxH]".
ModelSpec parse_model_spec(std::string_view text, int width_divisor = 8);

/// Parses "WxH".
std::pair<int, int> parse_resolution(std::string_view text);

enum class LayerKind {
  conv,
  batchnorm,
  relu,
  maxpool2,
  upsample_nearest2,
  add,
  crop,
  deconv,
  nonbt,
  upconv_naive,
  upconv_fast,
};

std::string_view to_string(LayerKind kind);

struct Layer {
  std::string name;
  LayerKind kind = LayerKind::relu;
  /// Producer layer indices; kImageInput refers to the network input.
  std::vector<int> inputs;
  int kh = 0;
  int kw = 0;
  int cin = 0;
  int cout = 0;
  int stride = 1;
  bool bias = false;
  Padding padding = Padding::same;
  Shape4 output;

  static constexpr int kImageInput = -1;
};

enum class WeightKind : std::uint8_t { conv = 0, batchnorm = 1 };

/// A weight entry a layer expects to find in the container.
struct WeightSlot {
  std::string name;
  WeightKind kind = WeightKind::conv;
  int kh = 0;
  int kw = 0;
  int cin = 0;
  int cout = 0;  // channel count for batch-norm slots
  bool bias = false;
};

std::vector<WeightSlot> weight_slots(const Layer& layer);

struct SkipEdge {
  std::string name;
  int from = 0;  // encoder layer index
  int to = 0;    // merging add layer index
};

class LayerGraph {
 public:
  const ModelSpec& spec() const { return spec_; }
  Shape4 input_shape() const { return input_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const std::vector<SkipEdge>& skips() const { return skips_; }
  const Layer& layer(std::string_view name) const;
  std::optional<int> find(std::string_view name) const;
  int encoder_output() const { return encoder_output_; }
  int decoder_blocks() const { return decoder_blocks_; }
  std::vector<WeightSlot> weight_slots() const;
  /// Analytic multiply-accumulate count of one forward pass at batch 1.
  std::uint64_t mac_count() const;

 private:
  friend LayerGraph build_model(const ModelSpec& spec);
  int push(Layer layer);

  ModelSpec spec_;
  Shape4 input_;
  std::vector<Layer> layers_;
  std::vector<SkipEdge> skips_;
  int encoder_output_ = 0;
  int decoder_blocks_ = 0;
};

LayerGraph build_model(const ModelSpec& spec);

std::uint64_t layer_macs(const Layer& layer, const Shape4& input);

/// (layer name, output shape) for every layer, computed without arithmetic.
std::vector<std::pair<std::string, Shape4>> shape_trace(const LayerGraph& graph);

/// Called after every executed layer with its actual output.
using LayerObserver = std::function<void(const Layer&, const Tensor4f&)>;

/// Forward pass. image is (N, H, W, 3); returns (N, H, W, 1) depth.
Tensor4f infer(const LayerGraph& graph, const WeightContainer& weights, const Tensor4f& image,
               const LayerObserver& observer = {});

}  // namespace fcndepth
