#include "fcndepth/architectures.hpp"

#include <algorithm>
#include <charconv>
#include <string>

#include "fcndepth/error.hpp"
#include "fcndepth/upconv.hpp"
#include "fcndepth/weights.hpp"

namespace fcndepth {

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::basic: return "basic";
    case EncoderKind::lite_basic: return "lite_basic";
  }
  return "?";
}

std::string_view to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::deconv: return "deconv";
    case DecoderKind::upsampling_nonbt: return "upsampling_nonbt";
    case DecoderKind::upconv_naive: return "upconv_naive";
    case DecoderKind::upconv_fast: return "upconv_fast";
  }
  return "?";
}

std::string_view to_string(SkipKind kind) {
  switch (kind) {
    case SkipKind::none: return "none";
    case SkipKind::full: return "full";
    case SkipKind::outer_middle: return "outer_middle";
  }
  return "?";
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::upsample_nearest2: return "upsample_nearest2";
    case LayerKind::add: return "add";
    case LayerKind::crop: return "crop";
    case LayerKind::deconv: return "deconv";
    case LayerKind::nonbt: return "nonbt";
    case LayerKind::upconv_naive: return "upconv_naive";
    case LayerKind::upconv_fast: return "upconv_fast";
  }
  return "?";
}

const std::vector<Preset>& standard_presets() {
  static const std::vector<Preset> presets{
      {"basic_deconv", "Basic / Deconv", EncoderKind::basic, DecoderKind::deconv, SkipKind::none},
      {"basic_sc_deconv", "Basic + SC / Deconv", EncoderKind::basic, DecoderKind::deconv,
       SkipKind::full},
      {"basic_sc_nonbt", "Basic + SC / Upsampling + nonbt", EncoderKind::basic,
       DecoderKind::upsampling_nonbt, SkipKind::full},
      {"lite_sc_nonbt", "Lite Basic + SC / Upsampling + nonbt", EncoderKind::lite_basic,
       DecoderKind::upsampling_nonbt, SkipKind::full},
      {"basic_sc_interl", "Basic + SC + interl (+ T) / Up-convolution", EncoderKind::basic,
       DecoderKind::upconv_fast, SkipKind::outer_middle},
      {"lite_interl_t", "Lite Basic + interl + T / Up-convolution", EncoderKind::lite_basic,
       DecoderKind::upconv_fast, SkipKind::none},
  };
  return presets;
}

namespace {

// Naive twins of the interleaved presets (training form of "interl + T").
struct NaiveTwin {
  std::string_view name;
  std::string_view fast;
};
constexpr NaiveTwin kNaiveTwins[] = {{"basic_sc_upconv", "basic_sc_interl"},
                                     {"lite_upconv", "lite_interl_t"}};

const Preset* find_preset(const ModelSpec& spec) {
  DecoderKind decoder = spec.decoder;
  if (decoder == DecoderKind::upconv_naive) decoder = DecoderKind::upconv_fast;
  for (const auto& p : standard_presets())
    if (p.encoder == spec.encoder && p.decoder == decoder && p.skips == spec.skips) return &p;
  return nullptr;
}

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw Error("invalid " + std::string(what) + " '" + std::string(text) + "'");
  return value;
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const Enum (&values)[N], std::string_view what) {
  for (Enum v : values)
    if (to_string(v) == text) return v;
  throw Error("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

bool is_standard_preset(const ModelSpec& spec) { return find_preset(spec) != nullptr; }

void ModelSpec::validate() const {
  if (input_h < 16 || input_w < 16 || input_h % 16 != 0 || input_w % 16 != 0)
    throw ShapeError("model input " + std::to_string(input_w) + "x" + std::to_string(input_h) +
                     " must be a positive multiple of 16 in both dimensions");
  if (width_divisor < 1 || 64 % width_divisor != 0)
    throw Error("width divisor must divide 64, got " + std::to_string(width_divisor));
}

std::string ModelSpec::name() const {
  if (const Preset* p = find_preset(*this)) {
    if (decoder == DecoderKind::upconv_naive) {
      for (const auto& twin : kNaiveTwins)
        if (twin.fast == p->name) return std::string(twin.name);
    }
    return std::string(p->name);
  }
  return std::string(to_string(encoder)) + "+" + std::string(to_string(decoder)) + "+" +
         std::string(to_string(skips));
}

std::string ModelSpec::str() const {
  std::string s = name() + "@" + std::to_string(input_w) + "x" + std::to_string(input_h);
  if (width_divisor == 1) s += "/full";
  return s;
}

std::pair<int, int> parse_resolution(std::string_view text) {
  const auto x = text.find('x');
  if (x == std::string_view::npos) throw Error("resolution must be WxH, got '" + std::string(text) + "'");
  const int w = parse_int(text.substr(0, x), "resolution width");
  const int h = parse_int(text.substr(x + 1), "resolution height");
  if (w < 1 || h < 1) throw Error("resolution must be positive");
  return {w, h};
}

ModelSpec make_preset(std::string_view name, int input_w, int input_h, int width_divisor) {
  ModelSpec spec;
  spec.input_w = input_w;
  spec.input_h = input_h;
  spec.width_divisor = width_divisor;
  for (const auto& twin : kNaiveTwins) {
    if (twin.name == name) {
      spec = make_preset(twin.fast, input_w, input_h, width_divisor);
      spec.decoder = DecoderKind::upconv_naive;
      return spec;
    }
  }
  for (const auto& p : standard_presets()) {
    if (p.name == name) {
      spec.encoder = p.encoder;
      spec.decoder = p.decoder;
      spec.skips = p.skips;
      spec.validate();
      return spec;
    }
  }
  throw Error("unknown model preset '" + std::string(name) + "'");
}

ModelSpec parse_model_spec(std::string_view text, int width_divisor) {
  int w = 320, h = 240;
  std::string_view name = text;
  if (const auto at = text.find('@'); at != std::string_view::npos) {
    std::tie(w, h) = parse_resolution(text.substr(at + 1));
    name = text.substr(0, at);
  }
  if (name.find('+') == std::string_view::npos) return make_preset(name, w, h, width_divisor);

  const auto p1 = name.find('+');
  const auto p2 = name.find('+', p1 + 1);
  if (p2 == std::string_view::npos) throw Error("model spec must be encoder+decoder+skips");
  static constexpr EncoderKind encoders[] = {EncoderKind::basic, EncoderKind::lite_basic};
  static constexpr DecoderKind decoders[] = {DecoderKind::deconv, DecoderKind::upsampling_nonbt,
                                             DecoderKind::upconv_naive, DecoderKind::upconv_fast};
  static constexpr SkipKind skips[] = {SkipKind::none, SkipKind::full, SkipKind::outer_middle};
  ModelSpec spec;
  spec.encoder = parse_enum(name.substr(0, p1), encoders, "encoder");
  spec.decoder = parse_enum(name.substr(p1 + 1, p2 - p1 - 1), decoders, "decoder");
  spec.skips = parse_enum(name.substr(p2 + 1), skips, "skip configuration");
  spec.input_w = w;
  spec.input_h = h;
  spec.width_divisor = width_divisor;
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Graph construction

namespace {

Shape4 input_shape_of(const LayerGraph& graph, const std::vector<Layer>& layers, int index) {
  return index == Layer::kImageInput ? graph.input_shape() : layers[index].output;
}

}  // namespace

std::vector<WeightSlot> weight_slots(const Layer& layer) {
  const auto conv_slot = [](std::string name, int kh, int kw, int cin, int cout, bool bias) {
    return WeightSlot{std::move(name), WeightKind::conv, kh, kw, cin, cout, bias};
  };
  const auto bn_slot = [](std::string name, int c) {
    return WeightSlot{std::move(name), WeightKind::batchnorm, 0, 0, 0, c, false};
  };
  switch (layer.kind) {
    case LayerKind::conv:
    case LayerKind::deconv:
      return {conv_slot(layer.name, layer.kh, layer.kw, layer.cin, layer.cout, layer.bias)};
    case LayerKind::batchnorm:
      return {bn_slot(layer.name, layer.cout)};
    case LayerKind::nonbt:
      return {conv_slot(layer.name + "/k31", 3, 1, layer.cin, layer.cout, true),
              conv_slot(layer.name + "/k13", 1, 3, layer.cout, layer.cout, true)};
    case LayerKind::upconv_naive:
      return {conv_slot(layer.name + "/conv5x5", 5, 5, layer.cin, layer.cout, false),
              bn_slot(layer.name + "/bn", layer.cout)};
    case LayerKind::upconv_fast:
      return {conv_slot(layer.name + "/k33", 3, 3, layer.cin, layer.cout, false),
              conv_slot(layer.name + "/k32", 3, 2, layer.cin, layer.cout, false),
              conv_slot(layer.name + "/k23", 2, 3, layer.cin, layer.cout, false),
              conv_slot(layer.name + "/k22", 2, 2, layer.cin, layer.cout, false),
              bn_slot(layer.name + "/bn", layer.cout)};
    default:
      return {};
  }
}

std::uint64_t layer_macs(const Layer& layer, const Shape4& in) {
  const Shape4& out = layer.output;
  const auto pixels = static_cast<std::uint64_t>(out.n) * out.h * out.w;
  switch (layer.kind) {
    case LayerKind::conv:
      return pixels * layer.kh * layer.kw * layer.cin * layer.cout;
    case LayerKind::deconv:
      return static_cast<std::uint64_t>(in.n) * in.h * in.w * layer.kh * layer.kw * layer.cin *
             layer.cout;
    case LayerKind::nonbt:
      return pixels * 3 * (static_cast<std::uint64_t>(layer.cin) * layer.cout +
                           static_cast<std::uint64_t>(layer.cout) * layer.cout);
    case LayerKind::upconv_naive:
      return upconv_naive_macs(in, layer.cout);
    case LayerKind::upconv_fast:
      return upconv_fast_macs(in, layer.cout);
    default:
      return 0;
  }
}

int LayerGraph::push(Layer layer) {
  if (find(layer.name)) throw Error("duplicate layer name '" + layer.name + "'");
  const Shape4 in = input_shape_of(*this, layers_, layer.inputs.front());
  switch (layer.kind) {
    case LayerKind::conv:
      layer.cin = in.c;
      layer.output = conv2d_shape(in, layer.kh, layer.kw, layer.cout, layer.stride, layer.padding);
      break;
    case LayerKind::deconv:
      layer.cin = in.c;
      layer.output = {in.n, in.h * layer.stride, in.w * layer.stride, layer.cout};
      break;
    case LayerKind::nonbt:
      layer.cin = in.c;
      layer.output = {in.n, in.h, in.w, layer.cout};
      break;
    case LayerKind::upconv_naive:
    case LayerKind::upconv_fast:
      layer.cin = in.c;
      layer.output = upconv_output_shape(in, layer.cout);
      break;
    case LayerKind::batchnorm:
    case LayerKind::relu:
      layer.cin = layer.cout = in.c;
      layer.output = in;
      break;
    case LayerKind::maxpool2:
      layer.cin = layer.cout = in.c;
      layer.output = resample_shape(in, ResampleMode::maxpool2);
      break;
    case LayerKind::upsample_nearest2:
      layer.cin = layer.cout = in.c;
      layer.output = resample_shape(in, ResampleMode::nearest_up2);
      break;
    case LayerKind::crop:
      if (layer.kh > in.h || layer.kw > in.w)
        throw ShapeError("crop layer '" + layer.name + "' larger than its input");
      layer.cin = layer.cout = in.c;
      layer.output = {in.n, layer.kh, layer.kw, in.c};
      break;
    case LayerKind::add: {
      const Shape4 other = input_shape_of(*this, layers_, layer.inputs.at(1));
      if (other != in)
        throw ShapeError("add layer '" + layer.name + "' joins " + in.str() + " and " +
                         other.str());
      layer.cin = layer.cout = in.c;
      layer.output = in;
      break;
    }
  }
  layers_.push_back(std::move(layer));
  return static_cast<int>(layers_.size()) - 1;
}

std::optional<int> LayerGraph::find(std::string_view name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

const Layer& LayerGraph::layer(std::string_view name) const {
  const auto i = find(name);
  if (!i) throw Error("no layer named '" + std::string(name) + "'");
  return layers_[*i];
}

std::vector<WeightSlot> LayerGraph::weight_slots() const {
  std::vector<WeightSlot> slots;
  for (const auto& layer : layers_) {
    auto s = fcndepth::weight_slots(layer);
    slots.insert(slots.end(), s.begin(), s.end());
  }
  return slots;
}

std::uint64_t LayerGraph::mac_count() const {
  std::uint64_t total = 0;
  for (const auto& layer : layers_) {
    Shape4 in = input_shape_of(*this, layers_, layer.inputs.front());
    total += layer_macs(layer, in);
  }
  return total;
}

namespace {

struct Builder {
  LayerGraph& graph;
  int (LayerGraph::*push_fn)(Layer);

  int push(Layer layer) { return (graph.*push_fn)(std::move(layer)); }

  int conv(const std::string& name, int from, int k, int cout, int stride, bool bias = false) {
    Layer l;
    l.name = name;
    l.kind = LayerKind::conv;
    l.inputs = {from};
    l.kh = l.kw = k;
    l.cout = cout;
    l.stride = stride;
    l.bias = bias;
    return push(std::move(l));
  }
  int unary(const std::string& name, LayerKind kind, int from) {
    Layer l;
    l.name = name;
    l.kind = kind;
    l.inputs = {from};
    return push(std::move(l));
  }
  int block(const std::string& name, LayerKind kind, int from, int cout, int k = 0) {
    Layer l;
    l.name = name;
    l.kind = kind;
    l.inputs = {from};
    l.cout = cout;
    l.kh = l.kw = k;
    l.stride = 2;
    return push(std::move(l));
  }
  int crop(const std::string& name, int from, int h, int w) {
    Layer l;
    l.name = name;
    l.kind = LayerKind::crop;
    l.inputs = {from};
    l.kh = h;
    l.kw = w;
    return push(std::move(l));
  }
  int add(const std::string& name, int a, int b) {
    Layer l;
    l.name = name;
    l.kind = LayerKind::add;
    l.inputs = {a, b};
    return push(std::move(l));
  }
  int conv_bn_relu(const std::string& name, int from, int k, int cout, int stride, bool relu) {
    int x = conv(name + "/conv", from, k, cout, stride);
    x = unary(name + "/bn", LayerKind::batchnorm, x);
    return relu ? unary(name + "/relu", LayerKind::relu, x) : x;
  }
};

}  // namespace

LayerGraph build_model(const ModelSpec& spec) {
  spec.validate();
  LayerGraph g;
  g.spec_ = spec;
  g.input_ = {1, spec.input_h, spec.input_w, 3};
  Builder b{g, &LayerGraph::push};
  const int div = spec.width_divisor;
  const auto& layers = g.layers_;

  // Encoder: stem at 1/2, pool at 1/4, stacks at 1/4, 1/8, 1/16, 1/32.
  int x = b.conv_bn_relu("enc/stem", Layer::kImageInput, 7, 64 / div, 2, true);
  const int stem = x;
  x = b.unary("enc/pool", LayerKind::maxpool2, x);

  constexpr int kBlocksPerStack[4] = {3, 4, 6, 3};
  const int stacks = spec.encoder == EncoderKind::basic ? 4 : 3;
  std::vector<int> stack_out;
  for (int s = 0; s < stacks; ++s) {
    const int mid = (64 << s) / div;
    const int out = 4 * mid;
    for (int j = 0; j < kBlocksPerStack[s]; ++j) {
      const std::string name = "enc/s" + std::to_string(s + 1) + "/b" + std::to_string(j + 1);
      const int stride = (s > 0 && j == 0) ? 2 : 1;
      int shortcut = x;
      if (j == 0) shortcut = b.conv_bn_relu(name + "/proj", x, 1, out, stride, false);
      int y = b.conv_bn_relu(name + "/1", x, 1, mid, 1, true);
      y = b.conv_bn_relu(name + "/2", y, 3, mid, stride, true);
      y = b.conv_bn_relu(name + "/3", y, 1, out, 1, false);
      y = b.add(name + "/add", y, shortcut);
      x = b.unary(name + "/relu", LayerKind::relu, y);
    }
    stack_out.push_back(x);
  }
  g.encoder_output_ = x;

  // Mirror targets, deepest first: stacks below the bottleneck, the stem, the image.
  struct Mirror {
    int layer;  // encoder layer providing the resolution (kImageInput for the image)
    int stack;  // stack number (1-based) or 0
  };
  std::vector<Mirror> mirrors;
  for (int s = stacks - 2; s >= 0; --s) mirrors.push_back({stack_out[s], s + 1});
  mirrors.push_back({stem, 0});
  mirrors.push_back({Layer::kImageInput, 0});
  g.decoder_blocks_ = static_cast<int>(mirrors.size());

  const auto skip_from = [&](int stack) {
    if (stack == 0) return false;
    switch (spec.skips) {
      case SkipKind::none: return false;
      case SkipKind::full: return true;
      case SkipKind::outer_middle: return stack == 1 || stack == 2;
    }
    return false;
  };

  int channels = layers[x].output.c;
  for (int j = 0; j < g.decoder_blocks_; ++j) {
    const std::string name = "dec/b" + std::to_string(j + 1);
    const int cout = std::max(1, channels / 2);
    switch (spec.decoder) {
      case DecoderKind::deconv: {
        Layer l;
        l.name = name + "/deconv";
        l.kind = LayerKind::deconv;
        l.inputs = {x};
        l.kh = l.kw = 5;
        l.cout = cout;
        l.stride = 2;
        x = b.push(std::move(l));
        x = b.unary(name + "/bn", LayerKind::batchnorm, x);
        x = b.unary(name + "/relu", LayerKind::relu, x);
        break;
      }
      case DecoderKind::upsampling_nonbt:
        x = b.unary(name + "/up", LayerKind::upsample_nearest2, x);
        x = b.block(name + "/nonbt1", LayerKind::nonbt, x, cout);
        x = b.block(name + "/nonbt2", LayerKind::nonbt, x, cout);
        break;
      case DecoderKind::upconv_naive:
        x = b.block(name + "/upconv", LayerKind::upconv_naive, x, cout, 5);
        break;
      case DecoderKind::upconv_fast:
        x = b.block(name + "/upconv", LayerKind::upconv_fast, x, cout, 5);
        break;
    }
    channels = cout;

    const Mirror& m = mirrors[j];
    const Shape4 target = m.layer == Layer::kImageInput ? g.input_ : layers[m.layer].output;
    const Shape4 have = layers[x].output;
    if (have.h < target.h || have.w < target.w)
      throw ShapeError("decoder block '" + name + "' is smaller than its mirror stage");
    if (have.h != target.h || have.w != target.w) x = b.crop(name + "/crop", x, target.h, target.w);

    if (skip_from(m.stack)) {
      int tap = m.layer;
      if (layers[tap].output.c != channels)
        tap = b.conv(name + "/skip_proj", tap, 1, channels, 1, true);
      x = b.add(name + "/skip", x, tap);
      g.skips_.push_back({"s" + std::to_string(m.stack) + "->b" + std::to_string(j + 1),
                          m.layer, x});
    }
  }

  const int head_k = spec.decoder == DecoderKind::upsampling_nonbt ? 5 : 3;
  b.conv("head/conv", x, head_k, 1, 1, true);
  return g;
}

std::vector<std::pair<std::string, Shape4>> shape_trace(const LayerGraph& graph) {
  std::vector<std::pair<std::string, Shape4>> trace;
  trace.reserve(graph.layers().size());
  for (const auto& layer : graph.layers()) trace.emplace_back(layer.name, layer.output);
  return trace;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

const ConvKernel<float>& fetch_conv(const WeightContainer& weights, const Layer& layer,
                                    const WeightSlot& slot) {
  const WeightEntry* entry = weights.find(slot.name);
  if (!entry) throw MissingWeightError(layer.name, slot.name);
  const auto* k = std::get_if<ConvKernel<float>>(entry);
  if (!k) throw LayerError(layer.name, "weight entry '" + slot.name + "' is not a convolution");
  if (k->kh != slot.kh || k->kw != slot.kw || k->cin != slot.cin || k->cout != slot.cout)
    throw LayerError(layer.name, "weight entry '" + slot.name + "' has extents " +
                                     std::to_string(k->kh) + "x" + std::to_string(k->kw) + "x" +
                                     std::to_string(k->cin) + "x" + std::to_string(k->cout));
  if (slot.bias && !k->bias)
    throw LayerError(layer.name, "weight entry '" + slot.name + "' lacks a bias");
  return *k;
}

const BatchNormParams<float>& fetch_bn(const WeightContainer& weights, const Layer& layer,
                                       const WeightSlot& slot) {
  const WeightEntry* entry = weights.find(slot.name);
  if (!entry) throw MissingWeightError(layer.name, slot.name);
  const auto* p = std::get_if<BatchNormParams<float>>(entry);
  if (!p) throw LayerError(layer.name, "weight entry '" + slot.name + "' is not batch norm");
  if (p->channels() != slot.cout)
    throw LayerError(layer.name, "weight entry '" + slot.name + "' has " +
                                     std::to_string(p->channels()) + " channels");
  return *p;
}

Tensor4f run_layer(const Layer& layer, const std::vector<const Tensor4f*>& in,
                   const WeightContainer& weights) {
  const auto slots = weight_slots(layer);
  const Tensor4f& x = *in.front();
  switch (layer.kind) {
    case LayerKind::conv:
      return conv2d(x, fetch_conv(weights, layer, slots[0]), layer.stride, layer.padding);
    case LayerKind::deconv:
      return deconv2d(x, fetch_conv(weights, layer, slots[0]), layer.stride);
    case LayerKind::batchnorm:
      return batchnorm_infer(x, fetch_bn(weights, layer, slots[0]));
    case LayerKind::relu:
      return relu(x);
    case LayerKind::maxpool2:
      return resample(x, ResampleMode::maxpool2);
    case LayerKind::upsample_nearest2:
      return resample(x, ResampleMode::nearest_up2);
    case LayerKind::crop:
      return crop(x, layer.kh, layer.kw);
    case LayerKind::add:
      return add(x, *in.at(1));
    case LayerKind::nonbt:
      return nonbt_block(x, fetch_conv(weights, layer, slots[0]),
                         fetch_conv(weights, layer, slots[1]));
    case LayerKind::upconv_naive:
      return upconv_block_naive(
          x, UpConvWeights<float>{fetch_conv(weights, layer, slots[0]),
                                  fetch_bn(weights, layer, slots[1])});
    case LayerKind::upconv_fast:
      return upconv_block_fast(
          x, SplitUpConvWeights<float>{
                 fetch_conv(weights, layer, slots[0]), fetch_conv(weights, layer, slots[1]),
                 fetch_conv(weights, layer, slots[2]), fetch_conv(weights, layer, slots[3]),
                 fetch_bn(weights, layer, slots[4])});
  }
  throw LayerError(layer.name, "unsupported layer kind");
}

}  // namespace

void check_weights(const LayerGraph& graph, const WeightContainer& weights) {
  for (const auto& layer : graph.layers()) {
    for (const auto& slot : weight_slots(layer)) {
      if (slot.kind == WeightKind::conv)
        fetch_conv(weights, layer, slot);
      else
        fetch_bn(weights, layer, slot);
    }
  }
}

Tensor4f infer(const LayerGraph& graph, const WeightContainer& weights, const Tensor4f& image,
               const LayerObserver& observer) {
  const Shape4 expected = graph.input_shape();
  const Shape4 got = image.shape();
  if (got.h != expected.h || got.w != expected.w || got.c != expected.c)
    throw ShapeError("input image is " + got.str() + ", model " + graph.spec().str() +
                     " expects Nx" + std::to_string(expected.h) + "x" +
                     std::to_string(expected.w) + "x" + std::to_string(expected.c));

  const auto& layers = graph.layers();
  std::vector<int> last_use(layers.size(), -1);
  for (std::size_t i = 0; i < layers.size(); ++i)
    for (int src : layers[i].inputs)
      if (src != Layer::kImageInput) last_use[src] = static_cast<int>(i);

  std::vector<std::optional<Tensor4f>> outputs(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    std::vector<const Tensor4f*> in;
    for (int src : layer.inputs) {
      if (src == Layer::kImageInput) {
        in.push_back(&image);
      } else {
        if (!outputs[src]) throw LayerError(layer.name, "input released before use");
        in.push_back(&*outputs[src]);
      }
    }
    try {
      outputs[i] = run_layer(layer, in, weights);
    } catch (const LayerError&) {
      throw;
    } catch (const Error& e) {
      throw LayerError(layer.name, e.what());
    }
    Shape4 want = layer.output;
    want.n = got.n;
    if (outputs[i]->shape() != want)
      throw LayerError(layer.name, "produced " + outputs[i]->shape().str() + ", expected " +
                                       want.str());
    if (observer) observer(layer, *outputs[i]);
    for (int src : layer.inputs)
      if (src != Layer::kImageInput && last_use[src] == static_cast<int>(i)) outputs[src].reset();
  }
  return std::move(*outputs.back());
}

}  // namespace fcndepth
