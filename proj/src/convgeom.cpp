#include "mfce/convgeom.hpp"

#include "mfce/error.hpp"

namespace mfce {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::pointwise:
      return "pointwise";
    case LayerKind::relu:
      return "relu";
    case LayerKind::freq_pool:
      return "freq_pool";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  if (name == "conv") return LayerKind::conv;
  if (name == "pointwise") return LayerKind::pointwise;
  if (name == "relu") return LayerKind::relu;
  if (name == "freq_pool") return LayerKind::freq_pool;
  throw SpecError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv(int out_channels, int kernel_t, int kernel_f, int dilation_t,
                          int pad_f, int stride_f) {
  LayerSpec layer;
  layer.kind = LayerKind::conv;
  layer.out_channels = out_channels;
  layer.kernel_t = kernel_t;
  layer.kernel_f = kernel_f;
  layer.dilation_t = dilation_t;
  layer.pad_f = pad_f;
  layer.stride_f = stride_f;
  return layer;
}

LayerSpec LayerSpec::pointwise(int out_channels, bool collapse_freq) {
  LayerSpec layer;
  layer.kind = LayerKind::pointwise;
  layer.out_channels = out_channels;
  layer.collapse_freq = collapse_freq;
  return layer;
}

LayerSpec LayerSpec::relu() {
  LayerSpec layer;
  layer.kind = LayerKind::relu;
  return layer;
}

LayerSpec LayerSpec::freq_pool(int size) {
  LayerSpec layer;
  layer.kind = LayerKind::freq_pool;
  layer.kernel_f = size;
  return layer;
}

int LayerSpec::time_reduction() const {
  return kind == LayerKind::conv ? (kernel_t - 1) * dilation_t : 0;
}

std::vector<LayerGeometry> layer_geometry(const ModelSpec& spec) {
  if (spec.input_channels < 1) throw SpecError("input_channels must be >= 1");
  if (spec.mel_bins < 1) throw SpecError("mel_bins must be >= 1");
  if (spec.num_targets < 1) throw SpecError("num_targets must be >= 1");
  if (spec.layers.empty()) throw SpecError("model has no layers");

  std::vector<LayerGeometry> geometry;
  geometry.reserve(spec.layers.size());
  int channels = spec.input_channels;
  int freq = spec.mel_bins;
  int receptive_field = 1;
  bool any_conv = false;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(layer.kind) + ")";
    LayerGeometry g;
    g.layer = layer;
    g.in_channels = channels;
    g.in_freq = freq;
    switch (layer.kind) {
      case LayerKind::conv: {
        any_conv = true;
        if (layer.kernel_t < 1 || layer.kernel_f < 1) throw SpecError(where + ": kernel < 1");
        if (layer.dilation_t < 1) throw SpecError(where + ": dilation_t < 1");
        if (layer.stride_f < 1) throw SpecError(where + ": stride_f < 1");
        if (layer.pad_f < 0) throw SpecError(where + ": pad_f < 0");
        if (layer.out_channels < 1) throw SpecError(where + ": out_channels < 1");
        const int padded = freq + 2 * layer.pad_f;
        if (padded < layer.kernel_f) {
          throw SpecError(where + ": kernel width " + std::to_string(layer.kernel_f) +
                          " exceeds frequency extent " + std::to_string(freq));
        }
        g.out_channels = layer.out_channels;
        g.out_freq = (padded - layer.kernel_f) / layer.stride_f + 1;
        break;
      }
      case LayerKind::pointwise:
        if (layer.out_channels < 1) throw SpecError(where + ": out_channels < 1");
        g.out_channels = layer.out_channels;
        g.out_freq = layer.collapse_freq ? 1 : freq;
        break;
      case LayerKind::relu:
        g.out_channels = channels;
        g.out_freq = freq;
        break;
      case LayerKind::freq_pool:
        if (layer.kernel_f < 1) throw SpecError(where + ": pool width < 1");
        if (freq < layer.kernel_f) throw SpecError(where + ": pool wider than frequency extent");
        g.out_channels = channels;
        g.out_freq = freq / layer.kernel_f;
        break;
    }
    g.time_reduction = layer.time_reduction();
    receptive_field += g.time_reduction;
    g.receptive_field = receptive_field;
    channels = g.out_channels;
    freq = g.out_freq;
    geometry.push_back(g);
  }
  if (!any_conv) throw SpecError("model needs at least one conv layer");
  const LayerSpec& last = spec.layers.back();
  if (!last.has_parameters()) throw SpecError("last layer must be conv or pointwise");
  if (channels != spec.num_targets) {
    throw SpecError("last layer has " + std::to_string(channels) + " outputs, expected " +
                    std::to_string(spec.num_targets) + " targets");
  }
  if (freq != 1) {
    throw SpecError("network output keeps frequency extent " + std::to_string(freq) +
                    "; collapse it to 1 before the output layer");
  }
  return geometry;
}

void validate(const ModelSpec& spec) { (void)layer_geometry(spec); }

int intrinsic_length(const ModelSpec& spec) {
  validate(spec);
  int length = 1;
  for (const LayerSpec& layer : spec.layers) length += layer.time_reduction();
  return length;
}

int output_count(const ModelSpec& spec, int window_length) {
  const int l_m = intrinsic_length(spec);
  if (window_length < l_m) throw GeometryError(receptive_field_message(window_length, l_m));
  return window_length - l_m + 1;
}

Padding utterance_padding(const ModelSpec& spec, int utterance_length) {
  if (utterance_length < 1) throw GeometryError("utterance must have at least one frame");
  const int context = intrinsic_length(spec) - 1;
  return {context / 2, context - context / 2};
}

ModelSpec toy_spec(int mel_bins, int num_targets, int width) {
  ModelSpec spec;
  spec.mel_bins = mel_bins;
  spec.num_targets = num_targets;
  for (int i = 0; i < 3; ++i) {
    spec.layers.push_back(LayerSpec::conv(width, 3, 3, 1, 1));
    spec.layers.push_back(LayerSpec::relu());
  }
  spec.layers.push_back(LayerSpec::pointwise(num_targets, true));
  return spec;
}

ModelSpec paper_shape_spec(const PaperShapeOptions& options) {
  static constexpr std::array<int, 12> kDilation{1, 1, 1, 1, 1, 1, 2, 2, 2, 4, 4, 4};
  ModelSpec spec;
  spec.mel_bins = options.mel_bins;
  spec.num_targets = options.num_targets;
  spec.layers.push_back(LayerSpec::conv(options.first_width, 5, 5, 1, 2));
  spec.layers.push_back(LayerSpec::relu());
  for (int i = 0; i < 12; ++i) {
    const int dilation = options.time_dilation ? kDilation[i] : 1;
    spec.layers.push_back(LayerSpec::conv(options.widths[i / 3], 3, 3, dilation, 1));
    spec.layers.push_back(LayerSpec::relu());
    if (options.freq_pool > 1 && i % 3 == 2) {
      spec.layers.push_back(LayerSpec::freq_pool(options.freq_pool));
    }
  }
  spec.layers.push_back(LayerSpec::pointwise(options.bottleneck, true));
  spec.layers.push_back(LayerSpec::relu());
  spec.layers.push_back(LayerSpec::pointwise(options.num_targets));
  return spec;
}

}  // namespace mfce
