#include "mfce/model.hpp"

#include <cmath>
#include <random>

#include "binio.hpp"
#include "mfce/error.hpp"
#include "mfce/json_io.hpp"

namespace mfce {

namespace {

constexpr const char* kCheckpointMagic = "MFCECKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(values), true);
}

}  // namespace

Network Network::build(const ModelSpec& spec, std::uint64_t seed) {
  const std::vector<LayerGeometry> geometry = layer_geometry(spec);
  Network net;
  net.spec_ = spec;
  net.intrinsic_length_ = mfce::intrinsic_length(spec);
  net.layer_params_.assign(spec.layers.size(), -1);

  std::size_t last_parametric = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].has_parameters()) last_parametric = i;
  }

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const LayerGeometry& g = geometry[i];
    if (!layer.has_parameters()) continue;
    const std::size_t c_out = std::size_t(g.out_channels);
    const std::size_t c_in = std::size_t(g.in_channels);
    Shape shape;
    if (layer.kind == LayerKind::conv) {
      shape = {c_out, c_in, std::size_t(layer.kernel_t), std::size_t(layer.kernel_f)};
    } else {
      shape = {c_out, layer.collapse_freq ? c_in * std::size_t(g.in_freq) : c_in};
    }
    const double fan_in = double(shape_numel(shape) / c_out);
    // He-uniform for layers feeding a ReLU; the output layer stays small so
    // that initial posteriors are close to uniform.
    const double bound =
        i == last_parametric ? 0.1 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
    const std::string prefix = "layer" + std::to_string(i);
    net.layer_params_[i] = static_cast<int>(net.parameters_.size());
    net.parameters_.push_back({prefix + ".weight", uniform_tensor(shape, bound, rng)});
    net.parameters_.push_back({prefix + ".bias", Tensor::zeros({c_out}, true)});
  }
  return net;
}

PosteriorSequence Network::forward(const Tensor& window) const {
  if (!window.defined() || window.dim() != 3) throw ShapeError("forward: window must be 3-d");
  if (window.size(0) != std::size_t(spec_.input_channels) ||
      window.size(2) != std::size_t(spec_.mel_bins)) {
    throw ShapeError("forward: window " + shape_to_string(window.shape()) + " does not match " +
                     std::to_string(spec_.input_channels) + " channels x " +
                     std::to_string(spec_.mel_bins) + " mel bins");
  }
  if (window.size(1) < std::size_t(intrinsic_length_)) {
    throw GeometryError(receptive_field_message(long(window.size(1)), intrinsic_length_));
  }

  Tensor x = window;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    switch (layer.kind) {
      case LayerKind::conv: {
        const int p = layer_params_[i];
        x = conv2d(x, parameters_[p].value, layer.dilation_t, layer.stride_f, layer.pad_f);
        x = add_bias(x, parameters_[p + 1].value);
        break;
      }
      case LayerKind::pointwise: {
        const int p = layer_params_[i];
        x = pointwise(x, parameters_[p].value, layer.collapse_freq);
        x = add_bias(x, parameters_[p + 1].value);
        break;
      }
      case LayerKind::relu:
        x = relu(x);
        break;
      case LayerKind::freq_pool:
        x = max_pool_freq(x, layer.kernel_f);
        break;
    }
  }
  // [S x T x 1] -> [T x S]
  const std::size_t targets = x.size(0), frames = x.size(1);
  Tensor logits = transpose(reshape(x, {targets, frames}));
  return {log_softmax(logits, 1), (intrinsic_length_ - 1) / 2};
}

PosteriorSequence Network::forward_utterance(const FeatureSequence& utterance) const {
  const std::size_t length = utterance.length();
  if (length == 0) throw GeometryError("forward_utterance: empty utterance");
  const Tensor& frames = utterance.frames;
  if (frames.dim() != 3) throw ShapeError("forward_utterance: frames must be 3-d");
  const Padding pad = utterance_padding(spec_, int(length));
  const std::size_t channels = frames.size(0), bins = frames.size(2);
  const std::size_t padded_length = length + std::size_t(pad.left + pad.right);

  std::vector<double> padded(channels * padded_length * bins, 0.0);
  const auto src = frames.data();
  for (std::size_t c = 0; c < channels; ++c) {
    std::copy_n(src.begin() + std::ptrdiff_t(c * length * bins), length * bins,
                padded.begin() + std::ptrdiff_t((c * padded_length + pad.left) * bins));
  }
  PosteriorSequence out =
      forward(Tensor::from_data({channels, padded_length, bins}, std::move(padded)));
  out.start_frame = 0;
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters_) n += p.value.numel();
  return n;
}

void Network::zero_grad() {
  for (auto& p : parameters_) p.value.zero_grad();
}

Network Network::clone() const {
  Network copy;
  copy.spec_ = spec_;
  copy.intrinsic_length_ = intrinsic_length_;
  copy.layer_params_ = layer_params_;
  for (const auto& p : parameters_) {
    copy.parameters_.push_back(
        {p.name, Tensor::from_data(p.value.shape(),
                                   {p.value.data().begin(), p.value.data().end()},
                                   p.value.requires_grad())});
  }
  return copy;
}

void Network::assign_parameters(const Network& other) {
  if (other.parameters_.size() != parameters_.size()) {
    throw ShapeError("assign_parameters: parameter lists differ");
  }
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    auto src = other.parameters_[i].value.data();
    auto dst = parameters_[i].value.mutable_data();
    if (src.size() != dst.size()) throw ShapeError("assign_parameters: size mismatch");
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

void Network::save(const std::filesystem::path& path) const {
  nlohmann::json manifest = nlohmann::json::array();
  std::string blob;
  for (const auto& p : parameters_) {
    manifest.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", blob.size()}});
    binio::append_f64(blob, p.value.data());
  }
  nlohmann::json header = {
      {"spec", spec_}, {"parameters", manifest}, {"blob_bytes", blob.size()}};
  binio::write_container(path, kCheckpointMagic, kCheckpointVersion, header, blob);
}

Network Network::load(const std::filesystem::path& path) {
  binio::Container file = binio::read_container(path, kCheckpointMagic, kCheckpointVersion);
  Network net;
  try {
    net = build(file.header.at("spec").get<ModelSpec>(), 0);
    const auto& manifest = file.header.at("parameters");
    if (manifest.size() != net.parameters_.size()) {
      throw IoError(path.string() + ": parameter count does not match spec");
    }
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      NamedParameter& p = net.parameters_[i];
      if (manifest[i].at("name").get<std::string>() != p.name ||
          manifest[i].at("shape").get<Shape>() != p.value.shape()) {
        throw IoError(path.string() + ": manifest entry " + std::to_string(i) +
                      " does not match spec");
      }
      auto values =
          binio::load_f64(file.blob, manifest[i].at("offset").get<std::uint64_t>(), p.value.numel());
      std::copy(values.begin(), values.end(), p.value.mutable_data().begin());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  return net;
}

}  // namespace mfce
