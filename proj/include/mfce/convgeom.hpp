#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mfce {

enum class LayerKind { conv, pointwise, relu, freq_pool };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

// One layer of a fully convolutional stack. Time stride is always 1 and time
// padding always 0, so neither is representable here.
struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int kernel_t = 1;
  int kernel_f = 1;  // pool width for freq_pool
  int dilation_t = 1;
  int out_channels = 0;
  int stride_f = 1;
  int pad_f = 0;
  // pointwise only: the kernel spans the full frequency extent (flattening FC).
  bool collapse_freq = false;

  static LayerSpec conv(int out_channels, int kernel_t, int kernel_f, int dilation_t = 1,
                        int pad_f = 0, int stride_f = 1);
  static LayerSpec pointwise(int out_channels, bool collapse_freq = false);
  static LayerSpec relu();
  static LayerSpec freq_pool(int size);

  bool has_parameters() const { return kind == LayerKind::conv || kind == LayerKind::pointwise; }
  int time_reduction() const;

  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  int input_channels = 3;
  int mel_bins = 64;
  int num_targets = 48;
  std::vector<LayerSpec> layers;

  bool operator==(const ModelSpec&) const = default;
};

// Shapes flowing through one layer, plus the receptive field accumulated so far.
struct LayerGeometry {
  LayerSpec layer;
  int in_channels = 0;
  int out_channels = 0;
  int in_freq = 0;
  int out_freq = 0;
  int time_reduction = 0;
  int receptive_field = 1;
};

// Throws SpecError describing the first inconsistency found.
void validate(const ModelSpec& spec);

std::vector<LayerGeometry> layer_geometry(const ModelSpec& spec);

// Number of input frames consumed per single output frame.
int intrinsic_length(const ModelSpec& spec);

// Output frames produced for an input window of `window_length` frames.
int output_count(const ModelSpec& spec, int window_length);

struct Padding {
  int left = 0;
  int right = 0;
  bool operator==(const Padding&) const = default;
};

// Zero frames to add around an utterance so that it yields one prediction
// per input frame. The odd frame, if any, goes on the right.
Padding utterance_padding(const ModelSpec& spec, int utterance_length);

// Three 3-frame convolutions, l_m = 7.
ModelSpec toy_spec(int mel_bins = 8, int num_targets = 8, int width = 4);

struct PaperShapeOptions {
  int mel_bins = 64;
  int num_targets = 48;
  int first_width = 64;
  std::array<int, 4> widths{64, 128, 256, 512};
  int bottleneck = 512;
  bool time_dilation = true;
  // Frequency max-pool width after each group of three; 0 disables pooling.
  int freq_pool = 0;
};

// Initial 5x5 convolution, twelve 3x3 convolutions in four groups of three
// with time dilations 1,1,1,1,1,1,2,2,2,4,4,4, then a flattening bottleneck
// and the output layer. l_m = 53 with dilation, 29 without.
ModelSpec paper_shape_spec(const PaperShapeOptions& options = {});

}  // namespace mfce
