#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mfce/convgeom.hpp"
#include "mfce/features.hpp"
#include "mfce/tensor.hpp"

namespace mfce {

struct NamedParameter {
  std::string name;
  Tensor value;
};

// Log-posteriors for consecutive frames, one row per frame.
struct PosteriorSequence {
  Tensor log_probs;  // [rows x S]
  // Frame index of row 0: within the window for forward(), within the
  // utterance for forward_utterance().
  int start_frame = 0;

  std::size_t rows() const { return log_probs.size(0); }
  std::size_t num_targets() const { return log_probs.size(1); }
};

class Network {
 public:
  // Fan-in scaled uniform weights drawn from `seed`, zero biases.
  static Network build(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  int intrinsic_length() const { return intrinsic_length_; }

  // Dense prediction over a [channels x l_i x D] window: l_i - l_m + 1 rows.
  PosteriorSequence forward(const Tensor& window) const;

  // Pads with zero frames so that every input frame gets a prediction.
  PosteriorSequence forward_utterance(const FeatureSequence& utterance) const;

  std::vector<NamedParameter>& parameters() { return parameters_; }
  const std::vector<NamedParameter>& parameters() const { return parameters_; }
  std::size_t parameter_count() const;
  void zero_grad();

  // Deep copy with independent parameter storage.
  Network clone() const;
  // Copies parameter values (not gradients) from a network of the same spec.
  void assign_parameters(const Network& other);

  void save(const std::filesystem::path& path) const;
  static Network load(const std::filesystem::path& path);

 private:
  Network() = default;

  ModelSpec spec_;
  int intrinsic_length_ = 1;
  std::vector<NamedParameter> parameters_;
  // For each layer, index of its weight in parameters_ (bias follows), or -1.
  std::vector<int> layer_params_;
};

}  // namespace mfce
