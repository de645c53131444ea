#pragma once

#include <cstddef>
#include <vector>

#include "mfce/tensor.hpp"

namespace mfce {

// Frames of one utterance laid out as [channels x T x D]: the base features
// followed by their first and second temporal differences.
struct FeatureSequence {
  Tensor frames;
  int utterance_id = 0;

  std::size_t length() const { return frames.defined() ? frames.size(1) : 0; }
};

// Features plus one target index per frame.
struct AlignedUtterance {
  FeatureSequence features;
  std::vector<std::size_t> labels;

  std::size_t length() const { return labels.size(); }
};

}  // namespace mfce
