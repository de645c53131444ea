#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfce/model.hpp"
#include "mfce/tensor.hpp"

namespace mfce {

struct LossReport {
  Tensor total;  // differentiable scalar
  std::vector<double> per_frame;
  std::size_t label_count = 0;

  double value() const { return total.item(); }
};

// Single-frame cross-entropy: -log p(label) of the only posterior row.
LossReport ce_loss(const PosteriorSequence& posteriors, std::size_t label);

// Mean of the per-frame cross-entropies over all 1 + delta rows.
LossReport mfce_loss(const PosteriorSequence& posteriors, std::span<const std::size_t> labels);

}  // namespace mfce
