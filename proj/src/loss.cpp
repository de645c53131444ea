#include "mfce/loss.hpp"

#include <string>

#include "mfce/error.hpp"

namespace mfce {

LossReport ce_loss(const PosteriorSequence& posteriors, std::size_t label) {
  if (posteriors.rows() != 1) {
    throw ShapeError("ce_loss: expected one posterior row, got " +
                     std::to_string(posteriors.rows()));
  }
  Tensor total = nll(select_row(posteriors.log_probs, 0), label);
  return {total, {total.item()}, 1};
}

LossReport mfce_loss(const PosteriorSequence& posteriors, std::span<const std::size_t> labels) {
  if (labels.size() != posteriors.rows()) {
    throw ShapeError("mfce_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(posteriors.rows()) + " posterior rows");
  }
  Tensor frames = nll_rows(posteriors.log_probs, labels);
  const double weight = 1.0 / static_cast<double>(labels.size());
  Tensor total = scale(sum(frames), weight);
  return {total, {frames.data().begin(), frames.data().end()}, labels.size()};
}

}  // namespace mfce
