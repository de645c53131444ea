#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfce/convgeom.hpp"
#include "mfce/model.hpp"

namespace mfce {

// Multiply-accumulates counted twice, biases and activations ignored.
struct CostEstimate {
  std::vector<std::uint64_t> per_layer_flops;
  std::uint64_t total_flops = 0;
  double flops_per_label = 0.0;
};

CostEstimate window_cost(const ModelSpec& spec, int window_length);

struct MeasuredCost {
  double median_seconds = 0.0;
  std::vector<double> samples;
};

// Median wall time of forward + backward on random windows, after one
// untimed warm-up pass.
MeasuredCost measured_cost(const Network& net, int window_length, int repetitions,
                           std::uint64_t seed = 7);

struct CostReport {
  int intrinsic_length = 0;
  int delta = 0;
  double analytic_ratio = 0.0;    // flops(l_m + delta) / flops(l_m)
  double measured_ratio = 0.0;    // 0 when not measured
  double sharing_factor = 0.0;    // (1 + delta) flops(l_m) / flops(l_m + delta)
  double input_frame_ratio = 0.0; // (l_m + delta) / l_m

  std::string to_json() const;
};

CostReport cost_report(const ModelSpec& spec, int delta);
CostReport cost_report(const Network& net, int delta, int repetitions);

}  // namespace mfce
