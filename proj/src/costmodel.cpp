#include "mfce/costmodel.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "json.hpp"
#include "mfce/error.hpp"
#include "mfce/loss.hpp"

namespace mfce {

CostEstimate window_cost(const ModelSpec& spec, int window_length) {
  const std::vector<LayerGeometry> geometry = layer_geometry(spec);
  const int outputs = output_count(spec, window_length);
  CostEstimate est;
  std::uint64_t frames = std::uint64_t(window_length);
  for (const LayerGeometry& g : geometry) {
    frames -= std::uint64_t(g.time_reduction);
    std::uint64_t flops = 0;
    const std::uint64_t c_out = std::uint64_t(g.out_channels), c_in = std::uint64_t(g.in_channels);
    switch (g.layer.kind) {
      case LayerKind::conv:
        flops = 2 * c_out * c_in * std::uint64_t(g.layer.kernel_t) *
                std::uint64_t(g.layer.kernel_f) * frames * std::uint64_t(g.out_freq);
        break;
      case LayerKind::pointwise: {
        const std::uint64_t span = g.layer.collapse_freq ? std::uint64_t(g.in_freq) : 1;
        flops = 2 * c_out * c_in * span * frames * std::uint64_t(g.out_freq);
        break;
      }
      case LayerKind::relu:
      case LayerKind::freq_pool:
        break;
    }
    est.per_layer_flops.push_back(flops);
    est.total_flops += flops;
  }
  est.flops_per_label = double(est.total_flops) / double(outputs);
  return est;
}

MeasuredCost measured_cost(const Network& net, int window_length, int repetitions,
                           std::uint64_t seed) {
  if (repetitions < 3) throw Error("measured_cost: need at least 3 repetitions");
  const ModelSpec& spec = net.spec();
  const int outputs = output_count(spec, window_length);
  Network local = net.clone();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, std::size_t(spec.num_targets - 1));
  const Shape shape{std::size_t(spec.input_channels), std::size_t(window_length),
                    std::size_t(spec.mel_bins)};

  auto run_once = [&] {
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = normal(rng);
    std::vector<std::size_t> labels(static_cast<std::size_t>(outputs));
    for (auto& l : labels) l = label(rng);
    Tensor window = Tensor::from_data(shape, std::move(values));
    const auto t0 = std::chrono::steady_clock::now();
    local.zero_grad();
    LossReport loss = mfce_loss(local.forward(window), labels);
    loss.total.backward();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  run_once();
  MeasuredCost result;
  for (int i = 0; i < repetitions; ++i) result.samples.push_back(run_once());
  std::vector<double> sorted = result.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  result.median_seconds =
      sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return result;
}

CostReport cost_report(const ModelSpec& spec, int delta) {
  if (delta < 0) throw Error("cost_report: delta must be >= 0");
  CostReport r;
  r.intrinsic_length = intrinsic_length(spec);
  r.delta = delta;
  const double base = double(window_cost(spec, r.intrinsic_length).total_flops);
  const double wide = double(window_cost(spec, r.intrinsic_length + delta).total_flops);
  r.analytic_ratio = wide / base;
  r.sharing_factor = (1.0 + delta) * base / wide;
  r.input_frame_ratio = double(r.intrinsic_length + delta) / double(r.intrinsic_length);
  return r;
}

CostReport cost_report(const Network& net, int delta, int repetitions) {
  CostReport r = cost_report(net.spec(), delta);
  const double base = measured_cost(net, r.intrinsic_length, repetitions).median_seconds;
  const double wide = measured_cost(net, r.intrinsic_length + delta, repetitions).median_seconds;
  r.measured_ratio = wide / base;
  return r;
}

std::string CostReport::to_json() const {
  nlohmann::json j = {{"l_m", intrinsic_length},
                      {"delta", delta},
                      {"analytic_ratio", analytic_ratio},
                      {"measured_ratio", measured_ratio},
                      {"sharing_factor", sharing_factor},
                      {"input_frame_ratio", input_frame_ratio}};
  return j.dump();
}

}  // namespace mfce
