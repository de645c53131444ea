// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfce/cli.hpp"
#include "mfce/convgeom.hpp"
#include "mfce/corpus.hpp"
#include "mfce/costmodel.hpp"
#include "mfce/error.hpp"
#include "mfce/loss.hpp"
#include "mfce/model.hpp"
#include "mfce/trainer.hpp"
#include "oracles.hpp"

using namespace mfce;
namespace fs = std::filesystem;
namespace oracle = mfce::testing;

namespace {

// Tolerances.
constexpr double kDenseTolerance = 1e-9;
constexpr double kGradientRelTolerance = 1e-5;
constexpr double kFiniteDifferenceStep = 1e-6;
constexpr int kGradientProbes = 210;
constexpr double kCostRatioLow = 1.0;
constexpr double kCostRatioHigh = 1.20;
constexpr double kMeasuredRatioLimit = 2.0;
constexpr double kScheduleTolerance = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::vector<double> flat_parameters(const Network& net) {
  std::vector<double> out;
  for (const auto& p : net.parameters()) {
    out.insert(out.end(), p.value.data().begin(), p.value.data().end());
  }
  return out;
}

CorpusConfig toy_corpus_config() {
  CorpusConfig c;
  c.seed = 3;
  c.num_states = 8;
  c.mel_bins = 8;
  c.num_utterances = 40;
  c.min_length = 60;
  c.max_length = 120;
  return c;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mfce_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// 1. Training with delta = 0 against a plain single-frame CE loop.
Outcome ce_degeneracy() {
  const Corpus corpus = generate_corpus(toy_corpus_config());
  TrainConfig c;
  c.epochs = 3;
  c.anneal_start_epoch = 2;
  c.batch_size = 8;
  c.threads = 1;
  c.delta = 0;
  const Network initial = Network::build(toy_spec(8, 8, 4), 9);

  TempDir dir;
  Network trained = initial.clone();
  TrainResult result = train(trained, corpus, c, {dir.path, nullptr});

  Network reference = initial.clone();
  Velocity velocity = make_velocity(reference.parameters());
  std::size_t mismatched_epochs = 0;
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    EpochStream s = epoch_windows(corpus.train, 7, 0, window_seed(c), epoch);
    double loss_total = 0.0;
    for (const Batch& batch : make_batches(s.windows, std::size_t(c.batch_size))) {
      reference.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < batch.size; ++i) {
        LossReport loss = ce_loss(reference.forward(batch.window(i)), batch.labels_of(i)[0]);
        batch_loss += loss.value();
        loss.total.backward();
      }
      loss_total += batch_loss;
      for (auto& p : reference.parameters()) {
        for (double& g : p.value.mutable_grad()) g /= double(batch.size);
      }
      sgd_step(reference.parameters(), velocity, c, lr_at(c, epoch));
    }
    const Network saved = Network::load(dir.path / ("ckpt_epoch" + std::to_string(epoch)));
    const bool same_params = flat_parameters(saved) == flat_parameters(reference);
    const bool same_loss = result.metrics.at(std::size_t(epoch - 1)).train_nll ==
                           loss_total / double(s.windows.size());
    if (!same_params || !same_loss) ++mismatched_epochs;
  }
  return {mismatched_epochs == 0 && result.metrics.size() == std::size_t(c.epochs),
          fmt("%d epochs compared, %zu mismatched", c.epochs, mismatched_epochs)};
}

// 2. One dense pass against l_i - l_m + 1 separate passes.
Outcome dense_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> extra(0, 20);
  double worst = 0.0;
  int pairs = 0;
  const auto specs = oracle::assorted_specs();
  for (std::size_t a = 0; a < specs.size(); ++a) {
    for (int k = 0; k < 10; ++k) {
      Network net = Network::build(specs[a], 100 * a + std::uint64_t(k));
      const std::size_t length = std::size_t(net.intrinsic_length() + extra(rng));
      auto u = oracle::random_utterance(length, specs[a], rng);
      PosteriorSequence dense = net.forward(u.features.frames);
      const auto rows = oracle::sliding_window_posteriors(net, u.features.frames);
      if (rows.size() != dense.rows()) return {false, "row count differs"};
      const std::size_t s = dense.num_targets();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < s; ++j) {
          worst = std::max(worst, std::abs(rows[r][j] - dense.log_probs.data()[r * s + j]));
        }
      }
      ++pairs;
    }
  }
  return {worst < kDenseTolerance,
          fmt("%d pairs over %zu architectures, max abs diff %.3g (limit %.0e)", pairs,
              specs.size(), worst, kDenseTolerance)};
}

// 3. Backprop against central differences.
Outcome gradient_check() {
  const ModelSpec spec = toy_spec(6, 5, 3);
  std::mt19937_64 rng(77);
  double worst = 0.0;
  int probes = 0;
  const std::vector<int> deltas{0, 1, 4};
  for (int delta : deltas) {
    Network net = Network::build(spec, 5 + std::uint64_t(delta));
    const std::size_t l_m = std::size_t(net.intrinsic_length());
    auto u = oracle::random_utterance(l_m + std::size_t(delta), spec, rng);
    const std::vector<std::size_t> labels(u.labels.begin(), u.labels.begin() + 1 + delta);
    auto loss = [&] { return mfce_loss(net.forward(u.features.frames), labels).value(); };

    net.zero_grad();
    mfce_loss(net.forward(u.features.frames), labels).total.backward();

    std::size_t total = 0;
    for (const auto& p : net.parameters()) total += p.value.numel();
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    const int count = kGradientProbes / int(deltas.size());
    for (int n = 0; n < count; ++n) {
      std::size_t flat = pick(rng);
      std::size_t which = 0;
      while (flat >= net.parameters()[which].value.numel()) {
        flat -= net.parameters()[which].value.numel();
        ++which;
      }
      Tensor& param = net.parameters()[which].value;
      const double analytic = param.grad()[flat];
      const double numeric = oracle::central_difference(param, flat, loss, kFiniteDifferenceStep);
      worst = std::max(worst, oracle::relative_error(analytic, numeric));
      ++probes;
    }
  }
  return {worst < kGradientRelTolerance && probes >= 200,
          fmt("%d probes, delta in {0,1,4}, max relative error %.3g (limit %.0e)", probes, worst,
              kGradientRelTolerance)};
}

// 4. Intrinsic length and output count.
Outcome geometry() {
  const Network toy = Network::build(toy_spec(8, 8, 4), 1);
  PaperShapeOptions small;
  small.mel_bins = 8;
  small.num_targets = 4;
  small.first_width = 2;
  small.widths = {2, 2, 2, 2};
  small.bottleneck = 4;
  const Network paper_small = Network::build(paper_shape_spec(small), 1);
  const int toy_lm = intrinsic_length(toy_spec(8, 8, 4));
  const int paper_lm = intrinsic_length(paper_shape_spec());
  const int paper_small_lm = intrinsic_length(paper_shape_spec(small));
  const int toy_brute = oracle::brute_force_intrinsic_length(toy);
  const int paper_brute = oracle::brute_force_intrinsic_length(paper_small, 128);
  const int outputs = output_count(toy_spec(8, 8, 4), 15);
  const bool ok = toy_lm == 7 && toy_brute == 7 && paper_lm == 53 && paper_small_lm == 53 &&
                  paper_brute == 53 && outputs == 9;
  return {ok, fmt("toy l_m=%d (brute force %d), paper-shape l_m=%d (brute force %d), "
                  "outputs(7, 15)=%d",
                  toy_lm, toy_brute, paper_lm, paper_brute, outputs)};
}

// 5. Window and label accounting, then the CLI's reported label counts.
Outcome accounting() {
  int grid = 0;
  int bad = 0;
  for (std::size_t total : {0ul, 1ul, 52ul, 53ul, 100ul, 999ul, 12345ul, 100000ul}) {
    for (int l_m : {1, 7, 29, 53}) {
      for (int delta : {0, 1, 2, 4, 8, 16}) {
        std::size_t windows = 0;
        while ((windows + 1) * std::size_t(l_m + delta) <= total) ++windows;
        ++grid;
        if (windows == 0) {
          // Too short for a single window: rejected.
          try {
            epoch_accounting(total, l_m, delta);
            ++bad;
          } catch (const Error&) {
          }
          continue;
        }
        const EpochAccounting a = epoch_accounting(total, l_m, delta);
        bad += a.samples_per_epoch != windows ||
               a.labels_per_epoch != std::size_t(delta + 1) * windows ||
               a.window_length != l_m + delta;
      }
    }
  }

  TempDir dir;
  nlohmann::json doc = {
      {"corpus", {{"seed", 3}, {"num_states", 8}, {"mel_bins", 8}, {"num_utterances", 40},
                  {"min_length", 60}, {"max_length", 120}}},
      {"model", {{"preset", "toy"}}},
      {"train", {{"epochs", 2}, {"batch_size", 8}, {"delta", 4}}},
      {"paths", {{"corpus", "corpus.mfce"}, {"output_dir", "run"}}}};
  const RunConfig config = parse_run_config(doc, dir.path);
  std::ostringstream out, err;
  if (cmd_gen(config, out, err) != kExitOk || cmd_train(config, out, err) != kExitOk) {
    return {false, "CLI run failed: " + err.str()};
  }
  std::vector<std::size_t> dropped;
  std::istringstream log(out.str());
  for (std::string line; std::getline(log, line);) {
    const auto at = line.find("dropped ");
    if (at != std::string::npos) dropped.push_back(std::stoul(line.substr(at + 8)));
  }
  std::ifstream csv(config.output_dir / "metrics.csv");
  std::string line;
  std::getline(csv, line);
  const std::size_t frames = load_corpus(config.corpus_path).train_frames();
  const int window = 7 + 4;
  int rows = 0;
  int csv_bad = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    const std::size_t labels = std::stoul(cells.at(4));
    const std::size_t drop = std::size_t(rows) < dropped.size() ? dropped[std::size_t(rows)] : 0;
    csv_bad += labels % 5 != 0 || (labels / 5) * std::size_t(window) + drop != frames;
    ++rows;
  }
  return {bad == 0 && csv_bad == 0 && rows == 2,
          fmt("%d grid points (%d wrong), %d CLI epochs (%d inconsistent with %zu frames)", grid,
              bad, rows, csv_bad, frames)};
}

// 6a. Analytic FLOP ratio of one wide window against one l_m window.
Outcome analytic_cost() {
  const CostReport r = cost_report(paper_shape_spec(), 8);
  const int labels = output_count(paper_shape_spec(), r.intrinsic_length + 8);
  const bool ok = r.analytic_ratio > kCostRatioLow && r.analytic_ratio <= kCostRatioHigh &&
                  labels == 9;
  return {ok, fmt("l_m=%d delta=8: flop ratio %.4f (want (%.2f, %.2f]), labels per window x%d, "
                  "frame ratio %.4f, sharing factor %.3f",
                  r.intrinsic_length, r.analytic_ratio, kCostRatioLow, kCostRatioHigh, labels,
                  r.input_frame_ratio, r.sharing_factor)};
}

ModelSpec desk_spec() {
  return load_run_config(fs::path(MFCE_SOURCE_DIR) / "configs" / "desk.json").model;
}

// 6b. Measured forward + backward time for l_m + 16 against l_m.
Outcome measured_cost_ratio() {
  const Network net = Network::build(desk_spec(), 1);
  const int l_m = net.intrinsic_length();
  const double single = measured_cost(net, l_m, 9).median_seconds;
  const double wide = measured_cost(net, l_m + 16, 9).median_seconds;
  const double ratio = wide / single;
  return {ratio < kMeasuredRatioLimit,
          fmt("desk net l_m=%d: %.2f ms vs %.2f ms, ratio %.3f (limit %.1f)", l_m, single * 1e3,
              wide * 1e3, ratio, kMeasuredRatioLimit)};
}

// 7. Heldout NLL after training with delta 0 and 8 on the desk setup.
Outcome trend() {
  const RunConfig config = load_run_config(fs::path(MFCE_SOURCE_DIR) / "configs" / "desk.json");
  const Corpus corpus = generate_corpus(config.corpus);
  const double ln_s = std::log(double(corpus.num_states));
  const auto started = std::chrono::steady_clock::now();
  auto median_final = [&](int delta, bool& below) {
    std::vector<double> finals;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      TrainConfig c = config.train;
      c.delta = delta;
      c.seed = seed;
      Network net = Network::build(config.model, seed);
      TrainResult r = train(net, corpus, c);
      const double nll = r.diverged || r.metrics.empty() ? INFINITY : r.metrics.back().heldout_nll;
      std::printf("  delta=%d seed=%llu final heldout NLL %.4f\n", delta,
                  static_cast<unsigned long long>(seed), nll);
      std::fflush(stdout);
      below = below && nll < ln_s;
      finals.push_back(nll);
    }
    std::sort(finals.begin(), finals.end());
    return finals[1];
  };
  bool below = true;
  const double m0 = median_final(0, below);
  const double m8 = median_final(8, below);
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() / 60.0;
  return {m8 <= m0 && below,
          fmt("S=%d D=%d, %d epochs x 3 seeds: median heldout NLL delta=0 %.4f, delta=8 %.4f, "
              "ln S %.4f, %.1f min",
              corpus.num_states, corpus.mel_bins, config.train.epochs, m0, m8, ln_s, minutes)};
}

// 8. Learning rate schedule and clipping direction.
Outcome schedule() {
  TrainConfig c;
  c.lr0 = 0.01;
  c.anneal_start_epoch = 10;
  c.epochs = 16;
  double worst = 0.0;
  double expected = 0.01;
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    if (epoch >= c.anneal_start_epoch) expected *= std::sqrt(0.5);
    worst = std::max(worst, std::abs(lr_at(c, epoch) - expected));
  }

  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 10.0);
  int direction_errors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> g(3);
    for (auto& buffer : g) {
      buffer.resize(std::size_t(1 + trial % 17));
      for (double& v : buffer) v = normal(rng);
    }
    const auto before = g;
    const double factor = clip_global_norm(g, 5.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g[i].size(); ++j) {
        direction_errors += g[i][j] != before[i][j] * factor || factor <= 0.0;
      }
    }
  }
  return {worst <= kScheduleTolerance && direction_errors == 0,
          fmt("max lr error %.3g over 16 epochs (limit %.0e), %d clipped components off direction",
              worst, kScheduleTolerance, direction_errors)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int number;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "ce-degeneracy", ce_degeneracy},
      {2, "dense-prediction-equivalence", dense_equivalence},
      {3, "gradient-correctness", gradient_check},
      {4, "geometry", geometry},
      {5, "accounting", accounting},
      {6, "cost-claim-analytic", analytic_cost},
      {6, "cost-claim-measured", measured_cost_ratio},
      {7, "trend-reproduction", trend},
      {8, "schedule", schedule},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.contains(c.number)) continue;
    const auto started = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::printf("%s %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.number, c.name,
                o.detail.c_str(), seconds);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
