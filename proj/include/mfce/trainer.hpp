#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mfce/corpus.hpp"
#include "mfce/model.hpp"

namespace mfce {

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.99;
  double weight_decay = 1e-6;
  double clip_norm = 10.0;
  int epochs = 16;
  int anneal_start_epoch = 10;
  double anneal_factor = 0.70710678118654752440;  // sqrt(0.5)
  int delta = 0;
  int batch_size = 16;
  std::uint64_t seed = 1;
  // Anneal after as many labels as a delta = 0 run processes before its
  // anneal_start_epoch.
  bool schedule_speedup = false;
  // Workers for per-window gradients; 0 reads MFCE_THREADS (default 1).
  // Results do not depend on this value.
  int threads = 0;
};

void validate(const TrainConfig& config);

struct EpochMetrics {
  int epoch = 0;
  double train_nll = 0.0;
  double heldout_nll = 0.0;
  double heldout_frame_error_rate = 0.0;
  std::size_t labels_processed = 0;
  double wall_seconds = 0.0;  // cumulative since training started
  double lr_used = 0.0;
};

// Learning rate for a 1-based epoch: lr0 until anneal_start_epoch, then
// multiplied by anneal_factor once per epoch starting at that epoch. The
// speed-up variant needs the model's intrinsic length.
double lr_at(const TrainConfig& config, int epoch, int intrinsic_length = 0);

// Momentum buffers, one per parameter.
using Velocity = std::vector<std::vector<double>>;
Velocity make_velocity(const std::vector<NamedParameter>& parameters);

// Scales every buffer by max_norm / ||all||_2 when the joint norm exceeds
// max_norm. Returns the factor applied (1 when untouched).
double clip_global_norm(std::vector<std::vector<double>>& gradients, double max_norm);

struct StepStats {
  double grad_norm = 0.0;  // after weight decay, before clipping
  double clip_scale = 1.0;
};

// One Nesterov step from the gradients currently stored on the parameters:
//   g <- grad + weight_decay * theta, clipped to clip_norm jointly
//   v <- momentum * v - lr * g
//   theta <- theta + momentum * v - lr * g
// Throws DivergenceError on non-finite gradients.
StepStats sgd_step(std::vector<NamedParameter>& parameters, Velocity& velocity,
                   const TrainConfig& config, double lr);

struct EvalResult {
  double nll = 0.0;
  double frame_error_rate = 0.0;
  std::size_t frames = 0;
};

// Full-utterance dense prediction over every heldout frame.
EvalResult evaluate(const Network& net, std::span<const AlignedUtterance> heldout);

// Per-window gradients averaged over a batch, accumulated in window order into
// the network's gradient buffers (which are overwritten). Returns the summed
// window losses. Bitwise independent of the worker count.
double batch_gradient(Network& net, const Batch& batch, int threads);

struct TrainOptions {
  // When set, metrics.csv and ckpt_epoch{N} files are written here.
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  bool diverged = false;
  std::string diagnostic;
};

// Seed used to shuffle windows, derived from the training seed.
std::uint64_t window_seed(const TrainConfig& config);

TrainResult train(Network& net, const Corpus& corpus, const TrainConfig& config,
                  const TrainOptions& options = {});

inline constexpr const char* kMetricsHeader =
    "epoch,train_nll,heldout_nll,heldout_fer,labels_processed,wall_seconds,lr";

std::string metrics_row(const EpochMetrics& m);

int resolve_threads(int requested);

}  // namespace mfce
