#include "mfce/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <string>
#include <thread>

#include "mfce/error.hpp"
#include "mfce/loss.hpp"

namespace mfce {

void validate(const TrainConfig& c) {
  if (!(c.lr0 > 0.0)) throw ConfigError("train: lr0 must be > 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("train: momentum outside [0, 1)");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(c.clip_norm > 0.0)) throw ConfigError("train: clip_norm must be > 0");
  if (c.epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (c.anneal_start_epoch < 1) throw ConfigError("train: anneal_start_epoch must be >= 1");
  if (!(c.anneal_factor > 0.0 && c.anneal_factor <= 1.0)) {
    throw ConfigError("train: anneal_factor outside (0, 1]");
  }
  if (c.delta < 0) throw ConfigError("train: delta must be >= 0");
  if (c.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (c.threads < 0) throw ConfigError("train: threads must be >= 0");
}

double lr_at(const TrainConfig& config, int epoch, int intrinsic_length) {
  if (epoch < 1 || epoch > config.epochs) {
    throw Error("lr_at: epoch " + std::to_string(epoch) + " outside [1, " +
                std::to_string(config.epochs) + "]");
  }
  if (!config.schedule_speedup) {
    if (epoch < config.anneal_start_epoch) return config.lr0;
    return config.lr0 * std::pow(config.anneal_factor, epoch - config.anneal_start_epoch + 1);
  }
  if (intrinsic_length < 1) throw Error("lr_at: schedule_speedup needs the intrinsic length");
  // Position on the delta = 0 schedule measured in labels processed: each
  // epoch here carries (1 + delta) l_m / (l_m + delta) of its epochs.
  const double l_m = intrinsic_length;
  const double ratio = (1.0 + config.delta) * l_m / (l_m + config.delta);
  const double equivalent = 1.0 + (epoch - 1) * ratio;
  if (equivalent < config.anneal_start_epoch) return config.lr0;
  return config.lr0 * std::pow(config.anneal_factor, equivalent - config.anneal_start_epoch + 1);
}

Velocity make_velocity(const std::vector<NamedParameter>& parameters) {
  Velocity v;
  v.reserve(parameters.size());
  for (const auto& p : parameters) v.emplace_back(p.value.numel(), 0.0);
  return v;
}

double clip_global_norm(std::vector<std::vector<double>>& gradients, double max_norm) {
  double squared = 0.0;
  for (const auto& g : gradients) {
    for (double v : g) squared += v * v;
  }
  const double norm = std::sqrt(squared);
  if (!(norm > max_norm)) return 1.0;
  const double factor = max_norm / norm;
  for (auto& g : gradients) {
    for (double& v : g) v *= factor;
  }
  return factor;
}

StepStats sgd_step(std::vector<NamedParameter>& parameters, Velocity& velocity,
                   const TrainConfig& config, double lr) {
  if (velocity.size() != parameters.size()) throw ShapeError("sgd_step: velocity count mismatch");
  std::vector<std::vector<double>> grads(parameters.size());
  double squared = 0.0;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    Tensor& theta = parameters[i].value;
    if (velocity[i].size() != theta.numel()) throw ShapeError("sgd_step: velocity shape mismatch");
    auto g = theta.grad();
    auto w = theta.data();
    grads[i].resize(theta.numel());
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      const double raw = g.empty() ? 0.0 : g[j];
      grads[i][j] = raw + config.weight_decay * w[j];
      squared += grads[i][j] * grads[i][j];
    }
  }
  StepStats stats;
  stats.grad_norm = std::sqrt(squared);
  if (!std::isfinite(stats.grad_norm)) {
    throw DivergenceError("non-finite gradient norm " + std::to_string(stats.grad_norm));
  }
  stats.clip_scale = clip_global_norm(grads, config.clip_norm);

  const double mu = config.momentum;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    auto theta = parameters[i].value.mutable_data();
    auto& v = velocity[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      v[j] = mu * v[j] - lr * g[j];
      theta[j] = theta[j] + mu * v[j] - lr * g[j];
    }
  }
  return stats;
}

EvalResult evaluate(const Network& net, std::span<const AlignedUtterance> heldout) {
  NoGradGuard no_grad;
  EvalResult result;
  double total = 0.0;
  std::size_t errors = 0;
  for (const AlignedUtterance& u : heldout) {
    PosteriorSequence post = net.forward_utterance(u.features);
    const std::size_t classes = post.num_targets();
    const auto lp = post.log_probs.data();
    for (std::size_t t = 0; t < u.length(); ++t) {
      const double* row = &lp[t * classes];
      total -= row[u.labels[t]];
      std::size_t best = 0;
      for (std::size_t k = 1; k < classes; ++k) {
        if (row[k] > row[best]) best = k;
      }
      if (best != u.labels[t]) ++errors;
    }
    result.frames += u.length();
  }
  if (result.frames > 0) {
    result.nll = total / double(result.frames);
    result.frame_error_rate = double(errors) / double(result.frames);
  }
  return result;
}

namespace {

void flatten_grads(const Network& net, std::vector<double>& out) {
  out.clear();
  for (const auto& p : net.parameters()) {
    auto g = p.value.grad();
    out.insert(out.end(), g.begin(), g.end());
  }
}

}  // namespace

double batch_gradient(Network& net, const Batch& batch, int threads) {
  const std::size_t count = batch.size;
  double loss_sum = 0.0;
  const std::size_t workers = std::min<std::size_t>(std::size_t(std::max(threads, 1)), count);

  // Every window's gradient is formed on its own and then summed in window
  // order, so the result does not depend on how windows are spread over workers.
  std::vector<std::vector<double>> window_grads(count);
  std::vector<double> window_loss(count);
  auto run = [&](Network& local, std::size_t first, std::size_t step) {
    for (std::size_t i = first; i < count; i += step) {
      local.zero_grad();
      LossReport loss = mfce_loss(local.forward(batch.window(i)), batch.labels_of(i));
      window_loss[i] = loss.value();
      loss.total.backward();
      flatten_grads(local, window_grads[i]);
    }
  };
  if (workers <= 1) {
    run(net, 0, 1);
  } else {
    std::vector<Network> replicas;
    replicas.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) replicas.push_back(net.clone());
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] { run(replicas[w], w, workers); });
    }
  }
  net.zero_grad();
  for (std::size_t i = 0; i < count; ++i) {
    loss_sum += window_loss[i];
    std::size_t k = 0;
    for (auto& p : net.parameters()) {
      for (double& g : p.value.mutable_grad()) g += window_grads[i][k++];
    }
  }

  const double n = double(count);
  for (auto& p : net.parameters()) {
    for (double& g : p.value.mutable_grad()) g /= n;
  }
  return loss_sum;
}

std::uint64_t window_seed(const TrainConfig& config) {
  return config.seed ^ 0x9e3779b97f4a7c15ull;
}

std::string metrics_row(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%zu,%.6f,%.17g", m.epoch, m.train_nll,
                m.heldout_nll, m.heldout_frame_error_rate, m.labels_processed, m.wall_seconds,
                m.lr_used);
  return buf;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MFCE_THREADS")) {
    char* end = nullptr;
    long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value >= 1) return int(value);
  }
  return 1;
}

TrainResult train(Network& net, const Corpus& corpus, const TrainConfig& config,
                  const TrainOptions& options) {
  validate(config);
  const ModelSpec& spec = net.spec();
  if (corpus.mel_bins != spec.mel_bins || corpus.num_states != spec.num_targets ||
      corpus.channels != spec.input_channels) {
    throw ConfigError("corpus (S=" + std::to_string(corpus.num_states) +
                      ", D=" + std::to_string(corpus.mel_bins) +
                      ") does not match model (S=" + std::to_string(spec.num_targets) +
                      ", D=" + std::to_string(spec.mel_bins) + ")");
  }
  if (corpus.train.empty()) throw ConfigError("corpus has no training utterances");
  if (corpus.heldout.empty()) throw ConfigError("corpus has no heldout utterances");

  const int threads = resolve_threads(config.threads);
  const int l_m = net.intrinsic_length();
  const bool write_files = !options.out_dir.empty();
  std::ofstream csv;
  if (write_files) {
    std::filesystem::create_directories(options.out_dir);
    csv.open(options.out_dir / "metrics.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (options.out_dir / "metrics.csv").string());
    csv << kMetricsHeader << '\n' << std::flush;
    net.save(options.out_dir / "ckpt_epoch0");
  }

  TrainResult result;
  Velocity velocity = make_velocity(net.parameters());
  const auto started = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch, l_m);
    EpochStream stream = epoch_windows(corpus.train, l_m, config.delta, window_seed(config), epoch);
    if (stream.windows.empty()) {
      throw ConfigError("no training utterance is long enough for a window of " +
                        std::to_string(l_m + config.delta) + " frames");
    }
    if (options.log && (stream.skipped_utterances > 0 || stream.dropped_frames > 0)) {
      *options.log << "epoch " << epoch << ": skipped " << stream.skipped_utterances
                   << " short utterances, dropped " << stream.dropped_frames << " frames\n";
    }
    std::vector<Batch> batches = make_batches(stream.windows, std::size_t(config.batch_size));

    double loss_total = 0.0;
    try {
      for (const Batch& batch : batches) {
        const double batch_loss = batch_gradient(net, batch, threads);
        if (!std::isfinite(batch_loss)) {
          throw DivergenceError("non-finite training loss in epoch " + std::to_string(epoch));
        }
        loss_total += batch_loss;
        sgd_step(net.parameters(), velocity, config, lr);
      }
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.diagnostic = e.what();
      if (options.log) *options.log << "diverged: " << e.what() << '\n';
      break;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_nll = loss_total / double(stream.windows.size());
    const EvalResult eval = evaluate(net, corpus.heldout);
    m.heldout_nll = eval.nll;
    m.heldout_frame_error_rate = eval.frame_error_rate;
    m.labels_processed = stream.windows.size() * std::size_t(config.delta + 1);
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    m.lr_used = lr;
    result.metrics.push_back(m);
    if (options.log) *options.log << metrics_row(m) << '\n' << std::flush;
    if (write_files) {
      csv << metrics_row(m) << '\n' << std::flush;
      net.save(options.out_dir / ("ckpt_epoch" + std::to_string(epoch)));
    }
  }
  return result;
}

}  // namespace mfce
