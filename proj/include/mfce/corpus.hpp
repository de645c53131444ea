#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mfce/features.hpp"
#include "mfce/tensor.hpp"

namespace mfce {

// Synthetic stand-in for a force-aligned speech corpus. Each utterance walks a
// cyclic left-to-right chain over the states, staying put with probability
// p_loop. Every state emits Gaussian frames around its own mean vector.
struct CorpusConfig {
  std::uint64_t seed = 1;
  int num_states = 48;
  int mel_bins = 16;
  int num_utterances = 100;
  int min_length = 100;
  int max_length = 300;
  double p_loop = 0.8;
  double mean_scale = 1.0;
  double noise_stddev = 1.0;
  double heldout_fraction = 0.1;
};

struct Corpus {
  int num_states = 0;
  int mel_bins = 0;
  int channels = 3;
  std::vector<AlignedUtterance> train;
  std::vector<AlignedUtterance> heldout;

  std::size_t train_frames() const;
  std::size_t heldout_frames() const;
};

Corpus generate_corpus(const CorpusConfig& config);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

// One training sample: a window of l_i = l_m + delta frames starting at
// `start`, and the labels of the 1 + delta frames it predicts.
struct WindowSample {
  int utterance_id = 0;
  int start = 0;
  Tensor window;  // [channels x l_i x D]
  std::vector<std::size_t> center_labels;
};

struct EpochStream {
  std::vector<WindowSample> windows;
  int skipped_utterances = 0;
  std::size_t dropped_frames = 0;  // remainders plus skipped utterances
};

// Cuts every utterance into non-overlapping windows from a random per-epoch
// offset, then shuffles all windows together. Utterances shorter than a window
// are skipped. Deterministic in (seed, epoch_index).
EpochStream epoch_windows(std::span<const AlignedUtterance> utterances, int intrinsic_length,
                          int delta, std::uint64_t seed, int epoch_index);

struct Batch {
  Tensor inputs;                    // [B x channels x l_i x D]
  std::vector<std::size_t> labels;  // B x (1 + delta), row-major
  std::size_t size = 0;
  std::size_t labels_per_window = 0;

  Tensor window(std::size_t i) const;
  std::span<const std::size_t> labels_of(std::size_t i) const;
};

// Consecutive groups of batch_size windows; the last one may be smaller.
std::vector<Batch> make_batches(std::span<const WindowSample> windows, std::size_t batch_size);

struct EpochAccounting {
  std::size_t total_frames = 0;
  int intrinsic_length = 0;
  int delta = 0;
  int window_length = 0;
  std::size_t samples_per_epoch = 0;
  std::size_t labels_per_epoch = 0;
};

// N = floor(L / l_i) windows and (1 + delta) N labels per pass over L frames.
EpochAccounting epoch_accounting(std::size_t total_frames, int intrinsic_length, int delta);

}  // namespace mfce
