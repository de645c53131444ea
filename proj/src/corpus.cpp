#include "mfce/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "binio.hpp"
#include "mfce/error.hpp"

namespace mfce {

namespace {

constexpr const char* kCorpusMagic = "MFCECORP";
constexpr std::uint32_t kCorpusVersion = 1;
constexpr std::size_t kChannels = 3;

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch_index), 0x77696e64u};
  return std::mt19937_64(seq);
}

void check_config(const CorpusConfig& c) {
  if (c.num_states < 2) throw ConfigError("corpus: num_states must be >= 2");
  if (c.mel_bins < 1) throw ConfigError("corpus: mel_bins must be >= 1");
  if (c.num_utterances < 1) throw ConfigError("corpus: num_utterances must be >= 1");
  if (c.min_length < 1 || c.max_length < c.min_length) {
    throw ConfigError("corpus: need 1 <= min_length <= max_length");
  }
  if (!(c.p_loop >= 0.0 && c.p_loop <= 1.0)) throw ConfigError("corpus: p_loop outside [0, 1]");
  if (!(c.noise_stddev >= 0.0) || !(c.mean_scale >= 0.0)) {
    throw ConfigError("corpus: mean_scale and noise_stddev must be >= 0");
  }
  if (!(c.heldout_fraction >= 0.0 && c.heldout_fraction < 1.0)) {
    throw ConfigError("corpus: heldout_fraction outside [0, 1)");
  }
}

// Base features plus first and second backward differences, [3 x T x D].
Tensor with_deltas(const std::vector<double>& base, std::size_t frames, std::size_t bins) {
  std::vector<double> out(kChannels * frames * bins, 0.0);
  auto at = [&](std::size_t c, std::size_t t, std::size_t d) -> double& {
    return out[(c * frames + t) * bins + d];
  };
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < bins; ++d) {
      at(0, t, d) = base[t * bins + d];
      if (t > 0) at(1, t, d) = at(0, t, d) - at(0, t - 1, d);
      if (t > 1) at(2, t, d) = at(1, t, d) - at(1, t - 1, d);
    }
  }
  return Tensor::from_data({kChannels, frames, bins}, std::move(out));
}

}  // namespace

std::size_t Corpus::train_frames() const {
  std::size_t n = 0;
  for (const auto& u : train) n += u.length();
  return n;
}

std::size_t Corpus::heldout_frames() const {
  std::size_t n = 0;
  for (const auto& u : heldout) n += u.length();
  return n;
}

Corpus generate_corpus(const CorpusConfig& config) {
  check_config(config);
  const std::size_t states = std::size_t(config.num_states);
  const std::size_t bins = std::size_t(config.mel_bins);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> means(states * bins);
  for (double& m : means) m = config.mean_scale * normal(rng);

  std::uniform_int_distribution<int> length_dist(config.min_length, config.max_length);
  std::uniform_int_distribution<std::size_t> state_dist(0, states - 1);
  std::bernoulli_distribution stay(config.p_loop);

  std::vector<AlignedUtterance> all;
  all.reserve(std::size_t(config.num_utterances));
  for (int r = 0; r < config.num_utterances; ++r) {
    const std::size_t frames = std::size_t(length_dist(rng));
    std::size_t state = state_dist(rng);
    std::vector<std::size_t> labels(frames);
    std::vector<double> base(frames * bins);
    for (std::size_t t = 0; t < frames; ++t) {
      if (t > 0 && !stay(rng)) state = (state + 1) % states;
      labels[t] = state;
      for (std::size_t d = 0; d < bins; ++d) {
        base[t * bins + d] = means[state * bins + d] + config.noise_stddev * normal(rng);
      }
    }
    all.push_back({{with_deltas(base, frames, bins), r}, std::move(labels)});
  }

  std::size_t heldout = 0;
  if (all.size() >= 2 && config.heldout_fraction > 0.0) {
    heldout = std::max<std::size_t>(
        1, std::size_t(std::llround(config.heldout_fraction * double(all.size()))));
    heldout = std::min(heldout, all.size() - 1);
  }
  Corpus corpus;
  corpus.num_states = config.num_states;
  corpus.mel_bins = config.mel_bins;
  corpus.channels = int(kChannels);
  const std::size_t split = all.size() - heldout;
  corpus.train.assign(std::make_move_iterator(all.begin()),
                      std::make_move_iterator(all.begin() + std::ptrdiff_t(split)));
  corpus.heldout.assign(std::make_move_iterator(all.begin() + std::ptrdiff_t(split)),
                        std::make_move_iterator(all.end()));
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  nlohmann::json table = nlohmann::json::array();
  std::string blob;
  auto emit = [&](const AlignedUtterance& u, const char* split) {
    const std::uint64_t feature_offset = blob.size();
    binio::append_f64(blob, u.features.frames.data());
    const std::uint64_t label_offset = blob.size();
    for (std::size_t label : u.labels) binio::append_i32(blob, std::int32_t(label));
    table.push_back({{"id", u.features.utterance_id},
                     {"frames", u.length()},
                     {"split", split},
                     {"feature_offset", feature_offset},
                     {"label_offset", label_offset}});
  };
  for (const auto& u : corpus.train) emit(u, "train");
  for (const auto& u : corpus.heldout) emit(u, "heldout");
  nlohmann::json header = {{"num_states", corpus.num_states},
                           {"mel_bins", corpus.mel_bins},
                           {"channels", corpus.channels},
                           {"utterances", table}};
  binio::write_container(path, kCorpusMagic, kCorpusVersion, header, blob);
}

Corpus load_corpus(const std::filesystem::path& path) {
  binio::Container file = binio::read_container(path, kCorpusMagic, kCorpusVersion);
  Corpus corpus;
  try {
    corpus.num_states = file.header.at("num_states").get<int>();
    corpus.mel_bins = file.header.at("mel_bins").get<int>();
    corpus.channels = file.header.at("channels").get<int>();
    const std::size_t channels = std::size_t(corpus.channels);
    const std::size_t bins = std::size_t(corpus.mel_bins);
    for (const auto& entry : file.header.at("utterances")) {
      const std::size_t frames = entry.at("frames").get<std::size_t>();
      auto values = binio::load_f64(file.blob, entry.at("feature_offset").get<std::uint64_t>(),
                                    channels * frames * bins);
      auto raw = binio::load_i32(file.blob, entry.at("label_offset").get<std::uint64_t>(), frames);
      std::vector<std::size_t> labels(frames);
      for (std::size_t t = 0; t < frames; ++t) {
        if (raw[t] < 0 || raw[t] >= corpus.num_states) {
          throw IoError(path.string() + ": label out of range");
        }
        labels[t] = std::size_t(raw[t]);
      }
      AlignedUtterance u{{Tensor::from_data({channels, frames, bins}, std::move(values)),
                          entry.at("id").get<int>()},
                         std::move(labels)};
      const std::string split = entry.at("split").get<std::string>();
      (split == "heldout" ? corpus.heldout : corpus.train).push_back(std::move(u));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed corpus header: " + e.what());
  }
  return corpus;
}

EpochStream epoch_windows(std::span<const AlignedUtterance> utterances, int intrinsic_length,
                          int delta, std::uint64_t seed, int epoch_index) {
  if (utterances.empty()) throw Error("epoch_windows: empty corpus");
  if (intrinsic_length < 1 || delta < 0) {
    throw Error("epoch_windows: need intrinsic_length >= 1 and delta >= 0");
  }
  const std::size_t window = std::size_t(intrinsic_length + delta);
  const std::size_t context = std::size_t(intrinsic_length - 1) / 2;
  std::mt19937_64 rng = epoch_rng(seed, epoch_index);
  std::uniform_int_distribution<std::size_t> offset_dist(0, window - 1);

  EpochStream stream;
  for (const AlignedUtterance& u : utterances) {
    const std::size_t frames = u.length();
    if (frames < window) {
      ++stream.skipped_utterances;
      stream.dropped_frames += frames;
      continue;
    }
    const std::size_t offset = offset_dist(rng);
    const std::size_t count = frames > offset ? (frames - offset) / window : 0;
    stream.dropped_frames += frames - count * window;

    const Tensor& src = u.features.frames;
    const std::size_t channels = src.size(0), bins = src.size(2);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t start = offset + k * window;
      std::vector<double> values(channels * window * bins);
      for (std::size_t c = 0; c < channels; ++c) {
        auto first = src.data().begin() + std::ptrdiff_t((c * frames + start) * bins);
        std::copy_n(first, window * bins, values.begin() + std::ptrdiff_t(c * window * bins));
      }
      auto label_first = u.labels.begin() + std::ptrdiff_t(start + context);
      stream.windows.push_back(
          {u.features.utterance_id, int(start),
           Tensor::from_data({channels, window, bins}, std::move(values)),
           std::vector<std::size_t>(label_first, label_first + delta + 1)});
    }
  }
  std::shuffle(stream.windows.begin(), stream.windows.end(), rng);
  return stream;
}

Tensor Batch::window(std::size_t i) const {
  if (i >= size) throw ShapeError("Batch::window: index out of range");
  const Shape& s = inputs.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  auto first = inputs.data().begin() + std::ptrdiff_t(i * per);
  return Tensor::from_data({s[1], s[2], s[3]}, std::vector<double>(first, first + std::ptrdiff_t(per)));
}

std::span<const std::size_t> Batch::labels_of(std::size_t i) const {
  if (i >= size) throw ShapeError("Batch::labels_of: index out of range");
  return std::span<const std::size_t>(labels).subspan(i * labels_per_window, labels_per_window);
}

std::vector<Batch> make_batches(std::span<const WindowSample> windows, std::size_t batch_size) {
  if (batch_size < 1) throw Error("make_batches: batch_size must be >= 1");
  std::vector<Batch> batches;
  for (std::size_t first = 0; first < windows.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, windows.size() - first);
    const Shape& ws = windows[first].window.shape();
    Batch b;
    b.size = count;
    b.labels_per_window = windows[first].center_labels.size();
    std::vector<double> values;
    values.reserve(count * shape_numel(ws));
    for (std::size_t i = first; i < first + count; ++i) {
      if (windows[i].window.shape() != ws ||
          windows[i].center_labels.size() != b.labels_per_window) {
        throw ShapeError("make_batches: windows of different shapes");
      }
      values.insert(values.end(), windows[i].window.data().begin(),
                    windows[i].window.data().end());
      b.labels.insert(b.labels.end(), windows[i].center_labels.begin(),
                      windows[i].center_labels.end());
    }
    b.inputs = Tensor::from_data({count, ws[0], ws[1], ws[2]}, std::move(values));
    batches.push_back(std::move(b));
  }
  return batches;
}

EpochAccounting epoch_accounting(std::size_t total_frames, int intrinsic_length, int delta) {
  if (intrinsic_length < 1 || delta < 0) {
    throw Error("epoch_accounting: need intrinsic_length >= 1 and delta >= 0");
  }
  const int window = intrinsic_length + delta;
  if (total_frames < std::size_t(window)) {
    throw Error("epoch_accounting: " + std::to_string(total_frames) +
                " frames cannot hold a window of " + std::to_string(window));
  }
  EpochAccounting a;
  a.total_frames = total_frames;
  a.intrinsic_length = intrinsic_length;
  a.delta = delta;
  a.window_length = window;
  a.samples_per_epoch = total_frames / std::size_t(window);
  a.labels_per_epoch = std::size_t(1 + delta) * a.samples_per_epoch;
  return a;
}

}  // namespace mfce
