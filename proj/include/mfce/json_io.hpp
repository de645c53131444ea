#pragma once

// JSON mappings for specs and configs. Missing keys keep their defaults;
// unknown keys are rejected so that typos in config files surface early.

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "mfce/convgeom.hpp"
#include "mfce/corpus.hpp"
#include "mfce/error.hpp"
#include "mfce/trainer.hpp"

namespace mfce {

namespace json_detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace json_detail

inline void to_json(nlohmann::json& j, const LayerSpec& l) {
  j = {{"kind", to_string(l.kind)},     {"kernel_t", l.kernel_t},
       {"kernel_f", l.kernel_f},        {"dilation_t", l.dilation_t},
       {"out_channels", l.out_channels}, {"stride_f", l.stride_f},
       {"pad_f", l.pad_f},              {"collapse_freq", l.collapse_freq}};
}

inline void from_json(const nlohmann::json& j, LayerSpec& l) {
  using namespace json_detail;
  reject_unknown(j,
                 {"kind", "kernel_t", "kernel_f", "dilation_t", "out_channels", "stride_f",
                  "pad_f", "collapse_freq"},
                 "layer");
  l = LayerSpec{};
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  read(j, "kernel_t", l.kernel_t);
  read(j, "kernel_f", l.kernel_f);
  read(j, "dilation_t", l.dilation_t);
  read(j, "out_channels", l.out_channels);
  read(j, "stride_f", l.stride_f);
  read(j, "pad_f", l.pad_f);
  read(j, "collapse_freq", l.collapse_freq);
}

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"input_channels", s.input_channels},
       {"mel_bins", s.mel_bins},
       {"num_targets", s.num_targets},
       {"layers", s.layers}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  using namespace json_detail;
  reject_unknown(j, {"input_channels", "mel_bins", "num_targets", "layers"}, "model spec");
  s = ModelSpec{};
  read(j, "input_channels", s.input_channels);
  read(j, "mel_bins", s.mel_bins);
  read(j, "num_targets", s.num_targets);
  s.layers = j.at("layers").get<std::vector<LayerSpec>>();
}

inline void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"seed", c.seed},
       {"num_states", c.num_states},
       {"mel_bins", c.mel_bins},
       {"num_utterances", c.num_utterances},
       {"min_length", c.min_length},
       {"max_length", c.max_length},
       {"p_loop", c.p_loop},
       {"mean_scale", c.mean_scale},
       {"noise_stddev", c.noise_stddev},
       {"heldout_fraction", c.heldout_fraction}};
}

inline void from_json(const nlohmann::json& j, CorpusConfig& c) {
  using namespace json_detail;
  reject_unknown(j,
                 {"seed", "num_states", "mel_bins", "num_utterances", "min_length",
                  "max_length", "p_loop", "mean_scale", "noise_stddev", "heldout_fraction"},
                 "corpus");
  c = CorpusConfig{};
  read(j, "seed", c.seed);
  read(j, "num_states", c.num_states);
  read(j, "mel_bins", c.mel_bins);
  read(j, "num_utterances", c.num_utterances);
  read(j, "min_length", c.min_length);
  read(j, "max_length", c.max_length);
  read(j, "p_loop", c.p_loop);
  read(j, "mean_scale", c.mean_scale);
  read(j, "noise_stddev", c.noise_stddev);
  read(j, "heldout_fraction", c.heldout_fraction);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr0", c.lr0},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"clip_norm", c.clip_norm},
       {"epochs", c.epochs},
       {"anneal_start_epoch", c.anneal_start_epoch},
       {"anneal_factor", c.anneal_factor},
       {"delta", c.delta},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"schedule_speedup", c.schedule_speedup},
       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  using namespace json_detail;
  reject_unknown(j,
                 {"lr0", "momentum", "weight_decay", "clip_norm", "epochs",
                  "anneal_start_epoch", "anneal_factor", "delta", "batch_size", "seed",
                  "schedule_speedup", "threads"},
                 "train");
  c = TrainConfig{};
  read(j, "lr0", c.lr0);
  read(j, "momentum", c.momentum);
  read(j, "weight_decay", c.weight_decay);
  read(j, "clip_norm", c.clip_norm);
  read(j, "epochs", c.epochs);
  read(j, "anneal_start_epoch", c.anneal_start_epoch);
  read(j, "anneal_factor", c.anneal_factor);
  read(j, "delta", c.delta);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  read(j, "schedule_speedup", c.schedule_speedup);
  read(j, "threads", c.threads);
}

}  // namespace mfce
