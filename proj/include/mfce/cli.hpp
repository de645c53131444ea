#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfce/convgeom.hpp"
#include "mfce/corpus.hpp"
#include "mfce/trainer.hpp"

namespace mfce {

// A single JSON document:
//   {"corpus": {...CorpusConfig...},
//    "model":  {"preset": "paper" | "toy", ...options} or {"layers": [...]},
//    "train":  {...TrainConfig...},
//    "paths":  {"corpus": "corpus.mfce", "output_dir": "runs/x"}}
// Relative paths are resolved against the directory holding the config file.
struct RunConfig {
  CorpusConfig corpus;
  ModelSpec model;
  TrainConfig train;
  std::filesystem::path corpus_path;
  std::filesystem::path output_dir;
};

RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

inline const std::vector<int> kDefaultDeltas{0, 2, 4, 8, 16};

inline constexpr const char* kSweepHeader =
    "delta,epoch,heldout_nll,heldout_fer,wall_seconds,labels_processed";

int cmd_gen(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_inspect(const RunConfig& config, std::span<const int> deltas, bool measure,
                std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& config, std::span<const int> deltas, std::ostream& out,
              std::ostream& err);

// Full command line: gen|train|inspect|sweep --config <path> [--deltas ...] [--out <dir>]
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

std::vector<int> parse_deltas(const std::string& text);

}  // namespace mfce
