#include "mfce/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mfce/costmodel.hpp"
#include "mfce/error.hpp"
#include "mfce/json_io.hpp"
#include "mfce/model.hpp"

namespace mfce {

namespace fs = std::filesystem;

namespace {

ModelSpec model_from_section(const nlohmann::json& j, const CorpusConfig& corpus) {
  using namespace json_detail;
  if (!j.is_object()) throw ConfigError("model: expected a JSON object");
  if (j.contains("layers")) {
    reject_unknown(j, {"layers", "input_channels"}, "model");
    ModelSpec spec;
    spec.mel_bins = corpus.mel_bins;
    spec.num_targets = corpus.num_states;
    read(j, "input_channels", spec.input_channels);
    spec.layers = j.at("layers").get<std::vector<LayerSpec>>();
    return spec;
  }
  const std::string preset = j.value("preset", std::string("paper"));
  if (preset == "toy") {
    reject_unknown(j, {"preset", "width"}, "model");
    return toy_spec(corpus.mel_bins, corpus.num_states, j.value("width", 4));
  }
  if (preset != "paper") throw ConfigError("model: unknown preset '" + preset + "'");
  reject_unknown(j, {"preset", "first_width", "widths", "bottleneck", "time_dilation", "freq_pool"},
                 "model");
  PaperShapeOptions options;
  options.mel_bins = corpus.mel_bins;
  options.num_targets = corpus.num_states;
  read(j, "first_width", options.first_width);
  read(j, "widths", options.widths);
  read(j, "bottleneck", options.bottleneck);
  read(j, "time_dilation", options.time_dilation);
  read(j, "freq_pool", options.freq_pool);
  return paper_shape_spec(options);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

Corpus load_training_corpus(const RunConfig& config) {
  if (config.corpus_path.empty()) throw ConfigError("paths.corpus is not set");
  if (!fs::exists(config.corpus_path)) {
    throw ConfigError("corpus file " + config.corpus_path.string() +
                      " does not exist (run 'gen' first)");
  }
  return load_corpus(config.corpus_path);
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SpecError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc, const fs::path& base_dir) {
  using namespace json_detail;
  RunConfig config;
  try {
    reject_unknown(doc, {"corpus", "model", "train", "paths"}, "config");
    if (doc.contains("corpus")) config.corpus = doc.at("corpus").get<CorpusConfig>();
    config.model = model_from_section(doc.value("model", nlohmann::json::object()), config.corpus);
    if (doc.contains("train")) config.train = doc.at("train").get<TrainConfig>();
    const nlohmann::json paths = doc.value("paths", nlohmann::json::object());
    reject_unknown(paths, {"corpus", "output_dir"}, "paths");
    if (paths.contains("output_dir")) {
      config.output_dir = resolve(base_dir, paths.at("output_dir").get<std::string>());
    }
    if (paths.contains("corpus")) {
      config.corpus_path = resolve(base_dir, paths.at("corpus").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  validate(config.model);
  validate(config.train);
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

std::vector<int> parse_deltas(const std::string& text) {
  std::vector<int> deltas;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int value = std::stoi(item, &used);
      if (used != item.size() || value < 0) throw std::invalid_argument(item);
      deltas.push_back(value);
    } catch (const std::exception&) {
      throw ConfigError("--deltas: '" + item + "' is not a non-negative integer");
    }
  }
  if (deltas.empty()) throw ConfigError("--deltas: empty list");
  return deltas;
}

int cmd_gen(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    fs::path target = config.corpus_path;
    if (target.empty()) {
      if (config.output_dir.empty()) throw ConfigError("neither paths.corpus nor an output dir set");
      target = config.output_dir / "corpus.mfce";
    }
    const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
    if (!fs::is_directory(dir)) {
      throw ConfigError("output directory " + dir.string() + " does not exist");
    }
    Corpus corpus = generate_corpus(config.corpus);
    save_corpus(corpus, target);
    const std::size_t frames = corpus.train_frames() + corpus.heldout_frames();
    out << "utterances=" << corpus.train.size() + corpus.heldout.size() << ", frames=" << frames
        << ", train_utterances=" << corpus.train.size()
        << ", heldout_utterances=" << corpus.heldout.size()
        << ", train_frames=" << corpus.train_frames() << '\n';
    const int l_m = intrinsic_length(config.model);
    const int window = l_m + config.train.delta;
    if (corpus.train_frames() >= std::size_t(window)) {
      EpochAccounting a = epoch_accounting(corpus.train_frames(), l_m, config.train.delta);
      out << "l_m=" << a.intrinsic_length << ", delta=" << a.delta << ", l_i=" << a.window_length
          << ", samples_per_epoch=" << a.samples_per_epoch
          << ", labels_per_epoch=" << a.labels_per_epoch << '\n';
    }
    out << "wrote " << target.string() << '\n';
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (config.output_dir.empty()) throw ConfigError("paths.output_dir is not set (or use --out)");
    Corpus corpus = load_training_corpus(config);
    Network net = Network::build(config.model, config.train.seed);
    const EpochAccounting a =
        epoch_accounting(corpus.train_frames(), net.intrinsic_length(), config.train.delta);
    out << "l_m=" << a.intrinsic_length << ", l_i=" << a.window_length
        << ", samples_per_epoch=" << a.samples_per_epoch
        << ", labels_per_epoch=" << a.labels_per_epoch << '\n';
    TrainResult result = train(net, corpus, config.train, {config.output_dir, &out});
    if (result.diverged) {
      err << "training diverged: " << result.diagnostic << '\n';
      return kExitRuntime;
    }
    return kExitOk;
  });
}

int cmd_inspect(const RunConfig& config, std::span<const int> deltas, bool measure,
                std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ModelSpec& spec = config.model;
    const std::vector<LayerGeometry> geometry = layer_geometry(spec);
    const int l_m = intrinsic_length(spec);
    Network net = Network::build(spec, config.train.seed);
    out << "l_m=" << l_m << '\n';
    out << "parameters=" << net.parameter_count() << '\n';
    out << "layer kind kernel dilation_t time_reduction receptive_field channels freq\n";
    for (std::size_t i = 0; i < geometry.size(); ++i) {
      const LayerGeometry& g = geometry[i];
      out << i << ' ' << to_string(g.layer.kind) << ' ';
      if (g.layer.kind == LayerKind::conv) {
        out << g.layer.kernel_t << 'x' << g.layer.kernel_f << ' ' << g.layer.dilation_t;
      } else {
        out << "- -";
      }
      out << ' ' << g.time_reduction << ' ' << g.receptive_field << ' ' << g.out_channels << ' '
          << g.out_freq << '\n';
    }

    out << "delta l_i outputs total_flops flops_per_label analytic_ratio input_frame_ratio "
           "sharing_factor\n";
    nlohmann::json reports = nlohmann::json::array();
    for (int delta : deltas) {
      if (delta < 0) throw ConfigError("delta must be >= 0");
      const CostEstimate cost = window_cost(spec, l_m + delta);
      const CostReport r = measure ? cost_report(net, delta, 5) : cost_report(spec, delta);
      char line[256];
      std::snprintf(line, sizeof line, "%d %d %d %llu %.1f %.4f %.4f %.4f", delta, l_m + delta,
                    delta + 1, static_cast<unsigned long long>(cost.total_flops),
                    cost.flops_per_label, r.analytic_ratio, r.input_frame_ratio,
                    r.sharing_factor);
      out << line;
      if (measure) out << " measured_ratio=" << r.measured_ratio;
      out << '\n';
      reports.push_back(nlohmann::json::parse(r.to_json()));
    }
    if (!config.output_dir.empty()) {
      fs::create_directories(config.output_dir);
      std::ofstream file(config.output_dir / "cost_report.json", std::ios::trunc);
      file << reports.dump(2) << '\n';
    }
    return kExitOk;
  });
}

int cmd_sweep(const RunConfig& config, std::span<const int> deltas, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    if (deltas.empty()) throw ConfigError("sweep needs at least one delta");
    for (int d : deltas) {
      if (d < 0) throw ConfigError("delta must be >= 0");
    }
    if (config.output_dir.empty()) throw ConfigError("paths.output_dir is not set (or use --out)");
    Corpus corpus = load_training_corpus(config);
    const Network initial = Network::build(config.model, config.train.seed);

    const std::size_t runs = deltas.size();
    const std::size_t workers =
        std::min<std::size_t>(std::size_t(resolve_threads(config.train.threads)), runs);
    std::vector<TrainResult> results(runs);
    std::vector<std::exception_ptr> failures(runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < runs; i = next++) {
        try {
          TrainConfig tc = config.train;
          tc.delta = deltas[i];
          if (workers > 1) tc.threads = 1;
          const fs::path dir = config.output_dir / ("delta_" + std::to_string(deltas[i]));
          fs::create_directories(dir);
          std::ofstream log(dir / "train.log", std::ios::trunc);
          Network net = initial.clone();
          results[i] = train(net, corpus, tc, {dir, &log});
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    };
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }

    std::ofstream merged(config.output_dir / "sweep.csv", std::ios::trunc);
    if (!merged) throw IoError("cannot write " + (config.output_dir / "sweep.csv").string());
    merged << kSweepHeader << '\n';
    bool diverged = false;
    for (std::size_t i = 0; i < runs; ++i) {
      for (const EpochMetrics& m : results[i].metrics) {
        char line[256];
        std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.6f,%zu", deltas[i], m.epoch,
                      m.heldout_nll, m.heldout_frame_error_rate, m.wall_seconds,
                      m.labels_processed);
        merged << line << '\n';
      }
      if (results[i].diverged) {
        diverged = true;
        err << "delta=" << deltas[i] << " diverged: " << results[i].diagnostic << '\n';
      }
      if (!results[i].metrics.empty()) {
        const EpochMetrics& last = results[i].metrics.back();
        out << "delta=" << deltas[i] << " final heldout_nll=" << last.heldout_nll
            << " heldout_fer=" << last.heldout_frame_error_rate << '\n';
      }
    }
    out << "wrote " << (config.output_dir / "sweep.csv").string() << '\n';
    return diverged ? kExitRuntime : kExitOk;
  });
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-frame cross-entropy training laboratory"};
  app.require_subcommand(1);
  std::string config_path;
  std::string deltas_text;
  std::string out_dir;
  bool measure = false;

  auto add_common = [&](CLI::App* sub, bool with_deltas) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides paths.output_dir)");
    if (with_deltas) sub->add_option("--deltas", deltas_text, "Comma-separated deltas");
  };
  CLI::App* gen = app.add_subcommand("gen", "Generate the synthetic aligned corpus");
  add_common(gen, false);
  CLI::App* train_cmd = app.add_subcommand("train", "Train one model");
  add_common(train_cmd, false);
  CLI::App* inspect = app.add_subcommand("inspect", "Print geometry and cost tables");
  add_common(inspect, true);
  inspect->add_flag("--measure", measure, "Also time forward+backward passes");
  CLI::App* sweep = app.add_subcommand("sweep", "Train one model per delta");
  add_common(sweep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunConfig config;
  std::vector<int> deltas = kDefaultDeltas;
  try {
    config = load_run_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (!deltas_text.empty()) deltas = parse_deltas(deltas_text);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (gen->parsed()) return cmd_gen(config, out, err);
  if (train_cmd->parsed()) return cmd_train(config, out, err);
  if (inspect->parsed()) return cmd_inspect(config, deltas, measure, out, err);
  return cmd_sweep(config, deltas, out, err);
}

}  // namespace mfce
