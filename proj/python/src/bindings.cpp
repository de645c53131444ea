#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "mfce/cli.hpp"
#include "mfce/convgeom.hpp"
#include "mfce/corpus.hpp"
#include "mfce/costmodel.hpp"
#include "mfce/error.hpp"
#include "mfce/json_io.hpp"
#include "mfce/loss.hpp"
#include "mfce/model.hpp"
#include "mfce/trainer.hpp"

namespace py = pybind11;
using namespace mfce;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor::from_data(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

PosteriorSequence posteriors(const Array& log_probs) {
  if (log_probs.ndim() != 2) throw ShapeError("log_probs must be 2-D [rows x targets]");
  return {to_tensor(log_probs), 0};
}

template <typename T>
T parse(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_mfce, m) {
  m.doc() = "Multi-frame cross-entropy training core";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<LabelError>(m, "LabelError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_static("from_json", [](const std::string& text) {
        ModelSpec spec = parse<ModelSpec>(text);
        validate(spec);
        return spec;
      })
      .def("to_json", [](const ModelSpec& s) { return nlohmann::json(s).dump(); })
      .def_readonly("mel_bins", &ModelSpec::mel_bins)
      .def_readonly("num_targets", &ModelSpec::num_targets)
      .def_readonly("input_channels", &ModelSpec::input_channels);

  m.def("toy_spec", &toy_spec, py::arg("mel_bins") = 8, py::arg("num_targets") = 8,
        py::arg("width") = 4);
  m.def(
      "paper_shape_spec",
      [](int mel_bins, int num_targets, int first_width, std::array<int, 4> widths, int bottleneck,
         bool time_dilation, int freq_pool) {
        return paper_shape_spec(
            {mel_bins, num_targets, first_width, widths, bottleneck, time_dilation, freq_pool});
      },
      py::arg("mel_bins") = 64, py::arg("num_targets") = 48, py::arg("first_width") = 64,
      py::arg("widths") = std::array<int, 4>{64, 128, 256, 512}, py::arg("bottleneck") = 512,
      py::arg("time_dilation") = true, py::arg("freq_pool") = 0);

  m.def("intrinsic_length", &intrinsic_length);
  m.def("output_count", &output_count);
  m.def("utterance_padding", [](const ModelSpec& spec, int length) {
    Padding p = utterance_padding(spec, length);
    return py::make_tuple(p.left, p.right);
  });

  m.def("epoch_accounting", [](std::size_t total_frames, int intrinsic_length, int delta) {
    EpochAccounting a = epoch_accounting(total_frames, intrinsic_length, delta);
    py::dict d;
    d["window_length"] = a.window_length;
    d["samples_per_epoch"] = a.samples_per_epoch;
    d["labels_per_epoch"] = a.labels_per_epoch;
    return d;
  });

  m.def(
      "lr_at",
      [](const std::string& train_json, int epoch, int intrinsic_length) {
        return lr_at(parse<TrainConfig>(train_json), epoch, intrinsic_length);
      },
      py::arg("train_json"), py::arg("epoch"), py::arg("intrinsic_length") = 0);

  m.def("window_cost", [](const ModelSpec& spec, int window_length) {
    CostEstimate c = window_cost(spec, window_length);
    py::dict d;
    d["per_layer_flops"] = c.per_layer_flops;
    d["total_flops"] = c.total_flops;
    d["flops_per_label"] = c.flops_per_label;
    return d;
  });
  m.def("cost_report_json",
        [](const ModelSpec& spec, int delta) { return cost_report(spec, delta).to_json(); });

  m.def("ce_loss", [](const Array& log_probs, std::size_t label) {
    return ce_loss(posteriors(log_probs), label).value();
  });
  m.def("mfce_loss", [](const Array& log_probs, const std::vector<std::size_t>& labels) {
    LossReport r = mfce_loss(posteriors(log_probs), labels);
    return py::make_tuple(r.value(), r.per_frame);
  });

  py::class_<Network>(m, "Network")
      .def_static("build", &Network::build, py::arg("spec"), py::arg("seed") = 1)
      .def_static("load", [](const std::string& path) { return Network::load(path); })
      .def("save", [](const Network& n, const std::string& path) { n.save(path); })
      .def_property_readonly("intrinsic_length", &Network::intrinsic_length)
      .def_property_readonly("spec", &Network::spec)
      .def("parameter_count", &Network::parameter_count)
      .def("forward",
           [](const Network& n, const Array& window) {
             return to_array(n.forward(to_tensor(window)).log_probs);
           })
      .def("forward_utterance", [](const Network& n, const Array& frames) {
        return to_array(n.forward_utterance({to_tensor(frames), 0}).log_probs);
      });

  py::class_<Corpus>(m, "Corpus")
      .def_static("generate",
                  [](const std::string& config_json) {
                    return generate_corpus(parse<CorpusConfig>(config_json));
                  })
      .def_static("load", [](const std::string& path) { return load_corpus(path); })
      .def("save", [](const Corpus& c, const std::string& path) { save_corpus(c, path); })
      .def_readonly("num_states", &Corpus::num_states)
      .def_readonly("mel_bins", &Corpus::mel_bins)
      .def_readonly("channels", &Corpus::channels)
      .def("train_frames", &Corpus::train_frames)
      .def("heldout_frames", &Corpus::heldout_frames)
      .def_property_readonly("num_train", [](const Corpus& c) { return c.train.size(); })
      .def_property_readonly("num_heldout", [](const Corpus& c) { return c.heldout.size(); })
      .def("train_utterance", [](const Corpus& c, std::size_t i) {
        const AlignedUtterance& u = c.train.at(i);
        return py::make_tuple(to_array(u.features.frames), u.labels);
      });

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "mfce");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(int(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
}
