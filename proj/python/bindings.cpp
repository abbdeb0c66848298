#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "melmix/melmix.hpp"

namespace py = pybind11;
using namespace melmix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid to_grid(const Array& a) {
  if (a.ndim() != 2) throw DomainError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Grid(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Grid& g) {
  Array out({g.rows(), g.cols()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

std::vector<Grid> to_grids(const Array& a) {
  if (a.ndim() != 3) throw DomainError("expected a 3-D array (samples, frames, mels)");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto rows = static_cast<std::size_t>(a.shape(1));
  const auto cols = static_cast<std::size_t>(a.shape(2));
  std::vector<Grid> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = a.data() + i * rows * cols;
    out.emplace_back(rows, cols, std::vector<double>(p, p + rows * cols));
  }
  return out;
}

ConditionedDataset to_dataset(const Array& specs, const std::vector<std::uint32_t>& conditions) {
  std::vector<Grid> grids = to_grids(specs);
  if (grids.size() != conditions.size()) throw DomainError("specs and conditions differ in length");
  ConditionedDataset data;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    data.n_conditions = std::max<std::size_t>(data.n_conditions, conditions[i] + 1);
    data.records.push_back({conditions[i], std::move(grids[i])});
  }
  return data;
}

SampleMode parse_mode(const std::string& mode) {
  if (mode == "naive") return SampleMode::naive;
  if (mode == "conditional") return SampleMode::conditional;
  throw ConfigError("unknown sampling mode '" + mode + "'");
}

const TvcGmmField& field_of(const ModelBundle& b, std::size_t condition) {
  if (condition >= b.fields.size()) throw DomainError("unknown condition " + std::to_string(condition));
  return b.fields[condition];
}

}  // namespace

PYBIND11_MODULE(_melmix, m) {
  m.doc() = "TVC-GMM mel-spectrogram modelling and over-smoothness diagnostics";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const FormatError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "mel_spectrogram",
      [](const Array& audio, int sample_rate, std::size_t n_mels) {
        if (audio.ndim() != 1) throw DomainError("audio must be 1-D");
        AudioBuffer buf{std::vector<double>(audio.data(), audio.data() + audio.size()), sample_rate};
        MelConfig mel;
        mel.n_mels = n_mels;
        mel.sample_rate = sample_rate;
        mel.f_max = std::min(mel.f_max, sample_rate / 2.0);
        return to_array(mel_spectrogram(buf, StftConfig{}, mel).values);
      },
      py::arg("audio"), py::arg("sample_rate") = 22050, py::arg("n_mels") = 80,
      "Natural-log mel spectrogram, frames x mels.");

  m.def("smooth", [](const Array& s, double sigma) { return to_array(smooth(to_grid(s), sigma)); }, py::arg("spec"),
        py::arg("sigma") = 1.0);
  m.def("sharpen", [](const Array& s, double strength) { return to_array(sharpen(to_grid(s), strength)); },
        py::arg("spec"), py::arg("strength") = 1.0);
  m.def("var_laplacian", [](const Array& s) { return var_laplacian(to_grid(s)); }, py::arg("spec"));
  m.def("log_spectral_distance",
        [](const Array& a, const Array& b) { return log_spectral_distance(to_grid(a), to_grid(b)); }, py::arg("a"),
        py::arg("b"));

  m.def(
      "generate_default",
      [](std::size_t n, std::uint64_t seed) {
        const ConditionedDataset data = generate(default_synth_spec(seed), n);
        const Grid& first = data.records.front().spec;
        Array specs({data.records.size(), first.rows(), first.cols()});
        std::vector<std::uint32_t> conditions;
        double* out = specs.mutable_data();
        for (const auto& r : data.records) {
          out = std::copy(r.spec.values().begin(), r.spec.values().end(), out);
          conditions.push_back(r.condition);
        }
        return py::make_tuple(specs, conditions);
      },
      py::arg("n_per_condition"), py::arg("seed") = 0,
      "Default four-condition bimodal dataset as (specs[N, T, F], conditions[N]).");

  py::class_<ModelBundle>(m, "Model")
      .def_static(
          "fit",
          [](const Array& specs, const std::vector<std::uint32_t>& conditions, const std::string& head, std::size_t k,
             std::size_t steps, double lr, std::uint64_t seed) {
            TrainConfig cfg;
            cfg.head = parse_head(head);
            cfg.components = k;
            cfg.steps = steps;
            cfg.learning_rate = lr;
            cfg.seed = seed;
            cfg.log_every = 1;
            const ConditionedDataset data = to_dataset(specs, conditions);
            py::gil_scoped_release release;
            return fit(data, cfg);
          },
          py::arg("specs"), py::arg("conditions"), py::arg("head") = "tvcgmm", py::arg("k") = 2,
          py::arg("steps") = 2000, py::arg("lr") = 0.01, py::arg("seed") = 0)
      .def_static("load", &load_bundle, py::arg("path"))
      .def("save", [](const ModelBundle& b, const std::filesystem::path& p) { save_bundle(p, b); }, py::arg("path"))
      .def_property_readonly("conditions", [](const ModelBundle& b) { return b.fields.size(); })
      .def_property_readonly("components", [](const ModelBundle& b) { return b.config.components; })
      .def_property_readonly("head", [](const ModelBundle& b) { return to_string(b.config.head); })
      .def_property_readonly("final_losses", [](const ModelBundle& b) { return b.final_losses; })
      .def_property_readonly("loss_curve", [](const ModelBundle& b) {
        std::vector<double> out;
        for (const LossPoint& p : b.curve) out.push_back(p.loss);
        return out;
      })
      .def(
          "sample",
          [](const ModelBundle& b, std::size_t condition, const std::string& mode, std::uint64_t seed,
             double temperature) {
            return to_array(sample(field_of(b, condition), {parse_mode(mode), seed, temperature}));
          },
          py::arg("condition"), py::arg("mode") = "conditional", py::arg("seed") = 0, py::arg("temperature") = 1.0)
      .def("mean", [](const ModelBundle& b, std::size_t condition) { return to_array(mean_field(field_of(b, condition))); },
           py::arg("condition"))
      .def(
          "nll",
          [](const ModelBundle& b, std::size_t condition, const Array& specs) {
            return nll(field_of(b, condition), ChainBatch(to_grids(specs)));
          },
          py::arg("condition"), py::arg("specs"));
}
