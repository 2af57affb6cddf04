#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sclm/app.hpp"
#include "sclm/corpus.hpp"
#include "sclm/detect.hpp"
#include "sclm/errors.hpp"
#include "sclm/eval.hpp"
#include "sclm/lm.hpp"

namespace py = pybind11;
using namespace sclm;

namespace {

using Calls = std::vector<corpus::CallId>;

std::vector<corpus::RawTrace> raw_traces(const std::vector<Calls>& calls, corpus::TraceLabel label) {
  std::vector<corpus::RawTrace> out;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    corpus::RawTrace t;
    t.calls = calls[i];
    t.label = label;
    t.source = std::to_string(i);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<corpus::EncodedTrace> encoded(const lm::LmModel& m, const std::vector<Calls>& calls) {
  return corpus::encode_all(raw_traces(calls, corpus::TraceLabel::kUnlabeled), m.vocab).traces;
}

py::dict trace_dict(const corpus::RawTrace& t) {
  py::dict d;
  d["calls"] = t.calls;
  d["label"] = std::string(corpus::to_string(t.label));
  d["source"] = t.source;
  d["attack_type"] = t.attack_type;
  return d;
}

std::vector<std::tuple<double, double, double>> curve_tuples(const eval::RocCurve& c) {
  std::vector<std::tuple<double, double, double>> out;
  for (const auto& p : c.points) out.emplace_back(p.far, p.dr, p.threshold);
  return out;
}

}  // namespace

PYBIND11_MODULE(_sclm, m) {
  m.doc() = "System-call language models for host intrusion detection";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  // corpus
  py::class_<corpus::SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &corpus::SynthConfig::vocab_size)
      .def_readwrite("n_normal", &corpus::SynthConfig::n_normal)
      .def_readwrite("n_attack", &corpus::SynthConfig::n_attack)
      .def_readwrite("min_len", &corpus::SynthConfig::min_len)
      .def_readwrite("max_len", &corpus::SynthConfig::max_len)
      .def_readwrite("seed", &corpus::SynthConfig::seed)
      .def_readwrite("grammar_seed", &corpus::SynthConfig::grammar_seed)
      .def_readwrite("attack_extra_calls", &corpus::SynthConfig::attack_extra_calls);

  m.def(
      "gen_synthetic",
      [](const corpus::SynthConfig& config) {
        const auto c = corpus::gen_synthetic(config);
        std::vector<Calls> normals, attacks;
        for (const auto& t : c.normals) normals.push_back(t.calls);
        for (const auto& t : c.attacks) attacks.push_back(t.calls);
        return py::make_tuple(normals, attacks);
      },
      py::arg("config") = corpus::SynthConfig{}, "Returns (normal traces, attack traces) as lists of call ids.");

  m.def(
      "load_adfa_dir",
      [](const std::filesystem::path& root) {
        py::list out;
        for (const auto& t : corpus::load_adfa_dir(root)) out.append(trace_dict(t));
        return out;
      },
      py::arg("root"));

  m.def(
      "load_flat_file",
      [](const std::filesystem::path& path, const std::string& label) {
        py::list out;
        for (const auto& t : corpus::load_flat_file(path, corpus::parse_label(label))) out.append(trace_dict(t));
        return out;
      },
      py::arg("path"), py::arg("label") = "unlabeled");

  // lm
  py::class_<lm::LmConfig>(m, "LmConfig")
      .def(py::init<>())
      .def_readwrite("num_layers", &lm::LmConfig::num_layers)
      .def_readwrite("cells", &lm::LmConfig::cells)
      .def_readwrite("lr", &lm::LmConfig::lr)
      .def_readwrite("clip_norm", &lm::LmConfig::clip_norm)
      .def_readwrite("dropout", &lm::LmConfig::dropout)
      .def_readwrite("init_range", &lm::LmConfig::init_range)
      .def_readwrite("epochs", &lm::LmConfig::epochs)
      .def_readwrite("bptt_chunk", &lm::LmConfig::bptt_chunk)
      .def_readwrite("batch_size", &lm::LmConfig::batch_size)
      .def_readwrite("patience", &lm::LmConfig::patience)
      .def_readwrite("seed", &lm::LmConfig::seed)
      .def("__repr__", [](const lm::LmConfig& c) { return "LmConfig(" + lm::format_config(c) + ")"; });

  py::class_<lm::LmModel>(m, "Model")
      .def_static(
          "train",
          [](const std::vector<Calls>& train, const std::vector<Calls>& validation, const lm::LmConfig& config) {
            const auto train_raw = raw_traces(train, corpus::TraceLabel::kNormalTrain);
            const auto vocab = corpus::build_vocab(train_raw);
            const auto tr = corpus::encode_all(train_raw, vocab).traces;
            const auto va = corpus::encode_all(raw_traces(validation, corpus::TraceLabel::kNormalValidation), vocab).traces;
            py::gil_scoped_release release;
            return lm::train(vocab, tr, va, config);
          },
          py::arg("train"), py::arg("validation") = std::vector<Calls>{}, py::arg("config") = lm::LmConfig{})
      .def_static("load", [](const std::filesystem::path& p) { return lm::load_model(p); }, py::arg("path"))
      .def("save", [](const lm::LmModel& self, const std::filesystem::path& p) { lm::save_model(self, p); },
           py::arg("path"))
      .def_property_readonly("config", [](const lm::LmModel& self) { return self.config; })
      .def_property_readonly("vocab", [](const lm::LmModel& self) {
        const auto ids = self.vocab.raw_ids();
        return Calls(ids.begin(), ids.end());
      })
      .def_property_readonly("training_log",
                             [](const lm::LmModel& self) {
                               std::vector<std::tuple<int, double, double>> out;
                               for (const auto& r : self.training_log) out.emplace_back(r.epoch, r.train_loss, r.validation_nll);
                               return out;
                             })
      .def(
          "score",
          [](const lm::LmModel& self, const std::vector<Calls>& traces) {
            std::vector<double> out;
            for (const auto& s : lm::score_traces(self, encoded(self, traces))) out.push_back(s.f);
            return out;
          },
          py::arg("traces"), "Average negative log-likelihood per call for each trace.")
      .def(
          "representations",
          [](const lm::LmModel& self, const std::vector<Calls>& traces) {
            std::vector<std::vector<double>> out;
            for (auto& r : lm::representations(self, encoded(self, traces))) out.push_back(std::move(r.vector));
            return out;
          },
          py::arg("traces"))
      .def("embeddings", [](const lm::LmModel& self) {
        std::vector<std::pair<corpus::CallId, std::vector<float>>> out;
        for (auto& r : lm::export_embeddings(self)) out.emplace_back(r.call, std::move(r.values));
        return out;
      });

  // eval
  m.def("roc", [](const std::vector<double>& n, const std::vector<double>& a) { return curve_tuples(eval::roc(n, a)); },
        py::arg("normal_scores"), py::arg("attack_scores"), "List of (far, dr, threshold) points.");
  m.def("auc", [](const std::vector<double>& n, const std::vector<double>& a) { return eval::auc(eval::roc(n, a)); },
        py::arg("normal_scores"), py::arg("attack_scores"));
  m.def(
      "far_at_dr",
      [](const std::vector<double>& n, const std::vector<double>& a, double target) {
        return eval::far_at_dr(eval::roc(n, a), target);
      },
      py::arg("normal_scores"), py::arg("attack_scores"), py::arg("target_dr"));

  // detect
  py::class_<detect::EnsembleSpec>(m, "EnsembleSpec")
      .def_readonly("weights", &detect::EnsembleSpec::weights)
      .def_readonly("biases", &detect::EnsembleSpec::biases)
      .def_readonly("slope", &detect::EnsembleSpec::slope)
      .def("__call__", [](const detect::EnsembleSpec& self, const std::vector<double>& v) {
        return detect::ensemble_score(self, v);
      });
  m.def(
      "build_ensemble",
      [](const std::vector<std::vector<double>>& normal_train_scores, const std::string& kind, double slope) {
        std::vector<detect::EnsembleMember> members;
        for (std::size_t i = 0; i < normal_train_scores.size(); ++i) {
          members.push_back({"member" + std::to_string(i), detect::parse_score_kind(kind)});
        }
        return detect::build_ensemble(members, normal_train_scores, slope);
      },
      py::arg("normal_train_scores"), py::arg("kind") = "nll", py::arg("slope") = detect::kDefaultSlope);
  m.def(
      "knn_scores",
      [](const std::vector<detect::Point>& reference, const std::vector<detect::Point>& queries, std::size_t k) {
        detect::KnnIndex index(reference, k);
        std::vector<double> out;
        for (const auto& q : queries) out.push_back(index.score(q));
        return out;
      },
      py::arg("reference"), py::arg("queries"), py::arg("k") = 11);
  m.def(
      "kmeans_scores",
      [](const std::vector<detect::Point>& reference, const std::vector<detect::Point>& queries, std::size_t k,
         std::uint64_t seed) {
        const auto model = detect::kmeans_fit(reference, k, seed);
        std::vector<double> out;
        for (const auto& q : queries) out.push_back(model.score(q));
        return out;
      },
      py::arg("reference"), py::arg("queries"), py::arg("k") = 1, py::arg("seed") = 1);
}
