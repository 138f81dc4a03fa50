#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "glassbox/checkpoint.hpp"
#include "glassbox/cli.hpp"
#include "glassbox/corpus.hpp"
#include "glassbox/error.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/model.hpp"
#include "glassbox/synthetic.hpp"
#include "glassbox/unwrapper.hpp"

namespace py = pybind11;
using namespace glassbox;

namespace {

// A trained checkpoint plus the vocabulary needed to encode raw text.
class PyModel {
 public:
  explicit PyModel(const std::filesystem::path& path) : cp_(load_checkpoint(path)) {}

  std::vector<double> predict(const std::vector<std::string>& texts) const {
    std::vector<double> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(predict_proba(forward(cp_.model, encode_text(t)).eta));
    return out;
  }

  std::vector<std::string> patterns(const std::vector<std::string>& texts) const {
    std::vector<std::string> out;
    for (const auto& t : texts) out.push_back(pattern_from_hidden(forward(cp_.model, encode_text(t)).hidden_pre).to_string());
    return out;
  }

  // One dict per activation region observed on the texts, largest first.
  py::list regions(const std::vector<std::string>& texts, const std::vector<int>& labels) const {
    if (texts.size() != labels.size()) throw UsageError("texts and labels differ in length");
    Dataset ds;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      ds.push_back(make_document(texts[i], labels[i], cp_.vocab, cp_.model.config.max_len));
    }
    const auto fwd = forward_all(cp_.model, ds);
    const auto y = ds.labels();
    py::list out;
    for (const auto& r : enumerate_regions(cp_.model, fwd)) {
      const auto s = region_stats(r, fwd, y);
      py::dict d;
      d["pattern"] = r.pattern.to_string();
      d["members"] = r.member_ids;
      d["w"] = r.w_eff;
      d["b"] = r.b_eff;
      d["response_mean"] = s.response_mean;
      d["local_auc"] = s.local_auc;
      d["local_accuracy"] = s.local_accuracy;
      out.append(d);
    }
    return out;
  }

  std::size_t vocab_size() const { return cp_.model.vocab_size(); }
  std::size_t filter_count() const { return cp_.model.filter_count(); }
  std::size_t hidden_units() const { return cp_.model.hidden_units(); }

 private:
  std::vector<TokenId> encode_text(const std::string& text) const {
    return encode(tokenize(text), cp_.vocab, cp_.model.config.max_len);
  }

  Checkpoint cp_;
};

}  // namespace

PYBIND11_MODULE(_glassbox, m) {
  m.doc() = "Bindings for the glassbox text CNN library";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  m.def(
      "run_command",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_command(args, out, err);
        }
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command-line command; returns (exit_code, stdout, stderr).");

  m.def("tokenize", &tokenize, py::arg("text"));

  m.def(
      "synthetic_corpus",
      [](std::size_t documents, std::uint64_t seed) {
        SyntheticCorpusConfig cfg;
        cfg.documents = documents;
        cfg.seed = seed;
        std::vector<std::pair<std::string, int>> out;
        for (auto& r : synthetic_sentiment_corpus(cfg)) out.emplace_back(std::move(r.text), r.label);
        return out;
      },
      py::arg("documents") = 2000, py::arg("seed") = 1);

  m.def(
      "accuracy",
      [](const std::vector<double>& s, const std::vector<int>& y) { return accuracy(s, y); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "auc", [](const std::vector<double>& s, const std::vector<int>& y) { return auc(s, y); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "f1", [](const std::vector<double>& s, const std::vector<int>& y) { return f1(s, y); },
      py::arg("scores"), py::arg("labels"));

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def("predict", &PyModel::predict, py::arg("texts"))
      .def("patterns", &PyModel::patterns, py::arg("texts"))
      .def("regions", &PyModel::regions, py::arg("texts"), py::arg("labels"))
      .def_property_readonly("vocab_size", &PyModel::vocab_size)
      .def_property_readonly("filter_count", &PyModel::filter_count)
      .def_property_readonly("hidden_units", &PyModel::hidden_units);
}
