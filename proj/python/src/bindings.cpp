#include "cognet/beam_search.hpp"
#include "cognet/checkpoint.hpp"
#include "cognet/explain.hpp"
#include "cognet/metrics.hpp"
#include "cognet/train.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

namespace py = pybind11;
using namespace cognet;

namespace {

py::object json_loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

DecodeOptions decode_options(const ModelConfig& mc, bool greedy, int beam_width, int max_len) {
  DecodeOptions d;
  d.greedy = greedy;
  d.beam_width = greedy ? 1 : (beam_width > 0 ? beam_width : mc.beam_width);
  d.max_len = max_len > 0 ? max_len : mc.max_len;
  return d;
}

py::dict prediction_dict(const VisitPrediction& v) {
  Matrix steps(static_cast<Eigen::Index>(v.step_probs.size()),
               v.step_probs.empty() ? 0 : v.step_probs.front().size());
  for (std::size_t i = 0; i < v.step_probs.size(); ++i) steps.row(static_cast<Eigen::Index>(i)) = v.step_probs[i];
  py::dict d;
  d["recommended"] = v.recommended;
  d["truth"] = v.truth;
  d["step_probs"] = steps;
  return d;
}

// Model plus the graphs it was built with; the unit the Python API trains,
// decodes and persists.
class Recommender {
 public:
  Recommender(CognetModel model, MedGraphPair graphs, TrainConfig config, std::uint64_t vocab_hash)
      : model_(std::move(model)), graphs_(std::move(graphs)), config_(std::move(config)),
        vocab_hash_(vocab_hash) {}

  static Recommender create(const DatasetBundle& data, const ModelConfig& mc,
                            const std::optional<Matrix>& ddi, const std::string& ablations) {
    const int M = data.num_medications();
    MedGraphPair graphs{build_ehr_graph(data.train, M), ddi ? *ddi : Matrix::Zero(M, M)};
    if (graphs.ddi.rows() != M || graphs.ddi.cols() != M) {
      throw ValidationError("DDI adjacency must be square over the medication vocabulary");
    }
    TrainConfig tc;
    tc.ablations = parse_ablations(ablations);
    CognetModel model(mc, ModelDims{data.num_diagnoses(), data.num_procedures(), M}, tc.ablations);
    return Recommender(std::move(model), std::move(graphs), tc, data.medications.hash());
  }

  std::vector<EpochLog> fit(const DatasetBundle& data, TrainConfig tc) {
    if (data.medications.hash() != vocab_hash_) throw ValidationError("dataset vocabulary differs from the model's");
    tc.ablations = model_.ablations();
    std::vector<EpochLog> log;
    {
      py::gil_scoped_release release;
      train(model_, data, graphs_, tc, [&log](const EpochLog& e) { log.push_back(e); });
    }
    config_ = tc;
    return log;
  }

  std::vector<PatientPredictions> predict_all(const std::vector<PatientRecord>& patients, bool greedy,
                                              int beam_width, int max_len) const {
    py::gil_scoped_release release;
    const auto ops = GraphOperators::from(graphs_);
    const InferenceSession session(model_, ops);
    return predict(session, patients, decode_options(model_.config(), greedy, beam_width, max_len));
  }

  py::list predict_py(const std::vector<PatientRecord>& patients, bool greedy, int beam_width,
                      int max_len) const {
    py::list out;
    for (const auto& p : predict_all(patients, greedy, beam_width, max_len)) {
      py::list visits;
      for (const auto& v : p) visits.append(prediction_dict(v));
      out.append(visits);
    }
    return out;
  }

  py::object evaluate(const std::vector<PatientRecord>& patients, int rounds, double frac,
                      std::uint64_t seed, bool greedy, int beam_width) const {
    const auto preds = predict_all(patients, greedy, beam_width, 0);
    return json_loads(bootstrap(preds, graphs_.ddi, model_.dims().num_meds, rounds, frac, seed).to_json());
  }

  py::object explain(const PatientRecord& patient, int visit, const CodeVocabulary& meds, bool greedy) const {
    const auto ops = GraphOperators::from(graphs_);
    const InferenceSession session(model_, ops);
    return json_loads(explain_visit(session, patient, visit, decode_options(model_.config(), greedy, 0, 0)).to_json(meds));
  }

  void save(const std::filesystem::path& dir) const {
    save_checkpoint(dir, model_, config_, graphs_, vocab_hash_);
  }

  static Recommender load(const std::filesystem::path& dir) {
    Checkpoint ck = load_checkpoint(dir);
    return Recommender(std::move(ck.model), std::move(ck.graphs), ck.train_config, ck.med_vocab_hash);
  }

  CognetModel& model() { return model_; }
  const MedGraphPair& graphs() const { return graphs_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }

 private:
  CognetModel model_;
  MedGraphPair graphs_;
  TrainConfig config_;
  std::uint64_t vocab_hash_;
};

}  // namespace

PYBIND11_MODULE(_cognet, m) {
  m.doc() = "Bindings for the cognet C++ core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::class_<Visit>(m, "Visit")
      .def(py::init<>())
      .def(py::init([](std::vector<int> d, std::vector<int> p, std::vector<int> med) {
             return Visit{std::move(d), std::move(p), std::move(med)};
           }),
           py::arg("diagnoses"), py::arg("procedures"), py::arg("medications"))
      .def_readwrite("diagnoses", &Visit::diagnoses)
      .def_readwrite("procedures", &Visit::procedures)
      .def_readwrite("medications", &Visit::medications)
      .def("__eq__", [](const Visit& a, const Visit& b) { return a == b; });

  py::class_<PatientRecord>(m, "PatientRecord")
      .def(py::init<>())
      .def(py::init([](std::string id, std::vector<Visit> visits) {
             return PatientRecord{std::move(id), std::move(visits)};
           }),
           py::arg("patient_id"), py::arg("visits"))
      .def_readwrite("patient_id", &PatientRecord::patient_id)
      .def_readwrite("visits", &PatientRecord::visits)
      .def("to_json_line", &patient_to_json_line)
      .def_static("from_json_line", [](const std::string& s) { return patient_from_json_line(s); })
      .def("__eq__", [](const PatientRecord& a, const PatientRecord& b) { return a == b; });

  py::class_<CodeVocabulary>(m, "CodeVocabulary")
      .def_property_readonly("codes", &CodeVocabulary::codes)
      .def("id", &CodeVocabulary::id)
      .def("code", &CodeVocabulary::code)
      .def("hash", &CodeVocabulary::hash)
      .def("__len__", &CodeVocabulary::size);

  py::class_<DatasetBundle>(m, "DatasetBundle")
      .def_readwrite("train", &DatasetBundle::train)
      .def_readwrite("validation", &DatasetBundle::validation)
      .def_readwrite("test", &DatasetBundle::test)
      .def_readonly("diagnoses", &DatasetBundle::diagnoses)
      .def_readonly("procedures", &DatasetBundle::procedures)
      .def_readonly("medications", &DatasetBundle::medications)
      .def_readonly("med_frequency", &DatasetBundle::med_frequency)
      .def_property_readonly("num_diagnoses", &DatasetBundle::num_diagnoses)
      .def_property_readonly("num_procedures", &DatasetBundle::num_procedures)
      .def_property_readonly("num_medications", &DatasetBundle::num_medications)
      .def("validate", [](const DatasetBundle& b) { validate(b); });

  m.def("generate_synthetic_cohort",
        [](int n, double persistence, std::uint64_t seed, int d, int p, int med) {
          return generate_synthetic_cohort(n, persistence, seed, VocabSizes{d, p, med});
        },
        py::arg("patients"), py::arg("persistence"), py::arg("seed"), py::arg("diagnoses") = 40,
        py::arg("procedures") = 20, py::arg("medications") = 30);
  m.def("split_dataset", &split_dataset, py::arg("bundle"), py::arg("train") = 2.0 / 3.0,
        py::arg("validation") = 1.0 / 6.0, py::arg("test") = 1.0 / 6.0, py::arg("seed") = 1203);
  m.def("order_medications",
        [](const DatasetBundle& b, const std::string& order) { return order_medications(b, parse_label_order(order)); },
        py::arg("bundle"), py::arg("order") = "rare_first");
  m.def("read_dataset", &read_dataset, py::arg("directory"));
  m.def("write_dataset", &write_dataset, py::arg("directory"), py::arg("bundle"));
  m.def("synthetic_ddi_pairs", &synthetic_ddi_pairs, py::arg("medications"), py::arg("pairs"), py::arg("seed"));
  m.def("ddi_adjacency",
        [](const std::vector<std::pair<std::string, std::string>>& pairs, const CodeVocabulary& meds) {
          return ddi_graph_from_pairs(pairs, meds).adjacency;
        },
        py::arg("pairs"), py::arg("medications"));
  m.def("load_ddi_adjacency",
        [](const std::filesystem::path& p, const CodeVocabulary& meds) { return load_ddi_graph(p, meds).adjacency; },
        py::arg("path"), py::arg("medications"));
  m.def("build_ehr_graph", &build_ehr_graph, py::arg("train"), py::arg("num_meds"));

  m.def("corpus_statistics", [](const DatasetBundle& b) {
    const auto s = corpus_statistics(b);
    py::dict d;
    d["repeated_proportion"] = s.repeated_proportion;
    d["history_jaccard"] = s.history_jaccard;
    d["patients"] = s.num_patients;
    d["visits"] = s.num_visits;
    d["avg_visits"] = s.avg_visits;
    d["avg_medications"] = s.avg_medications;
    d["max_medications"] = s.max_medications;
    return d;
  });
  m.def("histogram", &histogram, py::arg("values"), py::arg("bins"));

  m.def("visit_jaccard", &visit_jaccard, py::arg("truth"), py::arg("predicted"));
  m.def("visit_f1", &visit_f1, py::arg("truth"), py::arg("predicted"));
  m.def("visit_ddi_rate", &visit_ddi_rate, py::arg("predicted"), py::arg("ddi"));

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("embed_dim", &ModelConfig::embed_dim)
      .def_readwrite("heads", &ModelConfig::heads)
      .def_readwrite("gate_hidden", &ModelConfig::gate_hidden)
      .def_readwrite("max_len", &ModelConfig::max_len)
      .def_readwrite("beam_width", &ModelConfig::beam_width)
      .def_readwrite("encoder_layers", &ModelConfig::encoder_layers)
      .def_readwrite("layer_norm_eps", &ModelConfig::layer_norm_eps)
      .def_readwrite("dropout", &ModelConfig::dropout)
      .def_readwrite("init_seed", &ModelConfig::init_seed);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("grad_clip", &TrainConfig::grad_clip)
      .def_readwrite("validation_beam_width", &TrainConfig::validation_beam_width)
      .def_property(
          "label_order", [](const TrainConfig& c) { return std::string(to_string(c.label_order)); },
          [](TrainConfig& c, const std::string& s) { c.label_order = parse_label_order(s); })
      .def("to_json", &TrainConfig::to_json);

  py::class_<EpochLog>(m, "EpochLog")
      .def_readonly("epoch", &EpochLog::epoch)
      .def_readonly("train_loss", &EpochLog::train_loss)
      .def_property_readonly("validation_jaccard", [](const EpochLog& e) -> py::object {
        return e.has_validation ? py::cast(e.validation.jaccard) : py::none();
      });

  py::class_<Recommender>(m, "Recommender")
      .def_static("create", &Recommender::create, py::arg("data"), py::arg("config") = ModelConfig{},
                  py::arg("ddi") = std::nullopt, py::arg("ablations") = "")
      .def_static("load", &Recommender::load, py::arg("directory"))
      .def("fit", &Recommender::fit, py::arg("data"), py::arg("config") = TrainConfig{})
      .def("predict", &Recommender::predict_py, py::arg("patients"), py::arg("greedy") = false,
           py::arg("beam_width") = 0, py::arg("max_len") = 0)
      .def("evaluate", &Recommender::evaluate, py::arg("patients"), py::arg("rounds") = 10,
           py::arg("frac") = 0.8, py::arg("seed") = 1203, py::arg("greedy") = false, py::arg("beam_width") = 0)
      .def("explain", &Recommender::explain, py::arg("patient"), py::arg("visit"), py::arg("medications"),
           py::arg("greedy") = false)
      .def("save", &Recommender::save, py::arg("directory"))
      .def_property_readonly("ablations", [](Recommender& r) { return to_string(r.model().ablations()); })
      .def_property_readonly("ddi", [](const Recommender& r) { return r.graphs().ddi; })
      .def_property_readonly("ehr", [](const Recommender& r) { return r.graphs().ehr; })
      .def("parameter_names",
           [](Recommender& r) {
             std::vector<std::string> names;
             for (const auto& p : r.model().params()) names.push_back(p.name);
             return names;
           })
      .def("parameter", [](Recommender& r, const std::string& name) { return Matrix(r.model().params().get(name).value); });
}
