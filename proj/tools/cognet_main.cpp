// cognet command line tool.
//
//   cognet gen-data --patients 500 --persistence 0.7 --seed 7 --out data
//   cognet train --data data --out model
//   cognet evaluate --model model --data data --out eval
//   cognet explain --model model --data data --patient S000003 --visit 2
//   cognet stats --data data --bins 10
//
// Every run writes manifest.json into its output directory. Relative output
// paths resolve against $COGNET_OUTPUT_ROOT when it is set. A TOML config file
// given with --config supplies option values; command line flags win.

#include "cognet/beam_search.hpp"
#include "cognet/checkpoint.hpp"
#include "cognet/explain.hpp"
#include "cognet/metrics.hpp"
#include "cognet/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#ifndef COGNET_REVISION
#define COGNET_REVISION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace cognet;

namespace {

fs::path output_root() {
  const char* root = std::getenv("COGNET_OUTPUT_ROOT");
  return root && *root ? fs::path(root) : fs::path();
}

fs::path resolve_output(const fs::path& p) {
  return p.is_absolute() ? p : output_root() / p;
}

// Collects what a run read and wrote, then emits manifest.json.
class Manifest {
 public:
  Manifest(std::string command, const CLI::App& sub) : command_(std::move(command)) {
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name == "config") continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        config_[name] = r.size() == 1 ? ordered_json(r.front()) : ordered_json(r);
      } else if (opt->get_expected_min() == 0) {
        config_[name] = false;
      } else {
        config_[name] = opt->get_default_str();
      }
    }
  }

  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void set(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

  void input(const fs::path& p) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) input(f);
      return;
    }
    inputs_.push_back({{"path", p.string()}, {"fnv1a64", hex64(hash_file(p))}});
  }

  void output(const fs::path& p) { outputs_.push_back(p.string()); }

  void write(const fs::path& dir) const {
    ordered_json j;
    j["command"] = command_;
    j["revision"] = COGNET_REVISION;
    j["config"] = config_;
    j["seeds"] = seeds_;
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  ordered_json config_ = ordered_json::object();
  ordered_json seeds_ = ordered_json::object();
  ordered_json extra_ = ordered_json::object();
  ordered_json inputs_ = ordered_json::array();
  ordered_json outputs_ = ordered_json::array();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<std::string> split_files(const fs::path& dir) {
  return {(dir / "train.jsonl").string(), (dir / "validation.jsonl").string(),
          (dir / "test.jsonl").string(), (dir / "vocab.json").string()};
}

const std::vector<PatientRecord>& pick_split(const DatasetBundle& b, const std::string& name) {
  if (name == "train") return b.train;
  if (name == "validation") return b.validation;
  if (name == "test") return b.test;
  throw ValidationError("unknown split '" + name + "'");
}

Matrix load_ddi(const fs::path& path, const CodeVocabulary& meds) {
  if (path.empty()) return Matrix::Zero(meds.size(), meds.size());
  const DdiGraph g = load_ddi_graph(path, meds);
  if (g.skipped_edges > 0) {
    std::cerr << "note: skipped " << g.skipped_edges << " DDI rows naming unknown medications\n";
  }
  return g.adjacency;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOptions {
  int patients = 500;
  double persistence = 0.7;
  std::uint64_t seed = 1203;
  int diagnoses = 40;
  int procedures = 20;
  int medications = 30;
  int ddi_pairs = 40;
  std::string order = "rare_first";
  fs::path out = "data";
};

void run_gen_data(const GenDataOptions& o, Manifest& m) {
  const auto cohort = generate_synthetic_cohort(o.patients, o.persistence, o.seed,
                                                VocabSizes{o.diagnoses, o.procedures, o.medications});
  const auto split = split_dataset(cohort, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, o.seed);
  const auto ordered = order_medications(split, parse_label_order(o.order));
  const fs::path dir = resolve_output(o.out);
  write_dataset(dir, ordered);
  write_ddi_edge_list(dir / "ddi.csv", synthetic_ddi_pairs(ordered.medications, o.ddi_pairs, o.seed));
  m.seed("generator", o.seed);
  for (const auto& f : split_files(dir)) m.output(f);
  m.output(dir / "ddi.csv");
  m.set("counts", {{"train", ordered.train.size()},
                   {"validation", ordered.validation.size()},
                   {"test", ordered.test.size()}});
  m.write(dir);
  std::cout << "wrote " << ordered.train.size() << "/" << ordered.validation.size() << "/"
            << ordered.test.size() << " patients to " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  fs::path tables;
  std::uint64_t seed = 1203;
  std::string order = "rare_first";
  fs::path out = "data";
};

void run_ingest(const IngestOptions& o, Manifest& m) {
  const IngestConfig cfg = load_ingest_config(o.tables);
  m.input(o.tables);
  for (const auto* t : {&cfg.admissions, &cfg.diagnoses, &cfg.procedures, &cfg.prescriptions}) {
    m.input(t->path);
  }
  if (cfg.drug_mapping) m.input(*cfg.drug_mapping);
  const auto all = ingest_exported_tables(cfg);
  std::size_t visits = 0;
  for (const auto& p : all.train) visits += p.visits.size();
  const auto split = split_dataset(all, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, o.seed);
  const auto ordered = order_medications(split, parse_label_order(o.order));
  const fs::path dir = resolve_output(o.out);
  write_dataset(dir, ordered);
  m.seed("split", o.seed);
  for (const auto& f : split_files(dir)) m.output(f);
  m.set("counts", {{"patients", all.train.size()},
                   {"visits", visits},
                   {"diagnosis_codes", all.num_diagnoses()},
                   {"procedure_codes", all.num_procedures()},
                   {"medication_codes", all.num_medications()}});
  m.write(dir);
  std::cout << all.train.size() << " patients, " << visits << " visits, vocab "
            << all.num_diagnoses() << "/" << all.num_procedures() << "/" << all.num_medications()
            << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path data = "data";
  fs::path ddi;  // defaults to <data>/ddi.csv when that file exists
  fs::path out = "model";
  std::string order = "rare_first";
  std::string ablate;
  int epochs = 50;
  double lr = 1e-4;
  int batch = 16;
  std::uint64_t seed = 1203;
  double grad_clip = 0.0;
  int val_beam = 1;
  int dim = 64;
  int heads = 4;
  int gate_hidden = 32;
  int layers = 1;
  int max_len = 45;
  int beam_width = 4;
  double dropout = 0.0;
};

void run_train(TrainOptions o, Manifest& m) {
  const DatasetBundle data = read_dataset(o.data);
  if (o.ddi.empty() && fs::exists(o.data / "ddi.csv")) o.ddi = o.data / "ddi.csv";
  m.input(o.data);
  if (!o.ddi.empty()) m.input(o.ddi);

  ModelConfig mc;
  mc.embed_dim = o.dim;
  mc.heads = o.heads;
  mc.gate_hidden = o.gate_hidden;
  mc.encoder_layers = o.layers;
  mc.max_len = o.max_len;
  mc.beam_width = o.beam_width;
  mc.dropout = o.dropout;
  mc.init_seed = o.seed;
  mc.validate();

  TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.epochs = o.epochs;
  tc.seed = o.seed;
  tc.grad_clip = o.grad_clip;
  tc.label_order = parse_label_order(o.order);
  tc.ablations = parse_ablations(o.ablate);
  tc.validation_beam_width = o.val_beam;
  tc.validate();

  const int M = data.num_medications();
  const MedGraphPair graphs{build_ehr_graph(data.train, M), load_ddi(o.ddi, data.medications)};
  CognetModel model(mc, ModelDims{data.num_diagnoses(), data.num_procedures(), M}, tc.ablations);

  const fs::path dir = resolve_output(o.out);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << metric_log_header() << "\n";
  const auto result = train(model, data, graphs, tc, [&](const EpochLog& e) {
    csv << metric_log_row(e) << "\n";
    std::cout << "epoch " << e.epoch << " loss " << e.train_loss;
    if (e.has_validation) std::cout << " val_jaccard " << e.validation.jaccard;
    std::cout << std::endl;
  });
  write_file_atomic(dir / "metrics.csv", csv.str());
  save_checkpoint(dir / "checkpoint", model, tc, graphs, data.medications.hash());

  m.seed("init", mc.init_seed);
  m.seed("shuffle", tc.seed);
  m.set("ablations", to_string(tc.ablations));
  m.set("train_config", ordered_json::parse(tc.to_json()));
  m.set("model_config", ordered_json::parse(model_config_json(mc)));
  m.set("best_epoch", result.best_epoch);
  m.set("best_validation_jaccard",
        std::isfinite(result.best_validation_jaccard) ? ordered_json(result.best_validation_jaccard)
                                                      : ordered_json(nullptr));
  m.output(dir / "metrics.csv");
  m.output(dir / "checkpoint");
  m.write(dir);
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  fs::path model = "model";
  fs::path data = "data";
  std::string split = "test";
  bool greedy = false;
  int beam_width = 0;  // 0 = checkpoint value
  int max_len = 0;
  int rounds = 10;
  double frac = 0.8;
  std::uint64_t seed = 1203;
  fs::path out = "eval";
};

Checkpoint open_checkpoint(const fs::path& model_dir, const DatasetBundle& data) {
  fs::path dir = model_dir;
  if (fs::exists(dir / "checkpoint")) dir /= "checkpoint";
  Checkpoint ck = load_checkpoint(dir);
  if (ck.med_vocab_hash != data.medications.hash()) {
    throw ValidationError("checkpoint was trained on a different medication vocabulary");
  }
  return ck;
}

DecodeOptions decode_options(const ModelConfig& mc, bool greedy, int beam_width, int max_len) {
  DecodeOptions d;
  d.greedy = greedy;
  d.beam_width = greedy ? 1 : (beam_width > 0 ? beam_width : mc.beam_width);
  d.max_len = max_len > 0 ? max_len : mc.max_len;
  return d;
}

void run_evaluate(const EvaluateOptions& o, Manifest& m) {
  if (!fs::exists(o.model)) throw ValidationError("checkpoint not found: " + o.model.string());
  const DatasetBundle data = read_dataset(o.data);
  const Checkpoint ck = open_checkpoint(o.model, data);
  m.input(fs::exists(o.model / "checkpoint") ? o.model / "checkpoint" : o.model);
  m.input(o.data);

  const auto& patients = pick_split(data, o.split);
  if (patients.empty()) throw ValidationError("split '" + o.split + "' is empty");
  const auto options = decode_options(ck.model.config(), o.greedy, o.beam_width, o.max_len);
  const auto ops = GraphOperators::from(ck.graphs);
  const InferenceSession session(ck.model, ops);
  const auto preds = predict(session, patients, options);
  const int M = data.num_medications();
  const auto report = bootstrap(preds, ck.graphs.ddi, M, o.rounds, o.frac, o.seed);
  const auto full = summarize(preds, ck.graphs.ddi, M);

  ordered_json j = ordered_json::parse(report.to_json());
  j["decoding"] = {{"strategy", options.greedy ? "greedy" : "beam"},
                   {"beam_width", options.beam_width},
                   {"max_len", options.max_len}};
  j["split"] = o.split;
  j["patients"] = patients.size();
  j["ablations"] = to_string(ck.model.ablations());
  j["full_split"] = {{"jaccard", full.jaccard}, {"f1", full.f1}, {"prauc", full.prauc},
                     {"ddi", full.ddi}, {"avg_drugs", full.avg_drugs}};

  const fs::path dir = resolve_output(o.out);
  write_file_atomic(dir / "report.json", j.dump(2) + "\n");
  m.seed("bootstrap", o.seed);
  m.set("decoding", j["decoding"]);
  m.output(dir / "report.json");
  m.write(dir);
  for (const char* k : {"jaccard", "f1", "prauc", "ddi", "avg_drugs"}) {
    std::cout << k << " " << j[k]["mean"].get<double>() << " +- " << j[k]["std"].get<double>() << "\n";
  }
}

// ---------------------------------------------------------------------------
// explain

struct ExplainOptions {
  fs::path model = "model";
  fs::path data = "data";
  std::string patient;
  int visit = 2;
  bool greedy = false;
  int beam_width = 0;
  fs::path out = "explain";
};

void run_explain(const ExplainOptions& o, Manifest& m) {
  if (!fs::exists(o.model)) throw ValidationError("checkpoint not found: " + o.model.string());
  const DatasetBundle data = read_dataset(o.data);
  const Checkpoint ck = open_checkpoint(o.model, data);
  m.input(o.data);

  const PatientRecord* found = nullptr;
  for (const PatientRecord* p : data.all_patients()) {
    if (p->patient_id == o.patient) found = p;
  }
  if (!found) throw ValidationError("unknown patient '" + o.patient + "'");
  const auto ops = GraphOperators::from(ck.graphs);
  const InferenceSession session(ck.model, ops);
  const auto report = explain_visit(session, *found, o.visit,
                                    decode_options(ck.model.config(), o.greedy, o.beam_width, 0));
  const fs::path dir = resolve_output(o.out);
  const fs::path file = dir / ("explain_" + o.patient + "_v" + std::to_string(o.visit) + ".json");
  write_file_atomic(file, report.to_json(data.medications));
  m.output(file);
  m.write(dir);
  std::cout << file.string() << "\n";
}

// ---------------------------------------------------------------------------
// stats

struct StatsOptions {
  fs::path data = "data";
  std::string split = "all";
  int bins = 10;
  fs::path out = "stats";
};

void run_stats(const StatsOptions& o, Manifest& m) {
  DatasetBundle data = read_dataset(o.data);
  m.input(o.data);
  if (o.split != "all") {
    data.train = pick_split(data, o.split);
    data.validation.clear();
    data.test.clear();
    if (data.train.empty()) throw ValidationError("split '" + o.split + "' is empty");
  }
  const auto stats = corpus_statistics(data);
  const auto repeated = histogram(stats.repeated_proportion, o.bins);
  const auto jac = histogram(stats.history_jaccard, o.bins);

  std::ostringstream csv;
  csv << "bin_low,bin_high,repeated_proportion,history_jaccard\n";
  for (int b = 0; b < o.bins; ++b) {
    csv << static_cast<double>(b) / o.bins << "," << static_cast<double>(b + 1) / o.bins << ","
        << repeated[static_cast<std::size_t>(b)] << "," << jac[static_cast<std::size_t>(b)] << "\n";
  }
  ordered_json summary = {{"patients", stats.num_patients},
                          {"visits", stats.num_visits},
                          {"diagnosis_codes", stats.num_diagnosis_codes},
                          {"procedure_codes", stats.num_procedure_codes},
                          {"medication_codes", stats.num_medication_codes},
                          {"avg_visits", stats.avg_visits},
                          {"max_visits", stats.max_visits},
                          {"avg_diagnoses", stats.avg_diagnoses},
                          {"max_diagnoses", stats.max_diagnoses},
                          {"avg_procedures", stats.avg_procedures},
                          {"max_procedures", stats.max_procedures},
                          {"avg_medications", stats.avg_medications},
                          {"max_medications", stats.max_medications},
                          {"visits_with_history", stats.history_jaccard.size()}};
  const fs::path dir = resolve_output(o.out);
  write_file_atomic(dir / "histogram.csv", csv.str());
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  m.output(dir / "histogram.csv");
  m.output(dir / "summary.json");
  m.write(dir);
  std::cout << summary.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Medication combination recommender with a copy-or-predict decoder"};
  app.set_config("--config", "", "TOML file with option values (flags take precedence)");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("cognet ") + COGNET_REVISION);

  const std::vector<std::string> orders{"rare_first", "frequent_first", "early_first", "late_first"};

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic cohort and DDI list");
  gen_cmd->add_option("--patients", gen.patients, "Number of patients");
  gen_cmd->add_option("--persistence", gen.persistence, "Probability a medication carries over");
  gen_cmd->add_option("--seed", gen.seed, "Generator and split seed");
  gen_cmd->add_option("--diagnoses", gen.diagnoses, "Diagnosis vocabulary size");
  gen_cmd->add_option("--procedures", gen.procedures, "Procedure vocabulary size");
  gen_cmd->add_option("--medications", gen.medications, "Medication vocabulary size");
  gen_cmd->add_option("--ddi-pairs", gen.ddi_pairs, "Number of synthetic interacting pairs");
  gen_cmd->add_option("--order", gen.order, "Medication order within visits")->check(CLI::IsMember(orders));
  gen_cmd->add_option("--out", gen.out, "Output dataset directory");

  IngestOptions ing;
  auto* ing_cmd = app.add_subcommand("ingest", "Build a dataset from exported EHR tables");
  ing_cmd->add_option("--tables", ing.tables, "Ingest config JSON naming the table files")->required();
  ing_cmd->add_option("--seed", ing.seed, "Split seed");
  ing_cmd->add_option("--order", ing.order, "Medication order within visits")->check(CLI::IsMember(orders));
  ing_cmd->add_option("--out", ing.out, "Output dataset directory");

  TrainOptions tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr_cmd->add_option("--data", tr.data, "Dataset directory");
  tr_cmd->add_option("--ddi", tr.ddi, "DDI edge list (default: <data>/ddi.csv)");
  tr_cmd->add_option("--out", tr.out, "Run directory");
  tr_cmd->add_option("--order", tr.order, "Label order heuristic")->check(CLI::IsMember(orders));
  tr_cmd->add_option("--ablate", tr.ablate,
                     "Comma list of copy,visit_scores,graphs,diagnoses,procedures");
  tr_cmd->add_option("--epochs", tr.epochs);
  tr_cmd->add_option("--lr", tr.lr, "Adam learning rate");
  tr_cmd->add_option("--batch", tr.batch, "Visits per batch");
  tr_cmd->add_option("--seed", tr.seed, "Initialization and shuffling seed");
  tr_cmd->add_option("--grad-clip", tr.grad_clip, "Global gradient norm cap, 0 disables");
  tr_cmd->add_option("--val-beam", tr.val_beam, "Beam width of per-epoch validation decoding");
  tr_cmd->add_option("--dim", tr.dim, "Embedding size s");
  tr_cmd->add_option("--heads", tr.heads, "Attention heads");
  tr_cmd->add_option("--gate-hidden", tr.gate_hidden, "Hidden width of the gated aggregation");
  tr_cmd->add_option("--layers", tr.layers, "Encoder blocks per code type");
  tr_cmd->add_option("--max-len", tr.max_len, "Maximum generated medications");
  tr_cmd->add_option("--beam-width", tr.beam_width, "Default beam width stored in the checkpoint");
  tr_cmd->add_option("--dropout", tr.dropout);

  EvaluateOptions ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Bootstrap evaluation of a checkpoint");
  ev_cmd->add_option("--model", ev.model, "Run or checkpoint directory");
  ev_cmd->add_option("--data", ev.data, "Dataset directory");
  ev_cmd->add_option("--split", ev.split)->check(CLI::IsMember({"train", "validation", "test"}));
  ev_cmd->add_flag("--greedy", ev.greedy, "Greedy decoding instead of beam search");
  ev_cmd->add_option("--beam-width", ev.beam_width, "Override the checkpoint beam width");
  ev_cmd->add_option("--max-len", ev.max_len, "Override the checkpoint decoding cap");
  ev_cmd->add_option("--rounds", ev.rounds, "Bootstrap rounds");
  ev_cmd->add_option("--frac", ev.frac, "Fraction of patients per round");
  ev_cmd->add_option("--seed", ev.seed, "Bootstrap seed");
  ev_cmd->add_option("--out", ev.out, "Report directory");

  ExplainOptions ex;
  auto* ex_cmd = app.add_subcommand("explain", "Export copy probabilities for one visit");
  ex_cmd->add_option("--model", ex.model, "Run or checkpoint directory");
  ex_cmd->add_option("--data", ex.data, "Dataset directory");
  ex_cmd->add_option("--patient", ex.patient, "Patient id")->required();
  ex_cmd->add_option("--visit", ex.visit, "1-based visit number, at least 2");
  ex_cmd->add_flag("--greedy", ex.greedy);
  ex_cmd->add_option("--beam-width", ex.beam_width);
  ex_cmd->add_option("--out", ex.out, "Output directory");

  StatsOptions st;
  auto* st_cmd = app.add_subcommand("stats", "Corpus statistics and overlap histograms");
  st_cmd->add_option("--data", st.data, "Dataset directory");
  st_cmd->add_option("--split", st.split)->check(CLI::IsMember({"all", "train", "validation", "test"}));
  st_cmd->add_option("--bins", st.bins, "Histogram bins over [0, 1]");
  st_cmd->add_option("--out", st.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    Manifest manifest(sub->get_name(), *sub);
    if (sub == gen_cmd) run_gen_data(gen, manifest);
    if (sub == ing_cmd) run_ingest(ing, manifest);
    if (sub == tr_cmd) run_train(tr, manifest);
    if (sub == ev_cmd) run_evaluate(ev, manifest);
    if (sub == ex_cmd) run_explain(ex, manifest);
    if (sub == st_cmd) run_stats(st, manifest);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    // ValidationError and argument checks from the library.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
