#include "cognet/ehr_data.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace cognet {

using nlohmann::json;

std::string patient_to_json_line(const PatientRecord& patient) {
  using ordered = nlohmann::ordered_json;
  ordered visits = ordered::array();
  for (const Visit& v : patient.visits) {
    visits.push_back({{"diag", v.diagnoses}, {"proc", v.procedures}, {"meds", v.medications}});
  }
  return ordered{{"patient_id", patient.patient_id}, {"visits", std::move(visits)}}.dump();
}

PatientRecord patient_from_json_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    PatientRecord p;
    p.patient_id = j.at("patient_id").get<std::string>();
    for (const auto& v : j.at("visits")) {
      p.visits.push_back(Visit{v.at("diag").get<std::vector<int>>(),
                               v.at("proc").get<std::vector<int>>(),
                               v.at("meds").get<std::vector<int>>()});
    }
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed patient record: ") + e.what());
  }
}

namespace {

constexpr const char* kSplitFiles[] = {"train.jsonl", "validation.jsonl", "test.jsonl"};

std::string split_to_jsonl(const std::vector<PatientRecord>& patients) {
  std::string out;
  for (const auto& p : patients) {
    out += patient_to_json_line(p);
    out += '\n';
  }
  return out;
}

std::vector<PatientRecord> read_jsonl(const std::filesystem::path& path) {
  std::vector<PatientRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(patient_from_json_line(line));
  }
  return out;
}

CodeVocabulary vocab_from_json(const json& j, CodeKind kind) {
  CodeVocabulary v(kind);
  for (const auto& c : j.at(std::string(to_string(kind)))) {
    const auto code = c.get<std::string>();
    if (v.find(code)) throw ValidationError("duplicate code in vocabulary: " + code);
    v.add(code);
  }
  return v;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / kSplitFiles[0], split_to_jsonl(bundle.train));
  write_file_atomic(dir / kSplitFiles[1], split_to_jsonl(bundle.validation));
  write_file_atomic(dir / kSplitFiles[2], split_to_jsonl(bundle.test));
  const json vocab = {{"diagnosis", bundle.diagnoses.codes()},
                      {"procedure", bundle.procedures.codes()},
                      {"medication", bundle.medications.codes()}};
  write_file_atomic(dir / "vocab.json", vocab.dump(1) + "\n");
}

DatasetBundle read_dataset(const std::filesystem::path& dir) {
  DatasetBundle bundle;
  json vocab;
  try {
    vocab = json::parse(read_text_file(dir / "vocab.json"));
    bundle.diagnoses = vocab_from_json(vocab, CodeKind::diagnosis);
    bundle.procedures = vocab_from_json(vocab, CodeKind::procedure);
    bundle.medications = vocab_from_json(vocab, CodeKind::medication);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed vocab.json: ") + e.what());
  }
  bundle.train = read_jsonl(dir / kSplitFiles[0]);
  bundle.validation = read_jsonl(dir / kSplitFiles[1]);
  bundle.test = read_jsonl(dir / kSplitFiles[2]);
  bundle.med_frequency = count_med_frequency(bundle.train, bundle.num_medications());
  validate(bundle);
  return bundle;
}

}  // namespace cognet
