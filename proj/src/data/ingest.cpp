#include "cognet/ehr_data.hpp"

#include <boost/tokenizer.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

namespace cognet {

namespace {

using AdmissionKey = std::pair<std::string, std::string>;  // (subject, admission)

class CsvTable {
 public:
  explicit CsvTable(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw ValidationError("cannot open table " + path.string());
    std::vector<std::string> header;
    if (!next(header)) throw ValidationError("empty table " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) columns_.emplace(header[i], i);
  }

  std::size_t column(const std::string& name) const {
    auto it = columns_.find(name);
    if (it == columns_.end()) {
      throw ValidationError("table " + path_.string() + " has no column '" + name + "'");
    }
    return it->second;
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields.clear();
      try {
        boost::tokenizer<boost::escaped_list_separator<char>> tok(line);
        fields.assign(tok.begin(), tok.end());
      } catch (const boost::escaped_list_error& e) {
        throw ValidationError("bad CSV row in " + path_.string() + ": " + e.what());
      }
      return true;
    }
    return false;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::unordered_map<std::string, std::size_t> columns_;
};

const std::string& field(const std::vector<std::string>& row, std::size_t i) {
  static const std::string empty;
  return i < row.size() ? row[i] : empty;
}

std::map<AdmissionKey, std::set<std::string>> read_code_table(
    const TableSpec& spec, const std::unordered_map<std::string, std::string>* mapping,
    std::map<std::string, std::int64_t>* counts) {
  CsvTable table(spec.path);
  const auto subj = table.column(spec.subject_column);
  const auto adm = table.column(spec.admission_column);
  const auto code_col = table.column(spec.code_column);
  std::map<AdmissionKey, std::set<std::string>> out;
  std::vector<std::string> row;
  while (table.next(row)) {
    std::string code = field(row, code_col);
    if (code.empty() || field(row, adm).empty()) continue;
    if (mapping) {
      auto it = mapping->find(code);
      if (it == mapping->end()) continue;
      code = it->second;
    }
    if (counts) ++(*counts)[code];
    out[{field(row, subj), field(row, adm)}].insert(std::move(code));
  }
  return out;
}

TableSpec table_from_json(const nlohmann::json& j, TableSpec defaults,
                          const std::filesystem::path& base) {
  TableSpec t = std::move(defaults);
  std::filesystem::path p = j.at("path").get<std::string>();
  t.path = p.is_absolute() ? p : base / p;
  t.subject_column = j.value("subject", t.subject_column);
  t.admission_column = j.value("admission", t.admission_column);
  t.code_column = j.value("code", t.code_column);
  t.time_column = j.value("time", t.time_column);
  return t;
}

}  // namespace

IngestConfig load_ingest_config(const std::filesystem::path& path) {
  IngestConfig cfg;
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    const auto base = path.parent_path();
    cfg.admissions = table_from_json(j.at("admissions"), cfg.admissions, base);
    cfg.diagnoses = table_from_json(j.at("diagnoses"), cfg.diagnoses, base);
    cfg.procedures = table_from_json(j.at("procedures"), cfg.procedures, base);
    cfg.prescriptions = table_from_json(j.at("prescriptions"), cfg.prescriptions, base);
    if (j.contains("drug_mapping")) {
      const auto& m = j.at("drug_mapping");
      std::filesystem::path p = m.at("path").get<std::string>();
      cfg.drug_mapping = p.is_absolute() ? p : base / p;
      cfg.mapping_source_column = m.value("source", cfg.mapping_source_column);
      cfg.mapping_target_column = m.value("target", cfg.mapping_target_column);
    }
    cfg.top_k_med = j.value("top_k_med", cfg.top_k_med);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed ingest config: ") + e.what());
  }
  return cfg;
}

DatasetBundle ingest_exported_tables(const IngestConfig& config) {
  if (config.top_k_med < 1) throw ValidationError("top_k_med must be >= 1");

  std::unordered_map<std::string, std::string> mapping;
  if (config.drug_mapping) {
    CsvTable table(*config.drug_mapping);
    const auto src = table.column(config.mapping_source_column);
    const auto dst = table.column(config.mapping_target_column);
    std::vector<std::string> row;
    while (table.next(row)) {
      if (!field(row, src).empty() && !field(row, dst).empty()) {
        mapping.try_emplace(field(row, src), field(row, dst));
      }
    }
  }

  std::map<std::string, std::int64_t> med_counts;
  auto meds = read_code_table(config.prescriptions, config.drug_mapping ? &mapping : nullptr,
                              &med_counts);

  // Top-k by occurrence count, ties by code.
  std::vector<std::pair<std::string, std::int64_t>> ranked(med_counts.begin(), med_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(ranked.size()) > config.top_k_med) {
    ranked.resize(static_cast<std::size_t>(config.top_k_med));
  }
  std::set<std::string> kept;
  for (const auto& [code, n] : ranked) kept.insert(code);
  for (auto& [key, codes] : meds) {
    std::erase_if(codes, [&](const std::string& c) { return !kept.count(c); });
  }

  const auto diags = read_code_table(config.diagnoses, nullptr, nullptr);
  const auto procs = read_code_table(config.procedures, nullptr, nullptr);

  struct Admission {
    std::string time;
    std::string id;
  };
  std::map<std::string, std::vector<Admission>> by_subject;
  {
    CsvTable table(config.admissions.path);
    const auto subj = table.column(config.admissions.subject_column);
    const auto adm = table.column(config.admissions.admission_column);
    const auto time = table.column(config.admissions.time_column);
    std::vector<std::string> row;
    while (table.next(row)) {
      AdmissionKey key{field(row, subj), field(row, adm)};
      auto d = diags.find(key);
      auto p = procs.find(key);
      auto m = meds.find(key);
      if (d == diags.end() || p == procs.end() || m == meds.end() || m->second.empty()) continue;
      by_subject[key.first].push_back({field(row, time), key.second});
    }
  }

  std::set<std::string> diag_codes, proc_codes, med_codes;
  std::vector<std::pair<std::string, std::vector<Admission>>> patients;
  for (auto& [subject, admissions] : by_subject) {
    std::sort(admissions.begin(), admissions.end(), [](const Admission& a, const Admission& b) {
      return a.time != b.time ? a.time < b.time : a.id < b.id;
    });
    admissions.erase(std::unique(admissions.begin(), admissions.end(),
                                 [](const Admission& a, const Admission& b) { return a.id == b.id; }),
                     admissions.end());
    if (admissions.size() < 2) continue;
    for (const auto& a : admissions) {
      AdmissionKey key{subject, a.id};
      diag_codes.insert(diags.at(key).begin(), diags.at(key).end());
      proc_codes.insert(procs.at(key).begin(), procs.at(key).end());
      med_codes.insert(meds.at(key).begin(), meds.at(key).end());
    }
    patients.emplace_back(subject, admissions);
  }
  if (patients.empty()) throw ValidationError("no patients with at least 2 visits after filtering");

  DatasetBundle bundle;
  for (const auto& c : diag_codes) bundle.diagnoses.add(c);
  for (const auto& c : proc_codes) bundle.procedures.add(c);
  for (const auto& c : med_codes) bundle.medications.add(c);

  auto to_ids = [](const std::set<std::string>& codes, const CodeVocabulary& vocab) {
    std::vector<int> ids;
    for (const auto& c : codes) ids.push_back(vocab.id(c));
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  for (const auto& [subject, admissions] : patients) {
    PatientRecord rec;
    rec.patient_id = subject;
    for (const auto& a : admissions) {
      AdmissionKey key{subject, a.id};
      rec.visits.push_back(Visit{to_ids(diags.at(key), bundle.diagnoses),
                                 to_ids(procs.at(key), bundle.procedures),
                                 to_ids(meds.at(key), bundle.medications)});
    }
    bundle.train.push_back(std::move(rec));
  }
  bundle.med_frequency = count_med_frequency(bundle.train, bundle.num_medications());
  return bundle;
}

}  // namespace cognet
