#pragma once

#include "cognet/common.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cognet {

enum class CodeKind { diagnosis, procedure, medication };

std::string_view to_string(CodeKind kind);

// Bijection between clinical code strings and dense ids 0..size-1.
//
// The medication vocabulary additionally reserves two decoder tokens, START
// and END, at ids size() and size()+1. They have no code string and are not
// part of size(), so graphs and metrics only ever see clinical ids.
class CodeVocabulary {
 public:
  explicit CodeVocabulary(CodeKind kind = CodeKind::diagnosis) : kind_(kind) {}

  // Returns the existing id for `code` or appends a new one.
  int add(std::string_view code);
  std::optional<int> find(std::string_view code) const;
  int id(std::string_view code) const;  // throws ValidationError if unknown
  const std::string& code(int id) const;

  int size() const { return static_cast<int>(codes_.size()); }
  CodeKind kind() const { return kind_; }
  const std::vector<std::string>& codes() const { return codes_; }

  // Stable fingerprint of (kind, ordered codes).
  std::uint64_t hash() const;

  bool operator==(const CodeVocabulary& other) const {
    return kind_ == other.kind_ && codes_ == other.codes_;
  }

 private:
  CodeKind kind_;
  std::vector<std::string> codes_;
  std::unordered_map<std::string, int> index_;
};

inline int start_token(int num_meds) { return num_meds; }
inline int end_token(int num_meds) { return num_meds + 1; }

struct Visit {
  std::vector<int> diagnoses;    // sorted, unique
  std::vector<int> procedures;   // sorted, unique, may be empty
  std::vector<int> medications;  // duplicate-free, order set by a LabelOrder

  bool operator==(const Visit&) const = default;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;  // chronological

  bool operator==(const PatientRecord&) const = default;
};

struct DatasetBundle {
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> validation;
  std::vector<PatientRecord> test;
  CodeVocabulary diagnoses{CodeKind::diagnosis};
  CodeVocabulary procedures{CodeKind::procedure};
  CodeVocabulary medications{CodeKind::medication};
  // Visit-level occurrence count per medication id, over the train split only.
  std::vector<std::int64_t> med_frequency;

  int num_diagnoses() const { return diagnoses.size(); }
  int num_procedures() const { return procedures.size(); }
  int num_medications() const { return medications.size(); }

  std::vector<const PatientRecord*> all_patients() const;
};

// Checks id bounds, set sortedness, non-empty diagnoses/medications and split
// disjointness. Throws ValidationError on the first violation.
void validate(const DatasetBundle& bundle);

std::vector<std::int64_t> count_med_frequency(const std::vector<PatientRecord>& patients,
                                              int num_meds);

// ---------------------------------------------------------------------------
// Synthetic cohort

struct VocabSizes {
  int diagnoses = 40;
  int procedures = 20;
  int medications = 30;
};

// Fixed diagnosis -> medication rules used by the synthetic generator. Entry d
// lists the medications implied by diagnosis d (one or two ids).
std::vector<std::vector<int>> synthetic_rule_table(int num_diagnoses, int num_meds);

inline constexpr int kSyntheticMinVisits = 2;
inline constexpr int kSyntheticMaxVisits = 5;
inline constexpr int kSyntheticMaxDiagnoses = 8;
inline constexpr int kSyntheticMaxProcedures = 4;
inline constexpr int kSyntheticMaxMeds = 10;

// Builds the medication list of one synthetic visit: carried-over medications
// first (in the order given), then rule medications of `diagnoses` in ascending
// diagnosis order, truncated to kSyntheticMaxMeds. Returned sorted by id.
std::vector<int> synthetic_visit_meds(const std::vector<int>& carried,
                                      const std::vector<int>& diagnoses,
                                      const std::vector<std::vector<int>>& rules);

// All patients land in `train`; call split_dataset afterwards.
DatasetBundle generate_synthetic_cohort(int n_patients, double persistence, std::uint64_t seed,
                                        VocabSizes sizes = {});

// Random symmetric DDI pairs over the synthetic medication codes, as code
// pairs ready to be written as an edge list.
std::vector<std::pair<std::string, std::string>> synthetic_ddi_pairs(
    const CodeVocabulary& meds, int n_pairs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Ingestion of exported admission/diagnosis/procedure/prescription tables

struct TableSpec {
  std::filesystem::path path;
  std::string subject_column = "SUBJECT_ID";
  std::string admission_column = "HADM_ID";
  std::string code_column;  // diagnosis/procedure/prescription tables
  std::string time_column;  // admissions table
};

struct IngestConfig {
  TableSpec admissions{{}, "SUBJECT_ID", "HADM_ID", "", "ADMITTIME"};
  TableSpec diagnoses{{}, "SUBJECT_ID", "HADM_ID", "ICD9_CODE", ""};
  TableSpec procedures{{}, "SUBJECT_ID", "HADM_ID", "ICD9_CODE", ""};
  TableSpec prescriptions{{}, "SUBJECT_ID", "HADM_ID", "NDC", ""};
  // Optional two-column CSV mapping raw drug codes to the target level.
  std::optional<std::filesystem::path> drug_mapping;
  std::string mapping_source_column = "NDC";
  std::string mapping_target_column = "ATC";
  int top_k_med = 300;
};

// Reads the JSON config format documented in the README. Relative table paths
// resolve against the config file's directory.
IngestConfig load_ingest_config(const std::filesystem::path& path);

DatasetBundle ingest_exported_tables(const IngestConfig& config);

// ---------------------------------------------------------------------------
// Splitting and label ordering

// Patient-level shuffle then floor/floor/remainder assignment. Recomputes
// med_frequency on the new train split.
DatasetBundle split_dataset(const DatasetBundle& bundle, double train_ratio, double val_ratio,
                            double test_ratio, std::uint64_t seed);

enum class LabelOrder { rare_first, frequent_first, early_first, late_first };

LabelOrder parse_label_order(std::string_view name);
std::string_view to_string(LabelOrder order);

DatasetBundle order_medications(const DatasetBundle& bundle, LabelOrder order);

// ---------------------------------------------------------------------------
// Corpus statistics

struct VisitOverlap {
  double repeated_proportion;  // |cur & hist| / |cur|
  double jaccard;              // |cur & hist| / |cur | hist|
};

// std::nullopt when `history` is empty.
std::optional<VisitOverlap> visit_overlap(const std::vector<int>& current,
                                          const std::vector<int>& history);

struct CorpusStatistics {
  std::vector<double> repeated_proportion;  // one entry per visit with history
  std::vector<double> history_jaccard;
  std::int64_t num_patients = 0;
  std::int64_t num_visits = 0;
  int num_diagnosis_codes = 0;
  int num_procedure_codes = 0;
  int num_medication_codes = 0;
  double avg_visits = 0;
  int max_visits = 0;
  double avg_diagnoses = 0;
  int max_diagnoses = 0;
  double avg_procedures = 0;
  int max_procedures = 0;
  double avg_medications = 0;
  int max_medications = 0;
};

CorpusStatistics corpus_statistics(const DatasetBundle& bundle);

// Equal-width bins over [0, 1]; value 1.0 lands in the last bin.
std::vector<std::int64_t> histogram(const std::vector<double>& values, int bins);

// ---------------------------------------------------------------------------
// Files

// train.jsonl / validation.jsonl / test.jsonl plus vocab.json in `dir`.
void write_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle);
DatasetBundle read_dataset(const std::filesystem::path& dir);

std::string patient_to_json_line(const PatientRecord& patient);
PatientRecord patient_from_json_line(std::string_view line);

}  // namespace cognet
