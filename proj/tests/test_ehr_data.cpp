#include "cognet/ehr_data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace cognet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cognet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Expected |cur & prev| / |cur| given prev meds and current diagnoses,
// enumerating every carry-over subset.
double expected_repeat_fraction(const std::vector<int>& prev, const std::vector<int>& diagnoses,
                                const std::vector<std::vector<int>>& rules, double persistence) {
  const int n = static_cast<int>(prev.size());
  double e = 0.0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> meds;
    int kept = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) {
        meds.push_back(prev[static_cast<std::size_t>(i)]);
        ++kept;
      }
    }
    for (int d : diagnoses) {
      for (int m : rules[static_cast<std::size_t>(d)]) {
        if (meds.size() < 10 && std::find(meds.begin(), meds.end(), m) == meds.end()) meds.push_back(m);
      }
    }
    int repeated = 0;
    for (int m : meds) repeated += std::count(prev.begin(), prev.end(), m) > 0;
    const double w = std::pow(persistence, kept) * std::pow(1.0 - persistence, n - kept);
    e += w * static_cast<double>(repeated) / static_cast<double>(meds.size());
  }
  return e;
}

DatasetBundle frequency_bundle(const std::vector<std::int64_t>& freq) {
  DatasetBundle b;
  for (std::size_t i = 0; i < freq.size(); ++i) b.medications.add("M" + std::to_string(i));
  b.diagnoses.add("D0");
  b.procedures.add("P0");
  b.med_frequency = freq;
  return b;
}

}  // namespace

TEST(Vocabulary, BijectionAndContiguousIds) {
  CodeVocabulary v(CodeKind::medication);
  EXPECT_EQ(v.add("A"), 0);
  EXPECT_EQ(v.add("B"), 1);
  EXPECT_EQ(v.add("A"), 0);
  EXPECT_EQ(v.size(), 2);
  for (int i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.code(i)), i);
  EXPECT_EQ(start_token(v.size()), 2);
  EXPECT_EQ(end_token(v.size()), 3);
  EXPECT_THROW(v.id("missing"), ValidationError);
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  const auto a = generate_synthetic_cohort(100, 0.7, 7);
  const auto b = generate_synthetic_cohort(100, 0.7, 7);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(patient_to_json_line(a.train[i]), patient_to_json_line(b.train[i]));
  }
}

TEST(Synthetic, ShapeConstraints) {
  const auto b = generate_synthetic_cohort(300, 0.5, 3);
  validate(b);
  for (const auto& p : b.train) {
    EXPECT_GE(p.visits.size(), 2u);
    EXPECT_LE(p.visits.size(), 5u);
    for (const auto& v : p.visits) {
      EXPECT_GE(v.diagnoses.size(), 1u);
      EXPECT_LE(v.diagnoses.size(), 8u);
      EXPECT_LE(v.procedures.size(), 4u);
      EXPECT_GE(v.medications.size(), 1u);
      EXPECT_LE(v.medications.size(), 10u);
    }
  }
}

TEST(Synthetic, FullPersistenceCarriesEveryMedication) {
  const auto b = generate_synthetic_cohort(200, 1.0, 11);
  for (const auto& p : b.train) {
    for (std::size_t t = 1; t < p.visits.size(); ++t) {
      const std::set<int> cur(p.visits[t].medications.begin(), p.visits[t].medications.end());
      for (int m : p.visits[t - 1].medications) EXPECT_TRUE(cur.count(m));
    }
  }
}

TEST(Synthetic, RepeatFractionMatchesEnumeratedExpectation) {
  const double persistence = 0.7;
  const auto b = generate_synthetic_cohort(1000, persistence, 7);
  const auto rules = synthetic_rule_table(b.num_diagnoses(), b.num_medications());
  double empirical = 0.0, expected = 0.0;
  int n = 0;
  for (const auto& p : b.train) {
    for (std::size_t t = 1; t < p.visits.size(); ++t) {
      const auto& prev = p.visits[t - 1].medications;
      const auto& cur = p.visits[t].medications;
      int rep = 0;
      for (int m : cur) rep += std::count(prev.begin(), prev.end(), m) > 0;
      empirical += static_cast<double>(rep) / static_cast<double>(cur.size());
      expected += expected_repeat_fraction(prev, p.visits[t].diagnoses, rules, persistence);
      ++n;
    }
  }
  EXPECT_NEAR(empirical / n, expected / n, 0.05);
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(generate_synthetic_cohort(10, 1.5, 1), ValidationError);
  EXPECT_THROW(generate_synthetic_cohort(10, -0.1, 1), ValidationError);
  EXPECT_THROW(generate_synthetic_cohort(0, 0.5, 1), ValidationError);
  EXPECT_THROW(generate_synthetic_cohort(10, 0.5, 1, {3, 10, 10}), ValidationError);
}

TEST(Split, SizesFollowFloorPolicy) {
  const auto four = split_dataset(generate_synthetic_cohort(4, 0.5, 1), 2, 1, 1, 5);
  EXPECT_EQ(four.train.size(), 2u);
  EXPECT_EQ(four.validation.size(), 1u);
  EXPECT_EQ(four.test.size(), 1u);

  const auto big = split_dataset(generate_synthetic_cohort(6350, 0.5, 1), 2.0 / 3, 1.0 / 6, 1.0 / 6, 5);
  EXPECT_EQ(big.train.size(), 4233u);
  EXPECT_EQ(big.validation.size(), 1058u);
  EXPECT_EQ(big.test.size(), 1059u);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto all = generate_synthetic_cohort(60, 0.5, 2);
  const auto a = split_dataset(all, 2.0 / 3, 1.0 / 6, 1.0 / 6, 9);
  const auto b = split_dataset(all, 2.0 / 3, 1.0 / 6, 1.0 / 6, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::string> ids;
  for (const auto* p : a.all_patients()) EXPECT_TRUE(ids.insert(p->patient_id).second);
  EXPECT_EQ(ids.size(), 60u);
  EXPECT_EQ(a.med_frequency, count_med_frequency(a.train, a.num_medications()));
}

TEST(Split, RejectsNonPositiveRatio) {
  const auto all = generate_synthetic_cohort(10, 0.5, 2);
  EXPECT_THROW(split_dataset(all, 1, 0, 1, 1), ValidationError);
  EXPECT_THROW(split_dataset(all, 1, -1, 1, 1), ValidationError);
}

TEST(Ordering, FrequencyHeuristics) {
  auto b = frequency_bundle({5, 1, 3});  // a=0, b=1, c=2
  b.train.push_back({"p", {Visit{{0}, {}, {0, 1, 2}}}});
  EXPECT_EQ(order_medications(b, LabelOrder::rare_first).train[0].visits[0].medications,
            (std::vector<int>{1, 2, 0}));
  EXPECT_EQ(order_medications(b, LabelOrder::frequent_first).train[0].visits[0].medications,
            (std::vector<int>{0, 2, 1}));
}

TEST(Ordering, FirstOccurrenceHeuristics) {
  auto b = frequency_bundle({1, 1, 1});
  const int x = 2, y = 0;
  b.train.push_back({"p", {Visit{{0}, {}, {x}}, Visit{{0}, {}, {y, x}}}});
  EXPECT_EQ(order_medications(b, LabelOrder::early_first).train[0].visits[1].medications,
            (std::vector<int>{x, y}));
  EXPECT_EQ(order_medications(b, LabelOrder::late_first).train[0].visits[1].medications,
            (std::vector<int>{y, x}));
}

TEST(Ordering, PermutationAndReversalProperties) {
  std::mt19937_64 rng(4);
  auto all = generate_synthetic_cohort(80, 0.6, 4);
  auto b = split_dataset(all, 2.0 / 3, 1.0 / 6, 1.0 / 6, 4);
  // Distinct frequencies make rare_first the exact reverse of frequent_first.
  std::vector<std::int64_t> freq(static_cast<std::size_t>(b.num_medications()));
  std::iota(freq.begin(), freq.end(), 1);
  std::shuffle(freq.begin(), freq.end(), rng);
  b.med_frequency = freq;
  const auto rare = order_medications(b, LabelOrder::rare_first);
  const auto freqf = order_medications(b, LabelOrder::frequent_first);
  for (LabelOrder o : {LabelOrder::rare_first, LabelOrder::frequent_first, LabelOrder::early_first,
                       LabelOrder::late_first}) {
    const auto ordered = order_medications(b, o);
    for (std::size_t p = 0; p < b.train.size(); ++p) {
      for (std::size_t t = 0; t < b.train[p].visits.size(); ++t) {
        auto x = ordered.train[p].visits[t].medications;
        auto y = b.train[p].visits[t].medications;
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        EXPECT_EQ(x, y);
      }
    }
  }
  for (std::size_t p = 0; p < b.train.size(); ++p) {
    for (std::size_t t = 0; t < b.train[p].visits.size(); ++t) {
      auto r = rare.train[p].visits[t].medications;
      std::reverse(r.begin(), r.end());
      EXPECT_EQ(r, freqf.train[p].visits[t].medications);
    }
  }
}

TEST(Ordering, ParseNames) {
  EXPECT_EQ(parse_label_order("rare_first"), LabelOrder::rare_first);
  EXPECT_EQ(parse_label_order("late_first"), LabelOrder::late_first);
  EXPECT_EQ(to_string(LabelOrder::early_first), "early_first");
  EXPECT_THROW(parse_label_order("random"), ValidationError);
}

TEST(CorpusStats, OverlapArithmetic) {
  const auto o = visit_overlap({0, 1}, {1, 2});
  ASSERT_TRUE(o.has_value());
  EXPECT_DOUBLE_EQ(o->repeated_proportion, 0.5);
  EXPECT_DOUBLE_EQ(o->jaccard, 1.0 / 3.0);
  EXPECT_FALSE(visit_overlap({0, 1}, {}).has_value());
}

TEST(CorpusStats, FirstVisitsExcludedAndFloorHolds) {
  const auto b = generate_synthetic_cohort(200, 1.0, 5);
  const auto stats = corpus_statistics(b);
  std::size_t with_history = 0;
  for (const auto& p : b.train) with_history += p.visits.size() - 1;
  EXPECT_EQ(stats.repeated_proportion.size(), with_history);
  // Every carried medication survives, and at most 10 meds exist per visit.
  for (double r : stats.repeated_proportion) EXPECT_GE(r, 0.1);
  EXPECT_EQ(stats.num_patients, 200);
}

TEST(CorpusStats, Histogram) {
  const auto h = histogram({0.0, 0.24, 0.25, 0.99, 1.0}, 4);
  EXPECT_EQ(h, (std::vector<std::int64_t>{2, 1, 0, 2}));
}

TEST(DatasetIo, RoundTripIsIdentity) {
  const auto dir = temp_dir("roundtrip");
  const auto b = split_dataset(generate_synthetic_cohort(40, 0.5, 8), 2.0 / 3, 1.0 / 6, 1.0 / 6, 8);
  write_dataset(dir, b);
  const auto r = read_dataset(dir);
  EXPECT_EQ(r.train, b.train);
  EXPECT_EQ(r.validation, b.validation);
  EXPECT_EQ(r.test, b.test);
  EXPECT_EQ(r.medications, b.medications);
  EXPECT_EQ(r.diagnoses, b.diagnoses);
  EXPECT_EQ(r.procedures, b.procedures);
  EXPECT_EQ(r.med_frequency, b.med_frequency);
}

TEST(DatasetIo, JsonLineShape) {
  PatientRecord p{"X1", {Visit{{1, 2}, {}, {3, 0}}}};
  EXPECT_EQ(patient_to_json_line(p),
            R"({"patient_id":"X1","visits":[{"diag":[1,2],"proc":[],"meds":[3,0]}]})");
  EXPECT_EQ(patient_from_json_line(patient_to_json_line(p)), p);
}

class IngestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = temp_dir("ingest");
    write(dir_ / "adm.csv",
          "SUBJECT_ID,HADM_ID,ADMITTIME\n"
          "1,10,2100-01-05\n1,11,2100-01-01\n"
          "2,20,2100-02-01\n"
          "3,30,2100-03-01\n3,31,2100-03-09\n");
    write(dir_ / "diag.csv",
          "SUBJECT_ID,HADM_ID,ICD9_CODE\n"
          "1,10,d1\n1,11,d2\n2,20,d1\n3,30,d3\n3,31,d1\n");
    write(dir_ / "proc.csv",
          "SUBJECT_ID,HADM_ID,ICD9_CODE\n"
          "1,10,p1\n1,11,p1\n2,20,p2\n3,30,p1\n3,31,p2\n");
    // A:5 rows, B:1, C:3
    write(dir_ / "rx.csv",
          "SUBJECT_ID,HADM_ID,NDC\n"
          "1,10,A\n1,10,C\n1,11,A\n1,11,B\n2,20,A\n3,30,A\n3,30,C\n3,31,A\n3,31,C\n");
    cfg_.admissions.path = dir_ / "adm.csv";
    cfg_.diagnoses.path = dir_ / "diag.csv";
    cfg_.procedures.path = dir_ / "proc.csv";
    cfg_.prescriptions.path = dir_ / "rx.csv";
    cfg_.top_k_med = 2;
  }
  fs::path dir_;
  IngestConfig cfg_;
};

TEST_F(IngestTest, TopKAndVisitFilter) {
  const auto b = ingest_exported_tables(cfg_);
  EXPECT_EQ(b.medications.codes(), (std::vector<std::string>{"A", "C"}));
  ASSERT_EQ(b.train.size(), 2u);  // subject 2 has a single admission
  for (const auto& p : b.train) EXPECT_NE(p.patient_id, "2");
  // Subject 1's admissions come back in time order: 11 then 10.
  const auto& p1 = b.train[0].patient_id == "1" ? b.train[0] : b.train[1];
  EXPECT_EQ(b.diagnoses.code(p1.visits[0].diagnoses[0]), "d2");
  EXPECT_EQ(p1.visits[0].medications, (std::vector<int>{b.medications.id("A")}));
}

TEST_F(IngestTest, DrugMappingApplied) {
  write(dir_ / "map.csv", "NDC,ATC\nA,X01\nB,X01\nC,Y02\n");
  cfg_.drug_mapping = dir_ / "map.csv";
  const auto b = ingest_exported_tables(cfg_);
  EXPECT_EQ(b.medications.codes(), (std::vector<std::string>{"X01", "Y02"}));
}

TEST_F(IngestTest, MissingColumnRejected) {
  cfg_.prescriptions.code_column = "DRUG";
  EXPECT_THROW(ingest_exported_tables(cfg_), ValidationError);
}
