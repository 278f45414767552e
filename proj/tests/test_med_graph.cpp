#include "cognet/med_graph.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace cognet;
namespace fs = std::filesystem;

namespace {

Matrix rnd(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

// Elementwise normalization with explicit degree sums.
Matrix normalize_oracle(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix hat = a + Matrix::Identity(n, n);
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out(i, j) = hat(i, j) / std::sqrt(hat.row(i).sum() * hat.row(j).sum());
    }
  }
  return out;
}

Matrix relations_oracle(const Matrix& e, const Matrix& ae, const Matrix& ad, const Matrix& we,
                        const Matrix& wd, double lambda) {
  auto branch = [&](const Matrix& a, const Matrix& w) {
    const Matrix n = normalize_oracle(a);
    return Matrix(n * (Matrix(n * e).cwiseMax(0.0) * w));
  };
  return branch(ae, we) - lambda * branch(ad, wd);
}

CodeVocabulary meds(int n) {
  CodeVocabulary v(CodeKind::medication);
  for (int i = 0; i < n; ++i) v.add("M" + std::to_string(i));
  return v;
}

fs::path temp_file(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / ("cognet_graph_" + name);
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(EhrGraph, SingleVisitPair) {
  std::vector<PatientRecord> train{{"p", {Visit{{0}, {}, {0, 1}}}}};
  Matrix expect = Matrix::Zero(4, 4);
  expect(0, 1) = expect(1, 0) = 1;
  EXPECT_EQ(build_ehr_graph(train, 4), expect);
}

TEST(EhrGraph, SingletonVisitsGiveEmptyGraph) {
  std::vector<PatientRecord> train{{"p", {Visit{{0}, {}, {0}}, Visit{{0}, {}, {2}}}}};
  EXPECT_EQ(build_ehr_graph(train, 4), Matrix::Zero(4, 4));
}

TEST(EhrGraph, MatchesNestedLoopOracle) {
  const auto b = generate_synthetic_cohort(100, 0.6, 3);
  const int n = b.num_medications();
  Matrix expect = Matrix::Zero(n, n);
  for (const auto& p : b.train) {
    for (const auto& v : p.visits) {
      for (int x : v.medications) {
        for (int y : v.medications) {
          if (x != y) expect(x, y) = 1.0;
        }
      }
    }
  }
  const Matrix a = build_ehr_graph(b.train, n);
  EXPECT_EQ(a, expect);
  EXPECT_EQ(a, a.transpose());
  EXPECT_EQ(a.diagonal().sum(), 0.0);
}

TEST(DdiGraph, EdgesSymmetricAndIdempotent) {
  const auto v = meds(5);
  const auto once = load_ddi_graph(temp_file("once.csv", "M0,M1\n"), v);
  EXPECT_EQ((once.adjacency.array() != 0).count(), 2);
  EXPECT_EQ(once.pair_count, 1);
  const auto twice = load_ddi_graph(temp_file("twice.csv", "# header comment\nM0,M1\nM1,M0\n\nM0,M1\n"), v);
  EXPECT_EQ(twice.adjacency, once.adjacency);
  const auto empty = load_ddi_graph(temp_file("empty.csv", ""), v);
  EXPECT_EQ(empty.adjacency, Matrix::Zero(5, 5));
}

TEST(DdiGraph, UnknownCodesSkippedAndCounted) {
  const auto g = load_ddi_graph(temp_file("unknown.csv", "atc_a,atc_b\nM0,Z9\nM2,M3\n"), meds(5));
  EXPECT_EQ(g.skipped_edges, 2);
  EXPECT_EQ(g.pair_count, 1);
  EXPECT_THROW(load_ddi_graph(fs::temp_directory_path() / "cognet_no_such_file.csv", meds(5)),
               ValidationError);
}

TEST(Gcn, IsolatedNodesAreIdentity) {
  std::mt19937_64 rng(1);
  const Matrix x = rnd(rng, 2, 3);
  EXPECT_LT((gcn_layer(x, Matrix::Zero(2, 2)) - x).norm(), 1e-15);
}

TEST(Gcn, TwoNodeAverage) {
  Matrix a(2, 2), x(2, 2);
  a << 0, 1, 1, 0;
  x << 1, 0, 0, 1;
  EXPECT_LT((normalized_adjacency(a) - Matrix::Constant(2, 2, 0.5)).norm(), 1e-15);
  EXPECT_LT((gcn_layer(x, a) - Matrix::Constant(2, 2, 0.5)).norm(), 1e-15);
}

TEST(Gcn, PathGraphMatchesOracleAndIsEquivariant) {
  std::mt19937_64 rng(2);
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = a(1, 0) = a(1, 2) = a(2, 1) = 1;
  const Matrix x = rnd(rng, 3, 4);
  EXPECT_LT((gcn_layer(x, a) - normalize_oracle(a) * x).cwiseAbs().maxCoeff(), 1e-9);

  const Matrix big = cognet::testing::random_graph(rng, 7, 0.4);
  const Matrix bx = rnd(rng, 7, 3);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(7);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 7, rng);
  const Matrix pa = perm * big * perm.transpose();
  EXPECT_LT((gcn_layer(Matrix(perm * bx), pa) - perm * gcn_layer(bx, big)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gcn, DimensionMismatch) {
  EXPECT_THROW(gcn_layer(Matrix::Zero(3, 2), Matrix::Zero(2, 2)), std::invalid_argument);
}

class RelationTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 init(5);
    p = make_graph_encoder(ps, 4, init);
    graphs = {cognet::testing::random_graph(rng, 6, 0.5), cognet::testing::random_graph(rng, 6, 0.3)};
    e = rnd(rng, 6, 4);
  }
  Matrix run() {
    ad::Tape t;
    return encode_medication_relations(t.constant(e), GraphOperators::from(graphs), p).value();
  }
  std::mt19937_64 rng{4};
  ad::ParameterSet ps;
  GraphEncoderParams p;
  MedGraphPair graphs;
  Matrix e;
};

TEST_F(RelationTest, LambdaInitAndZeroLambda) {
  EXPECT_DOUBLE_EQ(ps.get("graph.lambda").value(0, 0), 0.1);
  ps.get("graph.lambda").value(0, 0) = 0.0;
  const Matrix ge = relations_oracle(e, graphs.ehr, graphs.ddi, p.w_ehr->value, p.w_ddi->value, 0.0);
  EXPECT_EQ(run(), run());
  EXPECT_LT((run() - ge).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(RelationTest, IdenticalBranchesCancel) {
  graphs.ddi = graphs.ehr;
  ps.get("graph.w_ddi").value = ps.get("graph.w_ehr").value;
  ps.get("graph.lambda").value(0, 0) = 1.0;
  EXPECT_EQ(run(), Matrix::Zero(6, 4));
}

TEST_F(RelationTest, MatchesStraightLineOracle) {
  ps.get("graph.lambda").value(0, 0) = -0.37;
  const Matrix expect = relations_oracle(e, graphs.ehr, graphs.ddi, p.w_ehr->value, p.w_ddi->value, -0.37);
  EXPECT_LT((run() - expect).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(AdjacencyIo, RoundTripWithHash) {
  std::mt19937_64 rng(6);
  const Matrix a = cognet::testing::random_graph(rng, 9, 0.3);
  const fs::path p = fs::temp_directory_path() / "cognet_adj.bin";
  write_adjacency(p, a, 0xabcdef0123456789ULL);
  std::uint64_t h = 0;
  EXPECT_EQ(read_adjacency(p, &h), a);
  EXPECT_EQ(h, 0xabcdef0123456789ULL);
}
