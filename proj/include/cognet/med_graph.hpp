#pragma once

#include "cognet/autodiff.hpp"
#include "cognet/ehr_data.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace cognet {

// Binary symmetric |M| x |M| adjacencies over clinical medication ids.
struct MedGraphPair {
  Matrix ehr;  // co-occurrence in at least one training visit
  Matrix ddi;  // known interacting pairs
};

// A_e[i,j] = 1 iff medications i != j share a visit in `train`.
Matrix build_ehr_graph(const std::vector<PatientRecord>& train, int num_meds);

struct DdiGraph {
  Matrix adjacency;
  int pair_count = 0;     // distinct unordered pairs set
  int skipped_edges = 0;  // rows naming codes outside the vocabulary
};

// Two-column CSV of medication codes, one interacting pair per row. Blank
// lines and lines starting with '#' are ignored; rows naming unknown codes
// (including a header row) are counted in skipped_edges.
DdiGraph load_ddi_graph(const std::filesystem::path& edge_list, const CodeVocabulary& meds);
DdiGraph ddi_graph_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                              const CodeVocabulary& meds);
void write_ddi_edge_list(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::string>>& pairs);

// O^-1/2 (A + I) O^-1/2 with O the degree matrix of A + I.
Matrix normalized_adjacency(const Matrix& adjacency);

// GCN(X, A) with the normalization precomputed; the outer activation is the
// identity.
ad::Var gcn_layer(ad::Var features, const Matrix& normalized);

// Convenience overload that normalizes `adjacency` on the fly.
Matrix gcn_layer(const Matrix& features, const Matrix& adjacency);

struct GraphOperators {
  Matrix ehr;  // normalized
  Matrix ddi;

  static GraphOperators from(const MedGraphPair& graphs);
};

struct GraphEncoderParams {
  const ad::Parameter* w_ehr = nullptr;  // s x s
  const ad::Parameter* w_ddi = nullptr;  // s x s
  const ad::Parameter* lambda = nullptr; // 1 x 1
};

inline constexpr double kInitialLambda = 0.1;

GraphEncoderParams make_graph_encoder(ad::ParameterSet& params, int dim, std::mt19937_64& rng);

// E_g = G_e - lambda * G_d with G_x = GCN(ReLU(GCN(E_m, A_x)) W_x, A_x).
// `med_embeddings` holds the |M| clinical rows only.
ad::Var encode_medication_relations(ad::Var med_embeddings, const GraphOperators& graphs,
                                    const GraphEncoderParams& params);

// Dense 0/1 export: one JSON header line {"shape","vocab_hash","dtype"} then
// rows*cols bytes in row-major order.
void write_adjacency(const std::filesystem::path& path, const Matrix& adjacency,
                     std::uint64_t vocab_hash);
Matrix read_adjacency(const std::filesystem::path& path, std::uint64_t* vocab_hash = nullptr);

}  // namespace cognet
