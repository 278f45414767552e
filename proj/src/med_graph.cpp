#include "cognet/med_graph.hpp"

#include "cognet/nn.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace cognet {

Matrix build_ehr_graph(const std::vector<PatientRecord>& train, int num_meds) {
  Matrix a = Matrix::Zero(num_meds, num_meds);
  for (const auto& p : train) {
    for (const auto& v : p.visits) {
      for (int i : v.medications) {
        for (int j : v.medications) {
          if (i != j) a(i, j) = 1.0;
        }
      }
    }
  }
  return a;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

void set_pair(DdiGraph& g, int a, int b) {
  if (a == b) return;
  if (g.adjacency(a, b) == 0.0) ++g.pair_count;
  g.adjacency(a, b) = 1.0;
  g.adjacency(b, a) = 1.0;
}

}  // namespace

DdiGraph ddi_graph_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                              const CodeVocabulary& meds) {
  DdiGraph g;
  g.adjacency = Matrix::Zero(meds.size(), meds.size());
  for (const auto& [x, y] : pairs) {
    auto a = meds.find(x);
    auto b = meds.find(y);
    if (!a || !b) {
      ++g.skipped_edges;
      continue;
    }
    set_pair(g, *a, *b);
  }
  return g;
}

DdiGraph load_ddi_graph(const std::filesystem::path& edge_list, const CodeVocabulary& meds) {
  std::ifstream in(edge_list);
  if (!in) throw ValidationError("cannot read DDI edge list " + edge_list.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) {
      pairs.emplace_back(t, std::string());
      continue;
    }
    pairs.emplace_back(trim(t.substr(0, comma)), trim(t.substr(comma + 1)));
  }
  return ddi_graph_from_pairs(pairs, meds);
}

void write_ddi_edge_list(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out;
  for (const auto& [a, b] : pairs) out += a + "," + b + "\n";
  write_file_atomic(path, out);
}

Matrix normalized_adjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw std::invalid_argument("adjacency must be square");
  }
  Matrix a_hat = adjacency + Matrix::Identity(adjacency.rows(), adjacency.cols());
  const Eigen::VectorXd inv_sqrt = a_hat.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * a_hat * inv_sqrt.asDiagonal();
}

ad::Var gcn_layer(ad::Var features, const Matrix& normalized) {
  if (normalized.cols() != features.rows()) {
    throw std::invalid_argument("gcn_layer: adjacency does not match feature rows");
  }
  return ad::matmul(features.tape->constant(normalized), features);
}

Matrix gcn_layer(const Matrix& features, const Matrix& adjacency) {
  if (adjacency.rows() != features.rows()) {
    throw std::invalid_argument("gcn_layer: adjacency does not match feature rows");
  }
  return normalized_adjacency(adjacency) * features;
}

GraphOperators GraphOperators::from(const MedGraphPair& graphs) {
  return GraphOperators{normalized_adjacency(graphs.ehr), normalized_adjacency(graphs.ddi)};
}

GraphEncoderParams make_graph_encoder(ad::ParameterSet& params, int dim, std::mt19937_64& rng) {
  const double b = 1.0 / std::sqrt(static_cast<double>(dim));
  GraphEncoderParams g;
  g.w_ehr = &params.add("graph.w_ehr", uniform_init(dim, dim, b, rng));
  g.w_ddi = &params.add("graph.w_ddi", uniform_init(dim, dim, b, rng));
  g.lambda = &params.add("graph.lambda", Matrix::Constant(1, 1, kInitialLambda));
  return g;
}

ad::Var encode_medication_relations(ad::Var med_embeddings, const GraphOperators& graphs,
                                    const GraphEncoderParams& params) {
  ad::Tape& t = *med_embeddings.tape;
  auto branch = [&](const Matrix& norm, const ad::Parameter& w) {
    ad::Var first = ad::relu(gcn_layer(med_embeddings, norm));
    return gcn_layer(ad::matmul(first, t.param(w)), norm);
  };
  ad::Var g_ehr = branch(graphs.ehr, *params.w_ehr);
  ad::Var g_ddi = branch(graphs.ddi, *params.w_ddi);
  return ad::sub(g_ehr, ad::scale_by(g_ddi, t.param(*params.lambda)));
}

void write_adjacency(const std::filesystem::path& path, const Matrix& adjacency,
                     std::uint64_t vocab_hash) {
  const nlohmann::json header = {{"shape", {adjacency.rows(), adjacency.cols()}},
                                 {"vocab_hash", hex64(vocab_hash)},
                                 {"dtype", "uint8"}};
  std::string out = header.dump() + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(adjacency.size()));
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j) {
      out.push_back(adjacency(i, j) != 0.0 ? '\1' : '\0');
    }
  }
  write_file_atomic(path, out);
}

Matrix read_adjacency(const std::filesystem::path& path, std::uint64_t* vocab_hash) {
  const std::string data = read_text_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw ValidationError("adjacency file without header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(data.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad adjacency header: ") + e.what());
  }
  const auto rows = header.at("shape").at(0).get<Eigen::Index>();
  const auto cols = header.at("shape").at(1).get<Eigen::Index>();
  if (static_cast<Eigen::Index>(data.size() - nl - 1) != rows * cols) {
    throw ValidationError("adjacency payload size does not match its shape");
  }
  if (vocab_hash) *vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);
  Matrix a(rows, cols);
  const char* p = data.data() + nl + 1;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = *p++ ? 1.0 : 0.0;
  }
  return a;
}

}  // namespace cognet
