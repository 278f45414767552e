#include "cognet/beam_search.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace cognet;
using namespace cognet::testing;

namespace {

// Pseudo-random but prefix-deterministic distribution over `vocab` tokens with
// START (= vocab - 2) excluded and already generated tokens masked.
StepFunction random_table(std::uint64_t seed, int vocab, bool mask_generated = true) {
  return [=](std::span<const int> prefix) {
    std::uint64_t h = seed;
    for (int t : prefix) h = h * 1000003ULL + static_cast<std::uint64_t>(t) + 1;
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    RowVector p(vocab);
    for (int i = 0; i < vocab; ++i) p(i) = u(rng);
    p(vocab - 2) = 0.0;
    if (mask_generated) {
      for (std::size_t i = 1; i < prefix.size(); ++i) {
        if (prefix[i] < vocab - 2) p(prefix[i]) = 0.0;
      }
    }
    return RowVector(p / p.sum());
  };
}

struct Best {
  double logp = -1e300;
  std::vector<int> tokens;
};

void enumerate(const StepFunction& step, const SearchLimits& lim, std::vector<int>& prefix, double logp,
               Best& best) {
  const RowVector p = step(prefix);
  for (Eigen::Index tok = 0; tok < p.size(); ++tok) {
    if (!(p(tok) > 0.0)) continue;
    prefix.push_back(static_cast<int>(tok));
    const double lp = logp + std::log(p(tok));
    if (tok == lim.end || static_cast<int>(prefix.size()) - 1 == lim.max_len) {
      if (lp > best.logp || (lp == best.logp && prefix < best.tokens)) best = {lp, prefix};
    } else {
      enumerate(step, lim, prefix, lp, best);
    }
    prefix.pop_back();
  }
}

Best exhaustive(const StepFunction& step, const SearchLimits& lim) {
  Best best;
  std::vector<int> prefix{lim.start};
  enumerate(step, lim, prefix, 0.0, best);
  return best;
}

}  // namespace

TEST(BeamSearch, FindsHigherProbabilitySequenceThanGreedy) {
  const int M = 10, START = 10, END = 11;
  const StepFunction table = [=](std::span<const int> prefix) {
    RowVector p = RowVector::Zero(M + 2);
    if (prefix.size() == 1) {
      p(0) = 0.5;
      p(1) = 0.4;
      p(END) = 0.1;
    } else if (prefix.size() == 2 && prefix[1] == 0) {
      for (int m = 1; m < M; ++m) p(m) = 0.1;
      p(END) = 0.1;
    } else if (prefix.size() == 2 && prefix[1] == 1) {
      p(END) = 0.9;
      p(0) = 0.1;
    } else {
      p(END) = 1.0;
    }
    return p;
  };
  const SearchLimits lim{START, END, 2, 2};
  const auto greedy = greedy_decode(table, lim);
  EXPECT_EQ(greedy.tokens, (std::vector<int>{START, 0, 1}));
  EXPECT_NEAR(std::exp(greedy.log_prob), 0.05, 1e-12);
  const auto beam = beam_search(table, lim);
  EXPECT_EQ(beam.tokens, (std::vector<int>{START, 1, END}));
  EXPECT_NEAR(std::exp(beam.log_prob), 0.36, 1e-12);
  EXPECT_EQ(beam.medications(START, END), (std::vector<int>{1}));
}

TEST(BeamSearch, WideBeamEqualsExhaustiveArgmax) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (bool masked : {true, false}) {
      const auto step = random_table(seed, 7, masked);
      const SearchLimits lim{5, 6, 125, 3};
      const auto beam = beam_search(step, lim);
      const auto best = exhaustive(step, lim);
      EXPECT_EQ(beam.tokens, best.tokens);
      EXPECT_NEAR(beam.log_prob, best.logp, 1e-12);
    }
  }
}

TEST(BeamSearch, WidthOneIsGreedy) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto step = random_table(seed, 9);
    const SearchLimits lim{7, 8, 1, 6};
    const auto g = greedy_decode(step, lim);
    const auto b = beam_search(step, lim);
    EXPECT_EQ(g.tokens, b.tokens);
    EXPECT_EQ(g.log_prob, b.log_prob);
  }
}

TEST(BeamSearch, ExhaustiveWidthNeverLosesToNarrowerBeam) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto step = random_table(seed, 7);
    const double wide = beam_search(step, {5, 6, 125, 3}).log_prob;
    for (int w = 1; w <= 8; ++w) EXPECT_GE(wide, beam_search(step, {5, 6, w, 3}).log_prob);
  }
}

TEST(BeamSearch, HypothesisInvariants) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto step = random_table(seed, 9);
    const SearchLimits lim{7, 8, 3, 4};
    const auto h = beam_search(step, lim);
    EXPECT_TRUE(h.finished);
    EXPECT_TRUE(h.tokens.back() == lim.end || static_cast<int>(h.tokens.size()) - 1 == lim.max_len);
    ASSERT_EQ(h.step_probs.size(), h.tokens.size() - 1);
    double lp = 0.0;
    for (std::size_t i = 1; i < h.tokens.size(); ++i) {
      EXPECT_EQ(h.step_probs[i - 1], step(std::span<const int>(h.tokens.data(), i)));
      lp += std::log(h.step_probs[i - 1](h.tokens[i]));
    }
    EXPECT_NEAR(lp, h.log_prob, 1e-12);
  }
}

TEST(BeamSearch, MaxLenStopsWithoutEnd) {
  const StepFunction never_end = [](std::span<const int> prefix) {
    RowVector p = RowVector::Zero(6);
    for (int m = 0; m < 4; ++m) p(m) = 0.25;
    for (std::size_t i = 1; i < prefix.size(); ++i) p(prefix[i]) = 0.0;
    return RowVector(p / p.sum());
  };
  const auto h = beam_search(never_end, {4, 5, 4, 3});
  EXPECT_EQ(h.tokens.size(), 4u);
  EXPECT_EQ(greedy_decode(never_end, {4, 5, 1, 3}).tokens, (std::vector<int>{4, 0, 1, 2}));
  EXPECT_THROW(beam_search(never_end, {4, 5, 0, 3}), ValidationError);
}

TEST(BeamSearch, ModelDecodingIsDeterministicAndDistinct) {
  std::mt19937_64 rng(3);
  ModelDims dims{6, 6, 5};
  CognetModel model(tiny_config(), dims);
  jitter_parameters(model, rng, 0.3);
  const MedGraphPair g{random_graph(rng, 5, 0.4), random_graph(rng, 5, 0.3)};
  InferenceSession session(model, GraphOperators::from(g));
  std::vector<PatientRecord> patients;
  for (int i = 0; i < 5; ++i) patients.push_back(random_patient(rng, dims, 3));
  const auto a = predict(session, patients, {4, 45, false});
  const auto b = predict(session, patients, {4, 45, false});
  for (std::size_t p = 0; p < a.size(); ++p) {
    for (std::size_t t = 0; t < a[p].size(); ++t) {
      EXPECT_EQ(a[p][t].recommended, b[p][t].recommended);
      std::set<int> uniq(a[p][t].recommended.begin(), a[p][t].recommended.end());
      EXPECT_EQ(uniq.size(), a[p][t].recommended.size());
      for (const auto& sp : a[p][t].step_probs) EXPECT_NEAR(sp.sum(), 1.0, 1e-9);
    }
  }
}
