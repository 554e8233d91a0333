#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "klearn/infer_closed.hpp"
#include "oracles.hpp"

using namespace klearn;

namespace {

std::vector<SummaryPair> pairs_of(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& ds) {
  std::vector<SummaryPair> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.push_back({i, UnitDistribution(ds[i].first), UnitDistribution(ds[i].second)});
  return out;
}

Vocabulary units(std::size_t n) {
  std::vector<std::string> u;
  for (std::size_t j = 0; j < n; ++j) u.push_back("u" + std::to_string(j));
  return Vocabulary(u);
}

ClosedFormConfig uniform_prior(double gamma) {
  ClosedFormConfig c;
  c.gamma = gamma;
  return c;
}

ClosedFormConfig document_prior(double gamma) {
  ClosedFormConfig c;
  c.gamma = gamma;
  c.prior = Prior::document;
  return c;
}

}  // namespace

TEST(MsU, SingleSummary) {
  const auto k = infer_ms_u(pairs_of({{{0.5, 0.5}, {0.9, 0.1}}}), units(2), uniform_prior(1.0)).k();
  EXPECT_NEAR(k[0], 0.1, 1e-12);
  EXPECT_NEAR(k[1], 0.9, 1e-12);
}

TEST(MsU, OppositeSummariesGiveUniform) {
  const auto k =
      infer_ms_u(pairs_of({{{0.5, 0.5}, {1.0, 0.0}}, {{0.5, 0.5}, {0.0, 1.0}}}), units(2), uniform_prior(1.0)).k();
  EXPECT_NEAR(k[0], 0.5, 1e-12);
}

TEST(MsU, UniformSummariesGiveUniform) {
  for (double gamma : {1.0, 1.5, 7.0}) {
    const auto u = UnitDistribution::uniform(3);
    const auto k = infer_ms_u(std::vector<SummaryPair>{{0, u, u}, {1, u, u}}, units(3), uniform_prior(gamma)).k();
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(k[j], 1.0 / 3.0, 1e-12);
  }
}

TEST(MsU, GammaBelowOneRejected) {
  EXPECT_THROW(infer_ms_u(pairs_of({{{0.5, 0.5}, {0.9, 0.1}}}), units(2), uniform_prior(0.5)), PreconditionError);
}

TEST(MsU, IgnoresDocuments) {
  std::mt19937_64 rng(2);
  auto p = pairs_of({{oracle::random_simplex(4, rng), oracle::random_simplex(4, rng)},
                     {oracle::random_simplex(4, rng), oracle::random_simplex(4, rng)}});
  const auto before = infer_ms_u(p, units(4), uniform_prior(1.3)).k();
  for (auto& x : p) x.document = UnitDistribution(oracle::random_simplex(4, rng));
  EXPECT_EQ(infer_ms_u(p, units(4), uniform_prior(1.3)).k(), before);
}

TEST(MsU, LargerGammaMovesTowardUniform) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto p = pairs_of({{oracle::random_simplex(5, rng), oracle::random_simplex(5, rng)},
                             {oracle::random_simplex(5, rng), oracle::random_simplex(5, rng)}});
    double previous = INFINITY;
    for (double gamma : {1.0, 1.2, 1.5, 2.0, 4.0, 10.0}) {
      const double tv = total_variation(infer_ms_u(p, units(5), uniform_prior(gamma)).k(), UnitDistribution::uniform(5));
      EXPECT_LT(tv, previous);
      previous = tv;
    }
  }
}

TEST(MsD, HandExample) {
  const auto m = infer_ms_d(pairs_of({{{0.6, 0.4}, {0.9, 0.1}}}), units(2), document_prior(2.0));
  EXPECT_NEAR(m.k()[0], 0.3, 1e-6);
  EXPECT_NEAR(m.k()[1], 0.7, 1e-6);
  EXPECT_EQ(m.provenance().algorithm, "ms-d");
}

TEST(MsD, SummaryEqualsDocumentGivesMeanDocument) {
  const std::vector<double> d1{0.2, 0.3, 0.5}, d2{0.6, 0.3, 0.1};
  const auto k = infer_ms_d(pairs_of({{d1, d1}, {d2, d2}}), units(3), document_prior(2.0)).k();
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(k[j], 0.5 * (d1[j] + d2[j]), 1e-6);
}

TEST(MsD, GammaTooSmallRejectedAndAutoAccepted) {
  const auto p = pairs_of({{{0.6, 0.4}, {0.9, 0.1}}});
  EXPECT_THROW(infer_ms_d(p, units(2), document_prior(1.2)), PreconditionError);
  auto c = document_prior(1.0);
  c.gamma_auto = true;
  const auto m = infer_ms_d(p, units(2), c);
  const double bound = document_prior_gamma_bound(p, {});
  EXPECT_NEAR(bound, 1.5, 1e-5);
  EXPECT_DOUBLE_EQ(m.provenance().hyperparams.at("gamma").get<double>(), 1.01 * bound);
}

TEST(MsD, WrongPriorRejected) {
  const auto p = pairs_of({{{0.6, 0.4}, {0.9, 0.1}}});
  EXPECT_THROW(infer_ms_d(p, units(2), uniform_prior(2.0)), PreconditionError);
  EXPECT_THROW(infer_ms_u(p, units(2), document_prior(2.0)), PreconditionError);
}

TEST(MsD, ArgmaxMatchesNumericOracle) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::pair<std::vector<double>, std::vector<double>>> raw;
    for (int i = 0; i < 3; ++i) raw.push_back({oracle::random_simplex(4, rng, 0.2), oracle::random_simplex(4, rng, 0.2)});
    const auto p = pairs_of(raw);
    const double gamma = 1.5 * document_prior_gamma_bound(p, {});
    const auto closed = infer_ms_d(p, units(4), document_prior(gamma)).k();
    const auto numeric = maximize_fms_numeric(p, 4, gamma, Prior::document);
    const auto argmax = [](const UnitDistribution& k) {
      return std::max_element(k.probs().begin(), k.probs().end()) - k.probs().begin();
    };
    EXPECT_EQ(argmax(closed), argmax(numeric)) << "instance " << t;
  }
}

TEST(ClosedForms, AgreeWithNumericOracleOnSmallVocabularies) {
  std::mt19937_64 rng(37);
  for (std::size_t n = 2; n <= 5; ++n) {
    std::vector<std::pair<std::vector<double>, std::vector<double>>> raw;
    for (int i = 0; i < 3; ++i) raw.push_back({oracle::random_simplex(n, rng, 0.2), oracle::random_simplex(n, rng, 0.2)});
    const auto p = pairs_of(raw);
    const auto u_closed = infer_ms_u(p, units(n), uniform_prior(1.4)).k();
    const auto u_numeric = maximize_fms_numeric(p, n, 1.4, Prior::uniform);
    const double gamma = 1.3 * document_prior_gamma_bound(p, {});
    const auto d_closed = infer_ms_d(p, units(n), document_prior(gamma)).k();
    const auto d_numeric = maximize_fms_numeric(p, n, gamma, Prior::document);
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(u_closed[j], u_numeric[j], 1e-3);
      EXPECT_NEAR(d_closed[j], d_numeric[j], 1e-3);
    }
  }
}

TEST(ClosedForms, SingleUnitVocabulary) {
  const auto one = UnitDistribution::uniform(1);
  const std::vector<SummaryPair> p{{0, one, one}};
  EXPECT_DOUBLE_EQ(infer_ms_u(p, units(1), uniform_prior(1.0)).k()[0], 1.0);
  EXPECT_DOUBLE_EQ(infer_ms_d(p, units(1), document_prior(2.0)).k()[0], 1.0);
  EXPECT_DOUBLE_EQ(maximize_fms_numeric(p, 1, 1.0, Prior::uniform)[0], 1.0);
}

TEST(ClosedForms, OutputsAreDistributions) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 30; ++t) {
    const auto p = pairs_of({{oracle::random_simplex(6, rng), oracle::random_simplex(6, rng)},
                             {oracle::random_simplex(6, rng), oracle::random_simplex(6, rng)}});
    auto c = document_prior(1.0);
    c.gamma_auto = true;
    for (const auto& k : {infer_ms_u(p, units(6), uniform_prior(1.0)).k(), infer_ms_d(p, units(6), c).k()}) {
      double sum = 0.0;
      for (double x : k.probs()) {
        EXPECT_GE(x, 0.0);
        sum += x;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(NumericOracle, RejectsLargeVocabulary) {
  const auto u = UnitDistribution::uniform(9);
  EXPECT_THROW(maximize_fms_numeric(std::vector<SummaryPair>{{0, u, u}}, 9, 1.0, Prior::uniform), PreconditionError);
}

TEST(ClosedForms, DatasetWithoutReferenceRejected) {
  Dataset ds;
  ds.topics.push_back({"t", {"a b"}, {}, {}, {}});
  EXPECT_THROW(infer_ms_u(ds, Vocabulary({"a", "b"}), uniform_prior(1.0)), PreconditionError);
}
