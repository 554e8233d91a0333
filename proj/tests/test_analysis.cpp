#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "klearn/analysis.hpp"
#include "klearn/synth.hpp"
#include "oracles.hpp"

using namespace klearn;

namespace {

Vocabulary abc() { return Vocabulary({"a", "b", "c"}); }

KnowledgeModel model(std::vector<double> k, Vocabulary v = abc()) { return KnowledgeModel(UnitDistribution(k), v); }

double euclid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

DivergenceMatrix from_points(const std::vector<std::vector<double>>& pts) {
  DivergenceMatrix m;
  const auto n = static_cast<Eigen::Index>(pts.size());
  m.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.labels.push_back("p" + std::to_string(i));
    for (Eigen::Index j = 0; j < n; ++j)
      m.values(i, j) = euclid(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) m.values(j, i) = m.values(i, j);
  return m;
}

}  // namespace

TEST(Average, SingleModelIsIdentity) {
  const auto m = model({0.2, 0.3, 0.5});
  EXPECT_EQ(average_models({m}).k(), m.k());
}

TEST(Average, OppositePointMasses) {
  const Vocabulary v({"a", "b"});
  const auto avg = average_models({model({1.0, 0.0}, v), model({0.0, 1.0}, v)});
  EXPECT_DOUBLE_EQ(avg.k()[0], 0.5);
  EXPECT_EQ(avg.provenance().algorithm, "average");
  EXPECT_EQ(avg.provenance().extra.at("constituents").size(), 2u);
}

TEST(Average, ElementwiseMeanAndPermutationInvariant) {
  std::mt19937_64 rng(21);
  std::vector<std::vector<double>> ps;
  std::vector<KnowledgeModel> ms;
  for (int i = 0; i < 3; ++i) {
    ps.push_back(oracle::random_simplex(3, rng));
    ms.push_back(model(ps.back()));
  }
  const auto avg = average_models(ms);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(avg.k()[j], (ps[0][j] + ps[1][j] + ps[2][j]) / 3.0, 1e-15);
  const auto rev = average_models({ms[2], ms[0], ms[1]});
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(rev.k()[j], avg.k()[j], 1e-15);
}

TEST(Average, AlignsUnitOrderAndRejectsMismatch) {
  const auto a = model({0.2, 0.3, 0.5});
  const auto b = KnowledgeModel(UnitDistribution({0.5, 0.3, 0.2}), Vocabulary({"c", "b", "a"}));
  const auto avg = average_models({a, b});
  EXPECT_NEAR(avg.k()[0], 0.2, 1e-15);
  EXPECT_THROW(average_models({a, model({0.5, 0.5}, Vocabulary({"a", "b"}))}), DataError);
  EXPECT_THROW(average_models({}), PreconditionError);
}

TEST(Curve, IdenticalModelsGiveFlatCurve) {
  const auto ref = model({0.2, 0.3, 0.5});
  const auto m = model({0.3, 0.3, 0.4});
  const auto curve = averaging_curve({m, m, m, m}, ref, 10, 1);
  ASSERT_EQ(curve.size(), 4u);
  for (const auto& p : curve) EXPECT_NEAR(p.mean_kl, kl(ref.k(), m.k()), 1e-12);
  EXPECT_EQ(curve.back().subsets, 1u);
  EXPECT_DOUBLE_EQ(curve.back().ci_half_width, 0.0);
}

TEST(Curve, AveragingNoisyCopiesHelps) {
  SynthConfig sc;
  sc.n_topics = 1;
  const auto k_star = generate(sc).k_star;
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<KnowledgeModel> noisy;
    for (std::uint64_t i = 0; i < 8; ++i) noisy.push_back(perturbed_knowledge(k_star, 0.5, 100 * seed + i));
    const auto curve = averaging_curve(noisy, k_star, 20, seed);
    if (curve.back().mean_kl < curve.front().mean_kl) ++wins;
  }
  EXPECT_EQ(wins, 20);
}

TEST(Curve, Guards) {
  const auto m = model({0.2, 0.3, 0.5});
  EXPECT_THROW(averaging_curve({m}, m, 5, 0), PreconditionError);
  EXPECT_THROW(averaging_curve({m, model({0.5, 0.5}, Vocabulary({"a", "b"}))}, m, 5, 0), DataError);
}

TEST(Curve, CsvHeader) {
  const auto m = model({0.2, 0.3, 0.5});
  std::ostringstream out;
  write_curve_csv(out, averaging_curve({m, m}, m, 3, 0));
  EXPECT_EQ(out.str().substr(0, 10), "m,mean,ci\n");
}

TEST(Geometry, HandComputedMatrix) {
  Dataset ds;
  ds.topics.push_back({"x", {"a a b"}, {"a c"}, {}, {}});
  ds.topics.push_back({"y", {"b c c"}, {"b"}, {}, {}});
  const auto v = abc();
  const auto k = model({0.5, 0.25, 0.25});
  const auto m = geometry_matrix(ds, k, v);
  const std::vector<std::string> labels{"D:x", "D:y", "S:x:0", "S:y:0", "K"};
  EXPECT_EQ(m.labels, labels);
  const std::vector<std::vector<double>> pts{
      {2.0 / 3, 1.0 / 3, 0}, {0, 1.0 / 3, 2.0 / 3}, {0.5, 0, 0.5}, {0, 1, 0}, {0.5, 0.25, 0.25}};
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      const double expected = 0.5 * (oracle::kl(pts[i], pts[j], 1e-6) + oracle::kl(pts[j], pts[i], 1e-6));
      EXPECT_NEAR(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), expected, 1e-12);
    }
  EXPECT_NO_THROW(m.validate());
}

TEST(Geometry, SymmetricZeroDiagonalOnSynthData) {
  SynthConfig sc;
  sc.n_topics = 5;
  const auto s = generate(sc);
  const auto m = geometry_matrix(s.dataset, s.k_star, s.vocab);
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    EXPECT_EQ(m.values(i, i), 0.0);
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) EXPECT_EQ(m.values(i, j), m.values(j, i));
  }
}

TEST(Mds, EquilateralTriangle) {
  const auto emb = classical_mds(from_points({{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}}), 2);
  const double d01 = euclid(emb[0].coordinates, emb[1].coordinates);
  EXPECT_NEAR(d01, 1.0, 1e-6);
  EXPECT_NEAR(euclid(emb[1].coordinates, emb[2].coordinates), d01, 1e-6);
  EXPECT_NEAR(euclid(emb[0].coordinates, emb[2].coordinates), d01, 1e-6);
}

TEST(Mds, TwoPoints) {
  const auto emb = classical_mds(from_points({{0.0}, {2.5}}), 1);
  EXPECT_NEAR(std::abs(emb[0].coordinates[0] - emb[1].coordinates[0]), 2.5, 1e-9);
  EXPECT_GE(emb[0].coordinates[0], 0.0);
}

TEST(Mds, LineRecoveredInOneDimension) {
  const std::vector<std::vector<double>> pts{{-2.0}, {0.5}, {1.0}, {3.5}, {7.0}};
  const auto emb = classical_mds(from_points(pts), 1);
  double stress = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      stress += std::pow(euclid(emb[i].coordinates, emb[j].coordinates) - euclid(pts[i], pts[j]), 2);
  EXPECT_LT(stress, 1e-6);
}

TEST(Mds, PlantedPlaneReconstructedAndCentered) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> pts(8, std::vector<double>(2));
  for (auto& p : pts)
    for (auto& x : p) x = z(rng);
  const auto emb = classical_mds(from_points(pts), 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      EXPECT_NEAR(euclid(emb[i].coordinates, emb[j].coordinates), euclid(pts[i], pts[j]), 1e-6);
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& e : emb) mean += e.coordinates[d];
    EXPECT_NEAR(mean, 0.0, 1e-12);
  }
  EXPECT_GE(emb[0].coordinates[0], 0.0);
}

TEST(Mds, DimsGuard) {
  const auto m = from_points({{0.0}, {1.0}, {2.0}});
  EXPECT_THROW(classical_mds(m, 3), std::invalid_argument);
  EXPECT_THROW(classical_mds(m, 0), std::invalid_argument);
}

TEST(TopUnits, KnownAndUnknown) {
  const auto m = model({0.7, 0.2, 0.1});
  EXPECT_EQ(top_units(m, 1, UnitDirection::known)[0].unit, "a");
  EXPECT_EQ(top_units(m, 1, UnitDirection::unknown)[0].unit, "c");
  const auto all = top_units(m, 3, UnitDirection::known);
  EXPECT_EQ(all[1].unit, "b");
  EXPECT_EQ(all[2].unit, "c");
  EXPECT_THROW(top_units(m, 4, UnitDirection::known), std::invalid_argument);
}

TEST(TopUnits, TiesBrokenLexicographically) {
  const auto m = KnowledgeModel(UnitDistribution::uniform(3), Vocabulary({"z", "m", "a"}));
  const auto top = top_units(m, 2, UnitDirection::known);
  EXPECT_EQ(top[0].unit, "a");
  EXPECT_EQ(top[1].unit, "m");
}

TEST(Idf, Renormalization) {
  const auto zero = renormalized_idf(std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(zero[0], 0.5);
  const auto half = renormalized_idf(std::vector<double>{0.5, 1.0});
  EXPECT_NEAR(half[0], 1.0, 1e-12);
  EXPECT_NEAR(half[1], 0.0, 1e-12);
  EXPECT_THROW(renormalized_idf(std::vector<double>{1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(renormalized_idf(std::vector<double>{1.5, 0.0}), std::invalid_argument);
  EXPECT_THROW(renormalized_idf(std::map<std::string, double>{{"a", 0.5}}, abc()), DataError);
}

TEST(Idf, NormalizedWeightsInUnitInterval) {
  const auto idf = normalized_idf({"a b", "a", "a c", "a"}, abc());
  EXPECT_DOUBLE_EQ(idf[0], 0.0);
  EXPECT_NEAR(idf[1], std::log(4.0) / std::log(4.0), 1e-15);
  EXPECT_NEAR(idf[2], 1.0, 1e-15);
  const auto two = normalized_idf({"a b", "a b b", "a", "c"}, abc());
  EXPECT_NEAR(two[1], std::log(2.0) / std::log(4.0), 1e-15);
  EXPECT_THROW(normalized_idf({"a"}, abc()), PreconditionError);
}

TEST(CompareIdf, SelfAndReverse) {
  const auto m = model({0.5, 0.3, 0.2});
  EXPECT_NEAR(compare_to_idf(m, m.k()).pearson, 1.0, 1e-12);
  const auto rev = compare_to_idf(m, UnitDistribution({0.2, 0.3, 0.5}));
  EXPECT_NEAR(rev.spearman, -1.0, 1e-12);
  EXPECT_NEAR(rev.abs_diff[0], 0.3, 1e-12);
  EXPECT_THROW(compare_to_idf(m, UnitDistribution({0.5, 0.5})), DataError);
}

TEST(CompareIdf, HandPearson) {
  // x = (0.5, 0.3, 0.2), y = (0.6, 0.1, 0.3): centred x = (1/6, -1/30, -2/15),
  // centred y = (4/15, -7/30, -1/30).
  const auto r = compare_to_idf(model({0.5, 0.3, 0.2}), UnitDistribution({0.6, 0.1, 0.3}));
  const double sxy = (1.0 / 6) * (4.0 / 15) + (1.0 / 30) * (7.0 / 30) + (2.0 / 15) * (1.0 / 30);
  const double sxx = 1.0 / 36 + 1.0 / 900 + 4.0 / 225;
  const double syy = 16.0 / 225 + 49.0 / 900 + 1.0 / 900;
  EXPECT_NEAR(r.pearson, sxy / std::sqrt(sxx * syy), 1e-12);
  EXPECT_NEAR(r.spearman, 0.5, 1e-12);
}

TEST(Csv, MatrixAndEmbeddingHeaders) {
  const auto m = from_points({{0.0}, {1.0}, {3.0}});
  std::ostringstream a, b;
  write_matrix_csv(a, m);
  write_embedding_csv(b, classical_mds(m, 2));
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "label,p0,p1,p2");
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "label,x0,x1");
}
