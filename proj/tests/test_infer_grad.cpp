#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "klearn/infer_grad.hpp"
#include "klearn/synth.hpp"
#include "oracles.hpp"

using namespace klearn;

namespace {

ThetaFeatures random_features(std::size_t n, std::mt19937_64& rng) {
  return theta_features(UnitDistribution(oracle::random_simplex(n, rng)), UnitDistribution(oracle::random_simplex(n, rng)),
                        {});
}

std::vector<double> random_logits(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = z(rng);
  return v;
}

Topic judged_topic(const std::string& id, std::vector<std::pair<std::string, double>> judged) {
  Topic t{id, {"a b c d. b c d e. c d e a. d e a b."}, {"a b"}, {}, {}};
  for (auto& [text, score] : judged) t.judged_summaries.push_back({text, score, std::nullopt});
  return t;
}

TrainConfig quick(std::size_t epochs = 50) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(PreferencePairs, HandCounts) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {{"a", 3}, {"b", 1}}));
  ds.topics.push_back(judged_topic("y", {{"a", 2}, {"b", 2}}));
  ds.topics.push_back(judged_topic("z", {{"a", 3}, {"b", 2}, {"c", 1}}));
  const auto pairs = build_preference_pairs(ds);
  ASSERT_EQ(pairs.size(), 4u);
  EXPECT_EQ(pairs[0].topic_id, "x");
  EXPECT_EQ(pairs[0].better, 0u);
  EXPECT_EQ(pairs[0].worse, 1u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(pairs[i].topic_id, "z");
  for (const auto& p : pairs) {
    const auto& judged = ds.topics[p.topic].judged_summaries;
    EXPECT_GT(judged[p.better].score, judged[p.worse].score);
  }
}

TEST(PreferencePairs, LowerIndexWorseIsOrientedCorrectly) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {{"a", 1}, {"b", 5}}));
  const auto pairs = build_preference_pairs(ds);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].better, 1u);
}

TEST(Softmax, PositiveNormalizedAndTranslationInvariant) {
  SoftmaxParams p(std::vector<double>{800.0, 0.0, -3.0});
  const auto probs = p.probabilities();
  double sum = 0.0;
  for (double x : probs) {
    EXPECT_GE(x, 0.0);
    sum += x;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  SoftmaxParams q(std::vector<double>{1.0, 2.0, 3.0}), r(std::vector<double>{11.0, 12.0, 13.0});
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(q.probabilities()[j], r.probabilities()[j], 1e-15);
  const auto c = r.canonical_logits();
  EXPECT_NEAR(c[0] + c[1] + c[2], 0.0, 1e-12);
}

TEST(Losses, TranslationInvariant) {
  std::mt19937_64 rng(7);
  const ScoringConfig scoring;
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 6;
    std::vector<PairExample> pairs{{random_features(n, rng), random_features(n, rng)}};
    std::vector<RegressionExample> reg{{random_features(n, rng), 0.7}};
    std::vector<PmExample> pm{{random_features(n, rng), {random_features(n, rng), random_features(n, rng)}}};
    const auto logits = random_logits(n, rng);
    auto shifted = logits;
    for (double& x : shifted) x += 4.25;
    EXPECT_NEAR(hpl_loss(logits, pairs, scoring), hpl_loss(shifted, pairs, scoring), 1e-9);
    EXPECT_NEAR(hreg_loss(logits, 0.3, reg, scoring), hreg_loss(shifted, 0.3, reg, scoring), 1e-9);
    EXPECT_NEAR(pm_loss(logits, pm, scoring), pm_loss(shifted, pm, scoring), 1e-9);
  }
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(13);
  const ScoringConfig scoring;
  for (std::size_t n = 2; n <= 8; ++n) {
    std::vector<PairExample> pairs;
    std::vector<RegressionExample> reg;
    std::vector<PmExample> pm;
    for (int i = 0; i < 3; ++i) {
      pairs.push_back({random_features(n, rng), random_features(n, rng)});
      reg.push_back({random_features(n, rng), 1.0 + i});
      pm.push_back({random_features(n, rng), {random_features(n, rng), random_features(n, rng), random_features(n, rng)}});
    }
    const auto logits = random_logits(n, rng);
    const double log_a = 0.4;
    std::vector<double> g;
    double g_a = 0.0;

    hpl_loss(logits, pairs, scoring, &g);
    EXPECT_LT(oracle::relative_error(
                  g, oracle::central_difference([&](const auto& x) { return hpl_loss(x, pairs, scoring); }, logits, 1e-5)),
              1e-5);

    pm_loss(logits, pm, scoring, &g);
    EXPECT_LT(oracle::relative_error(
                  g, oracle::central_difference([&](const auto& x) { return pm_loss(x, pm, scoring); }, logits, 1e-5)),
              1e-5);

    hreg_loss(logits, log_a, reg, scoring, &g, &g_a);
    auto full = logits;
    full.push_back(log_a);
    auto analytic = g;
    analytic.push_back(g_a);
    const auto numeric = oracle::central_difference(
        [&](const auto& x) { return hreg_loss(std::span<const double>(x.data(), n), x[n], reg, scoring); }, full, 1e-5);
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-5);
  }
}

TEST(NegativeSampling, SingleSentenceDocument) {
  const Topic t{"t", {"Only one sentence here."}, {}, {}, {}};
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_negative_summary(t, rng, 100), "Only one sentence here.");
}

TEST(NegativeSampling, ZeroBudgetRejected) {
  const Topic t{"t", {"A b."}, {}, {}, {}};
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_negative_summary(t, rng, 0), std::invalid_argument);
}

TEST(NegativeSampling, EmptyDocumentRejected) {
  const Topic t{"t", {""}, {}, {}, {}};
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_negative_summary(t, rng, 10), PreconditionError);
}

TEST(NegativeSampling, DeterministicAndStopsAtBudget) {
  const Topic t{"t", {"One two three. Four five six. Seven eight nine. Ten eleven twelve. Thirteen fourteen."}, {}, {}, {}};
  std::mt19937_64 a(5), b(5);
  const auto first = sample_negative_summary(t, a, 5);
  EXPECT_EQ(first, sample_negative_summary(t, b, 5));
  const auto words = tokenize(first).size();
  EXPECT_GE(words, 5u);
  EXPECT_LE(words, 7u);
}

TEST(Hpl, LossDecreasesAndIsDeterministic) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {{"a a b", 3}, {"c d", 1}, {"e e", 2}}));
  ds.topics.push_back(judged_topic("y", {{"a e", 2}, {"d d d", 0}}));
  const Vocabulary v = build_vocabulary(ds, {});
  const auto m1 = infer_hpl(ds, v, quick());
  const auto m2 = infer_hpl(ds, v, quick());
  EXPECT_EQ(m1.k(), m2.k());
  const auto trace = m1.provenance().extra.at("loss_trace").get<std::vector<double>>();
  EXPECT_LT(trace.back(), trace.front());
  for (double p : m1.k().probs()) EXPECT_GT(p, 0.0);
}

TEST(Hpl, InvariantToAffineScoreTransform) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {{"a a b", 3}, {"c d", 1}, {"e e", 2}}));
  Dataset shifted = ds;
  for (auto& j : shifted.topics[0].judged_summaries) j.score = 2.0 * j.score + 3.0;
  const Vocabulary v = build_vocabulary(ds, {});
  EXPECT_EQ(infer_hpl(ds, v, quick()).k(), infer_hpl(shifted, v, quick()).k());
  EXPECT_EQ(hpl_loss(std::vector<double>(v.size(), 0.1), preference_examples(ds, v, {}), {}),
            hpl_loss(std::vector<double>(v.size(), 0.1), preference_examples(shifted, v, {}), {}));
}

TEST(Hpl, SinglePairBecomesSeparated) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {{"a a a b", 1.0}, {"c c c d", 0.0}}));
  const Vocabulary v = build_vocabulary(ds, {});
  const auto m = infer_hpl(ds, v, quick());
  const auto d = text_to_distribution(ds.topics[0].document_text(), v);
  const double margin = theta(text_to_distribution("a a a b", v), d, m) - theta(text_to_distribution("c c c d", v), d, m);
  EXPECT_GT(1.0 / (1.0 + std::exp(-margin)), 0.5);
}

TEST(Hpl, NoPairsRejected) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {{"a", 2}, {"b", 2}}));
  EXPECT_THROW(infer_hpl(ds, build_vocabulary(ds, {}), quick()), PreconditionError);
}

TEST(Hreg, RealizableInstanceIsFitted) {
  SynthConfig sc;
  sc.vocab_size = 8;
  sc.n_topics = 20;
  sc.seed = 5;
  const auto synth = generate(sc);
  // Targets are exactly a0 * theta_K*(x) with a0 = 2.
  Dataset ds = synth.dataset;
  for (auto& t : ds.topics)
    for (auto& j : t.judged_summaries) j.score *= 2.0;
  const ScoringConfig scoring;
  const auto examples = regression_examples(ds, synth.vocab, scoring);
  const double initial = hreg_loss(std::vector<double>(synth.vocab.size(), 0.0), 0.0, examples, scoring);

  TrainConfig c;
  c.seed = 1;
  c.epochs = 2000;
  c.learning_rate = 0.02;
  c.batch_size = 8;
  const auto m = infer_hreg(ds, synth.vocab, c, scoring);
  const auto logits = m.provenance().extra.at("logits").get<std::vector<double>>();
  const double a = m.provenance().extra.at("scale_a").get<double>();
  const double final_loss = hreg_loss(logits, std::log(a), examples, scoring);
  EXPECT_LT(final_loss, 1e-3 * initial) << "initial " << initial << " final " << final_loss;
  EXPECT_NEAR(a, 2.0, 1e-2);
}

TEST(Hreg, ConstantTargetsDoNotCrash) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {{"a a b", 1.0}, {"c d", 1.0}, {"e e", 1.0}}));
  const Vocabulary v = build_vocabulary(ds, {});
  const auto m = infer_hreg(ds, v, quick());
  for (double p : m.k().probs()) EXPECT_TRUE(std::isfinite(p));
  const auto trace = m.provenance().extra.at("loss_trace").get<std::vector<double>>();
  EXPECT_LE(trace.back(), trace.front());
}

TEST(Hreg, NoJudgmentsRejected) {
  Dataset ds;
  ds.topics.push_back(judged_topic("x", {}));
  EXPECT_THROW(infer_hreg(ds, build_vocabulary(ds, {}), quick()), PreconditionError);
}

TEST(Pm, LossDecreases) {
  Dataset ds;
  ds.topics.push_back({"x", {"A b c. B c d. C d e. D e f. E f a."}, {"a f a"}, {}, {}});
  ds.topics.push_back({"y", {"B c a. F e d. A a b. C c d."}, {"f f d"}, {}, {}});
  const Vocabulary v = build_vocabulary(ds, {});
  TrainConfig c = quick();
  c.negative_budget = 3;
  const auto m = infer_pm(ds, v, c);
  const auto trace = m.provenance().extra.at("loss_trace").get<std::vector<double>>();
  EXPECT_LT(trace.back(), trace.front());
  EXPECT_EQ(m.k(), infer_pm(ds, v, c).k());
}

TEST(Pm, TooFewSentencesRejected) {
  Dataset ds;
  ds.topics.push_back({"x", {"one sentence only"}, {"one"}, {}, {}});
  EXPECT_THROW(infer_pm(ds, build_vocabulary(ds, {}), quick()), PreconditionError);
}

TEST(Pm, PlantedKnowledgeBeatsUniform) {
  SynthConfig sc;  // 30 units, 200 topics, seed 42
  const auto synth = generate(sc);
  TrainConfig c;
  c.seed = 42;
  const auto m = infer_pm(synth.dataset, synth.vocab, c);
  const auto& k_star = synth.k_star.k();
  EXPECT_LT(kl(k_star, m.k()), kl(k_star, UnitDistribution::uniform(synth.vocab.size())));
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.reg_scale_a = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
