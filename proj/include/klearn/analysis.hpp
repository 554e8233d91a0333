#pragma once

// Interpretation of fitted knowledge distributions: averaging, distance-to-
// reference curves, KL geometry with classical MDS, known/unknown units, and
// the comparison against renormalized IDF.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "klearn/corpus.hpp"
#include "klearn/distribution.hpp"
#include "klearn/error.hpp"
#include "klearn/scoring.hpp"

namespace klearn {

inline KnowledgeModel average_models(const std::vector<KnowledgeModel>& models) {
  if (models.empty()) throw PreconditionError("cannot average an empty model list");
  const auto& vocab = models.front().vocab();
  std::vector<double> mean(vocab.size(), 0.0);
  nlohmann::json constituents = nlohmann::json::array();
  for (const auto& model : models) {
    if (model.vocab().size() != vocab.size()) throw DataError("cannot average models over different vocabularies");
    const auto m = model.aligned_to(vocab);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += m.k()[j];
    constituents.push_back({{"algorithm", m.provenance().algorithm}, {"data_slice", m.provenance().data_slice}});
  }
  for (double& x : mean) x /= static_cast<double>(models.size());
  Provenance prov;
  prov.algorithm = "average";
  prov.data_slice = std::to_string(models.size()) + " models";
  prov.extra["constituents"] = std::move(constituents);
  return KnowledgeModel(UnitDistribution::from_weights(mean), vocab, std::move(prov));
}

struct CurvePoint {
  std::size_t m = 0;
  double mean_kl = 0.0;
  double ci_half_width = 0.0;  // 95% normal interval over subsets
  std::size_t subsets = 0;
};

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// All k-subsets of {0..n-1} in lexicographic order.
inline std::vector<std::vector<std::size_t>> all_subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    out.push_back(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

}  // namespace detail

/// KL(reference || average of m models) for m = 1..len(models). When there are
/// at most `subsets_per_size` distinct m-subsets all of them are used,
/// otherwise that many are drawn at random.
inline std::vector<CurvePoint> averaging_curve(const std::vector<KnowledgeModel>& models,
                                               const KnowledgeModel& reference, std::size_t subsets_per_size,
                                               std::uint64_t seed, const SmoothingConfig& smoothing = {}) {
  if (models.size() < 2) throw PreconditionError("averaging curve needs at least 2 models");
  if (subsets_per_size < 1) throw std::invalid_argument("subsets_per_size must be >= 1");
  std::vector<KnowledgeModel> aligned;
  for (const auto& m : models) {
    if (m.vocab().size() != reference.vocab().size()) throw DataError("averaging curve: vocabulary mismatch");
    aligned.push_back(m.aligned_to(reference.vocab()));
  }
  std::mt19937_64 rng(seed);
  std::vector<CurvePoint> curve;
  for (std::size_t m = 1; m <= models.size(); ++m) {
    std::vector<std::vector<std::size_t>> subsets;
    if (detail::binomial(models.size(), m) <= static_cast<double>(subsets_per_size)) {
      subsets = detail::all_subsets(models.size(), m);
    } else {
      std::vector<std::size_t> idx(models.size());
      for (std::size_t s = 0; s < subsets_per_size; ++s) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        subsets.emplace_back(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
      }
    }
    std::vector<double> values;
    for (const auto& subset : subsets) {
      std::vector<KnowledgeModel> chosen;
      for (std::size_t i : subset) chosen.push_back(aligned[i]);
      values.push_back(kl(reference.k(), average_models(chosen).k(), smoothing));
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double half = 0.0;
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      half = 1.96 * std::sqrt(ss / static_cast<double>(values.size() - 1)) / std::sqrt(static_cast<double>(values.size()));
    }
    curve.push_back({m, mean, half, values.size()});
  }
  return curve;
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out.precision(17);
  out << "m,mean,ci\n";
  for (const auto& p : curve) out << p.m << ',' << p.mean_kl << ',' << p.ci_half_width << '\n';
}

// ---------------------------------------------------------------------------
// Geometry

struct DivergenceMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;

  void validate() const {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (values.rows() != n || values.cols() != n) throw std::invalid_argument("matrix size does not match labels");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (values(i, i) != 0.0) throw std::invalid_argument("matrix diagonal must be zero");
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(values(i, j) >= 0.0)) throw std::invalid_argument("matrix entries must be nonnegative");
        if (values(i, j) != values(j, i)) throw std::invalid_argument("matrix must be symmetric");
      }
    }
  }
};

inline double symmetric_kl(const UnitDistribution& a, const UnitDistribution& b, const SmoothingConfig& smoothing) {
  return 0.5 * (kl(a, b, smoothing) + kl(b, a, smoothing));
}

/// Points: every topic's document, then every reference summary, then K.
inline DivergenceMatrix geometry_matrix(const Dataset& dataset, const KnowledgeModel& model, const Vocabulary& vocab,
                                        const SmoothingConfig& smoothing = {}, const TokenizerConfig& tokenizer = {}) {
  if (dataset.topics.empty()) throw PreconditionError("geometry needs at least one topic");
  const auto k = model.aligned_to(vocab).k();
  std::vector<std::string> labels;
  std::vector<UnitDistribution> points;
  for (const auto& t : dataset.topics) {
    labels.push_back("D:" + t.id);
    points.push_back(text_to_distribution(t.document_text(), vocab, tokenizer));
  }
  for (const auto& t : dataset.topics)
    for (std::size_t r = 0; r < t.reference_summaries.size(); ++r) {
      labels.push_back("S:" + t.id + ":" + std::to_string(r));
      points.push_back(text_to_distribution(t.reference_summaries[r], vocab, tokenizer));
    }
  labels.push_back("K");
  points.push_back(k);

  const auto n = static_cast<Eigen::Index>(points.size());
  DivergenceMatrix out{std::move(labels), Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      out.values(i, j) = out.values(j, i) =
          symmetric_kl(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)], smoothing);
  return out;
}

inline void write_matrix_csv(std::ostream& out, const DivergenceMatrix& m) {
  out.precision(17);
  out << "label";
  for (const auto& l : m.labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    out << m.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) out << ',' << m.values(i, j);
    out << '\n';
  }
}

struct EmbeddedPoint {
  std::string label;
  std::vector<double> coordinates;
};

/// Classical (Torgerson) MDS: B = -1/2 J D^2 J, coordinates from the top
/// `dims` eigenpairs. Each axis is flipped so that the first point with a
/// nonzero coordinate on it is positive.
inline std::vector<EmbeddedPoint> classical_mds(const DivergenceMatrix& matrix, std::size_t dims = 2) {
  matrix.validate();
  const auto n = static_cast<Eigen::Index>(matrix.labels.size());
  if (dims < 1 || static_cast<Eigen::Index>(dims) > n - 1)
    throw std::invalid_argument("mds dims must be between 1 and point count - 1");
  const Eigen::MatrixXd sq = matrix.values.array().square();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd b = -0.5 * centering * sq * centering;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  // Eigenvalues ascend; take the largest `dims`.
  Eigen::MatrixXd coords(n, static_cast<Eigen::Index>(dims));
  for (std::size_t d = 0; d < dims; ++d) {
    const Eigen::Index col = n - 1 - static_cast<Eigen::Index>(d);
    const double lambda = std::max(solver.eigenvalues()(col), 0.0);
    coords.col(static_cast<Eigen::Index>(d)) = solver.eigenvectors().col(col) * std::sqrt(lambda);
  }
  // Exact centering removes the tiny mean left by the eigensolver.
  for (Eigen::Index d = 0; d < coords.cols(); ++d) {
    coords.col(d).array() -= coords.col(d).mean();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(coords(i, d)) > 1e-12) {
        if (coords(i, d) < 0.0) coords.col(d) *= -1.0;
        break;
      }
    }
  }
  std::vector<EmbeddedPoint> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    EmbeddedPoint p{matrix.labels[static_cast<std::size_t>(i)], {}};
    for (Eigen::Index d = 0; d < coords.cols(); ++d) p.coordinates.push_back(coords(i, d));
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_embedding_csv(std::ostream& out, const std::vector<EmbeddedPoint>& points) {
  out.precision(17);
  out << "label";
  const std::size_t dims = points.empty() ? 0 : points.front().coordinates.size();
  for (std::size_t d = 0; d < dims; ++d) out << ",x" << d;
  out << '\n';
  for (const auto& p : points) {
    out << p.label;
    for (double c : p.coordinates) out << ',' << c;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Interpretation

enum class UnitDirection { known, unknown };

struct WeightedUnit {
  std::string unit;
  double prob = 0.0;
};

/// Highest (known) or lowest (unknown) probability units; ties lexicographic.
inline std::vector<WeightedUnit> top_units(const KnowledgeModel& model, std::size_t k, UnitDirection direction) {
  if (k > model.vocab().size()) throw std::invalid_argument("top_units: k exceeds vocabulary size");
  std::vector<WeightedUnit> all;
  for (std::size_t j = 0; j < model.vocab().size(); ++j) all.push_back({model.vocab().unit(j), model.k()[j]});
  std::sort(all.begin(), all.end(), [direction](const WeightedUnit& a, const WeightedUnit& b) {
    if (a.prob != b.prob) return direction == UnitDirection::known ? a.prob > b.prob : a.prob < b.prob;
    return a.unit < b.unit;
  });
  all.resize(k);
  return all;
}

/// IDF scaled to [0,1]: log(N/df) / log(N), with df = 0 mapped to 1.
inline std::vector<double> normalized_idf(const std::vector<std::string>& background, const Vocabulary& vocab,
                                          const TokenizerConfig& tokenizer = {}) {
  const std::size_t docs = background.size();
  if (docs < 2) throw PreconditionError("normalized IDF needs at least 2 background documents");
  std::vector<double> df(vocab.size(), 0.0);
  std::vector<char> seen(vocab.size());
  for (const auto& doc : background) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t i : encode(doc, vocab, tokenizer))
      if (!seen[i]) seen[i] = 1, df[i] += 1.0;
  }
  const double log_n = std::log(static_cast<double>(docs));
  std::vector<double> idf(vocab.size());
  for (std::size_t j = 0; j < idf.size(); ++j)
    idf[j] = df[j] == 0.0 ? 1.0 : std::log(static_cast<double>(docs) / df[j]) / log_n;
  return idf;
}

/// P(w_j) = (1 - IDF(w_j)) / C with C = sum_j (1 - IDF(w_j)).
inline UnitDistribution renormalized_idf(std::span<const double> idf) {
  std::vector<double> w;
  for (double v : idf) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("IDF weights must lie in [0,1]");
    w.push_back(1.0 - v);
  }
  if (w.empty()) throw std::invalid_argument("IDF weights are empty");
  const double c = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(c > 0.0)) throw std::invalid_argument("all IDF weights equal 1; normalizer is zero");
  for (double& x : w) x /= c;
  return UnitDistribution(std::move(w));
}

inline UnitDistribution renormalized_idf(const std::map<std::string, double>& idf, const Vocabulary& vocab) {
  std::vector<double> v(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    auto it = idf.find(vocab.unit(j));
    if (it == idf.end()) throw DataError("no IDF weight for unit '" + vocab.unit(j) + "'");
    v[j] = it->second;
  }
  return renormalized_idf(v);
}

namespace detail {

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

// Ascending average ranks.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

}  // namespace detail

struct IdfComparison {
  double pearson = 0.0;
  double spearman = 0.0;
  std::vector<double> abs_diff;
};

inline IdfComparison compare_to_idf(const KnowledgeModel& model, const UnitDistribution& idf_dist) {
  if (model.k().size() != idf_dist.size()) throw DataError("compare_to_idf: vocabulary mismatch");
  const auto k = model.k().probs();
  const auto q = idf_dist.probs();
  IdfComparison out;
  out.pearson = detail::pearson(k, q);
  const auto rk = detail::average_ranks(k);
  const auto rq = detail::average_ranks(q);
  out.spearman = detail::pearson(rk, rq);
  for (std::size_t j = 0; j < k.size(); ++j) out.abs_diff.push_back(std::abs(k[j] - q[j]));
  return out;
}

}  // namespace klearn
