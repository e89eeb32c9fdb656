#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "nifa/candidates.hpp"
#include "nifa/linmodel.hpp"
#include "nifa/parallel.hpp"
#include "nifa/rng.hpp"

namespace nifa {

//! Deterministic two-part split: part 2 (size n2 = clamp(floor(c*n/sqrt(log n)),
//! 1, n-1)) drives the aggregation weights, the complement trains the
//! candidates. indices2 is sorted; the same (n, c, seed) always reproduces it.
struct SplitPlan {
  std::size_t n = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::vector<Eigen::Index> indices2;
  std::uint64_t seed = 0;
};

inline SplitPlan split(std::size_t n, double c, std::uint64_t seed) {
  if (n < 4) throw ValidationError("split: need at least 4 observations");
  if (!(c > 0.0)) throw ValidationError("split: the split constant must be positive");
  const double raw = c * static_cast<double>(n) / std::sqrt(std::log(static_cast<double>(n)));
  std::size_t n2 = std::isfinite(raw) && raw > 0.0 ? static_cast<std::size_t>(raw) : 1;
  n2 = std::clamp<std::size_t>(n2, 1, n - 1);

  Stream stream(seed);
  std::vector<Eigen::Index> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<Eigen::Index>(i);
  for (std::size_t i = 0; i < n2; ++i) {
    const std::size_t j = i + stream.below(n - i);
    std::swap(all[i], all[j]);
  }
  std::vector<Eigen::Index> idx2(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n2));
  std::sort(idx2.begin(), idx2.end());
  return SplitPlan{n, n - n2, n2, std::move(idx2), seed};
}

//! Exponential-weights mirror averaging. scores(k, l) is the loss score of
//! candidate k at the l-th aggregation observation. The returned weights are
//! the average of the running Gibbs iterates theta^(0) .. theta^(n2-1),
//! where theta^(0) = theta0 and theta^(l) uses the first l score columns.
inline Eigen::VectorXd mirror_average(const Eigen::MatrixXd& scores, double beta,
                                      const Eigen::VectorXd& theta0) {
  const Eigen::Index M = scores.rows();
  const Eigen::Index n2 = scores.cols();
  if (M < 1 || n2 < 1) throw ValidationError("mirror_average: empty score matrix");
  if (!(beta > 0.0)) throw ValidationError("mirror_average: beta must be positive");
  if (theta0.size() != M) throw ValidationError("mirror_average: theta0 size mismatch");
  if (!scores.allFinite()) throw NumericError("mirror_average: non-finite scores");
  double t0sum = 0.0;
  for (Eigen::Index k = 0; k < M; ++k) {
    if (theta0[k] < -1e-15) throw ValidationError("mirror_average: theta0 has negative mass");
    t0sum += theta0[k];
  }
  if (std::abs(t0sum - 1.0) > 1e-9)
    throw ValidationError("mirror_average: theta0 does not sum to one");

  Eigen::VectorXd cumulative = Eigen::VectorXd::Zero(M);
  Eigen::VectorXd acc = theta0;
  for (Eigen::Index l = 1; l < n2; ++l) {
    cumulative += scores.col(l - 1);
    // log-sum-exp stabilized Gibbs weights
    const Eigen::VectorXd logits = -cumulative / beta;
    const double shift = logits.maxCoeff();
    Eigen::VectorXd w = (logits.array() - shift).exp();
    acc += w / w.sum();
  }
  Eigen::VectorXd theta = acc / static_cast<double>(n2);
  theta /= theta.sum();
  return theta;
}

//! Score of a candidate at x: squared-integral estimate minus twice the
//! candidate density (an unbiased linearized L2 loss).
inline double score_uk(const CandidateModel& model, const Eigen::VectorXd& x) {
  if (model.sq_integral.draws == 0)
    throw ValidationError("score_uk: the candidate's square integral was never computed");
  return model.sq_integral.estimate - 2.0 * model.eval(x);
}

struct AggregateConfig {
  CandidateConfig candidate;
  int num_candidates = 0;  // 0 selects d-1 (or 1 when d == 1)
  double split_c = 1.0;
  std::optional<double> known_sigma2;
  unsigned threads = 1;
};

//! Convex combination of the rank-k candidates with mirror-averaged weights.
struct AggregateDensity {
  std::vector<CandidateModel> candidates;
  Eigen::VectorXd theta;
  double beta = 0.0;
  RestrictionBall ball;
  SplitPlan split_plan;
  std::uint64_t seed = 0;

  int dim() const { return candidates.front().dim(); }

  double eval(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (theta[static_cast<Eigen::Index>(k)] > 0.0)
        v += theta[static_cast<Eigen::Index>(k)] * candidates[k].eval(x);
    return v;
  }
};

inline double eval_aggregate(const AggregateDensity& agg, const Eigen::VectorXd& x) {
  return agg.eval(x);
}

//! Full estimation pipeline: split, spectral analysis of the training part,
//! one candidate per rank 1..M sharing the training ball, then candidate
//! scores over the aggregation part in a seeded random order feed the
//! mirror averaging. beta is 12 times the larger of the Gaussian floor
//! (2 pi sigma2_M)^(-d/2) and the largest observed candidate sup.
inline AggregateDensity fit_aggregate(const DataMatrix& data, const AggregateConfig& cfg,
                                      Stream& rng) {
  const std::size_t n = static_cast<std::size_t>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (n < 4) throw ValidationError("fit_aggregate: need at least 4 observations");
  int M = cfg.num_candidates;
  if (M == 0) M = d > 1 ? d - 1 : 1;
  if (M < 1) throw ValidationError("fit_aggregate: need at least one candidate");
  if (M > d) throw ValidationError("fit_aggregate: cannot use more candidates than dimensions");
  if (M == d && !cfg.known_sigma2)
    throw ValidationError("fit_aggregate: the full-rank candidate requires a known noise variance");

  SplitPlan plan = split(n, cfg.split_c, rng.derive("split").seed());
  std::vector<Eigen::Index> idx1;
  idx1.reserve(plan.n1);
  {
    std::size_t next2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (next2 < plan.indices2.size() &&
          plan.indices2[next2] == static_cast<Eigen::Index>(i)) {
        ++next2;
      } else {
        idx1.push_back(static_cast<Eigen::Index>(i));
      }
    }
  }
  const DataMatrix train = subsample(data, idx1);
  const SpectralDecomposition spec = spectral(train);
  const RestrictionBall ball = default_ball(train, cfg.candidate.ball_quantile,
                                            cfg.candidate.ball_scale);

  AggregateDensity agg;
  agg.ball = ball;
  agg.split_plan = plan;
  agg.seed = rng.seed();
  agg.candidates.resize(static_cast<std::size_t>(M));
  CandidateConfig ccfg = cfg.candidate;
  ccfg.with_square_integral = true;
  parallel_for(static_cast<std::size_t>(M), cfg.threads, [&](std::size_t i) {
    const int k = static_cast<int>(i) + 1;
    Stream cand_stream = rng.derive("candidate", static_cast<std::uint64_t>(k));
    agg.candidates[i] =
        fit_candidate(train, spec, k, M, ccfg, cand_stream, cfg.known_sigma2, ball);
  });

  const double sigma2_m = agg.candidates.back().frame.sigma2;
  const double gaussian_floor =
      std::exp(-0.5 * d * std::log(2.0 * std::numbers::pi * sigma2_m));
  double sup = 0.0;
  for (const auto& cand : agg.candidates) sup = std::max(sup, cand.sup_estimate);
  agg.beta = 12.0 * std::max(gaussian_floor, sup);

  std::vector<Eigen::Index> order = plan.indices2;
  {
    Stream order_stream = rng.derive("order");
    order_stream.shuffle(order);
  }
  Eigen::MatrixXd scores(M, static_cast<Eigen::Index>(plan.n2));
  parallel_for(plan.n2, cfg.threads, [&](std::size_t l) {
    const Eigen::VectorXd x =
        data.values.row(order[l]).transpose() + data.center;
    for (int k = 0; k < M; ++k)
      scores(k, static_cast<Eigen::Index>(l)) =
          score_uk(agg.candidates[static_cast<std::size_t>(k)], x);
  });

  agg.theta = mirror_average(scores, agg.beta,
                             Eigen::VectorXd::Constant(M, 1.0 / static_cast<double>(M)));
  return agg;
}

}  // namespace nifa
