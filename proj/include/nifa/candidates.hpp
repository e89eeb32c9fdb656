#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "nifa/kde1d.hpp"
#include "nifa/linmodel.hpp"
#include "nifa/numeric.hpp"
#include "nifa/parallel.hpp"
#include "nifa/rng.hpp"

namespace nifa {

//! Euclidean ball outside which fitted densities evaluate to zero.
struct RestrictionBall {
  Eigen::VectorXd center;
  double radius = 0.0;

  bool contains(const Eigen::VectorXd& x) const {
    return (x - center).squaredNorm() <= radius * radius;
  }
};

//! Ball centered at the sample mean with radius scale * (quantile of the
//! centered norms). The default covers the data with a 20% margin.
inline RestrictionBall default_ball(const DataMatrix& data, double quantile_p = 0.995,
                                    double scale = 1.2) {
  if (!(quantile_p > 0.0 && quantile_p <= 1.0))
    throw ValidationError("default_ball: quantile must lie in (0,1]");
  if (!(scale > 0.0)) throw ValidationError("default_ball: scale must be positive");
  std::vector<double> norms(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    norms[static_cast<std::size_t>(i)] = data.values.row(i).norm();
  std::sort(norms.begin(), norms.end());
  RestrictionBall ball{data.center, scale * quantile_sorted(norms, quantile_p)};
  if (!(ball.radius > 0.0))
    throw EstimationError("default_ball: degenerate data, ball radius is zero");
  return ball;
}

struct SquareIntegral {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
  bool converged = false;
};

struct CandidateConfig {
  KernelId kernel = KernelId::sinc;
  int grid_count = 1024;
  double bandwidth_scale = 1.0;
  double ball_quantile = 0.995;
  double ball_scale = 1.2;
  std::size_t mc_initial = 1024;              // first Monte-Carlo batch
  double mc_tol = 0.005;                      // relative change between doublings
  std::size_t mc_cap = std::size_t{1} << 20;  // draw budget
  bool with_square_integral = true;
  unsigned threads = 1;
};

//! Rank-k density candidate: an isotropic Gaussian on the orthogonal
//! complement of the frame times kernel marginals along the frame axes,
//! restricted to the ball.
struct CandidateModel {
  RankKFrame frame;
  Eigen::VectorXd data_center;
  std::vector<Kde1d> marginals;
  RestrictionBall ball;
  SquareIntegral sq_integral;
  double sup_estimate = 0.0;

  int dim() const { return static_cast<int>(frame.basis.rows()); }
  int rank() const { return frame.k; }

  double eval(const Eigen::VectorXd& x) const {
    if (x.size() != frame.basis.rows())
      throw ValidationError("CandidateModel::eval: dimension mismatch");
    if (!ball.contains(x)) return 0.0;
    const Eigen::VectorXd xc = x - data_center;
    const Eigen::VectorXd proj = frame.basis.transpose() * xc;
    double value = 1.0;
    const int excess = dim() - rank();
    if (excess > 0) {
      double q = xc.squaredNorm() - proj.squaredNorm();
      if (q < 0.0) q = 0.0;
      value = std::exp(-0.5 * excess * std::log(2.0 * std::numbers::pi * frame.sigma2) -
                       q / (2.0 * frame.sigma2));
    }
    for (int j = 0; j < rank(); ++j) {
      value *= marginals[static_cast<std::size_t>(j)].eval(proj[j]);
      if (value == 0.0) return 0.0;
    }
    return value;
  }

  //! Draws from the unrestricted candidate: marginal draws along the frame
  //! plus isotropic Gaussian noise on the orthogonal complement. With a
  //! full-rank frame the noise subspace is empty and no noise is drawn.
  Eigen::MatrixXd sample(Stream& rng, std::size_t count) const {
    const int d = dim();
    const int k = rank();
    const double sigma = std::sqrt(frame.sigma2);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count), d);
    Eigen::VectorXd y(k);
    Eigen::VectorXd eps(d);
    for (std::size_t i = 0; i < count; ++i) {
      for (int j = 0; j < k; ++j) y[j] = marginals[static_cast<std::size_t>(j)].sample(rng);
      Eigen::VectorXd x = frame.basis * y;
      if (k < d) {
        for (int j = 0; j < d; ++j) eps[j] = sigma * rng.normal();
        x += eps - frame.basis * (frame.basis.transpose() * eps);
      }
      out.row(static_cast<Eigen::Index>(i)) = (x + data_center).transpose();
    }
    return out;
  }
};

struct McOutcome {
  SquareIntegral integral;
  double max_density = 0.0;
};

//! Monte-Carlo estimate of the squared-density integral over the ball via
//! the identity E_p[p 1_B] = integral of p^2 over B (the candidate already
//! vanishes off the ball when evaluated). The draw count doubles until the
//! running mean moves by less than mc_tol between doublings or the cap is
//! reached. Per-block substreams keep the result thread-count independent.
inline McOutcome mc_square_integral(const CandidateModel& model, Stream& rng,
                                    const CandidateConfig& cfg) {
  if (model.marginals.empty())
    throw ValidationError("mc_square_integral: candidate has no fitted marginals");
  if (!(cfg.mc_tol >= 0.0)) throw ValidationError("mc_square_integral: negative tolerance");
  const std::size_t block = std::max<std::size_t>(cfg.mc_initial, 64);

  double sum = 0.0;
  double sumsq = 0.0;
  double maxv = 0.0;
  std::size_t drawn = 0;
  std::size_t blocks_done = 0;

  auto run_blocks = [&](std::size_t nblocks) {
    std::vector<std::array<double, 3>> acc(nblocks);
    parallel_for(nblocks, cfg.threads, [&](std::size_t b) {
      Stream s = rng.derive("mc-block", blocks_done + b);
      const Eigen::MatrixXd draws = model.sample(s, block);
      double ls = 0.0, lss = 0.0, lm = 0.0;
      for (Eigen::Index r = 0; r < draws.rows(); ++r) {
        const double v = model.eval(draws.row(r).transpose());
        ls += v;
        lss += v * v;
        if (v > lm) lm = v;
      }
      acc[b] = {ls, lss, lm};
    });
    for (const auto& a : acc) {
      sum += a[0];
      sumsq += a[1];
      if (a[2] > maxv) maxv = a[2];
    }
    blocks_done += nblocks;
    drawn += nblocks * block;
  };

  run_blocks(1);
  double prev_mean = -1.0;
  bool converged = false;
  for (;;) {
    const double mean = sum / static_cast<double>(drawn);
    if (prev_mean >= 0.0 && mean > 0.0 &&
        std::abs(mean - prev_mean) < cfg.mc_tol * mean) {
      converged = true;
      break;
    }
    if (drawn >= cfg.mc_cap) break;
    prev_mean = mean;
    run_blocks(blocks_done);
  }
  if (!converged)
    warn("mc_square_integral: draw cap reached before the estimate settled");

  const double mean = sum / static_cast<double>(drawn);
  const double var =
      drawn > 1 ? std::max(0.0, (sumsq - static_cast<double>(drawn) * mean * mean) /
                                    static_cast<double>(drawn - 1))
                : 0.0;
  McOutcome out;
  out.integral = {mean, std::sqrt(var / static_cast<double>(drawn)), drawn, converged};
  out.max_density = maxv;
  return out;
}

//! Fits a candidate for a given projection frame: kernel marginals of the
//! projected data with bandwidth sqrt(sigma2_k)/sqrt(log n1), then the
//! squared-integral bookkeeping needed by the aggregation stage.
inline CandidateModel fit_candidate_with_frame(const DataMatrix& train, RankKFrame frame,
                                               const CandidateConfig& cfg, Stream& rng,
                                               std::optional<RestrictionBall> ball = {}) {
  const Eigen::Index n1 = train.rows();
  if (n1 < 10) throw ValidationError("fit_candidate: need at least 10 training rows");
  if (frame.basis.rows() != train.cols())
    throw ValidationError("fit_candidate: frame dimension does not match the data");
  if (!(frame.sigma2 > 0.0))
    throw EstimationError("fit_candidate: noise variance estimate is not positive");

  CandidateModel model;
  model.frame = std::move(frame);
  model.data_center = train.center;
  model.ball = ball ? *ball : default_ball(train, cfg.ball_quantile, cfg.ball_scale);

  const double h =
      bandwidth(std::sqrt(model.frame.sigma2), static_cast<std::size_t>(n1)) *
      cfg.bandwidth_scale;
  const Eigen::MatrixXd proj = train.values * model.frame.basis;
  model.marginals.reserve(static_cast<std::size_t>(model.rank()));
  for (int j = 0; j < model.rank(); ++j) {
    const Eigen::VectorXd col = proj.col(j);
    model.marginals.push_back(fit_kde1d(
        std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
        cfg.kernel, h, cfg.grid_count));
  }

  if (cfg.with_square_integral) {
    Stream mc_stream = rng.derive("mc");
    const McOutcome mc = mc_square_integral(model, mc_stream, cfg);
    model.sq_integral = mc.integral;
    model.sup_estimate = mc.max_density;
    // A few uniform-in-ball probes so the sup estimate is not blind to
    // regions the sampler rarely visits. Skipped for an unbounded ball.
    Stream probe = rng.derive("probe");
    const int d = model.dim();
    Eigen::VectorXd dir(d);
    for (int i = 0; std::isfinite(model.ball.radius) && i < 10 * d; ++i) {
      for (int j = 0; j < d; ++j) dir[j] = probe.normal();
      const double nrm = dir.norm();
      if (!(nrm > 0.0)) continue;
      const double r = model.ball.radius *
                       std::pow(probe.uniform(), 1.0 / static_cast<double>(d));
      const Eigen::VectorXd x = model.ball.center + dir * (r / nrm);
      const double v = model.eval(x);
      if (v > model.sup_estimate) model.sup_estimate = v;
    }
  }
  return model;
}

inline CandidateModel fit_candidate(const DataMatrix& train, const SpectralDecomposition& spec,
                                    int k, int M, const CandidateConfig& cfg, Stream& rng,
                                    std::optional<double> known_sigma2 = {},
                                    std::optional<RestrictionBall> ball = {}) {
  return fit_candidate_with_frame(train, rank_k_frame(spec, k, M, known_sigma2), cfg, rng,
                                  std::move(ball));
}

}  // namespace nifa
