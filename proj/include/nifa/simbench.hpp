#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "nifa/aggregator.hpp"
#include "nifa/kde1d.hpp"
#include "nifa/linmodel.hpp"
#include "nifa/numeric.hpp"
#include "nifa/rng.hpp"

namespace nifa::sim {

inline double normal_pdf(double x, double mean = 0.0, double sd = 1.0) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

inline double gamma_pdf(double x, double shape, double scale = 1.0) {
  if (x <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(x / scale) - x / scale -
                  std::lgamma(shape)) / scale;
}

//! One of the seven benchmark factor laws. `lo`/`hi` bound a range holding
//! all but less than 1e-7 of the mass, wide enough for quadrature work.
//! pdf/sample refer to the raw (uncentered) law; generation subtracts the
//! mean so factors are always centered.
struct TestDensity {
  int id = 0;
  const char* name = "";
  double mean = 0.0;
  double variance = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  double pdf(double x) const {
    switch (id) {
      case 1: return normal_pdf(x);
      case 2: return gamma_pdf(x, 0.5, 2.0);  // chi-squared, 1 df
      case 3: return 0.5 * normal_pdf(x, -3.0) + 0.5 * normal_pdf(x, 2.0);
      case 4: return 0.4 * gamma_pdf(x, 5.0) + 0.6 * gamma_pdf(x, 13.0);
      case 5: return gamma_pdf(x, 4.0, 2.0);  // chi-squared, 8 df
      case 6: {
        // Student t, 5 degrees of freedom
        const double c = std::exp(std::lgamma(3.0) - std::lgamma(2.5)) /
                         std::sqrt(5.0 * std::numbers::pi);
        return c * std::pow(1.0 + x * x / 5.0, -3.0);
      }
      case 7: return 0.5 * std::exp(-std::abs(x));
      default: throw ValidationError("TestDensity: unknown id");
    }
  }

  double sample(Stream& rng) const {
    switch (id) {
      case 1: return rng.normal();
      case 2: {
        const double z = rng.normal();
        return z * z;
      }
      case 3: return rng.uniform() < 0.5 ? -3.0 + rng.normal() : 2.0 + rng.normal();
      case 4: return rng.uniform() < 0.4 ? rng.gamma_int(5) : rng.gamma_int(13);
      case 5: return 2.0 * rng.gamma_int(4);
      case 6: return rng.normal() / std::sqrt(rng.chi_squared(5) / 5.0);
      case 7: {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        return sign * rng.exponential();
      }
      default: throw ValidationError("TestDensity: unknown id");
    }
  }
};

//! The benchmark catalogue: 1 standard normal, 2 chi-squared(1),
//! 3 Gaussian mixture, 4 gamma mixture, 5 chi-squared(8), 6 Student t(5),
//! 7 Laplace.
inline const TestDensity& test_density(int id) {
  static const std::vector<TestDensity> catalogue = {
      {1, "gaussian", 0.0, 1.0, -14.0, 14.0},
      {2, "chi_squared_1", 1.0, 2.0, 0.0, 60.0},
      {3, "gaussian_mixture", -0.5, 7.25, -17.0, 16.0},
      {4, "gamma_mixture", 9.8, 25.16, 0.0, 80.0},
      {5, "chi_squared_8", 8.0, 16.0, 0.0, 120.0},
      {6, "student_t_5", 0.0, 5.0 / 3.0, -60.0, 60.0},
      {7, "laplace", 0.0, 2.0, -40.0, 40.0},
  };
  if (id < 1 || id > static_cast<int>(catalogue.size()))
    throw ValidationError("test_density: id must lie in 1..7");
  return catalogue[static_cast<std::size_t>(id - 1)];
}

//! Random d x m matrix with orthonormal columns: i.i.d. Gaussian entries
//! orthogonalized by two Gram-Schmidt sweeps.
inline Eigen::MatrixXd random_orthonormal(int d, int m, std::uint64_t seed) {
  if (m < 1 || m > d) throw ValidationError("random_orthonormal: need 1 <= m <= d");
  Stream rng(seed);
  Eigen::MatrixXd a(d, m);
  for (int j = 0; j < m; ++j) {
    for (;;) {
      for (int i = 0; i < d; ++i) a(i, j) = rng.normal();
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i < j; ++i) a.col(j) -= a.col(i).dot(a.col(j)) * a.col(i);
      const double nrm = a.col(j).norm();
      if (nrm > 1e-8) {
        a.col(j) /= nrm;
        break;
      }
    }
  }
  return a;
}

//! Ground truth of a synthetic run: orthonormal mixing, centered factor
//! laws, isotropic Gaussian noise with standard deviation sigma.
struct SyntheticTruth {
  int d = 0;
  int m = 0;
  Eigen::MatrixXd mixing;        // d x m
  std::vector<int> factor_ids;   // m entries, each 1..7
  Eigen::VectorXd factor_var;    // per-factor variance
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

//! Builds a truth with signal-to-noise ratio snr: sigma =
//! sqrt(mean factor variance per coordinate) / snr. snr = infinity gives a
//! noiseless model.
inline SyntheticTruth make_truth(int d, int m, const std::vector<int>& factor_ids,
                                 double snr, std::uint64_t seed) {
  if (m < 1 || m > d) throw ValidationError("make_truth: need 1 <= m <= d");
  if (static_cast<int>(factor_ids.size()) != m)
    throw ValidationError("make_truth: need one factor id per latent dimension");
  if (!(snr > 0.0)) throw ValidationError("make_truth: snr must be positive");
  SyntheticTruth truth;
  truth.d = d;
  truth.m = m;
  truth.factor_ids = factor_ids;
  truth.seed = seed;
  truth.mixing = random_orthonormal(d, m, Stream(seed).derive("mixing").seed());
  truth.factor_var.resize(m);
  for (int j = 0; j < m; ++j)
    truth.factor_var[j] = test_density(factor_ids[static_cast<std::size_t>(j)]).variance;
  const double per_coordinate = truth.factor_var.sum() / static_cast<double>(d);
  truth.sigma = std::isinf(snr) ? 0.0 : std::sqrt(per_coordinate) / snr;
  return truth;
}

struct LatentRecord {
  Eigen::MatrixXd factors;  // n x m, centered
  Eigen::MatrixXd noise;    // n x d
};

//! Draws n observations X = S A' + noise. Deterministic in (truth, seed).
inline Eigen::MatrixXd generate(const SyntheticTruth& truth, std::size_t n,
                                std::uint64_t seed, LatentRecord* latent = nullptr) {
  if (n < 1) throw ValidationError("generate: need at least one observation");
  Stream factor_stream = Stream(seed).derive("factors");
  Stream noise_stream = Stream(seed).derive("noise");
  Eigen::MatrixXd factors(static_cast<Eigen::Index>(n), truth.m);
  for (Eigen::Index i = 0; i < factors.rows(); ++i)
    for (int j = 0; j < truth.m; ++j) {
      const TestDensity& law = test_density(truth.factor_ids[static_cast<std::size_t>(j)]);
      factors(i, j) = law.sample(factor_stream) - law.mean;
    }
  Eigen::MatrixXd x = factors * truth.mixing.transpose();
  Eigen::MatrixXd noise;
  if (truth.sigma > 0.0) {
    noise.resize(static_cast<Eigen::Index>(n), truth.d);
    for (Eigen::Index i = 0; i < noise.rows(); ++i)
      for (int j = 0; j < truth.d; ++j) noise(i, j) = truth.sigma * noise_stream.normal();
    x += noise;
  }
  if (latent) {
    latent->factors = std::move(factors);
    if (truth.sigma > 0.0)
      latent->noise = std::move(noise);
    else
      latent->noise = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), truth.d);
  }
  return x;
}

namespace detail {

// Convolved factor marginal g = centered law * N(0, sigma^2), cached on a
// fine grid. Gaussian laws use closed forms instead of a grid; the
// chi-squared(1) convolution integrates over z with x = z^2 to tame the
// x^{-1/2} endpoint singularity.
struct ConvolvedMarginal {
  enum class Kind { gaussian, gaussian_mixture, grid, raw_pdf };
  Kind kind = Kind::raw_pdf;
  int law_id = 0;
  double sigma = 0.0;
  double sd = 0.0;  // gaussian kinds: component standard deviation
  GridSpec grid;
  std::vector<double> values;

  double eval(double u) const {
    switch (kind) {
      case Kind::gaussian:
        return normal_pdf(u, 0.0, sd);
      case Kind::gaussian_mixture:
        return 0.5 * normal_pdf(u, -2.5, sd) + 0.5 * normal_pdf(u, 2.5, sd);
      case Kind::raw_pdf: {
        const TestDensity& law = test_density(law_id);
        return law.pdf(u + law.mean);
      }
      case Kind::grid: {
        if (!(u >= grid.lo && u <= grid.hi)) return 0.0;
        double t = (u - grid.lo) / grid.step();
        int i = static_cast<int>(t);
        if (i > grid.count - 2) i = grid.count - 2;
        const double w = t - static_cast<double>(i);
        const std::size_t j = static_cast<std::size_t>(i);
        return values[j] + w * (values[j + 1] - values[j]);
      }
    }
    return 0.0;
  }
};

inline ConvolvedMarginal build_marginal(int law_id, double sigma, int grid_count) {
  const TestDensity& law = test_density(law_id);
  ConvolvedMarginal out;
  out.law_id = law_id;
  out.sigma = sigma;
  if (sigma == 0.0) {
    out.kind = ConvolvedMarginal::Kind::raw_pdf;
    return out;
  }
  if (law_id == 1) {
    out.kind = ConvolvedMarginal::Kind::gaussian;
    out.sd = std::sqrt(1.0 + sigma * sigma);
    return out;
  }
  if (law_id == 3) {
    out.kind = ConvolvedMarginal::Kind::gaussian_mixture;
    out.sd = std::sqrt(1.0 + sigma * sigma);
    return out;
  }

  out.kind = ConvolvedMarginal::Kind::grid;
  out.grid = GridSpec{law.lo - law.mean - 8.0 * sigma, law.hi - law.mean + 8.0 * sigma,
                      grid_count};
  out.values.resize(static_cast<std::size_t>(grid_count));
  if (law_id == 2) {
    // g(u) = E_Z phi_sigma(u - (Z^2 - 1)), Z standard normal
    const int nz = 16384;
    const double zmax = 9.0;
    const double dz = 2.0 * zmax / static_cast<double>(nz);
    std::vector<double> znodes(static_cast<std::size_t>(nz + 1));
    std::vector<double> zweight(static_cast<std::size_t>(nz + 1));
    for (int i = 0; i <= nz; ++i) {
      const double z = -zmax + dz * static_cast<double>(i);
      znodes[static_cast<std::size_t>(i)] = z;
      zweight[static_cast<std::size_t>(i)] =
          normal_pdf(z) * ((i == 0 || i == nz) ? 0.5 : 1.0) * dz;
    }
    for (int g = 0; g < grid_count; ++g) {
      const double u = out.grid.node(g);
      double acc = 0.0;
      for (int i = 0; i <= nz; ++i) {
        const double shifted = u - (znodes[static_cast<std::size_t>(i)] *
                                        znodes[static_cast<std::size_t>(i)] -
                                    1.0);
        acc += zweight[static_cast<std::size_t>(i)] * normal_pdf(shifted, 0.0, sigma);
      }
      out.values[static_cast<std::size_t>(g)] = acc;
    }
    return out;
  }

  // Window quadrature: g(u) = integral of f(u - w) phi_sigma(w) dw over
  // |w| <= 8 sigma, with f the centered law density.
  const int nw = 4096;
  const double wmax = 8.0 * sigma;
  const double dw = 2.0 * wmax / static_cast<double>(nw);
  std::vector<double> wnodes(static_cast<std::size_t>(nw + 1));
  std::vector<double> wweight(static_cast<std::size_t>(nw + 1));
  for (int i = 0; i <= nw; ++i) {
    const double w = -wmax + dw * static_cast<double>(i);
    wnodes[static_cast<std::size_t>(i)] = w;
    wweight[static_cast<std::size_t>(i)] =
        normal_pdf(w, 0.0, sigma) * ((i == 0 || i == nw) ? 0.5 : 1.0) * dw;
  }
  for (int g = 0; g < grid_count; ++g) {
    const double u = out.grid.node(g);
    double acc = 0.0;
    for (int i = 0; i <= nw; ++i)
      acc += wweight[static_cast<std::size_t>(i)] *
             law.pdf(u - wnodes[static_cast<std::size_t>(i)] + law.mean);
    out.values[static_cast<std::size_t>(g)] = acc;
  }
  return out;
}

// The grids depend only on (law, sigma, resolution), so replications with a
// common noise level share them.
inline const ConvolvedMarginal& cached_marginal(int law_id, double sigma, int grid_count) {
  struct Key {
    int id;
    std::uint64_t sigma_bits;
    int count;
    bool operator<(const Key& other) const {
      return std::tie(id, sigma_bits, count) <
             std::tie(other.id, other.sigma_bits, other.count);
    }
  };
  static std::map<Key, std::unique_ptr<ConvolvedMarginal>> cache;
  static std::mutex mutex;
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(sigma));
  std::memcpy(&bits, &sigma, sizeof(bits));
  const Key key{law_id, bits, grid_count};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::make_unique<ConvolvedMarginal>(
                                build_marginal(law_id, sigma, grid_count)))
             .first;
  }
  return *it->second;
}

}  // namespace detail

//! Exact density of the synthetic model: isotropic Gaussian off the mixing
//! image times the noise-convolved factor marginals along it.
class TrueDensity {
public:
  explicit TrueDensity(const SyntheticTruth& truth, int marginal_grid = 8192)
      : truth_(truth) {
    if (truth_.sigma == 0.0 && truth_.m < truth_.d)
      throw ValidationError("TrueDensity: a noiseless model must have m = d");
    marginals_.reserve(static_cast<std::size_t>(truth_.m));
    for (int j = 0; j < truth_.m; ++j)
      marginals_.push_back(detail::cached_marginal(
          truth_.factor_ids[static_cast<std::size_t>(j)], truth_.sigma, marginal_grid));
  }

  const SyntheticTruth& truth() const { return truth_; }

  double marginal(int j, double u) const {
    return marginals_[static_cast<std::size_t>(j)].get().eval(u);
  }

  // Marginal variance of the coordinates of X.
  Eigen::VectorXd coordinate_variances() const {
    Eigen::VectorXd v(truth_.d);
    for (int i = 0; i < truth_.d; ++i) {
      double s = truth_.sigma * truth_.sigma;
      for (int j = 0; j < truth_.m; ++j)
        s += truth_.mixing(i, j) * truth_.mixing(i, j) * truth_.factor_var[j];
      v[i] = s;
    }
    return v;
  }

  double operator()(const Eigen::VectorXd& x) const {
    if (x.size() != truth_.d) throw ValidationError("TrueDensity: dimension mismatch");
    const Eigen::VectorXd proj = truth_.mixing.transpose() * x;
    double value = 1.0;
    const int excess = truth_.d - truth_.m;
    if (excess > 0) {
      double q = x.squaredNorm() - proj.squaredNorm();
      if (q < 0.0) q = 0.0;
      const double s2 = truth_.sigma * truth_.sigma;
      value = std::exp(-0.5 * excess * std::log(2.0 * std::numbers::pi * s2) -
                       q / (2.0 * s2));
    }
    for (int j = 0; j < truth_.m; ++j) {
      value *= marginals_[static_cast<std::size_t>(j)].get().eval(proj[j]);
      if (value == 0.0) return 0.0;
    }
    return value;
  }

private:
  SyntheticTruth truth_;
  std::vector<std::reference_wrapper<const detail::ConvolvedMarginal>> marginals_;
};

//! Density evaluator over a block of points (rows). Batch form so grid
//! sweeps can use vectorized implementations.
using BatchEval = std::function<void(const Eigen::MatrixXd&, Eigen::VectorXd&)>;

inline BatchEval pointwise(std::function<double(const Eigen::VectorXd&)> f) {
  return [f = std::move(f)](const Eigen::MatrixXd& pts, Eigen::VectorXd& out) {
    out.resize(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) out[i] = f(pts.row(i).transpose());
  };
}

struct I1Config {
  int grid_per_dim = 64;          // tensor quadrature (d <= 3)
  std::size_t mc_draws = 100000;  // importance sampling (d >= 4)
  double box_stds = 6.0;
  double ratio_clip = 1e6;
  std::uint64_t seed = 9001;
};

struct I1Result {
  double i1 = 0.0;
  double distance_sq = 0.0;  // integral of (estimate - truth)^2
  double truth_sq = 0.0;     // integral of truth^2
  double std_error = 0.0;    // Monte-Carlo path only
  bool mc_path = false;
  bool clipped = false;
};

//! Relative squared-error fidelity score 100 (1 - ||est - p||^2 / ||p||^2).
//! Low dimensions integrate on a tensor grid over the box center +- 6
//! marginal standard deviations; higher dimensions importance-sample the
//! ratio under the truth.
inline I1Result i1_criterion(const BatchEval& estimate, const TrueDensity& truth,
                             const I1Config& cfg = {}) {
  const SyntheticTruth& t = truth.truth();
  I1Result result;
  if (t.d <= 3) {
    const double half = cfg.box_stds * std::sqrt(truth.coordinate_variances().maxCoeff());
    const int G = cfg.grid_per_dim;
    if (G < 8) throw ValidationError("i1_criterion: grid too coarse");
    const double delta = 2.0 * half / static_cast<double>(G - 1);
    std::vector<double> nodes(static_cast<std::size_t>(G));
    for (int i = 0; i < G; ++i) nodes[static_cast<std::size_t>(i)] = -half + delta * i;
    std::size_t total = 1;
    for (int r = 0; r < t.d; ++r) total *= static_cast<std::size_t>(G);

    const std::size_t block_size = 8192;
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(block_size), t.d);
    Eigen::VectorXd weights(static_cast<Eigen::Index>(block_size));
    Eigen::VectorXd est_vals;
    double num = 0.0;
    double den = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(t.d), 0);
    std::size_t emitted = 0;
    Eigen::Index fill = 0;
    const double cell = std::pow(delta, t.d);
    auto flush = [&]() {
      if (fill == 0) return;
      const Eigen::MatrixXd block = pts.topRows(fill);
      estimate(block, est_vals);
      if (est_vals.size() != fill)
        throw NumericError("i1_criterion: estimator returned a short block");
      for (Eigen::Index i = 0; i < fill; ++i) {
        const double p = truth(block.row(i).transpose());
        const double diff = est_vals[i] - p;
        num += weights[i] * diff * diff;
        den += weights[i] * p * p;
      }
      fill = 0;
    };
    while (emitted < total) {
      double w = cell;
      for (int r = 0; r < t.d; ++r) {
        pts(fill, r) = nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
        if (idx[static_cast<std::size_t>(r)] == 0 || idx[static_cast<std::size_t>(r)] == G - 1)
          w *= 0.5;
      }
      weights[fill] = w;
      ++fill;
      ++emitted;
      if (fill == static_cast<Eigen::Index>(block_size)) flush();
      for (int r = 0; r < t.d; ++r) {
        if (++idx[static_cast<std::size_t>(r)] < G) break;
        idx[static_cast<std::size_t>(r)] = 0;
      }
    }
    flush();
    if (!(den > 0.0)) throw EstimationError("i1_criterion: truth mass missing from the box");
    result.distance_sq = num;
    result.truth_sq = den;
    result.i1 = 100.0 * (1.0 - num / den);
    return result;
  }

  // Importance sampling under the truth: E[(est - p)^2 / p] and E[p].
  result.mc_path = true;
  const std::size_t n = cfg.mc_draws;
  if (n < 100) throw ValidationError("i1_criterion: too few draws");
  const Eigen::MatrixXd draws = generate(t, n, Stream(cfg.seed).derive("i1").seed());
  Eigen::VectorXd est_vals;
  estimate(draws, est_vals);
  if (est_vals.size() != draws.rows())
    throw NumericError("i1_criterion: estimator returned a short block");
  double sum_r = 0.0, sum_r2 = 0.0, sum_p = 0.0, sum_p2 = 0.0, sum_rp = 0.0;
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    const double p = truth(draws.row(i).transpose());
    const double diff = est_vals[i] - p;
    double ratio = p > 0.0 ? diff * diff / p : cfg.ratio_clip;
    if (ratio > cfg.ratio_clip) {
      ratio = cfg.ratio_clip;
      result.clipped = true;
    }
    sum_r += ratio;
    sum_r2 += ratio * ratio;
    sum_p += p;
    sum_p2 += p * p;
    sum_rp += ratio * p;
  }
  if (result.clipped)
    warn("i1_criterion: importance ratios clipped; the score is conservative");
  const double nn = static_cast<double>(n);
  const double mean_r = sum_r / nn;
  const double mean_p = sum_p / nn;
  if (!(mean_p > 0.0)) throw EstimationError("i1_criterion: degenerate truth draws");
  const double var_r = std::max(0.0, sum_r2 / nn - mean_r * mean_r) / nn;
  const double var_p = std::max(0.0, sum_p2 / nn - mean_p * mean_p) / nn;
  const double cov_rp = (sum_rp / nn - mean_r * mean_p) / nn;
  result.distance_sq = mean_r;
  result.truth_sq = mean_p;
  result.i1 = 100.0 * (1.0 - mean_r / mean_p);
  // delta method for the ratio of means
  const double g1 = 1.0 / mean_p;
  const double g2 = -mean_r / (mean_p * mean_p);
  result.std_error =
      100.0 * std::sqrt(std::max(0.0, g1 * g1 * var_r + g2 * g2 * var_p +
                                          2.0 * g1 * g2 * cov_rp));
  return result;
}

//! Product-Gaussian kernel density baseline with per-coordinate normal
//! reference bandwidths h_i = std_i * n^(-1/(d+4)). Practical up to d = 6.
class BaselineKde {
public:
  explicit BaselineKde(const DataMatrix& data)
      : BaselineKde(data, scott_bandwidths(data)) {}

  BaselineKde(const DataMatrix& data, Eigen::VectorXd bandwidths) {
    const Eigen::Index d = data.cols();
    if (d > 6)
      throw ValidationError("BaselineKde: the product-kernel baseline supports d <= 6");
    if (bandwidths.size() != d)
      throw ValidationError("BaselineKde: need one bandwidth per coordinate");
    for (Eigen::Index j = 0; j < d; ++j)
      if (!(bandwidths[j] > 0.0))
        throw ValidationError("BaselineKde: bandwidths must be positive");
    inv_h_ = bandwidths.cwiseInverse();
    points_ = (data.values.rowwise() + data.center.transpose()) * inv_h_.asDiagonal();
    double log_norm = -std::log(static_cast<double>(points_.rows()));
    for (Eigen::Index j = 0; j < d; ++j)
      log_norm -= std::log(bandwidths[j] * std::sqrt(2.0 * std::numbers::pi));
    norm_ = std::exp(log_norm);
  }

  double eval(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out;
    Eigen::MatrixXd pt = x.transpose();
    eval_batch(pt, out);
    return out[0];
  }

  void eval_batch(const Eigen::MatrixXd& pts, Eigen::VectorXd& out) const {
    if (pts.cols() != points_.cols())
      throw ValidationError("BaselineKde: dimension mismatch");
    const Eigen::MatrixXd scaled = pts * inv_h_.asDiagonal();
    out = Eigen::VectorXd::Zero(pts.rows());
    Eigen::VectorXd z(pts.rows());
    for (Eigen::Index i = 0; i < points_.rows(); ++i) {
      z = (scaled.rowwise() - points_.row(i)).rowwise().squaredNorm();
      out.array() += (-0.5 * z.array()).exp();
    }
    out *= norm_;
  }

  BatchEval batch() const {
    return [this](const Eigen::MatrixXd& pts, Eigen::VectorXd& out) {
      eval_batch(pts, out);
    };
  }

private:
  static Eigen::VectorXd scott_bandwidths(const DataMatrix& data) {
    if (data.rows() < 2)
      throw ValidationError("BaselineKde: need at least 2 observations");
    const double n = static_cast<double>(data.rows());
    const double rate = std::pow(n, -1.0 / (static_cast<double>(data.cols()) + 4.0));
    Eigen::VectorXd h(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double sd = std::sqrt(data.values.col(j).squaredNorm() / (n - 1.0));
      if (!(sd > 0.0))
        throw EstimationError("BaselineKde: a coordinate has zero spread");
      h[j] = sd * rate;
    }
    return h;
  }

  Eigen::MatrixXd points_;  // pre-scaled by 1/h
  Eigen::VectorXd inv_h_;
  double norm_ = 0.0;
};

struct BenchmarkConfig {
  int d = 2;
  int m = 1;
  std::vector<int> factor_ids{2};
  double snr = 3.0;
  std::size_t n = 1000;
  int replications = 50;
  AggregateConfig aggregate;
  I1Config i1;
  bool with_baseline = true;
  double max_failure_fraction = 0.2;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct RepOutcome {
  int rep = 0;
  std::string status = "ok";  // "ok" or "failed: <reason>"
  double i1_model = 0.0;
  double i1_baseline = 0.0;
  double model_seconds = 0.0;
  double baseline_seconds = 0.0;
};

struct Quartiles {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

inline Quartiles summarize(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  Quartiles q;
  q.min = quantile_sorted(values, 0.0);
  q.q1 = quantile_sorted(values, 0.25);
  q.median = quantile_sorted(values, 0.5);
  q.q3 = quantile_sorted(values, 0.75);
  q.max = quantile_sorted(values, 1.0);
  return q;
}

struct BenchmarkResult {
  std::vector<RepOutcome> reps;
  Quartiles model_summary;
  Quartiles baseline_summary;
  int failures = 0;
  bool baseline_present = false;
};

//! Repeated synthetic fidelity comparison: per replication, draws a fresh
//! truth and sample, fits the aggregated factor estimator (and the product
//! kernel baseline), and records fidelity scores and fit times. More than
//! max_failure_fraction failed replications aborts the run.
inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.replications < 1) throw ValidationError("run_benchmark: need replications >= 1");
  if (cfg.n < 4) throw ValidationError("run_benchmark: need n >= 4");
  BenchmarkResult result;
  result.reps.resize(static_cast<std::size_t>(cfg.replications));
  result.baseline_present = cfg.with_baseline;
  const Stream root(cfg.seed);

  parallel_for(static_cast<std::size_t>(cfg.replications), cfg.threads, [&](std::size_t r) {
    RepOutcome& outcome = result.reps[r];
    outcome.rep = static_cast<int>(r);
    try {
      const Stream rep_stream = root.derive("rep", r);
      const SyntheticTruth truth = make_truth(cfg.d, cfg.m, cfg.factor_ids, cfg.snr,
                                              rep_stream.derive("truth").seed());
      const TrueDensity density(truth);
      const Eigen::MatrixXd raw =
          generate(truth, cfg.n, rep_stream.derive("data").seed());
      const DataMatrix data = center(raw);

      I1Config i1cfg = cfg.i1;
      i1cfg.seed = rep_stream.derive("i1").seed();

      const auto t0 = std::chrono::steady_clock::now();
      Stream fit_stream = rep_stream.derive("fit");
      const AggregateDensity model = fit_aggregate(data, cfg.aggregate, fit_stream);
      const auto t1 = std::chrono::steady_clock::now();
      outcome.model_seconds = std::chrono::duration<double>(t1 - t0).count();
      outcome.i1_model =
          i1_criterion(pointwise([&](const Eigen::VectorXd& x) { return model.eval(x); }),
                       density, i1cfg)
              .i1;

      if (cfg.with_baseline) {
        const auto t2 = std::chrono::steady_clock::now();
        const BaselineKde baseline(data);
        const auto t3 = std::chrono::steady_clock::now();
        outcome.baseline_seconds = std::chrono::duration<double>(t3 - t2).count();
        outcome.i1_baseline = i1_criterion(baseline.batch(), density, i1cfg).i1;
      }
    } catch (const std::exception& e) {
      outcome.status = std::string("failed: ") + e.what();
    }
  });

  std::vector<double> model_scores;
  std::vector<double> baseline_scores;
  for (const auto& rep : result.reps) {
    if (rep.status != "ok") {
      ++result.failures;
      continue;
    }
    model_scores.push_back(rep.i1_model);
    if (cfg.with_baseline) baseline_scores.push_back(rep.i1_baseline);
  }
  if (static_cast<double>(result.failures) >
      cfg.max_failure_fraction * static_cast<double>(cfg.replications))
    throw EstimationError("run_benchmark: too many failed replications (" +
                          std::to_string(result.failures) + " of " +
                          std::to_string(cfg.replications) + ")");
  if (!model_scores.empty()) result.model_summary = summarize(std::move(model_scores));
  if (!baseline_scores.empty())
    result.baseline_summary = summarize(std::move(baseline_scores));
  return result;
}

}  // namespace nifa::sim
