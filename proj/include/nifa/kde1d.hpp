#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nifa/common.hpp"
#include "nifa/numeric.hpp"
#include "nifa/rng.hpp"

namespace nifa {

enum class KernelId { sinc, vallee_poussin, gaussian };

inline const char* kernel_name(KernelId id) {
  switch (id) {
    case KernelId::sinc: return "sinc";
    case KernelId::vallee_poussin: return "vallee_poussin";
    case KernelId::gaussian: return "gaussian";
  }
  throw ValidationError("kernel_name: unknown kernel id");
}

inline KernelId kernel_from_name(std::string_view name) {
  if (name == "sinc") return KernelId::sinc;
  if (name == "vallee_poussin" || name == "vp") return KernelId::vallee_poussin;
  if (name == "gaussian") return KernelId::gaussian;
  throw ValidationError("unknown kernel '" + std::string(name) +
                        "' (expected sinc, vallee_poussin or gaussian)");
}

//! Kernel value at u. The sinc and de la Vallee-Poussin kernels take their
//! continuous limits near u = 0 to avoid 0/0.
inline double kernel_value(KernelId id, double u) {
  constexpr double pi = std::numbers::pi;
  switch (id) {
    case KernelId::sinc:
      if (std::abs(u) < 1e-7) return (1.0 - u * u / 6.0) / pi;
      return std::sin(u) / (pi * u);
    case KernelId::vallee_poussin:
      // (cos u - cos 2u)/(pi u^2) = (3/2 - (5/8) u^2 + O(u^4))/pi
      if (std::abs(u) < 1e-3) return (1.5 - 0.625 * u * u) / pi;
      return (std::cos(u) - std::cos(2.0 * u)) / (pi * u * u);
    case KernelId::gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * pi);
  }
  throw ValidationError("kernel_value: unknown kernel id");
}

//! Bandwidth sigma / sqrt(log n). log n is clamped below at 1 so tiny
//! samples still get a finite bandwidth.
inline double bandwidth(double sigma, std::size_t n) {
  if (!(sigma > 0.0)) throw ValidationError("bandwidth: sigma must be positive");
  double ln = std::log(static_cast<double>(n));
  if (!(ln >= 1.0)) {
    warn("bandwidth: log(n) clamped to 1 for a very small sample");
    ln = 1.0;
  }
  return sigma / std::sqrt(ln);
}

//! Uniform evaluation grid, endpoints included.
struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  int count = 1024;

  double step() const { return (hi - lo) / static_cast<double>(count - 1); }
  double node(int i) const { return lo + step() * static_cast<double>(i); }

  void validate() const {
    if (!(hi > lo)) throw ValidationError("grid: upper bound must exceed lower bound");
    if (count < 4) throw ValidationError("grid: need at least 4 nodes");
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw ValidationError("grid: bounds must be finite");
  }

  // The FFT fit path additionally wants a power-of-two node count.
  void validate_fft() const {
    validate();
    if (count < 8 || (count & (count - 1)) != 0)
      throw ValidationError("grid: node count must be a power of two >= 8");
  }
};

inline GridSpec data_grid(std::span<const double> samples, double h, int count = 1024) {
  if (samples.empty()) throw ValidationError("data_grid: no samples");
  if (!(h > 0.0)) throw ValidationError("data_grid: bandwidth must be positive");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  GridSpec grid{*mn - 4.0 * h, *mx + 4.0 * h, count};
  grid.validate_fft();
  return grid;
}

//! Raw kernel estimate on the grid: (1/nh) sum_i K((x - Y_i)/h). The samples
//! are spread onto the grid by linear binning and convolved with the kernel
//! taps through one circular FFT of length 2P; the zero padding makes the
//! circular product agree exactly with the linear convolution of the bins.
inline std::vector<double> fit_raw(std::span<const double> samples, KernelId kernel,
                                   double h, const GridSpec& grid) {
  grid.validate_fft();
  if (!(h > 0.0) || !std::isfinite(h))
    throw ValidationError("fit_raw: bandwidth must be positive and finite");
  if (samples.size() < 2) throw ValidationError("fit_raw: need at least 2 samples");
  for (double y : samples)
    if (!std::isfinite(y)) throw NumericError("fit_raw: non-finite sample");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mn < grid.lo || *mx > grid.hi)
    throw ValidationError("fit_raw: grid does not cover the samples");

  const int P = grid.count;
  const double delta = grid.step();

  std::vector<double> padded(2 * static_cast<std::size_t>(P), 0.0);
  for (double y : samples) {
    double t = (y - grid.lo) / delta;
    if (t < 0.0) t = 0.0;
    if (t > static_cast<double>(P - 1)) t = static_cast<double>(P - 1);
    int i = static_cast<int>(t);
    if (i > P - 2) i = P - 2;
    const double w = t - static_cast<double>(i);
    padded[static_cast<std::size_t>(i)] += 1.0 - w;
    padded[static_cast<std::size_t>(i) + 1] += w;
  }

  std::vector<double> taps(2 * static_cast<std::size_t>(P), 0.0);
  taps[0] = kernel_value(kernel, 0.0);
  for (int j = 1; j <= P; ++j) {
    const double v = kernel_value(kernel, static_cast<double>(j) * delta / h);
    taps[static_cast<std::size_t>(j)] = v;
    taps[static_cast<std::size_t>(2 * P - j)] = v;
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa;
  std::vector<std::complex<double>> fb;
  fft.fwd(fa, padded);
  fft.fwd(fb, taps);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> conv;
  fft.inv(conv, fa);

  const double scale = 1.0 / (static_cast<double>(samples.size()) * h);
  std::vector<double> out(static_cast<std::size_t>(P));
  for (int i = 0; i < P; ++i) out[static_cast<std::size_t>(i)] = conv[static_cast<std::size_t>(i)] * scale;
  return out;
}

//! Corrected one-dimensional density estimate: nonnegative grid values with
//! unit trapezoid integral, evaluated by linear interpolation (so the
//! interpolant itself integrates to one and vanishes off the support).
//! Immutable once constructed; the CDF is precomputed for sampling.
class Kde1d {
public:
  Kde1d(KernelId kernel, double h, GridSpec grid, std::vector<double> values)
      : kernel_(kernel), h_(h), grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (!(h_ > 0.0)) throw ValidationError("Kde1d: bandwidth must be positive");
    if (static_cast<int>(values_.size()) != grid_.count)
      throw ValidationError("Kde1d: value count does not match the grid");
    for (double& v : values_) {
      if (!std::isfinite(v)) throw NumericError("Kde1d: non-finite grid value");
      if (v < 0.0) {
        if (v < -1e-12) throw ValidationError("Kde1d: negative grid value");
        v = 0.0;
      }
    }
    const double integral = trapezoid(values_, grid_.step());
    if (!(integral > 0.0)) throw EstimationError("Kde1d: estimate integrates to zero");
    for (double& v : values_) v /= integral;
    finalize();
  }

  //! Restores a previously serialized estimate without renormalizing, so a
  //! save/load round trip reproduces evaluations bit for bit.
  static Kde1d restore(KernelId kernel, double h, GridSpec grid, std::vector<double> values) {
    Kde1d out(kernel, h, grid, private_tag{});
    out.values_ = std::move(values);
    if (static_cast<int>(out.values_.size()) != grid.count)
      throw ValidationError("Kde1d: value count does not match the grid");
    for (double v : out.values_)
      if (!std::isfinite(v) || v < 0.0) throw ValidationError("Kde1d: invalid stored value");
    out.finalize();
    return out;
  }

  KernelId kernel() const { return kernel_; }
  double bandwidth() const { return h_; }
  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& cdf() const { return cdf_; }
  double support_lo() const { return support_lo_; }
  double support_hi() const { return support_hi_; }

  //! Linear interpolation inside the support, exactly zero outside.
  double eval(double x) const {
    if (!(x >= support_lo_ && x <= support_hi_)) return 0.0;
    double t = (x - grid_.lo) / grid_.step();
    if (t < 0.0) t = 0.0;
    int i = static_cast<int>(t);
    if (i > grid_.count - 2) i = grid_.count - 2;
    const double w = t - static_cast<double>(i);
    const std::size_t j = static_cast<std::size_t>(i);
    return values_[j] + w * (values_[j + 1] - values_[j]);
  }

  //! Inverse-CDF draw; the CDF is interpolated linearly between nodes.
  double sample(Stream& rng) const {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) return grid_.node(0);
    const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    if (i >= cdf_.size()) return grid_.node(grid_.count - 1);
    const double du = cdf_[i] - cdf_[i - 1];
    if (!(du > 0.0)) return grid_.node(static_cast<int>(i));
    const double frac = (u - cdf_[i - 1]) / du;
    return grid_.node(static_cast<int>(i - 1)) + frac * grid_.step();
  }

  std::vector<double> sample(Stream& rng, std::size_t count) const {
    std::vector<double> out(count);
    for (double& v : out) v = sample(rng);
    return out;
  }

  //! Debug dump: one "x,density,cdf" row per grid node.
  void dump_csv(std::ostream& os) const {
    os << "x,density,cdf\n";
    char buffer[96];
    for (int i = 0; i < grid_.count; ++i) {
      const std::size_t j = static_cast<std::size_t>(i);
      std::snprintf(buffer, sizeof(buffer), "%.17g,%.17g,%.17g\n", grid_.node(i),
                    values_[j], cdf_[j]);
      os << buffer;
    }
  }

private:
  struct private_tag {};
  Kde1d(KernelId kernel, double h, GridSpec grid, private_tag)
      : kernel_(kernel), h_(h), grid_(grid) {
    grid_.validate();
    if (!(h_ > 0.0)) throw ValidationError("Kde1d: bandwidth must be positive");
  }

  // Support endpoints sit one node beyond the outermost positive values so
  // the interpolation ramps are inside the support; the CDF ends at 1.
  void finalize() {
    const std::size_t P = values_.size();
    std::size_t first = P;
    std::size_t last = 0;
    for (std::size_t i = 0; i < P; ++i) {
      if (values_[i] > 0.0) {
        if (first == P) first = i;
        last = i;
      }
    }
    if (first == P) throw EstimationError("Kde1d: estimate is identically zero");
    support_lo_ = grid_.node(static_cast<int>(first > 0 ? first - 1 : 0));
    support_hi_ = grid_.node(static_cast<int>(last + 1 < P ? last + 1 : P - 1));

    cdf_.assign(P, 0.0);
    const double delta = grid_.step();
    for (std::size_t i = 1; i < P; ++i)
      cdf_[i] = cdf_[i - 1] + 0.5 * delta * (values_[i - 1] + values_[i]);
    const double total = cdf_.back();
    if (!(total > 0.0)) throw EstimationError("Kde1d: estimate integrates to zero");
    for (double& c : cdf_) c /= total;
    cdf_.back() = 1.0;
  }

  KernelId kernel_;
  double h_ = 0.0;
  GridSpec grid_;
  std::vector<double> values_;
  std::vector<double> cdf_;
  double support_lo_ = 0.0;
  double support_hi_ = 0.0;
};

//! Negativity correction: keep the maximal contiguous nonnegative run of
//! grid values around the global maximum, zero everything else, then
//! renormalize to unit integral (Hall-Murison style).
inline Kde1d hall_murison_correct(std::vector<double> raw, const GridSpec& grid,
                                  KernelId kernel, double h) {
  grid.validate();
  if (static_cast<int>(raw.size()) != grid.count)
    throw ValidationError("hall_murison_correct: value count does not match the grid");
  std::size_t imax = 0;
  for (std::size_t i = 1; i < raw.size(); ++i)
    if (raw[i] > raw[imax]) imax = i;
  if (!(raw[imax] > 0.0))
    throw EstimationError("hall_murison_correct: estimate has no positive values");
  std::size_t a = imax;
  while (a > 0 && raw[a - 1] >= 0.0) --a;
  std::size_t b = imax;
  while (b + 1 < raw.size() && raw[b + 1] >= 0.0) ++b;
  for (std::size_t i = 0; i < a; ++i) raw[i] = 0.0;
  for (std::size_t i = b + 1; i < raw.size(); ++i) raw[i] = 0.0;
  return Kde1d(kernel, h, grid, std::move(raw));
}

//! Full pipeline: automatic grid, FFT fit, negativity correction.
inline Kde1d fit_kde1d(std::span<const double> samples, KernelId kernel, double h,
                       int grid_count = 1024) {
  const GridSpec grid = data_grid(samples, h, grid_count);
  return hall_murison_correct(fit_raw(samples, kernel, h, grid), grid, kernel, h);
}

}  // namespace nifa
