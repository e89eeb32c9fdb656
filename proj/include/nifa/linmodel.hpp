#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <optional>
#include <vector>

#include "nifa/common.hpp"

namespace nifa {

//! Centered data set: `values` holds observations minus their column means,
//! `center` holds the means. Original coordinates are row + center.
struct DataMatrix {
  Eigen::MatrixXd values;
  Eigen::VectorXd center;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

inline DataMatrix center(const Eigen::MatrixXd& raw) {
  if (raw.rows() < 2) throw ValidationError("center: need at least 2 observations");
  if (raw.cols() < 1) throw ValidationError("center: need at least 1 variable");
  if (!raw.allFinite()) throw NumericError("center: data contains non-finite entries");
  DataMatrix out;
  out.center = raw.colwise().mean();
  out.values = raw.rowwise() - out.center.transpose();
  return out;
}

// Extracts the given rows and re-centers them; `center` of the result maps
// back to the original coordinates.
inline DataMatrix subsample(const DataMatrix& data, const std::vector<Eigen::Index>& rows) {
  if (rows.size() < 2) throw ValidationError("subsample: need at least 2 rows");
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= data.rows())
      throw ValidationError("subsample: row index out of range");
    sub.row(static_cast<Eigen::Index>(i)) = data.values.row(rows[i]);
  }
  const Eigen::VectorXd mean = sub.colwise().mean();
  DataMatrix out;
  out.values = sub.rowwise() - mean.transpose();
  out.center = data.center + mean;
  return out;
}

//! Eigen-pairs of the sample covariance (1/n) DᵀD, eigenvalues decreasing.
//! Computed through the SVD of the centered data, never by forming DᵀD.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // length d, nonincreasing, >= 0
  Eigen::MatrixXd eigenvectors;  // d x d, orthonormal columns
};

inline SpectralDecomposition spectral(const DataMatrix& data) {
  if (data.rows() < 2) throw ValidationError("spectral: need at least 2 observations");
  if (!data.values.allFinite()) throw NumericError("spectral: non-finite entries");
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(data.values, Eigen::ComputeFullV);
  SpectralDecomposition out;
  out.eigenvalues = Eigen::VectorXd::Zero(d);
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size() && i < d; ++i)
    out.eigenvalues[i] = sv[i] * sv[i] / static_cast<double>(n);
  out.eigenvectors = svd.matrixV();
  // Deterministic orientation: the largest-magnitude entry of each
  // eigenvector is positive; ties resolve to the smallest index.
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index imax = 0;
    out.eigenvectors.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.eigenvectors(imax, j) < 0.0) out.eigenvectors.col(j) *= -1.0;
  }
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    if (out.eigenvalues[i] - out.eigenvalues[i + 1] < 1e-8 * out.eigenvalues[0]) {
      warn("spectral: nearly tied sample eigenvalues; projection frames may be unstable");
      break;
    }
  }
  return out;
}

//! Tail-average noise variance: the mean of eigenvalues k+1..d. Requires
//! k < d so the tail is nonempty; negative round-off is clamped to zero.
inline double estimate_sigma2(const SpectralDecomposition& spec, int k, int M) {
  const int d = static_cast<int>(spec.eigenvalues.size());
  if (k < 1) throw ValidationError("estimate_sigma2: rank k must be at least 1");
  if (k >= d) throw ValidationError("estimate_sigma2: rank k must be below the dimension");
  if (k > M) throw ValidationError("estimate_sigma2: rank k cannot exceed M");
  if (M > d) throw ValidationError("estimate_sigma2: M cannot exceed the dimension");
  double tail = spec.eigenvalues.tail(d - k).mean();
  if (tail < 0.0) {
    warn("estimate_sigma2: negative tail average clamped to zero");
    tail = 0.0;
  }
  return tail;
}

//! Rank-k projection frame: the k leading eigenvectors plus the noise
//! variance attached to that rank.
struct RankKFrame {
  int k = 0;
  Eigen::MatrixXd basis;  // d x k, orthonormal columns
  double sigma2 = 0.0;
};

inline RankKFrame rank_k_frame(const SpectralDecomposition& spec, int k, int M,
                               std::optional<double> known_sigma2 = {}) {
  const int d = static_cast<int>(spec.eigenvalues.size());
  if (k < 1 || k > M) throw ValidationError("rank_k_frame: need 1 <= k <= M");
  if (M > d) throw ValidationError("rank_k_frame: M cannot exceed the dimension");
  RankKFrame frame;
  frame.k = k;
  frame.basis = spec.eigenvectors.leftCols(k);
  if (k < d) {
    frame.sigma2 = estimate_sigma2(spec, k, M);
  } else if (known_sigma2) {
    frame.sigma2 = *known_sigma2;
  } else {
    throw ValidationError("rank_k_frame: k = d requires a known noise variance");
  }
  return frame;
}

}  // namespace nifa
