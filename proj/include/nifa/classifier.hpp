#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "nifa/aggregator.hpp"
#include "nifa/linmodel.hpp"
#include "nifa/parallel.hpp"
#include "nifa/rng.hpp"

namespace nifa {

struct ClassifierConfig {
  AggregateConfig aggregate;
  std::size_t min_class_size = 50;
  unsigned threads = 1;
};

//! Plug-in classifier: one aggregated density per class, prediction is the
//! label with the largest prior-weighted density. Labels are 0..J-1.
struct ClassifierModel {
  std::vector<AggregateDensity> densities;
  Eigen::VectorXd priors;

  int num_classes() const { return static_cast<int>(densities.size()); }

  Eigen::VectorXd scores(const Eigen::VectorXd& x) const {
    Eigen::VectorXd s(num_classes());
    for (int j = 0; j < num_classes(); ++j)
      s[j] = priors[j] * densities[static_cast<std::size_t>(j)].eval(x);
    return s;
  }

  Eigen::VectorXd log_scores(const Eigen::VectorXd& x) const {
    Eigen::VectorXd s = scores(x);
    for (int j = 0; j < num_classes(); ++j)
      s[j] = s[j] > 0.0 ? std::log(s[j]) : -std::numeric_limits<double>::infinity();
    return s;
  }

  //! Ties break to the smallest label. A point where every class density
  //! vanishes (outside all balls) falls back to the largest prior.
  int predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd s = scores(x);
    int best = 0;
    for (int j = 1; j < num_classes(); ++j)
      if (s[j] > s[best]) best = j;
    if (s[best] > 0.0) return best;
    int by_prior = 0;
    for (int j = 1; j < num_classes(); ++j)
      if (priors[j] > priors[by_prior]) by_prior = j;
    return by_prior;
  }
};

inline Eigen::VectorXd resolve_priors(const std::vector<Eigen::MatrixXd>& class_data,
                                      const std::optional<Eigen::VectorXd>& priors) {
  const int J = static_cast<int>(class_data.size());
  Eigen::VectorXd p(J);
  if (priors) {
    if (priors->size() != J) throw ValidationError("priors: need one entry per class");
    double sum = 0.0;
    for (int j = 0; j < J; ++j) {
      if (!((*priors)[j] > 0.0)) throw ValidationError("priors: entries must be positive");
      sum += (*priors)[j];
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("priors: must sum to one");
    p = *priors / sum;
  } else {
    double total = 0.0;
    for (int j = 0; j < J; ++j) total += static_cast<double>(class_data[static_cast<std::size_t>(j)].rows());
    for (int j = 0; j < J; ++j)
      p[j] = static_cast<double>(class_data[static_cast<std::size_t>(j)].rows()) / total;
  }
  return p;
}

inline ClassifierModel fit_classifier(const std::vector<Eigen::MatrixXd>& class_data,
                                      const ClassifierConfig& cfg, Stream& rng,
                                      std::optional<Eigen::VectorXd> priors = {}) {
  const int J = static_cast<int>(class_data.size());
  if (J < 2) throw ValidationError("fit_classifier: need at least two classes");
  for (int j = 0; j < J; ++j) {
    const auto& block = class_data[static_cast<std::size_t>(j)];
    if (static_cast<std::size_t>(block.rows()) < cfg.min_class_size)
      throw ValidationError("fit_classifier: class " + std::to_string(j) +
                            " has too few observations");
    if (block.cols() != class_data.front().cols())
      throw ValidationError("fit_classifier: classes disagree on the dimension");
  }

  ClassifierModel model;
  model.priors = resolve_priors(class_data, priors);
  model.densities.resize(static_cast<std::size_t>(J));
  parallel_for(static_cast<std::size_t>(J), cfg.threads, [&](std::size_t j) {
    Stream class_stream = rng.derive("class", j);
    const DataMatrix centered = center(class_data[j]);
    AggregateConfig acfg = cfg.aggregate;
    model.densities[j] = fit_aggregate(centered, acfg, class_stream);
  });
  return model;
}

//! Fraction of rows whose prediction differs from the given label. Labels
//! outside 0..J-1 are counted as errors (the model can never produce them).
inline double misclassification_rate(const ClassifierModel& model, const Eigen::MatrixXd& x,
                                     const std::vector<int>& labels) {
  if (x.rows() == 0) throw ValidationError("misclassification_rate: empty test set");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw ValidationError("misclassification_rate: label count does not match rows");
  bool warned = false;
  std::size_t errors = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int truth = labels[static_cast<std::size_t>(i)];
    if (truth < 0 || truth >= model.num_classes()) {
      if (!warned) {
        warn("misclassification_rate: test labels outside the trained classes count as errors");
        warned = true;
      }
      ++errors;
      continue;
    }
    if (model.predict(x.row(i).transpose()) != truth) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(x.rows());
}

//! Linear discriminant baseline with a pooled covariance.
struct LdaModel {
  Eigen::MatrixXd means;    // J x d
  Eigen::MatrixXd pooled;   // d x d
  Eigen::VectorXd priors;
  Eigen::MatrixXd weights;  // J x d, rows are pooled^{-1} mu_j
  Eigen::VectorXd offsets;  // -mu_j' pooled^{-1} mu_j / 2 + log prior_j

  int predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd s = weights * x + offsets;
    int best = 0;
    for (Eigen::Index j = 1; j < s.size(); ++j)
      if (s[j] > s[best]) best = static_cast<int>(j);
    return best;
  }
};

inline LdaModel fit_lda(const std::vector<Eigen::MatrixXd>& class_data,
                        std::optional<Eigen::VectorXd> priors = {}) {
  const int J = static_cast<int>(class_data.size());
  if (J < 2) throw ValidationError("fit_lda: need at least two classes");
  const Eigen::Index d = class_data.front().cols();
  Eigen::Index total = 0;
  for (const auto& block : class_data) {
    if (block.cols() != d) throw ValidationError("fit_lda: classes disagree on the dimension");
    if (block.rows() < 2) throw ValidationError("fit_lda: every class needs at least 2 rows");
    total += block.rows();
  }

  LdaModel model;
  model.priors = resolve_priors(class_data, priors);
  model.means.resize(J, d);
  model.pooled = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < J; ++j) {
    const auto& block = class_data[static_cast<std::size_t>(j)];
    model.means.row(j) = block.colwise().mean();
    const Eigen::MatrixXd centered = block.rowwise() - model.means.row(j);
    model.pooled += centered.transpose() * centered;
  }
  model.pooled /= static_cast<double>(total - J);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.pooled);
  const double max_eig = es.eigenvalues().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-12 * std::max(max_eig, 1e-300))) {
    warn("fit_lda: near-singular pooled covariance, adding a diagonal ridge");
    model.pooled += (1e-8 * model.pooled.trace() / static_cast<double>(d)) *
                    Eigen::MatrixXd::Identity(d, d);
  }
  const Eigen::LDLT<Eigen::MatrixXd> solver(model.pooled);
  model.weights.resize(J, d);
  model.offsets.resize(J);
  for (int j = 0; j < J; ++j) {
    const Eigen::VectorXd w = solver.solve(model.means.row(j).transpose());
    model.weights.row(j) = w.transpose();
    model.offsets[j] = -0.5 * model.means.row(j).dot(w) + std::log(model.priors[j]);
  }
  return model;
}

inline double misclassification_rate(const LdaModel& model, const Eigen::MatrixXd& x,
                                     const std::vector<int>& labels) {
  if (x.rows() == 0) throw ValidationError("misclassification_rate: empty test set");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw ValidationError("misclassification_rate: label count does not match rows");
  std::size_t errors = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (model.predict(x.row(i).transpose()) != labels[static_cast<std::size_t>(i)]) ++errors;
  return static_cast<double>(errors) / static_cast<double>(x.rows());
}

//! Stratified split: shuffles each class separately and keeps train_frac of
//! it (at least 1 row, at most all but 1) for training. Index lists come
//! back sorted.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> stratified_split(
    const std::vector<int>& labels, double train_frac, Stream& rng) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw ValidationError("stratified_split: train fraction must lie in (0,1)");
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw ValidationError("stratified_split: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i)
    groups[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));

  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& group = groups[g];
    if (group.empty()) continue;
    if (group.size() < 2)
      throw ValidationError("stratified_split: every class needs at least 2 rows");
    Stream s = rng.derive("stratum", g);
    s.shuffle(group);
    std::size_t take = static_cast<std::size_t>(
        std::lround(train_frac * static_cast<double>(group.size())));
    take = std::clamp<std::size_t>(take, 1, group.size() - 1);
    train.insert(train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(take));
    test.insert(test.end(), group.begin() + static_cast<std::ptrdiff_t>(take), group.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

}  // namespace nifa
