#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nifa/aggregator.hpp"
#include "nifa/classifier.hpp"
#include "nifa/csv.hpp"
#include "nifa/simbench.hpp"

namespace nifa {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw ValidationError("model: ragged matrix");
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

inline json kde_to_json(const Kde1d& kde) {
  json out;
  out["kernel"] = kernel_name(kde.kernel());
  out["bandwidth"] = kde.bandwidth();
  out["grid"] = {{"lo", kde.grid().lo}, {"hi", kde.grid().hi}, {"count", kde.grid().count}};
  out["values"] = kde.values();
  return out;
}

inline Kde1d kde_from_json(const json& j) {
  GridSpec grid{j.at("grid").at("lo").get<double>(), j.at("grid").at("hi").get<double>(),
                j.at("grid").at("count").get<int>()};
  return Kde1d::restore(kernel_from_name(j.at("kernel").get<std::string>()),
                        j.at("bandwidth").get<double>(), grid,
                        j.at("values").get<std::vector<double>>());
}

inline json candidate_to_json(const CandidateModel& model) {
  json out;
  out["k"] = model.frame.k;
  out["sigma2"] = model.frame.sigma2;
  out["basis"] = matrix_to_json(model.frame.basis);
  out["sup_estimate"] = model.sup_estimate;
  out["square_integral"] = {{"estimate", model.sq_integral.estimate},
                            {"std_error", model.sq_integral.std_error},
                            {"draws", model.sq_integral.draws},
                            {"converged", model.sq_integral.converged}};
  json marg = json::array();
  for (const auto& kde : model.marginals) marg.push_back(kde_to_json(kde));
  out["marginals"] = std::move(marg);
  return out;
}

inline CandidateModel candidate_from_json(const json& j, const Eigen::VectorXd& data_center,
                                          const RestrictionBall& ball) {
  CandidateModel model;
  model.frame.k = j.at("k").get<int>();
  model.frame.sigma2 = j.at("sigma2").get<double>();
  model.frame.basis = matrix_from_json(j.at("basis"));
  model.data_center = data_center;
  model.ball = ball;
  model.sup_estimate = j.at("sup_estimate").get<double>();
  const auto& sq = j.at("square_integral");
  model.sq_integral = {sq.at("estimate").get<double>(), sq.at("std_error").get<double>(),
                       sq.at("draws").get<std::size_t>(), sq.at("converged").get<bool>()};
  for (const auto& item : j.at("marginals")) model.marginals.push_back(kde_from_json(item));
  if (model.frame.basis.cols() != model.frame.k ||
      static_cast<int>(model.marginals.size()) != model.frame.k)
    throw ValidationError("model: candidate rank is inconsistent");
  return model;
}

}  // namespace detail

inline json aggregate_to_json(const AggregateDensity& agg) {
  json out;
  out["format"] = "ifa-aggregate";
  out["version"] = kModelFormatVersion;
  out["dim"] = agg.dim();
  out["theta"] = detail::vector_to_json(agg.theta);
  out["beta"] = agg.beta;
  out["seed"] = agg.seed;
  out["center"] = detail::vector_to_json(agg.candidates.front().data_center);
  out["ball"] = {{"center", detail::vector_to_json(agg.ball.center)},
                 {"radius", agg.ball.radius}};
  out["split"] = {{"n", agg.split_plan.n}, {"n1", agg.split_plan.n1},
                  {"n2", agg.split_plan.n2}, {"seed", agg.split_plan.seed}};
  json cands = json::array();
  for (const auto& cand : agg.candidates) cands.push_back(detail::candidate_to_json(cand));
  out["candidates"] = std::move(cands);
  return out;
}

inline AggregateDensity aggregate_from_json(const json& j) {
  if (j.value("format", "") != "ifa-aggregate")
    throw ValidationError("model: not an aggregate density file");
  if (j.value("version", -1) != kModelFormatVersion)
    throw ValidationError("model: unsupported format version");
  AggregateDensity agg;
  agg.theta = detail::vector_from_json(j.at("theta"));
  agg.beta = j.at("beta").get<double>();
  agg.seed = j.at("seed").get<std::uint64_t>();
  agg.ball.center = detail::vector_from_json(j.at("ball").at("center"));
  agg.ball.radius = j.at("ball").at("radius").get<double>();
  const Eigen::VectorXd data_center = detail::vector_from_json(j.at("center"));
  agg.split_plan.n = j.at("split").at("n").get<std::size_t>();
  agg.split_plan.n1 = j.at("split").at("n1").get<std::size_t>();
  agg.split_plan.n2 = j.at("split").at("n2").get<std::size_t>();
  agg.split_plan.seed = j.at("split").at("seed").get<std::uint64_t>();
  for (const auto& item : j.at("candidates"))
    agg.candidates.push_back(detail::candidate_from_json(item, data_center, agg.ball));
  if (agg.candidates.empty()) throw ValidationError("model: no candidates");
  if (agg.theta.size() != static_cast<Eigen::Index>(agg.candidates.size()))
    throw ValidationError("model: weight count does not match the candidates");
  const int d = j.at("dim").get<int>();
  for (const auto& cand : agg.candidates)
    if (cand.dim() != d) throw ValidationError("model: candidate dimension mismatch");
  return agg;
}

inline json classifier_to_json(const ClassifierModel& model) {
  json out;
  out["format"] = "ifa-classifier";
  out["version"] = kModelFormatVersion;
  out["priors"] = detail::vector_to_json(model.priors);
  json classes = json::array();
  for (const auto& density : model.densities) classes.push_back(aggregate_to_json(density));
  out["classes"] = std::move(classes);
  return out;
}

inline ClassifierModel classifier_from_json(const json& j) {
  if (j.value("format", "") != "ifa-classifier")
    throw ValidationError("model: not a classifier file");
  if (j.value("version", -1) != kModelFormatVersion)
    throw ValidationError("model: unsupported format version");
  ClassifierModel model;
  model.priors = detail::vector_from_json(j.at("priors"));
  for (const auto& item : j.at("classes"))
    model.densities.push_back(aggregate_from_json(item));
  if (model.densities.size() < 2 ||
      model.priors.size() != static_cast<Eigen::Index>(model.densities.size()))
    throw ValidationError("model: classifier priors do not match the classes");
  return model;
}

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("cannot parse '" + path.string() + "': " + e.what());
  }
  return j;
}

inline void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline json truth_to_json(const sim::SyntheticTruth& truth) {
  json out;
  out["format"] = "ifa-truth";
  out["d"] = truth.d;
  out["m"] = truth.m;
  out["mixing"] = detail::matrix_to_json(truth.mixing);
  out["factor_ids"] = truth.factor_ids;
  out["factor_variances"] = detail::vector_to_json(truth.factor_var);
  out["sigma"] = truth.sigma;
  out["seed"] = truth.seed;
  return out;
}

inline json benchmark_to_json(const sim::BenchmarkConfig& cfg,
                              const sim::BenchmarkResult& result) {
  json out;
  out["config"] = {{"d", cfg.d},
                   {"m", cfg.m},
                   {"factor_ids", cfg.factor_ids},
                   {"snr", cfg.snr},
                   {"n", cfg.n},
                   {"replications", cfg.replications},
                   {"kernel", kernel_name(cfg.aggregate.candidate.kernel)},
                   {"with_baseline", cfg.with_baseline},
                   {"seed", cfg.seed}};
  json reps = json::array();
  for (const auto& rep : result.reps) {
    json r = {{"rep", rep.rep},
              {"status", rep.status},
              {"i1_model", rep.i1_model},
              {"model_seconds", rep.model_seconds}};
    if (result.baseline_present) {
      r["i1_baseline"] = rep.i1_baseline;
      r["baseline_seconds"] = rep.baseline_seconds;
    }
    reps.push_back(std::move(r));
  }
  out["per_rep"] = std::move(reps);
  auto quartiles = [](const sim::Quartiles& q) {
    return json{{"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3},
                {"max", q.max}};
  };
  out["summary"] = {{"failures", result.failures},
                    {"model", quartiles(result.model_summary)}};
  if (result.baseline_present)
    out["summary"]["baseline"] = quartiles(result.baseline_summary);
  return out;
}

//! Flat CSV mirror of the per-replication benchmark records.
inline void write_benchmark_csv(const std::filesystem::path& path,
                                const sim::BenchmarkResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "rep,status,i1_model,model_seconds";
  if (result.baseline_present) out << ",i1_baseline,baseline_seconds";
  out << '\n';
  for (const auto& rep : result.reps) {
    std::string status = rep.status;
    for (char& c : status)
      if (c == ',') c = ';';
    out << rep.rep << ',' << status << ',' << format_double(rep.i1_model) << ','
        << format_double(rep.model_seconds);
    if (result.baseline_present)
      out << ',' << format_double(rep.i1_baseline) << ','
          << format_double(rep.baseline_seconds);
    out << '\n';
  }
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

}  // namespace nifa
