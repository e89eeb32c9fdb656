// ifa: noisy independent-factor-analysis density estimation toolkit.
//
// Subcommands: simulate, fit-density, eval-density, classify, benchmark.
// Options can come from --config KEY=VALUE files; explicit flags win.
// Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numeric or
// estimation failure.

#include <CLI11.hpp>

#include <nifa/nifa.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nifa::json;

namespace {

std::vector<int> parse_factor_ids(const std::string& text) {
  std::vector<int> ids;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item.empty()) throw nifa::ValidationError("factor list has an empty entry");
    std::size_t used = 0;
    int id = 0;
    try {
      id = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw nifa::ValidationError("factor list entry '" + item + "' is not an integer");
    }
    if (used != item.size())
      throw nifa::ValidationError("factor list entry '" + item + "' is not an integer");
    if (id < 1 || id > 7)
      throw nifa::ValidationError("factor ids must lie in 1..7, got " + item);
    ids.push_back(id);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return ids;
}

// Flat KEY=VALUE files; # starts a comment line, blank lines are skipped.
std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw nifa::IoError("cannot open config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw nifa::ValidationError(path.string() + " line " + std::to_string(line_no) +
                                  ": expected KEY=VALUE");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw nifa::ValidationError(path.string() + " line " + std::to_string(line_no) +
                                  ": empty key");
    entries.emplace_back(key, value);
  }
  return entries;
}

// Pulls --config PATH out of the raw arguments and splices the file's
// options right after the subcommand, so explicit flags override the file.
std::vector<std::string> apply_config_files(std::vector<std::string> args) {
  std::vector<fs::path> configs;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size())
        throw nifa::ValidationError("--config requires a file path");
      configs.emplace_back(args[i + 1]);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      configs.emplace_back(args[i].substr(9));
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  if (configs.empty()) return args;
  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
      break;
    }
  }
  if (sub_pos == args.size())
    throw nifa::ValidationError("--config requires a subcommand");
  std::vector<std::string> injected;
  for (const auto& path : configs)
    for (const auto& [key, value] : read_config_file(path))
      injected.push_back("--" + key + "=" + value);
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(),
              injected.end());
  return args;
}

struct FitOptions {
  std::string kernel = "sinc";
  int candidates = 0;  // 0 = dimension - 1
  double split_c = 1.0;
  int grid = 1024;
  double bandwidth_scale = 1.0;
  double ball_quantile = 0.995;
  double ball_scale = 1.2;
  std::size_t mc_initial = 1024;
  double mc_tol = 0.005;
  std::size_t mc_cap = std::size_t{1} << 20;
  double sigma2 = 0.0;  // 0 = estimate from the data
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = all hardware threads
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--kernel", o.kernel, "Marginal smoothing kernel")
      ->check(CLI::IsMember({"sinc", "vallee_poussin", "gaussian"}))
      ->capture_default_str();
  cmd->add_option("--candidates", o.candidates,
                  "Number of candidate ranks M (0 = dimension - 1)")
      ->check(CLI::Range(0, 64))
      ->capture_default_str();
  cmd->add_option("--split-c", o.split_c, "Aggregation split constant c")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--grid", o.grid, "Marginal grid nodes (power of two)")
      ->check(CLI::Range(64, 65536))
      ->capture_default_str();
  cmd->add_option("--bandwidth-scale", o.bandwidth_scale, "Bandwidth multiplier")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--ball-quantile", o.ball_quantile, "Norm quantile for the support ball")
      ->check(CLI::Range(1e-3, 1.0))
      ->capture_default_str();
  cmd->add_option("--ball-scale", o.ball_scale, "Radius multiplier for the support ball")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--mc-initial", o.mc_initial, "Initial Monte-Carlo batch size")
      ->check(CLI::Range(std::size_t{64}, std::size_t{1} << 22))
      ->capture_default_str();
  cmd->add_option("--mc-tol", o.mc_tol, "Monte-Carlo relative tolerance")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--mc-cap", o.mc_cap, "Monte-Carlo draw budget")
      ->check(CLI::Range(std::size_t{256}, std::size_t{1} << 26))
      ->capture_default_str();
  cmd->add_option("--sigma2", o.sigma2,
                  "Known noise variance (omit to estimate; required for M = d)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Master random seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = auto)")
      ->capture_default_str();
}

nifa::AggregateConfig to_aggregate_config(const FitOptions& o, unsigned outer_threads) {
  nifa::AggregateConfig cfg;
  cfg.candidate.kernel = nifa::kernel_from_name(o.kernel);
  cfg.candidate.grid_count = o.grid;
  cfg.candidate.bandwidth_scale = o.bandwidth_scale;
  cfg.candidate.ball_quantile = o.ball_quantile;
  cfg.candidate.ball_scale = o.ball_scale;
  cfg.candidate.mc_initial = o.mc_initial;
  cfg.candidate.mc_tol = o.mc_tol;
  cfg.candidate.mc_cap = o.mc_cap;
  cfg.num_candidates = o.candidates;
  cfg.split_c = o.split_c;
  if (o.sigma2 > 0.0) cfg.known_sigma2 = o.sigma2;
  cfg.threads = outer_threads;
  return cfg;
}

json quartiles_to_json(const nifa::sim::Quartiles& q) {
  return json{{"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3},
              {"max", q.max}};
}

// ===== simulate =====

struct SimulateArgs {
  int d = 2;
  int m = 1;
  std::size_t n = 1000;
  std::string factors = "2";
  double snr = 3.0;
  double sigma = -1.0;  // <0: derive from snr
  std::uint64_t seed = 1;
  std::string out;
};

void run_simulate(const SimulateArgs& a) {
  const std::vector<int> ids = parse_factor_ids(a.factors);
  if (static_cast<int>(ids.size()) != a.m)
    throw nifa::ValidationError("need exactly m factor ids (got " +
                                std::to_string(ids.size()) + " for m = " +
                                std::to_string(a.m) + ")");
  nifa::sim::SyntheticTruth truth =
      nifa::sim::make_truth(a.d, a.m, ids, a.snr, a.seed);
  if (a.sigma >= 0.0) truth.sigma = a.sigma;
  const Eigen::MatrixXd data =
      nifa::sim::generate(truth, a.n, nifa::Stream(a.seed).derive("data").seed());

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  std::vector<std::string> header(static_cast<std::size_t>(a.d));
  for (int j = 0; j < a.d; ++j) header[static_cast<std::size_t>(j)] = "x" + std::to_string(j + 1);
  nifa::write_csv(out_dir / "data.csv", data, header);
  nifa::save_json(out_dir / "truth.json", nifa::truth_to_json(truth));
  std::cout << "wrote " << (out_dir / "data.csv").string() << " (" << data.rows() << " x "
            << data.cols() << ") and truth.json\n";
}

// ===== fit-density =====

struct FitDensityArgs {
  std::string input;
  std::string out;
  FitOptions fit;
};

void run_fit_density(const FitDensityArgs& a) {
  const nifa::CsvTable table = nifa::read_csv(a.input);
  const nifa::DataMatrix data = nifa::center(table.values);
  const unsigned threads = nifa::resolve_threads(a.fit.threads);
  const nifa::AggregateConfig cfg = to_aggregate_config(a.fit, threads);

  const auto t0 = std::chrono::steady_clock::now();
  nifa::Stream rng(a.fit.seed);
  const nifa::AggregateDensity model = nifa::fit_aggregate(data, cfg, rng);
  const auto t1 = std::chrono::steady_clock::now();

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  nifa::save_json(out_dir / "model.json", nifa::aggregate_to_json(model));

  json report;
  report["n"] = model.split_plan.n;
  report["d"] = model.dim();
  report["n1"] = model.split_plan.n1;
  report["n2"] = model.split_plan.n2;
  report["candidates"] = model.candidates.size();
  report["kernel"] = a.fit.kernel;
  report["beta"] = model.beta;
  report["ball_radius"] = model.ball.radius;
  report["seed"] = a.fit.seed;
  report["seconds"] = std::chrono::duration<double>(t1 - t0).count();
  json theta = json::array();
  json sigma2 = json::array();
  json sq = json::array();
  for (std::size_t k = 0; k < model.candidates.size(); ++k) {
    theta.push_back(model.theta[static_cast<Eigen::Index>(k)]);
    sigma2.push_back(model.candidates[k].frame.sigma2);
    sq.push_back({{"estimate", model.candidates[k].sq_integral.estimate},
                  {"std_error", model.candidates[k].sq_integral.std_error},
                  {"draws", model.candidates[k].sq_integral.draws},
                  {"converged", model.candidates[k].sq_integral.converged},
                  {"sup", model.candidates[k].sup_estimate}});
  }
  report["theta"] = std::move(theta);
  report["sigma2_per_rank"] = std::move(sigma2);
  report["square_integral_per_rank"] = std::move(sq);
  nifa::save_json(out_dir / "report.json", report);
  std::cout << "fitted " << model.candidates.size() << " candidates on n=" << model.split_plan.n
            << "; wrote model.json and report.json\n";
}

// ===== eval-density =====

struct EvalDensityArgs {
  std::string model;
  std::string points;
  std::string out;
};

void run_eval_density(const EvalDensityArgs& a) {
  const nifa::AggregateDensity model = nifa::aggregate_from_json(nifa::load_json(a.model));
  const nifa::CsvTable table = nifa::read_csv(a.points);
  if (table.values.cols() != model.dim())
    throw nifa::ValidationError("points have " + std::to_string(table.values.cols()) +
                                " columns but the model expects " +
                                std::to_string(model.dim()));
  Eigen::MatrixXd densities(table.values.rows(), 1);
  for (Eigen::Index i = 0; i < table.values.rows(); ++i)
    densities(i, 0) = model.eval(table.values.row(i).transpose());
  nifa::write_csv(a.out, densities, {"density"});
  std::cout << "evaluated " << table.values.rows() << " points\n";
}

// ===== classify =====

struct ClassifyArgs {
  std::string train;
  std::string model;
  std::string test;
  std::string out;
  std::string save_model;
  std::string priors;
  int splits = 0;
  double train_frac = 2.0 / 3.0;
  std::size_t min_class_size = 50;
  FitOptions fit;
};

std::vector<Eigen::MatrixXd> group_by_class(const Eigen::MatrixXd& features,
                                            const std::vector<int>& labels) {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  if (max_label < 1) throw nifa::ValidationError("training data needs at least two classes");
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i)
    rows[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  std::vector<Eigen::MatrixXd> classes;
  for (int j = 0; j <= max_label; ++j) {
    const auto& list = rows[static_cast<std::size_t>(j)];
    if (list.empty())
      throw nifa::ValidationError("class " + std::to_string(j) +
                                  " has no training rows (labels must be 0..J-1)");
    Eigen::MatrixXd block(static_cast<Eigen::Index>(list.size()), features.cols());
    for (std::size_t i = 0; i < list.size(); ++i)
      block.row(static_cast<Eigen::Index>(i)) = features.row(list[i]);
    classes.push_back(std::move(block));
  }
  return classes;
}

std::optional<Eigen::VectorXd> parse_priors(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::vector<double> parsed;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      parsed.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw nifa::ValidationError("prior entry '" + item + "' is not a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  Eigen::VectorXd priors(static_cast<Eigen::Index>(parsed.size()));
  for (std::size_t i = 0; i < parsed.size(); ++i)
    priors[static_cast<Eigen::Index>(i)] = parsed[i];
  return priors;
}

void run_classify(const ClassifyArgs& a) {
  if (a.train.empty() && a.model.empty())
    throw nifa::ValidationError("classify needs --train data or a --model file");
  if (!a.train.empty() && !a.model.empty())
    throw nifa::ValidationError("--train and --model are mutually exclusive");
  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  const unsigned threads = nifa::resolve_threads(a.fit.threads);

  if (a.splits > 0) {
    if (a.train.empty())
      throw nifa::ValidationError("--splits requires --train data");
    const nifa::LabeledData pool =
        nifa::split_labels(nifa::read_csv(a.train), a.train);
    nifa::ClassifierConfig ccfg;
    ccfg.aggregate = to_aggregate_config(a.fit, 1);
    ccfg.min_class_size = a.min_class_size;
    const auto priors = parse_priors(a.priors);

    std::vector<double> plugin_err(static_cast<std::size_t>(a.splits));
    std::vector<double> lda_err(static_cast<std::size_t>(a.splits));
    nifa::parallel_for(static_cast<std::size_t>(a.splits), threads, [&](std::size_t s) {
      nifa::Stream split_stream = nifa::Stream(a.fit.seed).derive("split", s);
      const auto [train_idx, test_idx] =
          nifa::stratified_split(pool.labels, a.train_frac, split_stream);
      Eigen::MatrixXd train_x(static_cast<Eigen::Index>(train_idx.size()),
                              pool.features.cols());
      std::vector<int> train_y(train_idx.size());
      for (std::size_t i = 0; i < train_idx.size(); ++i) {
        train_x.row(static_cast<Eigen::Index>(i)) = pool.features.row(train_idx[i]);
        train_y[i] = pool.labels[static_cast<std::size_t>(train_idx[i])];
      }
      Eigen::MatrixXd test_x(static_cast<Eigen::Index>(test_idx.size()),
                             pool.features.cols());
      std::vector<int> test_y(test_idx.size());
      for (std::size_t i = 0; i < test_idx.size(); ++i) {
        test_x.row(static_cast<Eigen::Index>(i)) = pool.features.row(test_idx[i]);
        test_y[i] = pool.labels[static_cast<std::size_t>(test_idx[i])];
      }
      const auto classes = group_by_class(train_x, train_y);
      nifa::Stream fit_stream = split_stream.derive("fit");
      const nifa::ClassifierModel plugin =
          nifa::fit_classifier(classes, ccfg, fit_stream, priors);
      const nifa::LdaModel lda = nifa::fit_lda(classes, priors);
      plugin_err[s] = nifa::misclassification_rate(plugin, test_x, test_y);
      lda_err[s] = nifa::misclassification_rate(lda, test_x, test_y);
    });

    Eigen::MatrixXd rows(a.splits, 3);
    int plugin_wins = 0;
    int ties = 0;
    for (int s = 0; s < a.splits; ++s) {
      rows(s, 0) = s;
      rows(s, 1) = plugin_err[static_cast<std::size_t>(s)];
      rows(s, 2) = lda_err[static_cast<std::size_t>(s)];
      if (rows(s, 1) < rows(s, 2)) ++plugin_wins;
      if (rows(s, 1) == rows(s, 2)) ++ties;
    }
    nifa::write_csv(out_dir / "splits.csv", rows, {"split", "plugin_error", "lda_error"});
    json summary;
    summary["splits"] = a.splits;
    summary["train_fraction"] = a.train_frac;
    summary["plugin"] = quartiles_to_json(nifa::sim::summarize(plugin_err));
    summary["lda"] = quartiles_to_json(nifa::sim::summarize(lda_err));
    summary["plugin_wins"] = plugin_wins;
    summary["ties"] = ties;
    nifa::save_json(out_dir / "summary.json", summary);
    std::cout << "ran " << a.splits << " stratified splits; plug-in won " << plugin_wins
              << "\n";
    return;
  }

  nifa::ClassifierModel model;
  json summary;
  if (!a.train.empty()) {
    const nifa::LabeledData train = nifa::split_labels(nifa::read_csv(a.train), a.train);
    const auto classes = group_by_class(train.features, train.labels);
    nifa::ClassifierConfig ccfg;
    ccfg.aggregate = to_aggregate_config(a.fit, 1);
    ccfg.min_class_size = a.min_class_size;
    ccfg.threads = threads;
    nifa::Stream rng(a.fit.seed);
    const auto t0 = std::chrono::steady_clock::now();
    model = nifa::fit_classifier(classes, ccfg, rng, parse_priors(a.priors));
    const auto t1 = std::chrono::steady_clock::now();
    summary["fit_seconds"] = std::chrono::duration<double>(t1 - t0).count();
    json sizes = json::array();
    for (const auto& block : classes) sizes.push_back(block.rows());
    summary["class_sizes"] = std::move(sizes);
  } else {
    model = nifa::classifier_from_json(nifa::load_json(a.model));
  }
  summary["classes"] = model.num_classes();
  json priors = json::array();
  for (Eigen::Index j = 0; j < model.priors.size(); ++j) priors.push_back(model.priors[j]);
  summary["priors"] = std::move(priors);

  if (!a.save_model.empty())
    nifa::save_json(a.save_model, nifa::classifier_to_json(model));

  if (!a.test.empty()) {
    const nifa::CsvTable test_table = nifa::read_csv(a.test);
    const bool labeled = test_table.values.cols() == model.densities.front().dim() + 1;
    if (!labeled && test_table.values.cols() != model.densities.front().dim())
      throw nifa::ValidationError("test data has " + std::to_string(test_table.values.cols()) +
                                  " columns but the model expects " +
                                  std::to_string(model.densities.front().dim()) +
                                  " (optionally plus a label)");
    Eigen::MatrixXd features = test_table.values.leftCols(model.densities.front().dim());
    const int J = model.num_classes();
    Eigen::MatrixXd out_rows(features.rows(), 2 + J);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const Eigen::VectorXd x = features.row(i).transpose();
      out_rows(i, 0) = static_cast<double>(i);
      out_rows(i, 1) = model.predict(x);
      const Eigen::VectorXd ls = model.log_scores(x);
      for (int j = 0; j < J; ++j) out_rows(i, 2 + j) = ls[j];
    }
    std::vector<std::string> header{"row", "predicted"};
    for (int j = 0; j < J; ++j) header.push_back("log_score_" + std::to_string(j));
    nifa::write_csv(out_dir / "predictions.csv", out_rows, header);
    if (labeled) {
      std::vector<int> labels(static_cast<std::size_t>(test_table.values.rows()));
      for (Eigen::Index i = 0; i < test_table.values.rows(); ++i)
        labels[static_cast<std::size_t>(i)] =
            static_cast<int>(test_table.values(i, test_table.values.cols() - 1));
      summary["error_rate"] = nifa::misclassification_rate(model, features, labels);
    }
  }
  nifa::save_json(out_dir / "summary.json", summary);
  std::cout << "classifier ready (" << model.num_classes() << " classes)\n";
}

// ===== benchmark =====

struct BenchmarkArgs {
  int d = 2;
  int m = 1;
  std::string factors = "2";
  double snr = 3.0;
  std::size_t n = 1000;
  int reps = 50;
  bool baseline = true;
  int i1_grid = 64;
  std::size_t i1_draws = 100000;
  std::string out;
  FitOptions fit;
};

void run_benchmark_cmd(const BenchmarkArgs& a) {
  nifa::sim::BenchmarkConfig cfg;
  cfg.d = a.d;
  cfg.m = a.m;
  cfg.factor_ids = parse_factor_ids(a.factors);
  if (static_cast<int>(cfg.factor_ids.size()) != a.m)
    throw nifa::ValidationError("need exactly m factor ids");
  cfg.snr = a.snr;
  cfg.n = a.n;
  cfg.replications = a.reps;
  cfg.aggregate = to_aggregate_config(a.fit, 1);
  cfg.with_baseline = a.baseline;
  cfg.i1.grid_per_dim = a.i1_grid;
  cfg.i1.mc_draws = a.i1_draws;
  cfg.seed = a.fit.seed;
  cfg.threads = nifa::resolve_threads(a.fit.threads);

  const nifa::sim::BenchmarkResult result = nifa::sim::run_benchmark(cfg);
  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  nifa::save_json(out_dir / "results.json", nifa::benchmark_to_json(cfg, result));
  nifa::write_benchmark_csv(out_dir / "results.csv", result);
  std::cout << "benchmark finished: median fidelity " << result.model_summary.median;
  if (result.baseline_present)
    std::cout << " (baseline " << result.baseline_summary.median << ")";
  std::cout << ", " << result.failures << " failures\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisy independent-factor-analysis density estimation"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a synthetic factor-model sample");
  sim_cmd->add_option("--d", sim_args.d, "Observed dimension")->check(CLI::Range(1, 64))->capture_default_str();
  sim_cmd->add_option("--m", sim_args.m, "Latent dimension")->check(CLI::Range(1, 64))->capture_default_str();
  sim_cmd->add_option("--n", sim_args.n, "Sample size")->check(CLI::Range(std::size_t{1}, std::size_t{100000000}))->capture_default_str();
  sim_cmd->add_option("--factors", sim_args.factors, "Comma-separated factor law ids (1..7)")->capture_default_str();
  sim_cmd->add_option("--snr", sim_args.snr, "Signal-to-noise ratio")->check(CLI::PositiveNumber)->capture_default_str();
  sim_cmd->add_option("--sigma", sim_args.sigma, "Noise standard deviation override (>= 0)");
  sim_cmd->add_option("--seed", sim_args.seed, "Master random seed")->capture_default_str();
  sim_cmd->add_option("--out", sim_args.out, "Output directory")->required();
  sim_cmd->callback([&] { run_simulate(sim_args); });

  FitDensityArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit-density", "Fit the aggregated density estimate");
  fit_cmd->add_option("--input", fit_args.input, "Numeric CSV of observations")->required();
  fit_cmd->add_option("--out", fit_args.out, "Output directory")->required();
  add_fit_options(fit_cmd, fit_args.fit);
  fit_cmd->callback([&] { run_fit_density(fit_args); });

  EvalDensityArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval-density", "Evaluate a fitted model on points");
  eval_cmd->add_option("--model", eval_args.model, "model.json from fit-density")->required();
  eval_cmd->add_option("--points", eval_args.points, "Numeric CSV of evaluation points")->required();
  eval_cmd->add_option("--out", eval_args.out, "Output CSV path")->required();
  eval_cmd->callback([&] { run_eval_density(eval_args); });

  ClassifyArgs cls_args;
  auto* cls_cmd = app.add_subcommand("classify", "Plug-in density classification");
  cls_cmd->add_option("--train", cls_args.train, "Labeled CSV (features, then label 0..J-1)");
  cls_cmd->add_option("--model", cls_args.model, "Previously saved classifier model");
  cls_cmd->add_option("--test", cls_args.test, "CSV to classify (labeled or not)");
  cls_cmd->add_option("--out", cls_args.out, "Output directory")->required();
  cls_cmd->add_option("--save-model", cls_args.save_model, "Write the fitted classifier here");
  cls_cmd->add_option("--priors", cls_args.priors, "Comma-separated class priors");
  cls_cmd->add_option("--splits", cls_args.splits, "Stratified train/test comparisons to run")
      ->check(CLI::Range(0, 10000))
      ->capture_default_str();
  cls_cmd->add_option("--train-frac", cls_args.train_frac, "Training fraction per split")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  cls_cmd->add_option("--min-class-size", cls_args.min_class_size, "Smallest allowed class")
      ->capture_default_str();
  add_fit_options(cls_cmd, cls_args.fit);
  cls_cmd->callback([&] { run_classify(cls_args); });

  BenchmarkArgs bench_args;
  auto* bench_cmd = app.add_subcommand("benchmark", "Synthetic fidelity benchmark");
  bench_cmd->add_option("--d", bench_args.d, "Observed dimension")->check(CLI::Range(1, 16))->capture_default_str();
  bench_cmd->add_option("--m", bench_args.m, "Latent dimension")->check(CLI::Range(1, 16))->capture_default_str();
  bench_cmd->add_option("--factors", bench_args.factors, "Comma-separated factor law ids")->capture_default_str();
  bench_cmd->add_option("--snr", bench_args.snr, "Signal-to-noise ratio")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--n", bench_args.n, "Sample size per replication")->check(CLI::Range(std::size_t{4}, std::size_t{10000000}))->capture_default_str();
  bench_cmd->add_option("--reps", bench_args.reps, "Replications")->check(CLI::Range(1, 10000))->capture_default_str();
  bench_cmd->add_option("--baseline", bench_args.baseline, "Also fit the product-kernel baseline")->capture_default_str();
  bench_cmd->add_option("--i1-grid", bench_args.i1_grid, "Fidelity quadrature nodes per axis (d <= 3)")->check(CLI::Range(8, 512))->capture_default_str();
  bench_cmd->add_option("--i1-draws", bench_args.i1_draws, "Fidelity importance-sampling draws (d >= 4)")->check(CLI::Range(std::size_t{100}, std::size_t{10000000}))->capture_default_str();
  bench_cmd->add_option("--out", bench_args.out, "Output directory")->required();
  add_fit_options(bench_cmd, bench_args.fit);
  bench_cmd->callback([&] { run_benchmark_cmd(bench_args); });

  // The config file injects options before the explicit ones; last one wins.
  for (auto* cmd : app.get_subcommands({}))
    for (auto* opt : cmd->get_options())
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config_files(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const nifa::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nifa::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const nifa::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
