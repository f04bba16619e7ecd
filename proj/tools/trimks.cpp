// trimks: trimmed Kolmogorov-Smirnov analysis of classifier logit gaps.
//
// Subcommands cover the full pipeline: ingest gap/logit tables, run the
// robust trimmed two-sample test and the bootstrap alpha estimate, compute
// churn/accuracy/ensemble summaries, and generate toy training experiments.
//
// Exit codes: 0 success, 1 usage error, 2 data validation error,
// 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trimks/ecdf.hpp"
#include "trimks/errors.hpp"
#include "trimks/io.hpp"
#include "trimks/model_metrics.hpp"
#include "trimks/robust_test.hpp"
#include "trimks/toytrain.hpp"
#include "trimks/trimming.hpp"

namespace {

using nlohmann::json;
using namespace trimks;

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitDataValidation = 2,
  kExitNumeric = 3,
};

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_text_file(out_path, content);
  }
}

// Model selector: a plain row index ("3") or the leave-one-out ensemble of
// a row ("looe:3").
struct Selector {
  bool looe = false;
  std::size_t index = 0;
};

Selector parse_selector(const std::string& text) {
  Selector sel;
  std::string index_text = text;
  if (text.rfind("looe:", 0) == 0) {
    sel.looe = true;
    index_text = text.substr(5);
  }
  try {
    std::size_t consumed = 0;
    const unsigned long long parsed = std::stoull(index_text, &consumed);
    if (consumed != index_text.size()) throw std::invalid_argument(index_text);
    sel.index = static_cast<std::size_t>(parsed);
  } catch (const std::exception&) {
    throw UsageError("bad model selector '" + text +
                     "' (expected an index or looe:<index>)");
  }
  return sel;
}

std::vector<double> select_gaps(const LogitGapMatrix& matrix, const Selector& sel,
                                const char* flag) {
  if (sel.index >= matrix.n_models) {
    throw UsageError(std::string(flag) + ": model index " +
                     std::to_string(sel.index) + " out of range (M = " +
                     std::to_string(matrix.n_models) + ")");
  }
  if (sel.looe && matrix.n_models < 2) {
    throw UsageError(std::string(flag) + ": looe selector needs at least 2 models");
  }
  return sel.looe ? looe_gaps(matrix, sel.index) : matrix.row(sel.index);
}

std::string selector_label(const Selector& sel) {
  return sel.looe ? "looe:" + std::to_string(sel.index)
                  : std::to_string(sel.index);
}

std::vector<double> parse_double_list(const std::string& text, const char* flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    try {
      std::size_t consumed = 0;
      values.push_back(std::stod(piece, &consumed));
      if (consumed != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": cannot parse '" + piece + "'");
    }
  }
  if (values.empty()) {
    throw UsageError(std::string(flag) + ": empty list");
  }
  return values;
}

json base_report(const char* command) {
  json j;
  j["tool"] = "trimks";
  j["version"] = kToolVersion;
  j["command"] = command;
  return j;
}

// ---------------------------------------------------------------------------
// Per-command option bags
// ---------------------------------------------------------------------------

struct CommonGaps {
  std::string gaps_path;
  std::string gaps_format = "wide";
  std::string out_path;
  std::string report_format = "json";

  LogitGapMatrix load() const {
    return load_gaps(gaps_path, gap_format_from_name(gaps_format));
  }
  void add_flags(CLI::App* cmd, bool with_report_format = true) {
    cmd->add_option("--gaps", gaps_path, "gap table to analyze")->required();
    cmd->add_option("--gaps-format", gaps_format, "input format: wide|long")
        ->check(CLI::IsMember({"wide", "long"}));
    cmd->add_option("--out", out_path, "write the report here instead of stdout");
    if (with_report_format) {
      cmd->add_option("--format", report_format, "report format: json|csv")
          ->check(CLI::IsMember({"json", "csv"}));
    }
  }
};

int run_alpha(const CommonGaps& common, const std::string& model_index_text,
              double delta, std::size_t bootstraps, const std::string& alphas,
              std::uint64_t seed, bool paired, unsigned threads) {
  const LogitGapMatrix matrix = common.load();
  const Selector sel = parse_selector(model_index_text);
  if (sel.looe) {
    throw UsageError("--model-index: the candidate must be a plain row index");
  }
  if (sel.index >= matrix.n_models) {
    throw UsageError("--model-index out of range (M = " +
                     std::to_string(matrix.n_models) + ")");
  }

  AlphaOptions options;
  options.delta = delta;
  options.bootstraps = bootstraps;
  options.alpha_grid = parse_alpha_grid(alphas);
  options.seed = seed;
  options.paired = paired;
  options.threads = threads;

  AlphaReport report;
  report.gaps_file = common.gaps_path;
  report.format = common.gaps_format;
  report.model_index = sel.index;
  report.n_models = matrix.n_models;
  report.n_points = matrix.n_points;
  report.estimate = estimate_alpha(matrix, sel.index, options);

  if (!common.out_path.empty()) {
    write_text_file(common.out_path, report.to_json());
  }
  std::cout << format_double(report.estimate.alpha_hat) << "\n";
  return kExitOk;
}

int run_ks(const CommonGaps& common, const std::string& a_text,
           const std::string& b_text, double delta) {
  const LogitGapMatrix matrix = common.load();
  const Selector a = parse_selector(a_text);
  const Selector b = parse_selector(b_text);
  const Ecdf fa(select_gaps(matrix, a, "--a"));
  const Ecdf fb(select_gaps(matrix, b, "--b"));
  const TestDecision decision = classical_ks_test(fa, fb, delta);

  if (common.report_format == "csv") {
    std::ostringstream out;
    out << "statistic,threshold,reject\n"
        << format_double(decision.statistic) << ','
        << format_double(decision.threshold) << ',' << (decision.reject ? 1 : 0)
        << '\n';
    emit(out.str(), common.out_path);
  } else {
    json j = base_report("ks");
    j["a"] = selector_label(a);
    j["b"] = selector_label(b);
    j["delta"] = delta;
    j["n_points"] = matrix.n_points;
    j["statistic"] = decision.statistic;
    j["threshold"] = decision.threshold;
    j["reject"] = decision.reject;
    emit(j.dump(2) + "\n", common.out_path);
  }
  return kExitOk;
}

int run_trim_curve(const CommonGaps& common, const std::string& target_text,
                   const std::string& source_text, const std::string& alphas,
                   double tol) {
  const LogitGapMatrix matrix = common.load();
  const Selector target_sel = parse_selector(target_text);
  const Selector source_sel = parse_selector(source_text);
  const Ecdf target(select_gaps(matrix, target_sel, "--target"));
  const Ecdf source(select_gaps(matrix, source_sel, "--source"));
  const std::vector<double> grid = parse_alpha_grid(alphas);

  std::vector<double> distances;
  std::vector<int> iterations;
  for (double alpha : grid) {
    const TrimmedDistanceResult res = min_trimmed_ks(target, source, alpha, tol);
    distances.push_back(res.distance);
    iterations.push_back(res.iterations);
  }

  if (common.report_format == "csv") {
    std::ostringstream out;
    out << "alpha,distance\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << format_double(grid[i]) << ',' << format_double(distances[i]) << '\n';
    }
    emit(out.str(), common.out_path);
  } else {
    json j = base_report("trim-curve");
    j["target"] = selector_label(target_sel);
    j["source"] = selector_label(source_sel);
    j["tol"] = tol;
    j["alphas"] = grid;
    j["distances"] = distances;
    j["iterations"] = iterations;
    emit(j.dump(2) + "\n", common.out_path);
  }
  return kExitOk;
}

int run_pair_metric(const CommonGaps& common, const char* command,
                    const std::string& a_text, const std::string& b_text) {
  const LogitGapMatrix matrix = common.load();
  const Selector a = parse_selector(a_text);
  const Selector b = parse_selector(b_text);
  const double value =
      churn(select_gaps(matrix, a, "--a"), select_gaps(matrix, b, "--b"));

  if (common.report_format == "csv") {
    emit("churn\n" + format_double(value) + "\n", common.out_path);
  } else {
    json j = base_report(command);
    j["a"] = selector_label(a);
    j["b"] = selector_label(b);
    j["n_points"] = matrix.n_points;
    j["churn"] = value;
    emit(j.dump(2) + "\n", common.out_path);
  }
  if (!common.out_path.empty()) {
    std::cout << format_double(value) << "\n";
  }
  return kExitOk;
}

int run_accuracy(const CommonGaps& common, const std::string& model_text) {
  const LogitGapMatrix matrix = common.load();
  const Selector sel = parse_selector(model_text);
  const double value =
      test_accuracy(select_gaps(matrix, sel, "--model"), matrix.labels);

  if (common.report_format == "csv") {
    emit("accuracy\n" + format_double(value) + "\n", common.out_path);
  } else {
    json j = base_report("accuracy");
    j["model"] = selector_label(sel);
    j["n_points"] = matrix.n_points;
    j["accuracy"] = value;
    emit(j.dump(2) + "\n", common.out_path);
  }
  if (!common.out_path.empty()) {
    std::cout << format_double(value) << "\n";
  }
  return kExitOk;
}

int run_ensemble(const CommonGaps& common, int exclude) {
  const LogitGapMatrix matrix = common.load();
  LogitGapMatrix out;
  out.n_points = matrix.n_points;
  out.n_models = 1;
  out.labels = matrix.labels;
  out.point_ids = matrix.point_ids;
  if (exclude >= 0) {
    if (static_cast<std::size_t>(exclude) >= matrix.n_models) {
      throw UsageError("--exclude out of range (M = " +
                       std::to_string(matrix.n_models) + ")");
    }
    out.gaps = looe_gaps(matrix, static_cast<std::size_t>(exclude));
    out.model_ids = {"looe_excl_" + std::to_string(exclude)};
  } else {
    out.gaps = ensemble_mean_gaps(matrix);
    out.model_ids = {"ensemble_mean"};
  }
  std::ostringstream buffer;
  save_gaps_wide(out, buffer);
  emit(buffer.str(), common.out_path);
  return kExitOk;
}

int run_hist(const CommonGaps& common, const std::string& model_text,
             bool envelope, const std::string& edges_text, int bins,
             double lo, double hi, bool clip) {
  const LogitGapMatrix matrix = common.load();
  std::vector<double> edges;
  if (!edges_text.empty()) {
    edges = parse_double_list(edges_text, "--edges");
  } else {
    if (bins < 1 || !(hi > lo)) {
      throw UsageError("hist: need --edges or (--bins >= 1 with --max > --min)");
    }
    for (int i = 0; i <= bins; ++i) {
      edges.push_back(lo + (hi - lo) * static_cast<double>(i) / bins);
    }
  }

  HistogramData data;
  std::string label;
  if (envelope) {
    data = histogram_envelope(matrix, edges, clip);
    label = "envelope";
  } else {
    if (model_text.empty()) {
      throw UsageError("hist: need --model or --envelope");
    }
    const Selector sel = parse_selector(model_text);
    data = histogram(select_gaps(matrix, sel, "--model"), edges, clip);
    label = selector_label(sel);
  }

  if (common.report_format == "csv") {
    std::ostringstream out;
    out << (envelope ? "bin_lo,bin_hi,probability,envelope_min,envelope_max\n"
                     : "bin_lo,bin_hi,probability\n");
    for (std::size_t b = 0; b < data.probabilities.size(); ++b) {
      out << format_double(data.bin_edges[b]) << ','
          << format_double(data.bin_edges[b + 1]) << ','
          << format_double(data.probabilities[b]);
      if (envelope) {
        out << ',' << format_double(data.envelope_min[b]) << ','
            << format_double(data.envelope_max[b]);
      }
      out << '\n';
    }
    emit(out.str(), common.out_path);
  } else {
    json j = base_report("hist");
    j["model"] = label;
    j["bin_edges"] = data.bin_edges;
    j["probabilities"] = data.probabilities;
    if (envelope) {
      j["envelope_min"] = data.envelope_min;
      j["envelope_max"] = data.envelope_max;
    }
    emit(j.dump(2) + "\n", common.out_path);
  }
  return kExitOk;
}

int run_toy_experiment(const std::string& scenario, std::size_t models,
                       std::size_t epochs, std::size_t batch_size, double lr,
                       const std::string& hidden_text, std::size_t n_train,
                       std::size_t n_test, std::uint64_t seed,
                       std::uint64_t test_seed, const std::string& snapshots_text,
                       unsigned threads, const std::string& out_dir) {
  TrainConfig config;
  config.scenario = scenario_from_name(scenario);
  config.n_models = models;
  config.epochs = epochs;
  config.batch_size = batch_size;
  config.learning_rate = lr;
  config.master_seed = seed;
  config.n_train = n_train;
  config.n_test = n_test;
  config.threads = threads;
  config.hidden_widths.clear();
  for (double w : parse_double_list(hidden_text, "--hidden")) {
    if (w < 1 || w != static_cast<double>(static_cast<std::size_t>(w))) {
      throw UsageError("--hidden: widths must be positive integers");
    }
    config.hidden_widths.push_back(static_cast<std::size_t>(w));
  }
  config.snapshot_epochs.clear();
  for (double e : parse_double_list(snapshots_text.empty()
                                        ? std::to_string(epochs)
                                        : snapshots_text,
                                    "--snapshots")) {
    if (e < 1 || e != static_cast<double>(static_cast<std::size_t>(e))) {
      throw UsageError("--snapshots: epochs must be positive integers");
    }
    config.snapshot_epochs.push_back(static_cast<std::size_t>(e));
  }

  std::filesystem::create_directories(out_dir);
  const std::map<std::size_t, LogitGapMatrix> results =
      run_scenario(config, test_seed);

  json manifest = base_report("toy-experiment");
  manifest["scenario"] = scenario;
  manifest["models"] = config.n_models;
  manifest["epochs"] = config.epochs;
  manifest["batch_size"] = config.batch_size;
  manifest["learning_rate"] = config.learning_rate;
  manifest["hidden"] = config.hidden_widths;
  manifest["n_train"] = config.n_train;
  manifest["n_test"] = config.n_test;
  manifest["seed"] = config.master_seed;
  manifest["test_seed"] = test_seed;
  manifest["snapshots"] = config.snapshot_epochs;
  json files = json::object();
  for (const auto& [epoch, matrix] : results) {
    const std::string name = "gaps_epoch_" + std::to_string(epoch) + ".csv";
    save_gaps_wide(matrix, out_dir + "/" + name);
    files[std::to_string(epoch)] = name;
  }
  manifest["files"] = files;
  write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << out_dir << "/manifest.json\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trimmed Kolmogorov-Smirnov analysis of classifier logit gaps"};
  app.set_version_flag("--version", std::string("trimks ") + kToolVersion);
  app.require_subcommand(1);

  // alpha
  auto* alpha_cmd = app.add_subcommand(
      "alpha", "bootstrap estimate of the minimal accepting trimming level");
  CommonGaps alpha_common;
  alpha_common.add_flags(alpha_cmd, false);
  std::string alpha_model = "0";
  double alpha_delta = 0.05;
  std::size_t alpha_bootstraps = 100;
  std::string alpha_grid = "0:0.5:0.01";
  std::uint64_t alpha_seed = 0;
  bool alpha_paired = false;
  unsigned alpha_threads = 1;
  alpha_cmd->add_option("--model-index", alpha_model, "candidate model row")
      ->required();
  alpha_cmd->add_option("--delta", alpha_delta, "false-rejection probability");
  alpha_cmd->add_option("--bootstrap", alpha_bootstraps, "bootstrap iterations");
  alpha_cmd->add_option("--alphas", alpha_grid, "grid START:STOP:STEP");
  alpha_cmd->add_option("--seed", alpha_seed, "RNG seed");
  alpha_cmd->add_flag("--paired", alpha_paired,
                      "reuse one bootstrap index set for candidate and LOOE");
  alpha_cmd->add_option("--threads", alpha_threads,
                        "bootstrap worker threads (0 = hardware)");

  // ks
  auto* ks_cmd =
      app.add_subcommand("ks", "classical two-sample KS test at the DKW threshold");
  CommonGaps ks_common;
  ks_common.add_flags(ks_cmd);
  std::string ks_a = "0", ks_b = "1";
  double ks_delta = 0.05;
  ks_cmd->add_option("--a", ks_a, "first sample (index or looe:<index>)");
  ks_cmd->add_option("--b", ks_b, "second sample (index or looe:<index>)");
  ks_cmd->add_option("--delta", ks_delta, "false-rejection probability");

  // trim-curve
  auto* curve_cmd = app.add_subcommand(
      "trim-curve", "trimmed KS distance as a function of the trimming level");
  CommonGaps curve_common;
  curve_common.add_flags(curve_cmd);
  std::string curve_target = "looe:0", curve_source = "0";
  std::string curve_grid = "0:0.5:0.01";
  double curve_tol = 1e-9;
  curve_cmd->add_option("--target", curve_target, "target sample selector");
  curve_cmd->add_option("--source", curve_source, "sample whose trimmings are searched");
  curve_cmd->add_option("--alphas", curve_grid, "grid START:STOP:STEP");
  curve_cmd->add_option("--tol", curve_tol, "bisection tolerance");

  // churn
  auto* churn_cmd =
      app.add_subcommand("churn", "fraction of points where two models disagree");
  CommonGaps churn_common;
  churn_common.add_flags(churn_cmd);
  std::string churn_a = "0", churn_b = "1";
  churn_cmd->add_option("--a", churn_a, "first model (index or looe:<index>)");
  churn_cmd->add_option("--b", churn_b, "second model (index or looe:<index>)");

  // accuracy
  auto* acc_cmd = app.add_subcommand("accuracy", "test accuracy of one model");
  CommonGaps acc_common;
  acc_common.add_flags(acc_cmd);
  std::string acc_model = "0";
  acc_cmd->add_option("--model", acc_model, "model (index or looe:<index>)");

  // ensemble
  auto* ens_cmd = app.add_subcommand(
      "ensemble", "emit ensemble-mean or leave-one-out gap vector as a wide table");
  CommonGaps ens_common;
  ens_common.add_flags(ens_cmd, false);
  int ens_exclude = -1;
  ens_cmd->add_option("--exclude", ens_exclude,
                      "build the LOOE excluding this model (default: full mean)");

  // hist
  auto* hist_cmd = app.add_subcommand("hist", "logit-gap histogram (plot-ready)");
  CommonGaps hist_common;
  hist_common.add_flags(hist_cmd);
  std::string hist_model;
  bool hist_envelope = false;
  std::string hist_edges;
  int hist_bins = 0;
  double hist_min = 0.0, hist_max = 0.0;
  bool hist_clip = false;
  hist_cmd->add_option("--model", hist_model, "model (index or looe:<index>)");
  hist_cmd->add_flag("--envelope", hist_envelope,
                     "ensemble histogram with per-bin min/max across models");
  hist_cmd->add_option("--edges", hist_edges, "comma-separated bin edges");
  hist_cmd->add_option("--bins", hist_bins, "number of uniform bins");
  hist_cmd->add_option("--min", hist_min, "left edge for --bins");
  hist_cmd->add_option("--max", hist_max, "right edge for --bins");
  hist_cmd->add_flag("--clip", hist_clip, "clamp out-of-range gaps into end bins");

  // toy-experiment
  auto* toy_cmd = app.add_subcommand(
      "toy-experiment", "train M small models under a randomness scenario");
  std::string toy_scenario = "all";
  std::size_t toy_models = 20, toy_epochs = 50, toy_batch = 16;
  double toy_lr = 0.1;
  std::string toy_hidden = "32";
  std::size_t toy_n_train = 2000, toy_n_test = 1000;
  std::uint64_t toy_seed = 0, toy_test_seed = 1;
  std::string toy_snapshots;
  unsigned toy_threads = 0;
  std::string toy_out_dir;
  toy_cmd->add_option("--scenario", toy_scenario, "init|batch|train|all");
  toy_cmd->add_option("--models", toy_models, "number of models M");
  toy_cmd->add_option("--epochs", toy_epochs, "training epochs");
  toy_cmd->add_option("--batch-size", toy_batch, "SGD mini-batch size");
  toy_cmd->add_option("--lr", toy_lr, "SGD learning rate");
  toy_cmd->add_option("--hidden", toy_hidden, "hidden layer widths, comma separated");
  toy_cmd->add_option("--n-train", toy_n_train, "training points");
  toy_cmd->add_option("--n-test", toy_n_test, "test points (needs > 458 for alpha)");
  toy_cmd->add_option("--seed", toy_seed, "master seed");
  toy_cmd->add_option("--test-seed", toy_test_seed, "test set seed");
  toy_cmd->add_option("--snapshots", toy_snapshots,
                      "epochs to dump, comma separated (default: last)");
  toy_cmd->add_option("--threads", toy_threads, "training threads (0 = hardware)");
  toy_cmd->add_option("--out-dir", toy_out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (alpha_cmd->parsed()) {
      return run_alpha(alpha_common, alpha_model, alpha_delta, alpha_bootstraps,
                       alpha_grid, alpha_seed, alpha_paired, alpha_threads);
    }
    if (ks_cmd->parsed()) {
      return run_ks(ks_common, ks_a, ks_b, ks_delta);
    }
    if (curve_cmd->parsed()) {
      return run_trim_curve(curve_common, curve_target, curve_source, curve_grid,
                            curve_tol);
    }
    if (churn_cmd->parsed()) {
      return run_pair_metric(churn_common, "churn", churn_a, churn_b);
    }
    if (acc_cmd->parsed()) {
      return run_accuracy(acc_common, acc_model);
    }
    if (ens_cmd->parsed()) {
      return run_ensemble(ens_common, ens_exclude);
    }
    if (hist_cmd->parsed()) {
      return run_hist(hist_common, hist_model, hist_envelope, hist_edges,
                      hist_bins, hist_min, hist_max, hist_clip);
    }
    if (toy_cmd->parsed()) {
      return run_toy_experiment(toy_scenario, toy_models, toy_epochs, toy_batch,
                                toy_lr, toy_hidden, toy_n_train, toy_n_test,
                                toy_seed, toy_test_seed, toy_snapshots,
                                toy_threads, toy_out_dir);
    }
    std::cerr << "trimks: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "trimks: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "trimks: " << e.what() << "\n";
    return kExitDataValidation;
  } catch (const NumericError& e) {
    std::cerr << "trimks: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "trimks: unexpected error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
