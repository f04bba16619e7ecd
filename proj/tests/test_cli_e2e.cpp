// End-to-end checks of the trimks binary: exit codes, report plumbing, and
// replay determinism. TRIMKS_BIN is injected by the build.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "trimks/io.hpp"
#include "trimks/robust_test.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = TRIMKS_BIN;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const fs::path out_file = fs::temp_directory_path() / "trimks_e2e_out.txt";
  const std::string command =
      kBin + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out_file);
  std::string line;
  while (std::getline(in, line)) {
    result.output += line;
    result.output += '\n';
  }
  return result;
}

fs::path workdir() {
  const fs::path dir = fs::temp_directory_path() / "trimks_e2e";
  fs::create_directories(dir);
  return dir;
}

// Two identical models over 600 points, enough for the DKW threshold.
fs::path write_identical_fixture() {
  const fs::path path = workdir() / "identical.csv";
  std::ofstream out(path);
  out << "point_id,label,m0,m1\n";
  for (int j = 0; j < 600; ++j) {
    const double gap = (j % 2 == 0 ? 1.0 : -1.0) * (0.1 + 0.003 * j);
    out << 'p' << j << ',' << (j % 2) << ',' << gap << ',' << gap << "\n";
  }
  return path;
}

}  // namespace

TEST_CASE("usage and validation exit codes") {
  const fs::path fixture = write_identical_fixture();

  CHECK(run("churn --gaps " + fixture.string() + " --a 0 --b 1").exit_code == 0);
  CHECK(run("churn --gaps " + fixture.string() + " --a 0 --b 9").exit_code == 1);
  CHECK(run("churn --gaps " + fixture.string() + " --a 0 --b frog").exit_code == 1);
  CHECK(run("definitely-not-a-command").exit_code == 1);
  CHECK(run("churn --a 0 --b 1").exit_code == 1);  // missing --gaps
  CHECK(run("churn --gaps /nonexistent.csv --a 0 --b 1").exit_code == 2);

  const fs::path broken = workdir() / "broken.csv";
  std::ofstream(broken) << "point_id,label,m0,m1\np0,1,0.5\n";
  CHECK(run("churn --gaps " + broken.string() + " --a 0 --b 1").exit_code == 2);

  const fs::path tiny = workdir() / "tiny.csv";
  std::ofstream(tiny) << "point_id,label,m0,m1\np0,1,0.5,0.5\np1,0,-1,-1\n";
  const RunResult small_alpha =
      run("alpha --gaps " + tiny.string() + " --model-index 0 --bootstrap 2");
  CHECK(small_alpha.exit_code == 2);
  CHECK(small_alpha.output.find("458") != std::string::npos);

  CHECK(run("alpha --gaps " + fixture.string() + " --model-index 7 --bootstrap 2")
            .exit_code == 1);

  CHECK(run("--version").exit_code == 0);
}

TEST_CASE("churn and accuracy on the identical fixture") {
  const fs::path fixture = write_identical_fixture();
  const RunResult churn = run("churn --gaps " + fixture.string() + " --a 0 --b 1");
  CHECK(churn.exit_code == 0);
  const json churn_doc = json::parse(churn.output);
  CHECK(churn_doc.at("churn").get<double>() == 0.0);

  // Gaps alternate sign with labels, so model 0 is always right.
  const RunResult acc = run("accuracy --gaps " + fixture.string() + " --model 0");
  CHECK(acc.exit_code == 0);
  CHECK(json::parse(acc.output).at("accuracy").get<double>() == 0.0);
}

TEST_CASE("alpha on identical rows is zero and replays byte-identically") {
  const fs::path fixture = write_identical_fixture();
  const fs::path report1 = workdir() / "alpha1.json";
  const fs::path report2 = workdir() / "alpha2.json";
  const std::string base_args = "alpha --gaps " + fixture.string() +
                                " --model-index 0 --bootstrap 8 --seed 99 "
                                "--paired --alphas 0:0.2:0.05";

  const RunResult first = run(base_args + " --out " + report1.string());
  CHECK(first.exit_code == 0);
  CHECK(first.output == "0\n");

  const RunResult second =
      run(base_args + " --threads 3 --out " + report2.string());
  CHECK(second.exit_code == 0);

  const std::string text1 = trimks::read_text_file(report1.string());
  const std::string text2 = trimks::read_text_file(report2.string());
  CHECK(text1 == text2);

  const trimks::AlphaReport report = trimks::AlphaReport::from_json(text1);
  CHECK(report.estimate.alpha_hat == 0.0);
  CHECK(report.estimate.reject_all_count == 0);
  CHECK(report.n_points == 600);

  // Replaying the configuration recorded in the report reproduces the
  // estimate exactly.
  const trimks::LogitGapMatrix matrix = trimks::load_gaps(
      report.gaps_file, trimks::gap_format_from_name(report.format));
  trimks::AlphaOptions options;
  options.delta = report.estimate.delta;
  options.bootstraps = report.estimate.bootstraps;
  options.alpha_grid = report.estimate.alpha_grid;
  options.seed = report.estimate.seed;
  options.paired = report.estimate.paired;
  const trimks::AlphaEstimate replay =
      trimks::estimate_alpha(matrix, report.model_index, options);
  CHECK(replay.alpha_hat == report.estimate.alpha_hat);
  CHECK(replay.per_bootstrap == report.estimate.per_bootstrap);
  CHECK(replay.tau == report.estimate.tau);
}

TEST_CASE("numeric failures exit with code 3") {
  const fs::path dir = workdir() / "diverge";
  const RunResult res = run(
      "toy-experiment --scenario all --models 1 --epochs 2 --n-train 100 "
      "--n-test 50 --lr 1e18 --out-dir " +
      dir.string());
  CHECK(res.exit_code == 3);
  CHECK(res.output.find("diverged") != std::string::npos);
}

TEST_CASE("trim-curve is nonincreasing and ks runs at scale") {
  const fs::path dir = workdir();
  const fs::path gaps = dir / "toy" / "gaps_epoch_2.csv";
  const RunResult toy = run(
      "toy-experiment --scenario all --models 3 --epochs 2 --n-train 300 "
      "--n-test 600 --seed 4 --test-seed 5 --snapshots 2 --out-dir " +
      (dir / "toy").string());
  REQUIRE(toy.exit_code == 0);
  REQUIRE(fs::exists(gaps));

  const RunResult curve =
      run("trim-curve --gaps " + gaps.string() +
          " --target looe:0 --source 0 --alphas 0:0.3:0.1");
  CHECK(curve.exit_code == 0);
  const json curve_doc = json::parse(curve.output);
  const auto distances = curve_doc.at("distances").get<std::vector<double>>();
  REQUIRE(distances.size() == 4);
  for (std::size_t i = 1; i < distances.size(); ++i) {
    CHECK(distances[i] <= distances[i - 1] + 1e-12);
  }

  const RunResult ks = run("ks --gaps " + gaps.string() + " --a 0 --b looe:0");
  CHECK(ks.exit_code == 0);
  const json ks_doc = json::parse(ks.output);
  CHECK(ks_doc.at("threshold").get<double>() > 0.0);
}

TEST_CASE("toy-experiment manifests and reruns are byte-identical") {
  const fs::path dir1 = workdir() / "rep1";
  const fs::path dir2 = workdir() / "rep2";
  const std::string args =
      "toy-experiment --scenario batch --models 2 --epochs 2 --n-train 200 "
      "--n-test 500 --seed 12 --test-seed 13 --snapshots 1,2 --out-dir ";
  REQUIRE(run(args + dir1.string()).exit_code == 0);
  REQUIRE(run(args + dir2.string()).exit_code == 0);

  for (const char* name : {"gaps_epoch_1.csv", "gaps_epoch_2.csv", "manifest.json"}) {
    const std::string a = trimks::read_text_file((dir1 / name).string());
    const std::string b = trimks::read_text_file((dir2 / name).string());
    CHECK(a == b);
  }

  const json manifest =
      json::parse(trimks::read_text_file((dir1 / "manifest.json").string()));
  CHECK(manifest.at("scenario") == "batch");
  CHECK(manifest.at("files").size() == 2);

  // The emitted table loads back with the declared shape.
  const trimks::LogitGapMatrix m = trimks::load_gaps(
      (dir1 / "gaps_epoch_2.csv").string(), trimks::GapFileFormat::Wide);
  CHECK(m.n_models == 2);
  CHECK(m.n_points == 500);
}

TEST_CASE("alpha via the binary is higher early in training") {
  // Train once, then compare candidates from epoch 2 and epoch 50 against
  // the epoch-50 leave-one-out ensembles (the reference the per-epoch
  // evolution is measured against). Mixed tables splice one epoch-2 column
  // into the epoch-50 table.
  const fs::path dir = workdir() / "toy_evolution";
  const RunResult toy = run(
      "toy-experiment --scenario all --models 20 --epochs 50 --seed 3 "
      "--test-seed 1003 --snapshots 2,50 --threads 2 --out-dir " +
      dir.string());
  REQUIRE(toy.exit_code == 0);

  const trimks::LogitGapMatrix epoch2 = trimks::load_gaps(
      (dir / "gaps_epoch_2.csv").string(), trimks::GapFileFormat::Wide);
  const trimks::LogitGapMatrix epoch50 = trimks::load_gaps(
      (dir / "gaps_epoch_50.csv").string(), trimks::GapFileFormat::Wide);

  auto alpha_of = [&](const fs::path& gaps, std::size_t model) {
    const RunResult res = run("alpha --gaps " + gaps.string() +
                              " --model-index " + std::to_string(model) +
                              " --bootstrap 12 --alphas 0:0.5:0.05 --seed " +
                              std::to_string(100 + model) + " --threads 2");
    REQUIRE(res.exit_code == 0);
    return std::stod(res.output);
  };

  double mean_early = 0.0;
  double mean_late = 0.0;
  const std::size_t probes = 6;
  for (std::size_t model = 0; model < probes; ++model) {
    trimks::LogitGapMatrix mixed = epoch50;
    for (std::size_t j = 0; j < mixed.n_points; ++j) {
      mixed.at(model, j) = epoch2.at(model, j);
    }
    const fs::path mixed_path = dir / ("mixed_" + std::to_string(model) + ".csv");
    trimks::save_gaps_wide(mixed, mixed_path.string());
    mean_early += alpha_of(mixed_path, model);
    mean_late += alpha_of(dir / "gaps_epoch_50.csv", model);
  }
  mean_early /= probes;
  mean_late /= probes;
  CHECK(mean_early > mean_late);
}

TEST_CASE("ensemble equals the other row for two models") {
  const fs::path fixture = workdir() / "pair.csv";
  std::ofstream(fixture) << "point_id,label,m0,m1\np0,1,0.5,2.5\np1,0,-1,7\n";
  const RunResult looe = run("ensemble --gaps " + fixture.string() + " --exclude 0");
  CHECK(looe.exit_code == 0);
  CHECK(looe.output.find("looe_excl_0") != std::string::npos);
  CHECK(looe.output.find("p0,1,2.5") != std::string::npos);
  CHECK(looe.output.find("p1,0,7") != std::string::npos);

  const RunResult mean = run("ensemble --gaps " + fixture.string());
  CHECK(mean.exit_code == 0);
  CHECK(mean.output.find("ensemble_mean") != std::string::npos);
  CHECK(mean.output.find("p0,1,1.5") != std::string::npos);

  CHECK(run("ensemble --gaps " + fixture.string() + " --exclude 5").exit_code == 1);
}

TEST_CASE("hist envelope via the binary") {
  const fs::path fixture = write_identical_fixture();
  const RunResult hist = run("hist --gaps " + fixture.string() +
                             " --envelope --bins 4 --min -3 --max 3 --format csv");
  CHECK(hist.exit_code == 0);
  CHECK(hist.output.find("bin_lo,bin_hi,probability,envelope_min,envelope_max") !=
        std::string::npos);

  CHECK(run("hist --gaps " + fixture.string() + " --bins 4 --min -3 --max 3")
            .exit_code == 1);  // neither --model nor --envelope
  // Values outside the range fail without --clip.
  CHECK(run("hist --gaps " + fixture.string() +
            " --model 0 --bins 2 --min -0.5 --max 0.5")
            .exit_code == 2);
  CHECK(run("hist --gaps " + fixture.string() +
            " --model 0 --bins 2 --min -0.5 --max 0.5 --clip")
            .exit_code == 0);
}
