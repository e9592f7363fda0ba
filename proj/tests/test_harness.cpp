#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "dsse/error.hpp"
#include "dsse/harness.hpp"
#include "dsse/io.hpp"
#include "dsse/rng.hpp"

using namespace dsse;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig c;
  c.feeder_path = fs::path(DSSE_DATA_DIR) / "feeder123.json";
  c.profile_path = fs::path(DSSE_DATA_DIR) / "profile3.csv";
  c.steps = {1, 3};
  c.fractions = {0.3, 0.7};
  c.runs = 3;
  c.estimator.max_iterations = 15;
  c.baseline_svt = true;
  c.svt_steps = 20;
  c.threads = 2;
  return c;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const ScenarioResult& small_result() {
  static const ScenarioResult r = run_scenario(small_config());
  return r;
}

}  // namespace

TEST_CASE("cell enumeration") {
  ScenarioConfig c;
  c.steps = {1, 2, 3};
  c.fractions = {0.1, 0.3, 0.5, 0.7};
  const auto cells = enumerate_cells(c);
  REQUIRE(cells.size() == 12);
  CHECK(cells[0].steps == 1);
  CHECK(cells[0].fraction == 0.1);
  CHECK(cells[5].steps == 2);
  CHECK(cells[5].fraction == 0.3);
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(cells[i].index == i);
}

TEST_CASE("config validation") {
  ScenarioConfig c;
  CHECK_NOTHROW(c.validate());
  c.fractions = {1.2};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ScenarioConfig{};
  c.runs = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ScenarioConfig{};
  c.steps = {0};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ScenarioConfig{};
  c.steps = {4};
  c.feeder_path = fs::path(DSSE_DATA_DIR) / "feeder123.json";
  c.profile_path = fs::path(DSSE_DATA_DIR) / "profile3.csv";
  CHECK_THROWS_AS(run_scenario(c), InvalidArgument);
}

TEST_CASE("seeds are derived per cell and replicate") {
  CHECK(mask_seed(2024, 0, 0) == derive_seed(2024, {0, 0, 0}));
  CHECK(noise_seed(2024, 3, 7) == derive_seed(2024, {3, 7, 1}));
  CHECK(mask_seed(2024, 1, 0) != mask_seed(2024, 0, 1));
}

TEST_CASE("records and summaries") {
  const auto& r = small_result();
  CHECK(r.phases == 260);
  CHECK(r.total_phases == 263);
  CHECK(r.records.size() == 4 * 3 * 2);
  CHECK(r.summaries.size() == 8);
  CHECK_FALSE(r.any_cell_failed());
  for (const auto& rec : r.records) {
    CHECK(rec.ok);
    CHECK(rec.mape_pct >= 0.0);
    CHECK(rec.mae_deg >= 0.0);
    CHECK(rec.mask_seed == mask_seed(2024, rec.cell.index, rec.replicate));
  }
  CHECK(r.spectra.size() == 2);
  CHECK(r.traces.size() == 4);
  const auto& s = r.summary("am", 3, 0.7);
  CHECK(s.runs == 3);
  CHECK(s.succeeded == 3);
  CHECK_THROWS_AS(r.summary("am", 2, 0.7), InvalidArgument);
}

TEST_CASE("aggregates match the replicate rows") {
  const auto rows = parse_csv(metrics_csv(small_result()));
  REQUIRE(rows.size() > 1);
  const auto& header = rows[0];
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  std::map<std::string, std::vector<std::pair<double, double>>> reps;
  std::size_t aggregates = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    REQUIRE(row.size() == header.size());
    const std::string key = row[col["method"]] + "/" + row[col["cell"]];
    if (row[0] == "replicate") {
      reps[key].emplace_back(std::stod(row[col["mape_pct"]]), std::stod(row[col["mae_deg"]]));
      continue;
    }
    REQUIRE(row[0] == "aggregate");
    ++aggregates;
    const auto& v = reps.at(key);
    const double n = static_cast<double>(v.size());
    double mape = 0, mae = 0;
    for (const auto& [a, b] : v) {
      mape += a / n;
      mae += b / n;
    }
    double sm = 0, sa = 0;
    for (const auto& [a, b] : v) {
      sm += (a - mape) * (a - mape) / (n - 1);
      sa += (b - mae) * (b - mae) / (n - 1);
    }
    CHECK(std::abs(std::stod(row[col["mape_pct"]]) - mape) <= 1e-12 * std::max(1.0, mape));
    CHECK(std::abs(std::stod(row[col["mae_deg"]]) - mae) <= 1e-12 * std::max(1.0, mae));
    CHECK(std::abs(std::stod(row[col["mape_std"]]) - std::sqrt(sm)) <= 1e-12 * std::max(1.0, mape));
    CHECK(std::abs(std::stod(row[col["mae_std"]]) - std::sqrt(sa)) <= 1e-12 * std::max(1.0, mae));
  }
  CHECK(aggregates == 8);
}

TEST_CASE("same master seed, same bytes") {
  ScenarioConfig c = small_config();
  c.threads = 1;
  const auto again = run_scenario(c);
  CHECK(metrics_csv(again) == metrics_csv(small_result()));
  c.master_seed = 2025;
  CHECK(metrics_csv(run_scenario(c)) != metrics_csv(small_result()));
}

TEST_CASE("output files") {
  const fs::path dir = fs::temp_directory_path() / "dsse_test_harness_out";
  fs::remove_all(dir);
  emit_outputs(small_result(), dir);
  for (const char* name : {"metrics.csv", "timing.csv", "spectrum.csv", "manifest.json",
                           "trace_T1_f0.3.csv", "trace_T3_f0.7.csv"}) {
    CHECK(fs::exists(dir / name));
  }
  CHECK(slurp(dir / "metrics.csv") == metrics_csv(small_result()));

  const auto trace = parse_csv(slurp(dir / "trace_T1_f0.3.csv"));
  double previous = std::stod(trace[1][1]);
  for (std::size_t i = 2; i < trace.size(); ++i) {
    const double value = std::stod(trace[i][1]);
    CHECK(value <= previous * (1 + 1e-9));
    previous = value;
  }

  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["phases"] == 260);
  CHECK(manifest["total_phases"] == 263);
  CHECK(manifest["seeds"].size() == 4 * 3);
  CHECK(manifest["config"]["master_seed"] == 2024);

  const auto spectrum = parse_csv(slurp(dir / "spectrum.csv"));
  CHECK(spectrum[0][0] == "T");
  CHECK(spectrum.size() == 1 + 5 + 15);

  ScenarioResult empty;
  CHECK_THROWS_AS(emit_outputs(empty, dir), InvalidArgument);
}

TEST_CASE("single replicate layout") {
  ScenarioConfig c = small_config();
  c.steps = {1};
  c.fractions = {0.5};
  c.runs = 1;
  c.baseline_svt = false;
  const auto r = run_scenario(c);
  const auto rows = parse_csv(metrics_csv(r));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "replicate");
  CHECK(rows[2][0] == "aggregate");
  CHECK(rows[2][9] == "0");
}

TEST_CASE("complete noiseless observation beats sparse noisy data") {
  ScenarioConfig c = small_config();
  c.steps = {1};
  c.fractions = {1.0};
  c.noise_std = 0.0;
  c.runs = 1;
  c.baseline_svt = false;
  const auto r = run_scenario(c);
  const auto& full = r.summary("am", 1, 1.0);
  const auto& sparse = small_result().summary("am", 1, 0.3);
  CHECK(full.succeeded == 1);
  CHECK(full.mape_mean < sparse.mape_mean);
  CHECK(full.mae_mean < sparse.mae_mean);
}
