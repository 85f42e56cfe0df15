#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "wpt/sim.hpp"
#include "wpt/units.hpp"

using namespace wpt;
using namespace wpt::sim;

namespace {

ExperimentSpec tiny_custom() {
  ExperimentSpec s;
  s.name = "tiny";
  s.kind = ExperimentKind::kCustom;
  s.trials = 3;
  s.num_sensors = 2;
  s.num_fc_antennas = 2;
  s.seed = 7;
  s.threads = 1;
  return s;
}

int column(const ExperimentResult& r, const std::string& name) {
  for (std::size_t i = 0; i < r.columns.size(); ++i)
    if (r.columns[i] == name) return static_cast<int>(i);
  REQUIRE_MESSAGE(false, "missing column ", name);
  return -1;
}

}  // namespace

TEST_CASE("path loss anchors") {
  CHECK(path_loss_db(1.0) == doctest::Approx(31.7).epsilon(1e-12));
  CHECK(path_loss_db(10.0) == doctest::Approx(59.3).epsilon(1e-12));
  CHECK(path_loss_db(100.0) == doctest::Approx(86.9).epsilon(1e-12));
}

TEST_CASE("dbm and linear conversions invert each other") {
  for (double dbm : {-103.16, -30.0, 0.0, 24.0, 30.0, 41.5}) {
    CHECK(watts_to_dbm(dbm_to_watts(dbm)) == doctest::Approx(dbm).epsilon(1e-12));
  }
  for (double w : {1e-12, 2.5e-7, 1.0, 42.0}) {
    CHECK(dbm_to_watts(watts_to_dbm(w)) == doctest::Approx(w).epsilon(1e-12));
  }
  CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(db_to_linear(linear_to_db(0.37)) == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("geometry draws stay inside the field and outside the exclusion disc") {
  GeometrySpec spec;
  Philox rng(11, 0);
  const GeometrySample g = draw_geometry(4000, spec, rng);
  REQUIRE(g.coords.rows() == 4000);
  for (int k = 0; k < 4000; ++k) {
    CHECK(std::abs(g.coords(k, 0)) <= spec.half_width);
    CHECK(std::abs(g.coords(k, 1)) <= spec.half_width);
    const double d = std::hypot(g.coords(k, 0), g.coords(k, 1));
    CHECK(d >= spec.min_distance);
    CHECK(g.distance[k] == doctest::Approx(d).epsilon(1e-12));
    CHECK(g.amp_factor[k] ==
          doctest::Approx(std::sqrt(std::pow(10.0, -path_loss_db(d) / 10.0))).epsilon(1e-12));
  }
  // Deterministic for a fixed stream.
  Philox rng2(11, 0);
  const GeometrySample h = draw_geometry(4000, spec, rng2);
  CHECK((g.coords - h.coords).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalized channels have unit variance and independent entries") {
  Philox rng(12, 0);
  const int ns = 200, nr = 200;
  const ChannelRealization ch = draw_channels(ns, nr, nullptr, rng);
  REQUIRE(ch.uplink.rows() == nr);
  REQUIRE(ch.uplink.cols() == ns);
  double power = 0.0;
  Complex mean = 0.0;
  for (int j = 0; j < ns; ++j)
    for (int i = 0; i < nr; ++i) {
      power += std::norm(ch.uplink(i, j));
      mean += ch.uplink(i, j);
    }
  const int n = ns * nr;
  CHECK(power / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(mean) / n < 0.02);
}

TEST_CASE("path-loss channels scale both directions by the same factor") {
  GeometrySpec spec;
  Philox rng(13, 0);
  const int ns = 6, nr = 40;
  const GeometrySample g = draw_geometry(ns, spec, rng);
  const ChannelRealization ch = draw_channels(ns, nr, &g, rng);
  for (int k = 0; k < ns; ++k) {
    const double up = ch.uplink.col(k).squaredNorm() / nr;
    const double down = ch.downlink.col(k).squaredNorm() / nr;
    const double af2 = g.amp_factor[k] * g.amp_factor[k];
    // 40 complex entries per direction: the estimate carries ~16% noise.
    CHECK(up / af2 == doctest::Approx(1.0).epsilon(0.8));
    CHECK(down / af2 == doctest::Approx(1.0).epsilon(0.8));
  }
  // Pooled over sensors, the normalized power concentrates near one.
  double pooled = 0.0;
  for (int k = 0; k < ns; ++k)
    pooled += (ch.uplink.col(k).squaredNorm() + ch.downlink.col(k).squaredNorm()) /
              (2.0 * nr * g.amp_factor[k] * g.amp_factor[k]);
  CHECK(pooled / ns == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("experiment runs are byte-deterministic and thread-invariant") {
  ExperimentSpec s = tiny_custom();
  const ExperimentResult a = run_experiment(s);
  const ExperimentResult b = run_experiment(s);
  CHECK(a.csv == b.csv);
  CHECK(a.meta_json == b.meta_json);

  s.threads = 3;
  const ExperimentResult c = run_experiment(s);
  CHECK(a.csv == c.csv);
  CHECK(a.meta_json == c.meta_json);

  ExperimentSpec other = tiny_custom();
  other.seed = 8;
  CHECK(run_experiment(other).csv != a.csv);
}

TEST_CASE("custom runs expose per-trial figures") {
  const ExperimentResult r = run_experiment(tiny_custom());
  REQUIRE(r.columns.size() == 6);
  CHECK(r.columns[0] == "trial");
  CHECK(r.columns[1] == "mse");
  CHECK(r.columns[2] == "fc_power_w");
  REQUIRE(r.rows.size() == 3);
  const int c_conv = column(r, "converged"), c_status = column(r, "status");
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.rows[i][0] == static_cast<double>(i));
    CHECK(r.rows[i][1] > 0.0);
    CHECK(r.rows[i][static_cast<std::size_t>(c_status)] == 0.0);
    CHECK(r.rows[i][static_cast<std::size_t>(c_conv)] == 1.0);
  }

  // CSV: header plus one line per row, 12 significant digits.
  std::size_t lines = 0;
  for (char ch : r.csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 4);
  char expect[64];
  std::snprintf(expect, sizeof(expect), "%.12g", r.rows[0][1]);
  CHECK(r.csv.find(expect) != std::string::npos);

  const nlohmann::json meta = nlohmann::json::parse(r.meta_json);
  CHECK(meta.at("version").get<std::string>() == kCodeVersion);
  CHECK(meta.at("spec").at("kind").get<std::string>() == "custom");
  CHECK(meta.at("spec").at("trials").get<int>() == 3);
}

TEST_CASE("written files land under the output directory") {
  const ExperimentResult r = run_experiment(tiny_custom());
  const std::string dir = "sim_test_out";
  write_result(r, dir, "tiny");
  std::ifstream csv(dir + "/tiny.csv", std::ios::binary);
  REQUIRE(csv.good());
  std::string first;
  std::getline(csv, first);
  CHECK(first == "trial,mse,fc_power_w,iterations,converged,status");
  std::ifstream meta(dir + "/tiny.meta.json");
  REQUIRE(meta.good());
  std::remove((dir + "/tiny.csv").c_str());
  std::remove((dir + "/tiny.meta.json").c_str());
}

TEST_CASE("antenna sweeps aggregate a padded average per iteration") {
  ExperimentSpec s;
  s.kind = ExperimentKind::kMseVsIteration;
  s.sweep = {2, 3};
  s.trials = 2;
  s.num_sensors = 2;
  s.num_fc_antennas = 2;
  s.seed = 3;
  s.threads = 1;
  const ExperimentResult r = run_experiment(s);
  const int c_nr = column(r, "n_r"), c_it = column(r, "iteration");
  const int c_mse = column(r, "avg_mse"), c_failed = column(r, "failed_trials");
  REQUIRE(!r.rows.empty());
  double prev_final = 1e9;
  for (double nr : {2.0, 3.0}) {
    double final_mse = 0.0;
    int last_it = -1;
    for (const auto& row : r.rows) {
      if (row[c_nr] != nr) continue;
      CHECK(row[c_failed] == 0.0);
      CHECK(static_cast<int>(row[c_it]) == last_it + 1);
      last_it = static_cast<int>(row[c_it]);
      // Padded averages of monotone traces stay monotone.
      if (last_it > 0) CHECK(row[c_mse] <= final_mse * (1.0 + 1e-12));
      final_mse = row[c_mse];
    }
    REQUIRE(last_it >= 1);
    CHECK(final_mse < prev_final);  // more antennas can only help
    prev_final = final_mse;
  }
}

TEST_CASE("sensor sweeps compare against the two-phase baseline and the floor") {
  ExperimentSpec s;
  s.kind = ExperimentKind::kMseVsNumSensors;
  s.sweep = {2, 3};
  s.trials = 2;
  s.num_fc_antennas = 2;
  s.seed = 4;
  s.threads = 1;
  const ExperimentResult r = run_experiment(s);
  REQUIRE(r.rows.size() == 2);
  const int c_mse = column(r, "avg_mse"), c_sub = column(r, "avg_mse_suboptimal");
  const int c_bound = column(r, "centralized_bound");
  for (const auto& row : r.rows) {
    CHECK(row[c_mse] <= row[c_sub] * (1.0 + 1e-9));
    CHECK(row[c_mse] > row[c_bound]);
    CHECK(row[c_bound] ==
          doctest::Approx(s.sense_var / row[column(r, "n_s")]).epsilon(1e-12));
  }
}

TEST_CASE("distortion sweeps report dB savings of the joint design") {
  ExperimentSpec s;
  s.kind = ExperimentKind::kPowerVsGamma;
  s.sweep = {0.2, 0.3};
  s.trials = 2;
  s.num_sensors = 2;
  s.num_fc_antennas = 2;
  s.seed = 5;
  s.threads = 1;
  const ExperimentResult r = run_experiment(s);
  REQUIRE(r.rows.size() == 2);
  const int c_opt = column(r, "avg_fc_power_w");
  const int c_sub = column(r, "avg_fc_power_suboptimal_w");
  const int c_gain = column(r, "avg_saving_db");
  for (const auto& row : r.rows) {
    CHECK(row[c_opt] <= row[c_sub] * (1.0 + 1e-9));
    // The saving is the dB ratio of summed powers, so it is invariant to the
    // per-trial averaging.
    CHECK(row[c_gain] ==
          doctest::Approx(10.0 * std::log10(row[c_sub] / row[c_opt])).epsilon(1e-9));
  }
  // A looser distortion target can never require more power.
  CHECK(r.rows[1][c_opt] <= r.rows[0][c_opt] * (1.0 + 1e-9));
}

TEST_CASE("power-control tables stay within the harvested budget") {
  ExperimentSpec s;
  s.kind = ExperimentKind::kPowerControlTable;
  s.trials = 3;
  s.num_sensors = 3;
  s.num_fc_antennas = 2;
  s.fc_power = dbm_to_watts(30.0);
  s.rx_noise = dbm_to_watts(-103.16);
  s.harvest_eff = 0.51;
  s.mode = ChannelMode::kPathLoss;
  s.seed = 6;
  s.threads = 1;
  const ExperimentResult r = run_experiment(s);
  REQUIRE(r.rows.size() == 9);  // trials x sensors
  const int c_h = column(r, "harvested_dbm"), c_t = column(r, "transmit_dbm");
  const int c_status = column(r, "status");
  for (const auto& row : r.rows) {
    CHECK(row[c_status] == 0.0);
    CHECK(row[c_t] <= row[c_h] + 1e-9);
  }
}

TEST_CASE("spec validation rejects malformed experiments") {
  ExperimentSpec s = tiny_custom();
  CHECK_NOTHROW(s.validate());

  s.trials = 0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);

  s = tiny_custom();
  s.kind = ExperimentKind::kMseVsIteration;
  s.sweep = {};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.sweep = {2.5};  // antenna counts must be integral
  CHECK_THROWS_AS(s.validate(), InvalidArgument);

  s = tiny_custom();
  s.kind = ExperimentKind::kPowerVsIteration;
  s.sweep = {2};
  s.target_mse = 0.0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);

  s = tiny_custom();
  s.kind = ExperimentKind::kTradeoff;
  s.sweep = {1.0, 0.5};  // not ascending
  s.sizes = {2};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);

  s = tiny_custom();
  s.harvest_eff = 1.5;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("presets are valid and carry their published shapes") {
  const auto names = preset_names();
  REQUIRE(names.size() == 7);
  for (const auto& n : names) {
    const ExperimentSpec s = preset(n);
    CHECK_NOTHROW(s.validate());
    CHECK(s.name == n);
  }
  CHECK(preset("fig1").kind == ExperimentKind::kMseVsIteration);
  CHECK(preset("fig1").sweep == std::vector<double>{5, 10, 15, 20});
  CHECK(preset("fig4").num_sensors == 10);
  CHECK(preset("fig4").target_mse == 0.015);
  CHECK(preset("fig6").kind == ExperimentKind::kTradeoff);
  CHECK(preset("table2").mode == ChannelMode::kPathLoss);
  CHECK(preset("table2").fc_power == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(preset("fig3"), InvalidArgument);
}

TEST_CASE("json and toml spec files load to the same experiment") {
  const ExperimentSpec ref = preset("fig5");
  const std::string jtext = spec_to_json_text(ref);
  const ExperimentSpec from_json = spec_from_json_text(jtext);
  CHECK(spec_to_json_text(from_json) == jtext);

  const std::string toml =
      "# distortion sweep\n"
      "name = \"fig5\"\n"
      "kind = \"power-vs-gamma\"\n"
      "sweep = [0.015, 0.02, 0.025, 0.03, 0.035, 0.04]\n"
      "trials = 200\n"
      "seed = 1\n"
      "num_sensors = 10\n"
      "num_fc_antennas = 5\n"
      "param_var = 1.0\n"
      "sense_var = 0.1\n"
      "rx_noise = 0.5\n"
      "fc_power = 1.0\n"
      "harvest_eff = 1.0\n"
      "circuit_energy = 0.0\n"
      "target_mse = 0.0\n"
      "mode = \"normalized\"\n"
      "threads = 0\n"
      "\n"
      "[geometry]\n"
      "half_width = 10.0\n"
      "min_distance = 1.0\n";
  {
    std::ofstream out("sim_test_spec.toml", std::ios::binary);
    out << toml;
  }
  const ExperimentSpec from_toml = load_spec("sim_test_spec.toml");
  CHECK(spec_to_json_text(from_toml) == jtext);
  std::remove("sim_test_spec.toml");

  {
    std::ofstream out("sim_test_spec.json", std::ios::binary);
    out << jtext;
  }
  const ExperimentSpec rt = load_spec("sim_test_spec.json");
  CHECK(spec_to_json_text(rt) == jtext);
  std::remove("sim_test_spec.json");

  CHECK_THROWS_AS(spec_from_json_text("{\"no_such_key\": 1}"), InvalidArgument);
  CHECK_THROWS_AS(kind_from_name("fig"), InvalidArgument);
  CHECK_THROWS_AS(load_spec("missing_file.toml"), InvalidArgument);
}

TEST_CASE("infeasible distortion targets abort the run up front") {
  ExperimentSpec s = tiny_custom();
  s.kind = ExperimentKind::kPowerVsIteration;
  s.sweep = {2};
  s.target_mse = 1e-9;  // beyond any finite-power scheme at these sizes
  CHECK_THROWS_AS(run_experiment(s), InfeasibleTarget);
}
