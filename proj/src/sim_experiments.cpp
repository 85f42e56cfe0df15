#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "wpt/baselines.hpp"
#include "wpt/joint_design.hpp"
#include "wpt/model.hpp"
#include "wpt/sim.hpp"
#include "wpt/special_cases.hpp"
#include "wpt/units.hpp"

namespace wpt::sim {

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailed = 1;
constexpr int kInfeasible = 2;
constexpr int kTrialError = 3;
constexpr int kInvalidDesign = 4;

constexpr double kDbmFloorWatts = 1e-33;
constexpr double kConstraintTol = 1e-6;

NetworkConfig make_config(const ExperimentSpec& s, int ns, int nr) {
  NetworkConfig cfg;
  cfg.num_sensors = ns;
  cfg.num_fc_antennas = nr;
  cfg.param_var = s.param_var;
  cfg.sense_var = Vec::Constant(ns, s.sense_var);
  cfg.rx_noise_cov = s.rx_noise * CMat::Identity(nr, nr);
  cfg.fc_power = s.fc_power;
  cfg.harvest_eff = Vec::Constant(ns, s.harvest_eff);
  cfg.circuit_energy = Vec::Constant(ns, s.circuit_energy);
  return cfg;
}

ChannelRealization trial_channels(const ExperimentSpec& s, int ns, int nr, std::uint64_t trial) {
  Philox rng(s.seed, trial);
  if (s.mode == ChannelMode::kPathLoss) {
    const GeometrySample g = draw_geometry(ns, s.geometry, rng);
    return draw_channels(ns, nr, &g, rng);
  }
  return draw_channels(ns, nr, nullptr, rng);
}

// Emission-side audit: every design behind an emitted row must satisfy its
// problem's constraints, independent of what the solver reported.
bool energy_causal(const NetworkConfig& cfg, const ChannelRealization& ch,
                   const DesignPoint& d) {
  const Vec budget = available_transmit_power(cfg, ch, d.beam_gram);
  const Vec used = sensor_transmit_power(cfg, d.amp);
  for (int k = 0; k < cfg.num_sensors; ++k)
    if (used[k] > budget[k] + kConstraintTol * std::max(1.0, std::abs(budget[k])) &&
        used[k] > budget[k] * (1.0 + kConstraintTol))
      return false;
  return true;
}

bool valid_mse_design(const NetworkConfig& cfg, const ChannelRealization& ch,
                      const DesignPoint& d) {
  const double total = std::real(d.beam_gram.trace());
  if (total > cfg.fc_power * (1.0 + kConstraintTol)) return false;
  return energy_causal(cfg, ch, d);
}

bool valid_power_design(const NetworkConfig& cfg, const ChannelRealization& ch,
                        const DesignPoint& d, double target_inv_mse) {
  const double attained = 1.0 / estimator_mse(cfg, ch, d);
  if (attained < target_inv_mse * (1.0 - kConstraintTol)) return false;
  return energy_causal(cfg, ch, d);
}

struct TrialData {
  std::vector<std::vector<double>> values;
  std::vector<int> status;
};

int as_count(double x, const char* what) {
  const int n = static_cast<int>(std::lround(x));
  if (n < 1 || std::abs(x - n) > 1e-9)
    throw InvalidArgument(std::string(what) + " sweep values must be positive integers");
  return n;
}

TrialData run_trial(const ExperimentSpec& s, int trial) {
  TrialData out;
  const auto guarded = [&](auto&& fn) -> int {
    try {
      return fn();
    } catch (const InfeasibleTarget&) {
      return kInfeasible;
    } catch (const CertificateFailure&) {
      return kSolverFailed;
    } catch (const std::exception&) {
      return kTrialError;
    }
  };

  switch (s.kind) {
    case ExperimentKind::kMseVsIteration: {
      for (double sw : s.sweep) {
        const int nr = as_count(sw, "antenna");
        const NetworkConfig cfg = make_config(s, s.num_sensors, nr);
        const ChannelRealization ch = trial_channels(s, s.num_sensors, nr, trial);
        std::vector<double> trace;
        const int st = guarded([&] {
          const design::RunTrace run = design::optimize_mse(cfg, ch);
          if (run.status != sdp::Status::kOptimal) return kSolverFailed;
          if (!valid_mse_design(cfg, ch, run.design)) return kInvalidDesign;
          for (const auto& step : run.steps) trace.push_back(1.0 / step.objective);
          return kOk;
        });
        out.values.push_back(std::move(trace));
        out.status.push_back(st);
      }
      break;
    }
    case ExperimentKind::kPowerVsIteration: {
      const double gamma = 1.0 / s.target_mse;
      for (double sw : s.sweep) {
        const int nr = as_count(sw, "antenna");
        const NetworkConfig cfg = make_config(s, s.num_sensors, nr);
        const ChannelRealization ch = trial_channels(s, s.num_sensors, nr, trial);
        std::vector<double> trace;
        const int st = guarded([&] {
          const design::RunTrace run = design::optimize_power(cfg, ch, gamma);
          if (run.status != sdp::Status::kOptimal) return kSolverFailed;
          if (!valid_power_design(cfg, ch, run.design, gamma)) return kInvalidDesign;
          for (const auto& step : run.steps) trace.push_back(step.objective);
          return kOk;
        });
        out.values.push_back(std::move(trace));
        out.status.push_back(st);
      }
      break;
    }
    case ExperimentKind::kMseVsNumSensors: {
      for (double sw : s.sweep) {
        const int ns = as_count(sw, "sensor");
        const NetworkConfig cfg = make_config(s, ns, s.num_fc_antennas);
        const ChannelRealization ch = trial_channels(s, ns, s.num_fc_antennas, trial);
        std::vector<double> pair;
        const int st = guarded([&] {
          const design::RunTrace run = design::optimize_mse(cfg, ch);
          if (run.status != sdp::Status::kOptimal) return kSolverFailed;
          if (!valid_mse_design(cfg, ch, run.design)) return kInvalidDesign;
          const baseline::MseResult sub = baseline::suboptimal_mse_min(cfg, ch);
          if (!valid_mse_design(cfg, ch, sub.design)) return kInvalidDesign;
          pair = {run.mse, sub.mse};
          return kOk;
        });
        out.values.push_back(std::move(pair));
        out.status.push_back(st);
      }
      break;
    }
    case ExperimentKind::kPowerVsGamma: {
      const NetworkConfig cfg = make_config(s, s.num_sensors, s.num_fc_antennas);
      const ChannelRealization ch =
          trial_channels(s, s.num_sensors, s.num_fc_antennas, trial);
      for (double target : s.sweep) {
        const double gamma = 1.0 / target;
        std::vector<double> pair;
        const int st = guarded([&] {
          const design::RunTrace run = design::optimize_power(cfg, ch, gamma);
          if (run.status != sdp::Status::kOptimal) return kSolverFailed;
          if (!valid_power_design(cfg, ch, run.design, gamma)) return kInvalidDesign;
          const baseline::PowerResult sub = baseline::suboptimal_power_min(cfg, ch, gamma);
          if (!valid_power_design(cfg, ch, sub.design, gamma)) return kInvalidDesign;
          pair = {run.fc_power, sub.fc_power};
          return kOk;
        });
        out.values.push_back(std::move(pair));
        out.status.push_back(st);
      }
      break;
    }
    case ExperimentKind::kTradeoff: {
      for (size_t i = 0; i < s.sizes.size(); ++i) {
        const int n = s.sizes[i];
        Philox rng(s.seed, static_cast<std::uint64_t>(trial));
        GeometrySample geo;
        const GeometrySample* gp = nullptr;
        if (s.mode == ChannelMode::kPathLoss) {
          geo = draw_geometry(n, s.geometry, rng);
          gp = &geo;
        }
        const ChannelRealization ch = draw_channels(n, n, gp, rng);
        double hfac = 1.0;
        if (s.mode == ChannelMode::kPathLoss) {
          const GeometrySample hg = draw_geometry(1, s.geometry, rng);
          hfac = hg.amp_factor[0];
        }
        special::CommonHarvesterConfig hc;
        hc.base = make_config(s, n, n);
        hc.energy_channel = draw_harvester_channel(n, hfac, rng);

        std::vector<double> curve;
        const int st = guarded([&] {
          Vec grid(static_cast<int>(s.sweep.size()));
          for (size_t j = 0; j < s.sweep.size(); ++j)
            grid[static_cast<int>(j)] = s.sweep[j];
          const auto pts = special::tradeoff_curve(hc, ch, grid);
          for (const auto& pt : pts) curve.push_back(pt.mse);
          return kOk;
        });
        out.values.push_back(std::move(curve));
        out.status.push_back(st);
      }
      break;
    }
    case ExperimentKind::kPowerControlTable: {
      const NetworkConfig cfg = make_config(s, s.num_sensors, s.num_fc_antennas);
      const ChannelRealization ch =
          trial_channels(s, s.num_sensors, s.num_fc_antennas, trial);
      std::vector<double> cells;
      const int st = guarded([&] {
        const design::RunTrace run = design::optimize_mse(cfg, ch);
        if (run.status != sdp::Status::kOptimal) return kSolverFailed;
        if (!valid_mse_design(cfg, ch, run.design)) return kInvalidDesign;
        const Vec harvested = available_transmit_power(cfg, ch, run.design.beam_gram);
        const Vec transmit = sensor_transmit_power(cfg, run.design.amp);
        for (int k = 0; k < cfg.num_sensors; ++k) {
          cells.push_back(harvested[k]);
          cells.push_back(transmit[k]);
        }
        return kOk;
      });
      out.values.push_back(std::move(cells));
      out.status.push_back(st);
      break;
    }
    case ExperimentKind::kCustom: {
      const NetworkConfig cfg = make_config(s, s.num_sensors, s.num_fc_antennas);
      const ChannelRealization ch =
          trial_channels(s, s.num_sensors, s.num_fc_antennas, trial);
      std::vector<double> cells;
      const int st = guarded([&] {
        const design::RunTrace run = design::optimize_mse(cfg, ch);
        if (run.status != sdp::Status::kOptimal) return kSolverFailed;
        if (!valid_mse_design(cfg, ch, run.design)) return kInvalidDesign;
        cells = {run.mse, run.fc_power, static_cast<double>(run.iterations),
                 run.converged ? 1.0 : 0.0};
        return kOk;
      });
      out.values.push_back(std::move(cells));
      out.status.push_back(st);
      break;
    }
  }
  return out;
}

std::string render_csv(const std::vector<std::string>& columns,
                       const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ',';
    out += columns[c];
  }
  out += '\n';
  char buf[64];
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof(buf), "%.12g", row[c]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// Average per-iteration traces over the successful trials, extending shorter
// traces with their final value so late iterations average over all runs.
void aggregate_traces(const ExperimentSpec& s, const std::vector<TrialData>& data,
                      const char* value_column, ExperimentResult& res) {
  res.columns = {"n_r", "iteration", value_column, "failed_trials"};
  const double first_step = s.kind == ExperimentKind::kMseVsIteration ? 0.0 : 1.0;
  for (size_t i = 0; i < s.sweep.size(); ++i) {
    size_t max_len = 0;
    int failed = 0;
    for (const auto& td : data) {
      if (td.status[i] == kOk)
        max_len = std::max(max_len, td.values[i].size());
      else
        ++failed;
    }
    if (max_len == 0) {
      res.rows.push_back({s.sweep[i], first_step, std::nan(""), static_cast<double>(failed)});
      continue;
    }
    for (size_t it = 0; it < max_len; ++it) {
      double sum = 0.0;
      int n = 0;
      for (const auto& td : data) {
        if (td.status[i] != kOk) continue;
        const auto& tr = td.values[i];
        sum += it < tr.size() ? tr[it] : tr.back();
        ++n;
      }
      res.rows.push_back({s.sweep[i], first_step + static_cast<double>(it), sum / n,
                          static_cast<double>(failed)});
    }
  }
}

}  // namespace

void ExperimentSpec::validate() const {
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (num_sensors < 1 || num_fc_antennas < 1)
    throw InvalidArgument("network dimensions must be positive");
  if (!(param_var > 0.0) || !(sense_var > 0.0) || !(rx_noise > 0.0) || !(fc_power > 0.0) ||
      !(harvest_eff > 0.0) || harvest_eff > 1.0 || circuit_energy < 0.0)
    throw InvalidArgument("network scalars out of range");
  const bool needs_sweep = kind != ExperimentKind::kPowerControlTable &&
                           kind != ExperimentKind::kCustom;
  if (needs_sweep && sweep.empty()) throw InvalidArgument("sweep must be nonempty");
  for (double v : sweep)
    if (!(v > 0.0)) throw InvalidArgument("sweep values must be positive");
  if (kind == ExperimentKind::kMseVsIteration || kind == ExperimentKind::kPowerVsIteration)
    for (double v : sweep) as_count(v, "antenna");
  if (kind == ExperimentKind::kMseVsNumSensors)
    for (double v : sweep) as_count(v, "sensor");
  if (kind == ExperimentKind::kPowerVsIteration && !(target_mse > 0.0))
    throw InvalidArgument("power experiments need a positive target_mse");
  if (kind == ExperimentKind::kTradeoff) {
    if (sizes.empty()) throw InvalidArgument("tradeoff requires at least one network size");
    for (int n : sizes)
      if (n < 1) throw InvalidArgument("network sizes must be positive");
    for (size_t i = 1; i < sweep.size(); ++i)
      if (!(sweep[i] > sweep[i - 1]))
        throw InvalidArgument("tradeoff power grid must be strictly ascending");
    if (harvest_eff != 1.0 || circuit_energy != 0.0)
      throw InvalidArgument("the pooled-harvester model requires harvest_eff=1 and "
                            "circuit_energy=0");
  }
  if (threads < 0) throw InvalidArgument("threads must be nonnegative");
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.kind == ExperimentKind::kPowerVsIteration ||
      spec.kind == ExperimentKind::kPowerVsGamma) {
    const double limit = static_cast<double>(spec.num_sensors) / spec.sense_var;
    const auto check = [&](double target) {
      if (!(1.0 / target < limit))
        throw InfeasibleTarget("distortion target " + std::to_string(target) +
                               " lies below the centralized bound; infeasible");
    };
    if (spec.kind == ExperimentKind::kPowerVsIteration) check(spec.target_mse);
    if (spec.kind == ExperimentKind::kPowerVsGamma)
      for (double t : spec.sweep) check(t);
  }

  std::vector<TrialData> data(spec.trials);
  int threads = spec.threads > 0 ? spec.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, spec.trials));
  if (threads == 1) {
    for (int t = 0; t < spec.trials; ++t) data[t] = run_trial(spec, t);
  } else {
    std::atomic<int> next{0};
    const auto worker = [&] {
      for (int t = next.fetch_add(1); t < spec.trials; t = next.fetch_add(1))
        data[static_cast<size_t>(t)] = run_trial(spec, t);
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult res;
  switch (spec.kind) {
    case ExperimentKind::kMseVsIteration:
      aggregate_traces(spec, data, "avg_mse", res);
      break;
    case ExperimentKind::kPowerVsIteration:
      aggregate_traces(spec, data, "avg_fc_power_w", res);
      break;
    case ExperimentKind::kMseVsNumSensors: {
      res.columns = {"n_s", "avg_mse", "avg_mse_suboptimal", "centralized_bound",
                     "failed_trials"};
      for (size_t i = 0; i < spec.sweep.size(); ++i) {
        double opt = 0.0, sub = 0.0;
        int n = 0, failed = 0;
        for (const auto& td : data) {
          if (td.status[i] != kOk) {
            ++failed;
            continue;
          }
          opt += td.values[i][0];
          sub += td.values[i][1];
          ++n;
        }
        const int ns = as_count(spec.sweep[i], "sensor");
        const double bound =
            special::centralized_mse_bound(Vec::Constant(ns, spec.sense_var));
        res.rows.push_back({spec.sweep[i], n ? opt / n : std::nan(""),
                            n ? sub / n : std::nan(""), bound,
                            static_cast<double>(failed)});
      }
      break;
    }
    case ExperimentKind::kPowerVsGamma: {
      res.columns = {"target_mse", "avg_fc_power_w", "avg_fc_power_suboptimal_w",
                     "avg_saving_db", "failed_trials"};
      for (size_t i = 0; i < spec.sweep.size(); ++i) {
        double opt = 0.0, sub = 0.0;
        int n = 0, failed = 0;
        for (const auto& td : data) {
          if (td.status[i] != kOk) {
            ++failed;
            continue;
          }
          opt += td.values[i][0];
          sub += td.values[i][1];
          ++n;
        }
        const double saving = n ? 10.0 * std::log10(sub / opt) : std::nan("");
        res.rows.push_back({spec.sweep[i], n ? opt / n : std::nan(""),
                            n ? sub / n : std::nan(""), saving,
                            static_cast<double>(failed)});
      }
      break;
    }
    case ExperimentKind::kTradeoff: {
      res.columns = {"n_s", "n_r", "fc_power_w", "avg_mse", "centralized_bound",
                     "failed_trials"};
      for (size_t i = 0; i < spec.sizes.size(); ++i) {
        const int n_match = spec.sizes[i];
        const double bound =
            special::centralized_mse_bound(Vec::Constant(n_match, spec.sense_var));
        for (size_t j = 0; j < spec.sweep.size(); ++j) {
          double sum = 0.0;
          int n = 0, failed = 0;
          for (const auto& td : data) {
            if (td.status[i] != kOk) {
              ++failed;
              continue;
            }
            sum += td.values[i][j];
            ++n;
          }
          res.rows.push_back({static_cast<double>(n_match), static_cast<double>(n_match),
                              spec.sweep[j], n ? sum / n : std::nan(""), bound,
                              static_cast<double>(failed)});
        }
      }
      break;
    }
    case ExperimentKind::kPowerControlTable: {
      res.columns = {"trial", "sensor", "harvested_dbm", "transmit_dbm", "status"};
      for (int t = 0; t < spec.trials; ++t) {
        const TrialData& td = data[static_cast<size_t>(t)];
        for (int k = 0; k < spec.num_sensors; ++k) {
          double h = std::nan(""), x = std::nan("");
          if (td.status[0] == kOk) {
            h = watts_to_dbm(std::max(td.values[0][2 * k], kDbmFloorWatts));
            x = watts_to_dbm(std::max(td.values[0][2 * k + 1], kDbmFloorWatts));
          }
          res.rows.push_back({static_cast<double>(t), static_cast<double>(k + 1), h, x,
                              static_cast<double>(td.status[0])});
        }
      }
      break;
    }
    case ExperimentKind::kCustom: {
      res.columns = {"trial", "mse", "fc_power_w", "iterations", "converged", "status"};
      for (int t = 0; t < spec.trials; ++t) {
        const TrialData& td = data[static_cast<size_t>(t)];
        if (td.status[0] == kOk) {
          res.rows.push_back({static_cast<double>(t), td.values[0][0], td.values[0][1],
                              td.values[0][2], td.values[0][3], 0.0});
        } else {
          res.rows.push_back({static_cast<double>(t), std::nan(""), std::nan(""), 0.0, 0.0,
                              static_cast<double>(td.status[0])});
        }
      }
      break;
    }
  }

  std::stable_sort(res.rows.begin(), res.rows.end(),
                   [](const std::vector<double>& a, const std::vector<double>& b) {
                     const size_t n = std::min(a.size(), b.size());
                     for (size_t i = 0; i < n; ++i) {
                       const bool an = std::isnan(a[i]), bn = std::isnan(b[i]);
                       if (an != bn) return bn;  // numbers sort before NaN
                       if (an) continue;
                       if (a[i] < b[i]) return true;
                       if (a[i] > b[i]) return false;
                     }
                     return a.size() < b.size();
                   });
  res.csv = render_csv(res.columns, res.rows);
  nlohmann::json meta;
  meta["version"] = kCodeVersion;
  meta["spec"] = nlohmann::json::parse(spec_to_json_text(spec));
  res.meta_json = meta.dump(2) + "\n";
  return res;
}

void write_result(const ExperimentResult& result, const std::string& out_dir,
                  const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream csv(fs::path(out_dir) / (name + ".csv"), std::ios::binary);
    if (!csv) throw InvalidArgument("cannot open CSV output under " + out_dir);
    csv << result.csv;
  }
  {
    std::ofstream meta(fs::path(out_dir) / (name + ".meta.json"), std::ios::binary);
    if (!meta) throw InvalidArgument("cannot open meta output under " + out_dir);
    meta << result.meta_json;
  }
}

}  // namespace wpt::sim
