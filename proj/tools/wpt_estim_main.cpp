#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "wpt/joint_design.hpp"
#include "wpt/model.hpp"
#include "wpt/philox.hpp"
#include "wpt/sdp.hpp"
#include "wpt/sim.hpp"
#include "wpt/units.hpp"

namespace {

const char* status_name(wpt::sdp::Status s) {
  switch (s) {
    case wpt::sdp::Status::kOptimal: return "optimal";
    case wpt::sdp::Status::kInfeasible: return "infeasible";
    case wpt::sdp::Status::kIterationLimit: return "iteration-limit";
    default: return "numerical-failure";
  }
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int run_command(const std::string& spec_arg, const std::string& out_dir,
                const std::uint64_t* seed, const int* trials, const int* threads) {
  wpt::sim::ExperimentSpec spec;
  if (has_suffix(spec_arg, ".json") || has_suffix(spec_arg, ".toml")) {
    spec = wpt::sim::load_spec(spec_arg);
  } else {
    spec = wpt::sim::preset(spec_arg);
  }
  if (seed) spec.seed = *seed;
  if (trials) spec.trials = *trials;
  if (threads) spec.threads = *threads;
  spec.validate();

  auto result = wpt::sim::run_experiment(spec);
  wpt::sim::write_result(result, out_dir, spec.name);
  std::printf("wrote %s/%s.csv (%zu rows) and %s/%s.meta.json\n", out_dir.c_str(),
              spec.name.c_str(), result.rows.size(), out_dir.c_str(), spec.name.c_str());
  return 0;
}

int presets_command(const std::string& write_dir) {
  for (const auto& name : wpt::sim::preset_names()) {
    auto spec = wpt::sim::preset(name);
    std::printf("%-10s %-19s n_s=%-3d n_r=%-3d trials=%d\n", name.c_str(),
                wpt::sim::kind_name(spec.kind), spec.num_sensors, spec.num_fc_antennas,
                spec.trials);
    if (!write_dir.empty()) {
      std::filesystem::create_directories(write_dir);
      std::ofstream out(std::filesystem::path(write_dir) / (name + ".json"),
                        std::ios::binary);
      out << wpt::sim::spec_to_json_text(spec) << '\n';
      if (!out) throw std::runtime_error("failed to write preset spec for " + name);
    }
  }
  return 0;
}

void print_certificates(const wpt::design::CertificateReport& rep) {
  auto mark = [](bool ok) { return ok ? "ok" : "FAIL"; };
  std::printf("certificates:\n");
  std::printf("  relative gap        %10.3e  [%s]\n", rep.rel_gap, mark(rep.gap_ok));
  std::printf("  complementarity     %10.3e  [%s]\n", rep.comp_slack, mark(rep.comp_ok));
  std::printf("  amp rank residual   %10.3e  [%s]\n", rep.amp_rank_residual,
              mark(rep.rank_ok));
  std::printf("  beam Gram rank      %4d (bound %d)\n", rep.beam_rank, rep.beam_rank_bound);
  std::printf("  filter-row dual     %10.3e  [%s]\n", rep.filter_eq_dual,
              mark(rep.dual_sign_ok));
  if (rep.power_dual != 0.0)
    std::printf("  power-row dual      %10.3e\n", rep.power_dual);
  std::printf("  power equality gap  %10.3e  [%s]\n", rep.power_equality_gap,
              mark(rep.power_ok));
  std::printf("  dual PSD violation  %10.3e  [%s]\n", rep.dual_psd_violation,
              mark(rep.psd_ok));
  std::printf("  verdict: %s\n", rep.all_ok() ? "all certificates hold" : "FAILED");
}

struct SolveArgs {
  std::string problem = "mse";
  int num_sensors = 5;
  int num_fc_antennas = 5;
  std::uint64_t seed = 1;
  double sense_var = 0.1;
  double rx_noise = 0.5;
  double fc_power = 1.0;
  double harvest_eff = 1.0;
  double circuit_energy = 0.0;
  double target_mse = 0.0;
  std::string mode = "normalized";
  std::string json_dir;
};

int solve_command(const SolveArgs& args) {
  wpt::NetworkConfig cfg;
  cfg.num_sensors = args.num_sensors;
  cfg.num_fc_antennas = args.num_fc_antennas;
  cfg.param_var = 1.0;
  cfg.sense_var = wpt::Vec::Constant(args.num_sensors, args.sense_var);
  cfg.rx_noise_cov =
      args.rx_noise * wpt::CMat::Identity(args.num_fc_antennas, args.num_fc_antennas);
  cfg.fc_power = args.fc_power;
  cfg.harvest_eff = wpt::Vec::Constant(args.num_sensors, args.harvest_eff);
  cfg.circuit_energy = wpt::Vec::Constant(args.num_sensors, args.circuit_energy);
  cfg.validate();

  wpt::Philox rng(args.seed, 0);
  wpt::ChannelRealization ch;
  if (args.mode == "pathloss") {
    auto geo = wpt::sim::draw_geometry(args.num_sensors, {}, rng);
    ch = wpt::sim::draw_channels(args.num_sensors, args.num_fc_antennas, &geo, rng);
  } else if (args.mode == "normalized") {
    ch = wpt::sim::draw_channels(args.num_sensors, args.num_fc_antennas, nullptr, rng);
  } else {
    throw wpt::InvalidArgument("unknown channel mode: " + args.mode);
  }

  const bool power_problem = args.problem == "power";
  if (!power_problem && args.problem != "mse")
    throw wpt::InvalidArgument("--problem must be mse or power");
  double target_inv_mse = 0.0;
  if (power_problem) {
    if (args.target_mse <= 0.0)
      throw wpt::InvalidArgument("power minimization needs --target-mse > 0");
    target_inv_mse = 1.0 / args.target_mse;
  }

  wpt::design::RunTrace trace =
      power_problem ? wpt::design::optimize_power(cfg, ch, target_inv_mse)
                    : wpt::design::optimize_mse(cfg, ch);

  std::printf("iterations (%s):\n", power_problem ? "FC power [W]" : "inverse MSE");
  for (const auto& step : trace.steps)
    std::printf("  %3d  %.12g  (%s)\n", step.iteration, step.objective,
                status_name(step.inner_status));
  std::printf("%s after %d iterations, status %s\n",
              trace.converged ? "converged" : "stopped", trace.iterations,
              status_name(trace.status));
  if (!trace.message.empty()) std::printf("  %s\n", trace.message.c_str());
  if (trace.status != wpt::sdp::Status::kOptimal) return 1;

  std::printf("mse        %.12g\n", trace.mse);
  std::printf("fc power   %.12g W\n", trace.fc_power);
  std::printf("per sensor [W]:  harvested  /  transmitted\n");
  for (int k = 0; k < cfg.num_sensors; ++k)
    std::printf("  %2d  %.6e  /  %.6e\n", k + 1, trace.harvested_power[k],
                trace.transmit_power[k]);

  auto bundle = power_problem
                    ? wpt::design::build_power_sdp(cfg, ch, trace.design.filter,
                                                   target_inv_mse)
                    : wpt::design::build_mse_sdp(cfg, ch, trace.design.filter);
  auto sol = wpt::sdp::solve(bundle.problem, wpt::design::AlternationOptions{}.inner);
  print_certificates(wpt::design::verify_certificates(bundle, sol));

  if (!args.json_dir.empty()) {
    std::filesystem::create_directories(args.json_dir);
    const auto dir = std::filesystem::path(args.json_dir);
    std::ofstream pf(dir / "problem.json", std::ios::binary);
    pf << wpt::sdp::to_json(bundle.problem).dump(2) << '\n';
    std::ofstream sf(dir / "solution.json", std::ios::binary);
    sf << wpt::sdp::to_json(sol).dump(2) << '\n';
    if (!pf || !sf) throw std::runtime_error("failed to write JSON dumps");
    std::printf("wrote %s/problem.json and %s/solution.json\n", args.json_dir.c_str(),
                args.json_dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint sensor amplification, energy beamforming and receive filtering "
               "for wirelessly powered distributed estimation"};
  app.require_subcommand(1);

  std::string spec_arg;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int trials = 0;
  int threads = 0;
  auto* run = app.add_subcommand("run", "Run an experiment from a spec file or preset");
  run->add_option("spec", spec_arg, "Spec file (.toml or .json) or preset name")
      ->required();
  run->add_option("--out", out_dir, "Output directory (default: out)");
  auto* seed_opt = run->add_option("--seed", seed, "Override the spec's base seed");
  auto* trials_opt = run->add_option("--trials", trials, "Override the trial count");
  auto* threads_opt =
      run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  std::string write_dir;
  auto* presets = app.add_subcommand("presets", "List built-in experiment presets");
  presets->add_option("--write", write_dir, "Also write each preset as JSON into DIR");

  SolveArgs sa;
  auto* solve = app.add_subcommand(
      "solve", "Solve one seeded instance and print the certificate report");
  solve->add_option("--problem", sa.problem, "mse (default) or power");
  solve->add_option("--ns", sa.num_sensors, "Number of sensors");
  solve->add_option("--nr", sa.num_fc_antennas, "Number of FC antennas");
  solve->add_option("--seed", sa.seed, "Channel seed");
  solve->add_option("--sense-var", sa.sense_var, "Sensing noise variance");
  solve->add_option("--rx-noise", sa.rx_noise, "Receive noise variance");
  solve->add_option("--power", sa.fc_power, "FC power budget [W] (mse problem)");
  solve->add_option("--harvest-eff", sa.harvest_eff, "RF-to-DC conversion efficiency");
  solve->add_option("--circuit-energy", sa.circuit_energy, "Circuit energy per slot [J]");
  solve->add_option("--target-mse", sa.target_mse, "Distortion target (power problem)");
  solve->add_option("--mode", sa.mode, "normalized (default) or pathloss");
  solve->add_option("--json-dir", sa.json_dir, "Dump the final SDP and its solution");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_command(spec_arg, out_dir, seed_opt->count() ? &seed : nullptr,
                         trials_opt->count() ? &trials : nullptr,
                         threads_opt->count() ? &threads : nullptr);
    }
    if (presets->parsed()) return presets_command(write_dir);
    if (solve->parsed()) return solve_command(sa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
