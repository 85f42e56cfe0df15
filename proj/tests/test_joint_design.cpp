#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wpt/joint_design.hpp"
#include "wpt/model.hpp"
#include "wpt/philox.hpp"

using namespace wpt;
using namespace wpt::design;

namespace {

// Inverse MSE under a fixed receive filter, assembled from scratch.
double fixed_filter_inv_mse(const oracle::Instance& in, const CVec& filter, const CVec& amp) {
  const CVec eff = in.ch.uplink * amp;
  const double signal = std::norm(filter.dot(eff));
  CMat cov = in.cfg.rx_noise_cov;
  for (int k = 0; k < in.cfg.num_sensors; ++k) {
    const CVec h = in.ch.uplink.col(k);
    cov += std::norm(amp[k]) * in.cfg.sense_var[k] * (h * h.adjoint());
  }
  const double noise = std::real(filter.dot(cov * filter));
  return noise > 0.0 ? signal / noise : 0.0;
}

void check_feasible(const oracle::Instance& in, const CVec& amp, const CMat& beam, double tol) {
  const Vec budget = available_transmit_power(in.cfg, in.ch, beam);
  const Vec used = sensor_transmit_power(in.cfg, amp);
  for (int k = 0; k < in.cfg.num_sensors; ++k)
    CHECK(used[k] <= budget[k] + tol * (1.0 + std::abs(budget[k])));
  CHECK(std::real(beam.trace()) <= in.cfg.fc_power * (1.0 + tol));
}

}  // namespace

TEST_CASE("initial amplification is feasible under an isotropic beam") {
  for (std::uint64_t seed : {301, 302, 303}) {
    const auto in = oracle::random_instance(4, 3, seed, 0.1, 0.5, 1.0, 0.51, 1e-4);
    const CVec a0 = initial_amplification(in.cfg, in.ch);
    REQUIRE(a0.size() == 4);
    const CMat iso = (in.cfg.fc_power / 3.0) * CMat::Identity(3, 3);
    check_feasible(in, a0, iso, 1e-12);
    for (int k = 0; k < 4; ++k) {
      CHECK(a0[k].imag() == 0.0);
      CHECK(a0[k].real() == doctest::Approx(a0[0].real()));
    }
  }
}

TEST_CASE("fixed-filter subproblem carries the advertised data") {
  const auto in = oracle::random_instance(3, 4, 304);
  const CVec amp = initial_amplification(in.cfg, in.ch);
  const CVec filter = optimal_filter(in.cfg, in.ch, amp);

  const SdrBundle b = build_mse_sdp(in.cfg, in.ch, filter);
  CHECK(b.kind == SdrKind::kMseMin);
  REQUIRE(b.problem.block_dims.size() == 2);
  CHECK(b.problem.block_dims[0] == 3);
  CHECK(b.problem.block_dims[1] == 4);
  CHECK(b.problem.num_scalars == 1);
  CHECK(b.problem.equalities.size() == 1);
  CHECK(b.problem.inequalities.size() == 3 + 1);
  CHECK_NOTHROW(b.problem.validate());

  for (int k = 0; k < 3; ++k) {
    const Complex fk = filter.dot(in.ch.uplink.col(k));
    CHECK(std::abs(b.effective_gain[k] - fk) < 1e-14);
    CHECK(b.quad_weight[k] ==
          doctest::Approx(std::norm(fk) * in.cfg.sense_var[k]).epsilon(1e-12));
  }
  CHECK(b.noise_quad ==
        doctest::Approx(std::real(filter.dot(in.cfg.rx_noise_cov * filter))).epsilon(1e-12));
  CHECK(b.fc_power == in.cfg.fc_power);

  const SdrBundle p = build_power_sdp(in.cfg, in.ch, filter, 2.0);
  CHECK(p.kind == SdrKind::kPowerMin);
  CHECK(p.problem.num_scalars == 0);
  CHECK(p.problem.inequalities.size() == 3);
  CHECK(p.target_inv_mse == 2.0);
}

TEST_CASE("recovered designs attain the reported objective and are feasible") {
  for (std::uint64_t seed : {305, 306, 307, 308}) {
    const auto in = oracle::random_instance(4, 3, seed, 0.1, 0.5, 1.0, 0.7, 1e-4);
    const CVec amp0 = initial_amplification(in.cfg, in.ch);
    const CVec filter = optimal_filter(in.cfg, in.ch, amp0);

    const SdrBundle bundle = build_mse_sdp(in.cfg, in.ch, filter);
    AlternationOptions opts;
    const sdp::SdpSolution sol = sdp::solve(bundle.problem, opts.inner);
    REQUIRE(sol.status == sdp::Status::kOptimal);

    const RecoveredDesign rec = recover_design(bundle, sol);
    CHECK(rec.rank_residual <= 1e-4);
    check_feasible(in, rec.amp, rec.beam_gram, 1e-9);
    // The reported objective is the exact quotient at this filter, not the
    // relaxation value.
    CHECK(fixed_filter_inv_mse(in, filter, rec.amp) ==
          doctest::Approx(rec.objective).epsilon(1e-9));
    // Optimizing the filter afterwards can only help.
    CHECK(1.0 / mse_with_optimal_filter(in.cfg, in.ch, rec.amp) >=
          rec.objective * (1.0 - 1e-9));
  }
}

TEST_CASE("certificates hold across sizes, efficiencies and both problems") {
  int audited = 0;
  for (int ns : {2, 5}) {
    for (int nr : {2, 4}) {
      const std::uint64_t seed = 400 + 10 * ns + nr;
      const auto in = oracle::random_instance(ns, nr, seed, 0.1, 0.5, 1.0, 0.51, 1e-4);
      const CVec amp0 = initial_amplification(in.cfg, in.ch);
      const CVec filter = optimal_filter(in.cfg, in.ch, amp0);
      AlternationOptions opts;

      const SdrBundle mse = build_mse_sdp(in.cfg, in.ch, filter);
      const sdp::SdpSolution s1 = sdp::solve(mse.problem, opts.inner);
      REQUIRE(s1.status == sdp::Status::kOptimal);
      const CertificateReport r1 = verify_certificates(mse, s1);
      CHECK_MESSAGE(r1.all_ok(), "mse ns=", ns, " nr=", nr, " gap=", r1.rel_gap,
                    " comp=", r1.comp_slack, " rank=", r1.amp_rank_residual,
                    " power_gap=", r1.power_equality_gap);
      CHECK(r1.power_dual > 0.0);
      CHECK(r1.filter_eq_dual > 0.0);
      CHECK(r1.beam_rank <= std::min(ns, nr));

      const double target = 0.9 / mse_with_optimal_filter(in.cfg, in.ch, amp0);
      const SdrBundle pow = build_power_sdp(in.cfg, in.ch, filter, target);
      const sdp::SdpSolution s2 = sdp::solve(pow.problem, opts.inner);
      REQUIRE(s2.status == sdp::Status::kOptimal);
      const CertificateReport r2 = verify_certificates(pow, s2);
      CHECK_MESSAGE(r2.all_ok(), "power ns=", ns, " nr=", nr, " gap=", r2.rel_gap,
                    " comp=", r2.comp_slack, " rank=", r2.amp_rank_residual);
      CHECK(r2.beam_rank <= std::min(ns, nr));
      audited += 2;
    }
  }
  CHECK(audited == 8);
}

TEST_CASE("mse descent: traces climb in inverse MSE and finish consistent") {
  for (std::uint64_t seed : {501, 502, 503}) {
    const auto in = oracle::random_instance(3, 3, seed);
    const RunTrace t = optimize_mse(in.cfg, in.ch);
    REQUIRE(t.status == sdp::Status::kOptimal);
    CHECK(t.converged);
    CHECK(t.iterations <= 50);
    REQUIRE(t.steps.size() >= 2);
    CHECK(t.steps.front().iteration == 0);
    for (std::size_t i = 1; i < t.steps.size(); ++i) {
      CHECK(t.steps[i].objective >=
            t.steps[i - 1].objective - 1e-9 * std::max(1.0, t.steps[i - 1].objective));
    }
    // The emitted design re-optimizes the filter at the final amplification,
    // so it can only improve on the last recorded quotient, and at
    // convergence it does so by no more than a few multiples of rel_tol.
    const double last = 1.0 / t.steps.back().objective;
    CHECK(t.mse <= last * (1.0 + 1e-9));
    CHECK(t.mse >= last * (1.0 - 10.0 * AlternationOptions{}.rel_tol));
    CHECK(t.mse == doctest::Approx(estimator_mse(in.cfg, in.ch, t.design)).epsilon(1e-12));
    CHECK(t.fc_power == doctest::Approx(std::real(t.design.beam_gram.trace())).epsilon(1e-12));
    check_feasible(in, t.design.amp, t.design.beam_gram, 1e-9);
    // Emitted bookkeeping agrees with the model evaluated at the design.
    const Vec harvested = available_transmit_power(in.cfg, in.ch, t.design.beam_gram);
    const Vec used = sensor_transmit_power(in.cfg, t.design.amp);
    CHECK((t.harvested_power - harvested).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((t.transmit_power - used).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("power descent: traces fall and the target is met at the design") {
  for (std::uint64_t seed : {504, 505}) {
    const auto in = oracle::random_instance(4, 3, seed);
    const double limit = in.cfg.sense_var.cwiseInverse().sum();
    const double target = 0.55 * limit;
    const RunTrace t = optimize_power(in.cfg, in.ch, target);
    REQUIRE(t.status == sdp::Status::kOptimal);
    CHECK(t.converged);
    for (std::size_t i = 1; i < t.steps.size(); ++i) {
      CHECK(t.steps[i].objective <=
            t.steps[i - 1].objective + 1e-9 * std::max(1.0, t.steps[i - 1].objective));
    }
    CHECK(t.fc_power == doctest::Approx(t.steps.back().objective).epsilon(1e-12));
    CHECK(1.0 / mse_with_optimal_filter(in.cfg, in.ch, t.design.amp) >=
          target * (1.0 - 1e-8));
    const Vec budget = available_transmit_power(in.cfg, in.ch, t.design.beam_gram);
    const Vec used = sensor_transmit_power(in.cfg, t.design.amp);
    for (int k = 0; k < 4; ++k) CHECK(used[k] <= budget[k] + 1e-9 * (1.0 + budget[k]));
  }
}

TEST_CASE("the converged design is locally unimprovable within its beam budget") {
  const auto in = oracle::random_instance(3, 2, 506);
  const RunTrace t = optimize_mse(in.cfg, in.ch);
  REQUIRE(t.status == sdp::Status::kOptimal);
  const CVec v = t.design.filter;
  const double best = fixed_filter_inv_mse(in, v, t.design.amp);
  const Vec budget = available_transmit_power(in.cfg, in.ch, t.design.beam_gram);
  const Vec symbol = in.cfg.symbol_power();

  Philox rng(507, 0);
  for (int trial = 0; trial < 60; ++trial) {
    CVec cand = t.design.amp;
    for (int k = 0; k < 3; ++k) {
      cand[k] += (0.02 + 0.2 * rng.next_uniform()) * rng.next_cgaussian();
      const double cap = budget[k] / symbol[k];
      if (std::norm(cand[k]) > cap) cand[k] *= std::sqrt(cap / std::norm(cand[k]));
    }
    // Any feasible amplification under the final beam scores no better at the
    // final filter; the subproblem solved it globally.
    CHECK(fixed_filter_inv_mse(in, v, cand) <= best * (1.0 + 1e-7));
  }
}

TEST_CASE("feasibility oracle matches the analytic limit") {
  const auto in = oracle::random_instance(4, 2, 508);
  const double limit = in.cfg.sense_var.cwiseInverse().sum();

  const FeasibilityCheck yes = check_target_feasible(in.cfg, in.ch, 0.5 * limit, false);
  CHECK(yes.feasible);
  CHECK(yes.inv_mse_limit == doctest::Approx(limit).epsilon(1e-12));

  const FeasibilityCheck no = check_target_feasible(in.cfg, in.ch, limit, false);
  CHECK_FALSE(no.feasible);

  CHECK_THROWS_AS(optimize_power(in.cfg, in.ch, 1.01 * limit), InfeasibleTarget);
  CHECK_THROWS_AS(check_target_feasible(in.cfg, in.ch, 0.0, false), InvalidArgument);

  const FeasibilityCheck trial = check_target_feasible(in.cfg, in.ch, 0.3 * limit, true);
  CHECK(trial.feasible);
  CHECK(trial.detail.find("trial solve") != std::string::npos);
}

TEST_CASE("iteration cap is respected and reported") {
  const auto in = oracle::random_instance(3, 3, 509);
  AlternationOptions opts;
  opts.max_iterations = 1;
  const RunTrace t = optimize_mse(in.cfg, in.ch, opts);
  CHECK(t.status == sdp::Status::kOptimal);
  CHECK(t.iterations == 1);
  CHECK(t.steps.size() == 2);  // the starting point plus one update
}

TEST_CASE("small joint problems reach the exhaustive-search optimum") {
  for (std::uint64_t seed : {601, 602, 603}) {
    const auto in = oracle::random_instance(2, 2, seed);
    const RunTrace t = optimize_mse(in.cfg, in.ch);
    REQUIRE(t.status == sdp::Status::kOptimal);
    const double reference = oracle::grid_joint_mse(in);
    CHECK_MESSAGE(std::abs(t.mse - reference) <= 1e-3 * reference, "seed ", seed, " solver ",
                  t.mse, " grid ", reference);
  }
}
