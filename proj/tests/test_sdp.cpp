#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Eigenvalues>
#include <cmath>
#include <nlohmann/json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "wpt/philox.hpp"
#include "wpt/sdp.hpp"

using namespace wpt;
using namespace wpt::sdp;

namespace {

double eval_expr(const LinearExpr& e, const std::vector<CMat>& blocks, const Vec& scalars) {
  double v = 0.0;
  for (const auto& t : e.blocks) v += std::real((t.coeff.adjoint() * blocks[t.block]).trace());
  for (const auto& t : e.scalars) v += t.coeff * scalars[t.index];
  return v;
}

double min_eig(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Residual of the reported dual certificate under the documented convention:
// S_b = sum_i eq_dual[i] A_eq[i]_b + sum_j ineq_dual[j] A_ineq[j]_b - sigma C_b.
double dual_reconstruction_error(const SdpProblem& p, const SdpSolution& s) {
  const double sigma = p.sense == Sense::kMaximize ? 1.0 : -1.0;
  double worst = 0.0;
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    CMat acc = CMat::Zero(p.block_dims[b], p.block_dims[b]);
    for (std::size_t i = 0; i < p.equalities.size(); ++i)
      for (const auto& t : p.equalities[i].expr.blocks)
        if (t.block == static_cast<int>(b)) acc += s.eq_duals[i] * t.coeff;
    for (std::size_t j = 0; j < p.inequalities.size(); ++j)
      for (const auto& t : p.inequalities[j].expr.blocks)
        if (t.block == static_cast<int>(b)) acc += s.ineq_duals[j] * t.coeff;
    for (const auto& t : p.objective.blocks)
      if (t.block == static_cast<int>(b)) acc -= sigma * t.coeff;
    worst = std::max(worst, (acc - s.dual_blocks[b]).norm() / (1.0 + acc.norm()));
  }
  return worst;
}

}  // namespace

TEST_CASE("pinned diagonal entry: the smallest trace is the pin itself") {
  SdpProblem p;
  p.block_dims = {2};
  p.objective.blocks.push_back({0, CMat::Identity(2, 2)});
  CMat pin = CMat::Zero(2, 2);
  pin(0, 0) = 1.0;
  p.equalities.push_back({{{{0, pin}}, {}}, 1.0});

  const SdpSolution s = solve(p);
  REQUIRE(s.status == Status::kOptimal);
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::real(s.blocks[0](0, 0)) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::abs(s.blocks[0](1, 1)) < 1e-6);
  // Complementarity forces S(0,0) = 0, so the multiplier is exactly -1.
  CHECK(s.eq_duals[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(min_eig(s.dual_blocks[0]) > -1e-9);
  CHECK(dual_reconstruction_error(p, s) < 1e-9);
}

TEST_CASE("maximizing over the spectraplex recovers the top eigenvalue") {
  Philox rng(31, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 3 + static_cast<int>(rng.next_u32() % 3);
    CMat raw(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) raw(i, j) = rng.next_cgaussian();
    const CMat c = 0.5 * (raw + raw.adjoint());

    SdpProblem p;
    p.block_dims = {dim};
    p.sense = Sense::kMaximize;
    p.objective.blocks.push_back({0, c});
    p.equalities.push_back({{{{0, CMat::Identity(dim, dim)}}, {}}, 1.0});

    const SdpSolution s = solve(p);
    REQUIRE(s.status == Status::kOptimal);
    Eigen::SelfAdjointEigenSolver<CMat> es(c);
    const double top = es.eigenvalues().maxCoeff();
    CHECK(s.primal_objective == doctest::Approx(top).epsilon(1e-7));

    // The maximizer concentrates on the leading eigenvector.
    double residual = 0.0;
    const CVec q = extract_rank_one(s.blocks[0], &residual);
    CHECK(residual < 1e-5);
    const CVec lead = es.eigenvectors().col(dim - 1);
    CHECK(std::abs(lead.dot(q)) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("scalar-only problems reduce to linear programming") {
  SdpProblem p;
  p.num_scalars = 2;
  p.objective.scalars = {{0, 1.0}, {1, 2.0}};
  p.equalities.push_back({{{}, {{0, 1.0}, {1, 1.0}}}, 1.0});

  const SdpSolution s = solve(p);
  REQUIRE(s.status == Status::kOptimal);
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.scalars[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(s.scalars[1]) < 1e-6);
  // Multiplier -1 makes the reduced costs (0, 1); both must stay nonnegative.
  CHECK(s.eq_duals[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(s.dual_scalars[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(s.dual_scalars[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("planted optima are recovered across senses, blocks and scalars") {
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const oracle::Planted plant = oracle::plant_sdp(seed);
    const SdpSolution s = solve(plant.problem);
    REQUIRE_MESSAGE(s.status == Status::kOptimal, "seed ", seed, ": ", s.message);
    ++solved;

    CHECK_MESSAGE(
        std::abs(s.primal_objective - plant.value) <= 1e-6 * (1.0 + std::abs(plant.value)),
        "seed ", seed, " value ", s.primal_objective, " vs planted ", plant.value);

    // Re-check feasibility from the raw returned variables.
    for (const auto& c : plant.problem.equalities) {
      const double v = eval_expr(c.expr, s.blocks, s.scalars);
      CHECK(std::abs(v - c.rhs) <= 1e-6 * (1.0 + std::abs(c.rhs)));
    }
    for (const auto& c : plant.problem.inequalities) {
      const double v = eval_expr(c.expr, s.blocks, s.scalars);
      CHECK(v <= c.rhs + 1e-6 * (1.0 + std::abs(c.rhs)));
    }
    for (const auto& x : s.blocks) CHECK(min_eig(x) > -1e-7 * (1.0 + x.norm()));
    if (s.scalars.size() > 0) CHECK(s.scalars.minCoeff() > -1e-8);
    if (s.ineq_duals.size() > 0) CHECK(s.ineq_duals.minCoeff() > -1e-8);
    for (const auto& sb : s.dual_blocks) CHECK(min_eig(sb) > -1e-7 * (1.0 + sb.norm()));
    CHECK(dual_reconstruction_error(plant.problem, s) < 1e-8);

    // Strong duality: both reported objectives bracket the planted value.
    CHECK(std::abs(s.dual_objective - plant.value) <= 1e-6 * (1.0 + std::abs(plant.value)));
    CHECK(s.rel_gap <= 1e-7);
    CHECK(s.comp_slack <= 1e-6);
  }
  CHECK(solved == 30);
}

TEST_CASE("infeasible pins are certified with an improving ray") {
  for (int dim : {2, 4}) {
    const SdpProblem p = oracle::infeasible_sdp(dim);
    const SdpSolution s = solve(p);
    REQUIRE(s.status == Status::kInfeasible);
    REQUIRE(s.infeasibility_ray.size() == 1);
    // Documented orientation: sum_i d_i A_i stays PSD while <d, rhs> drives
    // the (minimize-sense) dual objective to +infinity, i.e. d . b < 0.
    const double d = s.infeasibility_ray[0];
    CHECK(d * -1.0 < 0.0);  // d . b with b = -1
    CMat pin = CMat::Zero(dim, dim);
    pin(0, 0) = 1.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(d * pin, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * std::abs(d));
  }
}

TEST_CASE("conflicting scalar bounds are infeasible") {
  SdpProblem p;
  p.num_scalars = 1;
  p.objective.scalars = {{0, 1.0}};
  p.equalities.push_back({{{}, {{0, 1.0}}}, -2.0});  // x = -2 with x >= 0
  const SdpSolution s = solve(p);
  CHECK(s.status == Status::kInfeasible);
}

TEST_CASE("iteration budget is honored") {
  ToleranceSet tight;
  tight.max_iterations = 2;
  const oracle::Planted plant = oracle::plant_sdp(3);
  const SdpSolution s = solve(plant.problem, tight);
  CHECK(s.status != Status::kOptimal);
  CHECK(s.iterations <= 2 * 2);  // a restart attempt may re-spend the budget
}

TEST_CASE("hermitian embedding preserves every inner product") {
  const oracle::Planted plant = oracle::plant_sdp(7);
  const SdpProblem& p = plant.problem;
  const SdpProblem e = embed_hermitian(p);

  REQUIRE(e.block_dims.size() == p.block_dims.size());
  for (std::size_t b = 0; b < p.block_dims.size(); ++b)
    CHECK(e.block_dims[b] == 2 * p.block_dims[b]);
  CHECK(e.num_scalars == p.num_scalars);
  REQUIRE(e.equalities.size() == p.equalities.size());
  REQUIRE(e.inequalities.size() == p.inequalities.size());

  // Random Hermitian evaluation points, mapped through the embedding.
  Philox rng(77, 0);
  std::vector<CMat> xc(p.block_dims.size());
  std::vector<Mat> xr(p.block_dims.size());
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    const int d = p.block_dims[b];
    CMat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = rng.next_cgaussian();
    xc[b] = m * m.adjoint();
    xr[b] = Mat(2 * d, 2 * d);
    xr[b] << xc[b].real(), -xc[b].imag(), xc[b].imag(), xc[b].real();
  }
  Vec scal(p.num_scalars);
  for (int i = 0; i < p.num_scalars; ++i) scal[i] = rng.next_uniform();

  auto eval_embedded = [&](const LinearExpr& expr) {
    double v = 0.0;
    for (const auto& t : expr.blocks) v += (t.coeff.real().transpose() * xr[t.block]).trace();
    for (const auto& t : expr.scalars) v += t.coeff * scal[t.index];
    return v;
  };
  CHECK(eval_expr(p.objective, xc, scal) ==
        doctest::Approx(eval_embedded(e.objective)).epsilon(1e-12));
  for (std::size_t i = 0; i < p.equalities.size(); ++i) {
    CHECK(e.equalities[i].rhs == p.equalities[i].rhs);
    CHECK(eval_expr(p.equalities[i].expr, xc, scal) ==
          doctest::Approx(eval_embedded(e.equalities[i].expr)).epsilon(1e-12));
  }

  // Lifting an embedded block inverts the embedding.
  for (std::size_t b = 0; b < p.block_dims.size(); ++b)
    CHECK((lift_embedded_block(xr[b]) - xc[b]).norm() < 1e-12 * xc[b].norm());
}

TEST_CASE("rank-one extraction is exact, deterministic, and honest about rank") {
  Philox rng(88, 0);
  const int dim = 5;
  CVec q(dim), r(dim);
  for (int i = 0; i < dim; ++i) {
    q[i] = rng.next_cgaussian();
    r[i] = rng.next_cgaussian();
  }
  // Orthonormalize r against q.
  r -= q.dot(r) / q.squaredNorm() * q;
  q.normalize();
  r.normalize();

  double residual = 1.0;
  const CVec p1 = extract_rank_one(CMat(q * q.adjoint()), &residual);
  CHECK(residual < 1e-12);
  CHECK((p1 * p1.adjoint() - q * q.adjoint()).norm() < 1e-10);
  const double lead = std::abs(std::arg(p1[0]));
  CHECK(lead < 1e-10);  // deterministic phase: leading entry rotated real positive

  const CVec p2 = extract_rank_one(CMat(q * q.adjoint()), nullptr);
  CHECK((p1 - p2).norm() == 0.0);

  const CMat mix = q * q.adjoint() + 0.3 * (r * r.adjoint());
  extract_rank_one(mix, &residual);
  CHECK(residual == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("problem validation flags structural mistakes") {
  SdpProblem p;
  p.block_dims = {2};
  p.objective.blocks.push_back({0, CMat::Identity(3, 3)});  // wrong size
  CHECK_THROWS_AS(p.validate(), InvalidArgument);

  SdpProblem q;
  q.block_dims = {2};
  q.objective.blocks.push_back({1, CMat::Identity(2, 2)});  // no such block
  CHECK_THROWS_AS(q.validate(), InvalidArgument);

  SdpProblem r;
  r.block_dims = {0};
  CHECK_THROWS_AS(r.validate(), InvalidArgument);

  SdpProblem t;
  t.num_scalars = 1;
  t.objective.scalars = {{2, 1.0}};  // no such scalar
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

TEST_CASE("json dumps round-trip losslessly") {
  const oracle::Planted plant = oracle::plant_sdp(11);
  const nlohmann::json j = to_json(plant.problem);
  const SdpProblem back = problem_from_json(j);
  CHECK(to_json(back).dump() == j.dump());

  const SdpSolution s1 = solve(plant.problem);
  const SdpSolution s2 = solve(back);
  REQUIRE(s1.status == Status::kOptimal);
  REQUIRE(s2.status == Status::kOptimal);
  CHECK(s1.primal_objective == doctest::Approx(s2.primal_objective).epsilon(1e-10));

  const nlohmann::json js = to_json(s1);
  CHECK(js.at("status").get<std::string>() == "optimal");
  CHECK(js.at("blocks").size() == plant.problem.block_dims.size());
  CHECK(std::abs(js.at("primal_objective").get<double>() - s1.primal_objective) == 0.0);
}
