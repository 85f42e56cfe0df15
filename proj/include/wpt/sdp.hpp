#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "wpt/types.hpp"

namespace wpt::sdp {

enum class Sense { kMinimize, kMaximize };

enum class Status {
  kOptimal,           // all tolerances met
  kInfeasible,        // primal certified infeasible (dual improving ray found)
  kIterationLimit,    // ran out of iterations before meeting tolerances
  kNumericalFailure,  // lost cone feasibility / singular systems, even after rescaling
};

struct ToleranceSet {
  double feasibility = 1e-8;  // relative primal/dual residual
  double gap = 1e-8;          // relative duality gap
  double kkt = 1e-7;          // relative complementary slackness
  double psd = 1e-9;          // PSD slack: min eigenvalue >= -psd * scale
  int max_iterations = 100;
};

// Linear functional over the variables: sum of tr(coeff_b^H X_b) over the
// attached blocks plus a dot product with the scalar variables. Blocks not
// mentioned contribute nothing.
struct BlockTerm {
  int block = 0;
  CMat coeff;  // Hermitian, same dimension as the block
};
struct ScalarTerm {
  int index = 0;
  double coeff = 0.0;
};
struct LinearExpr {
  std::vector<BlockTerm> blocks;
  std::vector<ScalarTerm> scalars;
};

struct Constraint {
  LinearExpr expr;
  double rhs = 0.0;
};

// Conic program over Hermitian PSD matrix blocks and nonnegative scalars:
//   optimize objective(X, x)
//   subject to equalities (expr == rhs), inequalities (expr <= rhs),
//              X_b PSD, x >= 0.
struct SdpProblem {
  std::vector<int> block_dims;
  int num_scalars = 0;
  Sense sense = Sense::kMinimize;
  LinearExpr objective;
  std::vector<Constraint> equalities;
  std::vector<Constraint> inequalities;
  std::vector<std::string> block_names;   // optional, for dumps
  std::vector<std::string> scalar_names;  // optional, for dumps

  void validate() const;
};

// Multiplier convention: duals are reported so that for every block
//   S_b = sum_i eq_dual[i] * A_eq[i]_b + sum_j ineq_dual[j] * A_ineq[j]_b - sigma * C_b
// is PSD at the optimum, where sigma = +1 when maximizing and -1 when
// minimizing; ineq_duals are nonnegative. S_b and the matching scalar slacks
// are returned in dual_blocks / dual_scalars.
struct SdpSolution {
  Status status = Status::kNumericalFailure;
  std::vector<CMat> blocks;
  Vec scalars;
  Vec eq_duals;
  Vec ineq_duals;
  std::vector<CMat> dual_blocks;
  Vec dual_scalars;
  double primal_objective = 0.0;  // in the problem's own sense
  double dual_objective = 0.0;
  double rel_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double comp_slack = 0.0;  // max over blocks of ||X S|| / scale
  int iterations = 0;
  std::string message;
  Vec infeasibility_ray;  // dual improving direction when status == kInfeasible
};

// Solve with a primal-dual interior-point method. Hermitian blocks are
// embedded into real symmetric ones internally; solutions are mapped back.
SdpSolution solve(const SdpProblem& problem, const ToleranceSet& tol = {});

// Real symmetric embedding of every complex block: dimensions double and each
// coefficient A becomes [[Re A, -Im A], [Im A, Re A]] / 2, which preserves
// every trace inner product exactly. Scalars and right-hand sides are
// untouched. Exposed for tests; solve() applies it internally.
SdpProblem embed_hermitian(const SdpProblem& problem);

// Map a PSD matrix of the embedded problem back to a Hermitian one:
// X = (X11 + X22)/2 + i (X21 - X12)/2. Preserves PSD-ness and all
// constraint values of the embedding.
CMat lift_embedded_block(const Mat& embedded);

// Leading rank-one factor q (with q q^H closest to X) and the relative
// residual ||X - q q^H||_F / lambda_max. The first component of q whose
// magnitude exceeds 1e-12 * max|q_i| is rotated to be real positive, so the
// result is deterministic.
CVec extract_rank_one(const CMat& x, double* residual = nullptr);

// Debug serialization. Matrices are stored row-major; each complex entry is a
// [re, im] pair. See docs/sdp-json.md for the layout.
nlohmann::json to_json(const SdpProblem& problem);
nlohmann::json to_json(const SdpSolution& solution);
SdpProblem problem_from_json(const nlohmann::json& j);

}  // namespace wpt::sdp
