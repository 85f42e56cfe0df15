#include <Eigen/Eigenvalues>
#include <cmath>

#include "wpt/sdp.hpp"

namespace wpt::sdp {

static void validate_expr(const LinearExpr& expr, const SdpProblem& p, const char* where) {
  for (const auto& bt : expr.blocks) {
    if (bt.block < 0 || bt.block >= static_cast<int>(p.block_dims.size()))
      throw InvalidArgument(std::string(where) + ": block index out of range");
    const int d = p.block_dims[bt.block];
    if (bt.coeff.rows() != d || bt.coeff.cols() != d)
      throw InvalidArgument(std::string(where) + ": coefficient dimension mismatch");
    const double scale = std::max(1.0, bt.coeff.norm());
    if ((bt.coeff - bt.coeff.adjoint()).norm() > 1e-12 * scale)
      throw InvalidArgument(std::string(where) + ": coefficient must be Hermitian");
  }
  for (const auto& st : expr.scalars) {
    if (st.index < 0 || st.index >= p.num_scalars)
      throw InvalidArgument(std::string(where) + ": scalar index out of range");
    if (!std::isfinite(st.coeff))
      throw InvalidArgument(std::string(where) + ": scalar coefficient must be finite");
  }
}

void SdpProblem::validate() const {
  if (block_dims.empty() && num_scalars == 0)
    throw InvalidArgument("problem has no variables");
  for (int d : block_dims)
    if (d <= 0) throw InvalidArgument("block dimensions must be positive");
  if (num_scalars < 0) throw InvalidArgument("num_scalars must be nonnegative");
  validate_expr(objective, *this, "objective");
  for (const auto& c : equalities) {
    validate_expr(c.expr, *this, "equality");
    if (!std::isfinite(c.rhs)) throw InvalidArgument("equality rhs must be finite");
  }
  for (const auto& c : inequalities) {
    validate_expr(c.expr, *this, "inequality");
    if (!std::isfinite(c.rhs)) throw InvalidArgument("inequality rhs must be finite");
  }
}

// [[Re A, -Im A], [Im A, Re A]] / 2: the 1/2 makes tr(embed(A) embed(X))
// equal tr(A X) exactly, so objective and rhs values carry over unchanged.
static CMat embed_coeff(const CMat& a) {
  const int d = static_cast<int>(a.rows());
  Mat e(2 * d, 2 * d);
  const Mat re = a.real();
  const Mat im = a.imag();
  e.topLeftCorner(d, d) = re;
  e.bottomRightCorner(d, d) = re;
  e.topRightCorner(d, d) = -im;
  e.bottomLeftCorner(d, d) = im;
  return (0.5 * e).cast<Complex>();
}

static LinearExpr embed_expr(const LinearExpr& expr) {
  LinearExpr out;
  out.scalars = expr.scalars;
  out.blocks.reserve(expr.blocks.size());
  for (const auto& bt : expr.blocks) out.blocks.push_back({bt.block, embed_coeff(bt.coeff)});
  return out;
}

SdpProblem embed_hermitian(const SdpProblem& problem) {
  problem.validate();
  SdpProblem out;
  out.block_dims.reserve(problem.block_dims.size());
  for (int d : problem.block_dims) out.block_dims.push_back(2 * d);
  out.num_scalars = problem.num_scalars;
  out.sense = problem.sense;
  out.objective = embed_expr(problem.objective);
  out.equalities.reserve(problem.equalities.size());
  for (const auto& c : problem.equalities) out.equalities.push_back({embed_expr(c.expr), c.rhs});
  out.inequalities.reserve(problem.inequalities.size());
  for (const auto& c : problem.inequalities)
    out.inequalities.push_back({embed_expr(c.expr), c.rhs});
  out.block_names = problem.block_names;
  out.scalar_names = problem.scalar_names;
  return out;
}

CMat lift_embedded_block(const Mat& embedded) {
  if (embedded.rows() != embedded.cols() || embedded.rows() % 2 != 0)
    throw InvalidArgument("embedded block must be square with even dimension");
  const int d = static_cast<int>(embedded.rows()) / 2;
  const Mat re = 0.5 * (embedded.topLeftCorner(d, d) + embedded.bottomRightCorner(d, d));
  const Mat im = 0.5 * (embedded.bottomLeftCorner(d, d) - embedded.topRightCorner(d, d));
  CMat x = re.cast<Complex>() + Complex(0, 1) * im.cast<Complex>();
  return detail::hermitian_part(x);
}

CVec extract_rank_one(const CMat& x, double* residual) {
  if (x.rows() != x.cols() || x.rows() == 0)
    throw InvalidArgument("extract_rank_one needs a nonempty square matrix");
  Eigen::SelfAdjointEigenSolver<CMat> es(detail::hermitian_part(x));
  const int top = static_cast<int>(x.rows()) - 1;  // eigenvalues ascend
  const double lead = es.eigenvalues()[top];
  if (!(lead > 0.0)) throw InvalidArgument("matrix has no positive leading eigenvalue");
  CVec q = std::sqrt(lead) * es.eigenvectors().col(top);
  if (residual != nullptr) {
    *residual = (x - q * q.adjoint()).norm() / lead;
  }
  // Deterministic phase: rotate the first significant entry to be real positive.
  const double peak = q.cwiseAbs().maxCoeff();
  for (int i = 0; i < q.size(); ++i) {
    if (std::abs(q[i]) > 1e-12 * peak) {
      q *= std::conj(q[i]) / std::abs(q[i]);
      break;
    }
  }
  return q;
}

}  // namespace wpt::sdp
