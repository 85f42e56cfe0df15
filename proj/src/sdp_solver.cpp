#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstdlib>

#include "wpt/sdp.hpp"

namespace wpt::sdp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Internal standard form: minimize <C,X> + c.x over PSD blocks X and a
// nonnegative diagonal part x (user scalars followed by inequality slacks),
// subject to equality rows only.
struct Row {
  std::vector<Mat> blocks;  // per block, 0x0 when the row does not touch it
  Vec diag;                 // dense over the diagonal part
  double rhs = 0.0;
};

struct Internal {
  std::vector<int> dims;
  int nd = 0;
  int num_eq = 0;
  int num_ineq = 0;
  int num_user_scalars = 0;
  double obj_sign = 1.0;  // user objective = obj_sign * internal objective
  std::vector<Row> rows;  // equalities then slack-augmented inequalities
  std::vector<Mat> cost;
  Vec cost_diag;

  int total_dim() const {
    int n = nd;
    for (int d : dims) n += d;
    return n;
  }
};

struct Scaling {
  Vec row;     // per constraint row
  Vec block;   // per matrix block
  Vec diag;    // per diagonal entry
  double theta = 1.0;
};

struct Iterate {
  std::vector<Mat> x, s;
  Vec xd, sd;
  Vec y;
};

struct Metrics {
  double pinf = kInf, dinf = kInf, gap = kInf, pobj = 0.0, dobj = 0.0, mu = kInf;
  double comp = kInf;
  double worst() const { return std::max({pinf, dinf, gap}); }
  bool converged(const ToleranceSet& tol) const {
    return pinf <= tol.feasibility && dinf <= tol.feasibility && gap <= tol.gap &&
           comp <= tol.kkt;
  }
};

struct NtScaling {
  std::vector<Mat> g, ginv;
  std::vector<Vec> sigma;
  std::vector<Eigen::LLT<Mat>> chol_x, chol_s;
  Vec w_diag, sigma_diag;
};

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

Internal build_internal(const SdpProblem& embedded) {
  Internal ip;
  ip.dims = embedded.block_dims;
  ip.num_user_scalars = embedded.num_scalars;
  ip.num_eq = static_cast<int>(embedded.equalities.size());
  ip.num_ineq = static_cast<int>(embedded.inequalities.size());
  ip.nd = ip.num_user_scalars + ip.num_ineq;
  ip.obj_sign = embedded.sense == Sense::kMaximize ? -1.0 : 1.0;

  const int nb = static_cast<int>(ip.dims.size());
  auto make_row = [&](const LinearExpr& expr, double rhs) {
    Row row;
    row.blocks.assign(nb, Mat());
    row.diag = Vec::Zero(ip.nd);
    for (const auto& bt : expr.blocks) {
      Mat& slot = row.blocks[bt.block];
      if (slot.size() == 0) slot = Mat::Zero(ip.dims[bt.block], ip.dims[bt.block]);
      slot += bt.coeff.real();
    }
    for (const auto& st : expr.scalars) row.diag[st.index] += st.coeff;
    row.rhs = rhs;
    return row;
  };

  for (const auto& c : embedded.equalities) ip.rows.push_back(make_row(c.expr, c.rhs));
  for (int j = 0; j < ip.num_ineq; ++j) {
    Row row = make_row(embedded.inequalities[j].expr, embedded.inequalities[j].rhs);
    row.diag[ip.num_user_scalars + j] += 1.0;  // slack turns <= into ==
    ip.rows.push_back(row);
  }

  ip.cost.assign(nb, Mat());
  ip.cost_diag = Vec::Zero(ip.nd);
  for (const auto& bt : embedded.objective.blocks) {
    Mat& slot = ip.cost[bt.block];
    if (slot.size() == 0) slot = Mat::Zero(ip.dims[bt.block], ip.dims[bt.block]);
    slot += ip.obj_sign * bt.coeff.real();
  }
  for (const auto& st : embedded.objective.scalars)
    ip.cost_diag[st.index] += ip.obj_sign * st.coeff;
  return ip;
}

// Ruiz-style equilibration across rows and per-variable groups, followed by
// objective normalization. Returns the applied scaling and rewrites `ip`.
Scaling equilibrate(Internal& ip, int rounds) {
  const int nb = static_cast<int>(ip.dims.size());
  const int m = static_cast<int>(ip.rows.size());
  Scaling sc;
  sc.row = Vec::Ones(m);
  sc.block = Vec::Ones(nb);
  sc.diag = Vec::Ones(std::max(ip.nd, 1));

  auto eff_block = [&](int i, int b) {
    const Mat& a = ip.rows[i].blocks[b];
    return a.size() == 0 ? 0.0 : sc.row[i] * sc.block[b] * a.norm();
  };

  for (int round = 0; round < rounds; ++round) {
    for (int i = 0; i < m; ++i) {
      double peak = 0.0;
      for (int b = 0; b < nb; ++b) peak = std::max(peak, eff_block(i, b));
      for (int j = 0; j < ip.nd; ++j)
        peak = std::max(peak, std::abs(sc.row[i] * sc.diag[j] * ip.rows[i].diag[j]));
      if (peak > 1e-300) sc.row[i] /= std::sqrt(peak);
    }
    for (int b = 0; b < nb; ++b) {
      double peak = 0.0;
      for (int i = 0; i < m; ++i) peak = std::max(peak, eff_block(i, b));
      if (peak > 1e-300) sc.block[b] /= std::sqrt(peak);
    }
    for (int j = 0; j < ip.nd; ++j) {
      double peak = 0.0;
      for (int i = 0; i < m; ++i)
        peak = std::max(peak, std::abs(sc.row[i] * sc.diag[j] * ip.rows[i].diag[j]));
      if (peak > 1e-300) sc.diag[j] /= std::sqrt(peak);
    }
  }
  for (int i = 0; i < m; ++i) sc.row[i] = std::clamp(sc.row[i], 1e-8, 1e8);
  for (int b = 0; b < nb; ++b) sc.block[b] = std::clamp(sc.block[b], 1e-8, 1e8);
  for (int j = 0; j < ip.nd; ++j) sc.diag[j] = std::clamp(sc.diag[j], 1e-8, 1e8);

  for (int i = 0; i < m; ++i) {
    Row& row = ip.rows[i];
    for (int b = 0; b < nb; ++b)
      if (row.blocks[b].size() > 0) row.blocks[b] *= sc.row[i] * sc.block[b];
    for (int j = 0; j < ip.nd; ++j) row.diag[j] *= sc.row[i] * sc.diag[j];
    row.rhs *= sc.row[i];
  }
  double cost_peak = 0.0;
  for (int b = 0; b < nb; ++b)
    if (ip.cost[b].size() > 0) cost_peak = std::max(cost_peak, sc.block[b] * ip.cost[b].norm());
  for (int j = 0; j < ip.nd; ++j)
    cost_peak = std::max(cost_peak, std::abs(sc.diag[j] * ip.cost_diag[j]));
  sc.theta = cost_peak > 1e-300 ? 1.0 / cost_peak : 1.0;
  for (int b = 0; b < nb; ++b)
    if (ip.cost[b].size() > 0) ip.cost[b] *= sc.theta * sc.block[b];
  for (int j = 0; j < ip.nd; ++j) ip.cost_diag[j] *= sc.theta * sc.diag[j];
  return sc;
}

double apply_row(const Row& row, const std::vector<Mat>& x, const Vec& xd) {
  double v = row.diag.dot(xd);
  for (size_t b = 0; b < row.blocks.size(); ++b)
    if (row.blocks[b].size() > 0) v += row.blocks[b].cwiseProduct(x[b]).sum();
  return v;
}

// Unscaled-space optimality metrics for a scaled iterate.
Metrics user_metrics(const Internal& orig, const Scaling& sc, const Iterate& it) {
  const int nb = static_cast<int>(orig.dims.size());
  const int m = static_cast<int>(orig.rows.size());
  std::vector<Mat> xu(nb), su(nb);
  for (int b = 0; b < nb; ++b) {
    xu[b] = sc.block[b] * it.x[b];
    su[b] = it.s[b] / (sc.theta * sc.block[b]);
  }
  Vec xdu = sc.diag.head(orig.nd).cwiseProduct(it.xd);
  Vec sdu = it.sd.cwiseQuotient(sc.diag.head(orig.nd) * sc.theta);
  Vec yu(m);
  for (int i = 0; i < m; ++i) yu[i] = sc.row[i] * it.y[i] / sc.theta;

  Metrics mt;
  Vec rp(m);
  double bnorm2 = 0.0;
  for (int i = 0; i < m; ++i) {
    rp[i] = orig.rows[i].rhs - apply_row(orig.rows[i], xu, xdu);
    bnorm2 += orig.rows[i].rhs * orig.rows[i].rhs;
  }
  mt.pinf = rp.norm() / (1.0 + std::sqrt(bnorm2));

  double dres2 = 0.0, cnorm2 = 0.0;
  for (int b = 0; b < nb; ++b) {
    Mat rd = -su[b];
    if (orig.cost[b].size() > 0) {
      rd += orig.cost[b];
      cnorm2 += orig.cost[b].squaredNorm();
    }
    for (int i = 0; i < m; ++i)
      if (orig.rows[i].blocks[b].size() > 0) rd -= yu[i] * orig.rows[i].blocks[b];
    dres2 += rd.squaredNorm();
  }
  {
    Vec rdd = orig.cost_diag - sdu;
    for (int i = 0; i < m; ++i) rdd -= yu[i] * orig.rows[i].diag;
    dres2 += rdd.squaredNorm();
    cnorm2 += orig.cost_diag.squaredNorm();
  }
  mt.dinf = std::sqrt(dres2) / (1.0 + std::sqrt(cnorm2));

  double pobj = orig.cost_diag.dot(xdu);
  for (int b = 0; b < nb; ++b)
    if (orig.cost[b].size() > 0) pobj += orig.cost[b].cwiseProduct(xu[b]).sum();
  double dobj = 0.0;
  for (int i = 0; i < m; ++i) dobj += orig.rows[i].rhs * yu[i];
  mt.pobj = pobj;
  mt.dobj = dobj;

  // <X,S> equals pobj - dobj at exact feasibility but has no cancellation
  // noise floor, so take whichever witness of the gap is smaller.
  double dot = xdu.dot(sdu);
  for (int b = 0; b < nb; ++b) dot += xu[b].cwiseProduct(su[b]).sum();
  mt.mu = dot / std::max(1, orig.total_dim());
  mt.gap =
      std::min(std::abs(pobj - dobj), dot) / (1.0 + std::abs(pobj) + std::abs(dobj));

  // Complementarity in the user's complex space, matching the reported
  // comp_slack: primal lift is 1x, dual slack lift is 2x.
  double comp = 0.0;
  for (int b = 0; b < nb; ++b) {
    const CMat xc = lift_embedded_block(xu[b]);
    const CMat sc2 = 2.0 * lift_embedded_block(su[b]);
    comp = std::max(comp, (xc * sc2).norm() / (1.0 + xc.norm() * sc2.norm()));
  }
  for (int j = 0; j < orig.num_user_scalars; ++j) {
    const double num = std::abs(xdu[j] * sdu[j]);
    comp = std::max(comp, num / (1.0 + num));
  }
  mt.comp = comp;
  return mt;
}

bool compute_nt(const Internal& ip, const Iterate& it, NtScaling& nt) {
  const int nb = static_cast<int>(ip.dims.size());
  nt.g.resize(nb);
  nt.ginv.resize(nb);
  nt.sigma.resize(nb);
  nt.chol_x.resize(nb);
  nt.chol_s.resize(nb);
  for (int b = 0; b < nb; ++b) {
    nt.chol_x[b].compute(it.x[b]);
    nt.chol_s[b].compute(it.s[b]);
    if (nt.chol_x[b].info() != Eigen::Success || nt.chol_s[b].info() != Eigen::Success)
      return false;
    // W = Ls^{-T} (Ls^T X Ls)^{1/2} Ls^{-1} satisfies W S W = X; factoring the
    // congruence through one symmetric eigendecomposition gives G with
    // G G^T = W and G^{-1} X G^{-T} = G^T S G = diag(sigma).
    const Mat ls = nt.chol_s[b].matrixL();
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(ls.transpose() * it.x[b] * ls));
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) return false;
    const Vec sigma = es.eigenvalues().cwiseSqrt();
    const Vec root4 = sigma.cwiseSqrt();
    nt.g[b] = ls.transpose()
                  .triangularView<Eigen::Upper>()
                  .solve(es.eigenvectors() * root4.asDiagonal());
    nt.ginv[b] =
        root4.cwiseInverse().asDiagonal() * es.eigenvectors().transpose() * ls.transpose();
    nt.sigma[b] = sigma;
  }
  if (ip.nd > 0) {
    nt.w_diag = (it.xd.cwiseQuotient(it.sd)).cwiseSqrt();
    nt.sigma_diag = (it.xd.cwiseProduct(it.sd)).cwiseSqrt();
    if (!nt.w_diag.allFinite() || nt.sigma_diag.minCoeff() <= 0.0) return false;
  } else {
    nt.w_diag = Vec();
    nt.sigma_diag = Vec();
  }
  return true;
}

// Largest step in [0, 1] keeping chol(base + alpha * delta) PSD, with margin.
double block_step(const Eigen::LLT<Mat>& chol, const Mat& delta) {
  Mat whitened = chol.matrixL().solve(delta);
  whitened = chol.matrixL().solve(whitened.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(whitened), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return lo >= -1e-14 ? kInf : -1.0 / lo;
}

double max_step(const std::vector<Eigen::LLT<Mat>>& chol, const std::vector<Mat>& delta,
                const Vec& base_diag, const Vec& delta_diag) {
  double a = kInf;
  for (size_t b = 0; b < delta.size(); ++b) a = std::min(a, block_step(chol[b], delta[b]));
  for (int j = 0; j < base_diag.size(); ++j)
    if (delta_diag[j] < 0.0) a = std::min(a, -base_diag[j] / delta_diag[j]);
  return a;
}

struct RunOutcome {
  Iterate best;
  Metrics best_metrics;
  Status status = Status::kNumericalFailure;
  int iterations = 0;
  std::string message;
  Vec ray;  // internal-space dual ray for infeasibility
};

struct Knobs {
  int equil_rounds = 3;
  double tau_primal = 10.0;
  double tau_dual = 10.0;
  double step_frac = 0.98;
};

// One full interior-point run on pre-scaled data.
RunOutcome run_ipm(const Internal& orig, Internal work, const Scaling& sc,
                   const ToleranceSet& tol, const Knobs& knobs) {
  const int nb = static_cast<int>(work.dims.size());
  const int m = static_cast<int>(work.rows.size());
  const int nd = work.nd;

  double bpeak = 0.0, cpeak = 0.0;
  for (const auto& row : work.rows) bpeak = std::max(bpeak, std::abs(row.rhs));
  for (int b = 0; b < nb; ++b)
    if (work.cost[b].size() > 0) cpeak = std::max(cpeak, work.cost[b].norm());
  if (nd > 0) cpeak = std::max(cpeak, work.cost_diag.cwiseAbs().maxCoeff());

  Iterate it;
  it.x.resize(nb);
  it.s.resize(nb);
  const double tp = knobs.tau_primal * std::max(1.0, bpeak);
  const double td = knobs.tau_dual * std::max(1.0, cpeak);
  for (int b = 0; b < nb; ++b) {
    it.x[b] = tp * Mat::Identity(work.dims[b], work.dims[b]);
    it.s[b] = td * Mat::Identity(work.dims[b], work.dims[b]);
  }
  it.xd = Vec::Constant(nd, tp);
  it.sd = Vec::Constant(nd, td);
  it.y = Vec::Zero(m);

  RunOutcome out;
  out.best = it;
  out.best_metrics = user_metrics(orig, sc, it);

  NtScaling nt;
  std::vector<Mat> rd(nb);
  Vec rdd(nd);
  Vec rp(m);
  int stalled = 0;
  double last_worst = kInf;
  double last_step = 1.0;

  const bool trace = std::getenv("WPT_SDP_TRACE") != nullptr;
  for (int iter = 0; iter < tol.max_iterations; ++iter) {
    out.iterations = iter;
    const Metrics mt = user_metrics(orig, sc, it);
    if (trace)
      std::fprintf(stderr,
                   "it %3d pinf %.3e dinf %.3e gap %.3e mu %.3e comp %.3e pobj %.6g dobj %.6g\n",
                   iter, mt.pinf, mt.dinf, mt.gap, mt.mu, mt.comp, mt.pobj, mt.dobj);
    if (mt.worst() < out.best_metrics.worst()) {
      out.best = it;
      out.best_metrics = mt;
    }
    if (mt.converged(tol)) {
      out.best = it;
      out.best_metrics = mt;
      out.status = Status::kOptimal;
      return out;
    }

    // Stall detection: flattened progress with vanishing steps means the
    // iterate is pinned somewhere it cannot leave; give up early.
    if (mt.worst() > 0.9 * last_worst && last_step < 1e-3) {
      if (++stalled >= 4) {
        out.status = Status::kIterationLimit;
        out.message = "stalled before reaching tolerances";
        return out;
      }
    } else {
      stalled = 0;
    }
    last_worst = mt.worst();

    // Scaled residuals drive the Newton step.
    double mu = it.xd.dot(it.sd);
    for (int b = 0; b < nb; ++b) mu += it.x[b].cwiseProduct(it.s[b]).sum();
    mu /= std::max(1, work.total_dim());
    if (!std::isfinite(mu)) {
      out.message = "iterate diverged";
      return out;
    }

    for (int i = 0; i < m; ++i) rp[i] = work.rows[i].rhs - apply_row(work.rows[i], it.x, it.xd);
    for (int b = 0; b < nb; ++b) {
      rd[b] = -it.s[b];
      if (work.cost[b].size() > 0) rd[b] += work.cost[b];
      for (int i = 0; i < m; ++i)
        if (work.rows[i].blocks[b].size() > 0) rd[b] -= it.y[i] * work.rows[i].blocks[b];
    }
    if (nd > 0) {
      rdd = work.cost_diag - it.sd;
      for (int i = 0; i < m; ++i) rdd -= it.y[i] * work.rows[i].diag;
    }

    // Infeasibility heuristic: a diverging dual with an improving, nearly
    // cone-feasible ray certifies primal infeasibility (Farkas direction).
    const double ynorm = m > 0 ? it.y.cwiseAbs().maxCoeff() : 0.0;
    if (ynorm > 1e7) {
      Vec ray = it.y / ynorm;
      double improve = 0.0;
      for (int i = 0; i < m; ++i) improve += work.rows[i].rhs * ray[i];
      if (improve > 1e-8) {
        double violation = 0.0;
        for (int b = 0; b < nb; ++b) {
          Mat acc = Mat::Zero(work.dims[b], work.dims[b]);
          for (int i = 0; i < m; ++i)
            if (work.rows[i].blocks[b].size() > 0) acc += ray[i] * work.rows[i].blocks[b];
          Eigen::SelfAdjointEigenSolver<Mat> es(sym(acc), Eigen::EigenvaluesOnly);
          violation = std::max(violation, es.eigenvalues().maxCoeff());
        }
        for (int j = 0; j < nd; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += ray[i] * work.rows[i].diag[j];
          violation = std::max(violation, acc);
        }
        if (violation <= 1e-9) {
          out.status = Status::kInfeasible;
          out.message = "dual improving ray found";
          out.ray = ray / improve;
          out.iterations = iter;
          return out;
        }
      }
    }

    if (!compute_nt(work, it, nt)) {
      out.message = "cone factorization failed";
      return out;
    }

    // Schur complement M_ij = <A_i, W A_j W> over all cone parts.
    std::vector<std::vector<Mat>> t(m);  // G^T A_ib G, empty when untouched
    for (int i = 0; i < m; ++i) {
      t[i].resize(nb);
      for (int b = 0; b < nb; ++b)
        if (work.rows[i].blocks[b].size() > 0)
          t[i][b] = nt.g[b].transpose() * work.rows[i].blocks[b] * nt.g[b];
    }
    Vec w2 = nd > 0 ? nt.w_diag.cwiseAbs2().eval() : Vec();
    Mat schur = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = i; j < m; ++j) {
        double v = 0.0;
        for (int b = 0; b < nb; ++b)
          if (t[i][b].size() > 0 && t[j][b].size() > 0)
            v += t[i][b].cwiseProduct(t[j][b]).sum();
        if (nd > 0)
          v += (work.rows[i].diag.cwiseProduct(work.rows[j].diag).cwiseProduct(w2)).sum();
        schur(i, j) = v;
        schur(j, i) = v;
      }
    }
    Eigen::LLT<Mat> schur_chol(schur);
    if (schur_chol.info() != Eigen::Success) {
      schur += 1e-13 * std::max(1.0, schur.diagonal().maxCoeff()) * Mat::Identity(m, m);
      schur_chol.compute(schur);
      if (schur_chol.info() != Eigen::Success) {
        out.message = "schur factorization failed";
        return out;
      }
    }

    // W Rd W per cone part, shared by predictor and corrector.
    std::vector<Mat> wrdw(nb);
    for (int b = 0; b < nb; ++b)
      wrdw[b] = nt.g[b] * (nt.g[b].transpose() * rd[b] * nt.g[b]) * nt.g[b].transpose();
    Vec wrdw_d = nd > 0 ? w2.cwiseProduct(rdd).eval() : Vec();

    auto apply_all = [&](const std::vector<Mat>& xb, const Vec& xdv) {
      Vec v(m);
      for (int i = 0; i < m; ++i) v[i] = apply_row(work.rows[i], xb, xdv);
      return v;
    };
    auto adjoint = [&](const Vec& yv, std::vector<Mat>& out_b, Vec& out_d) {
      for (int b = 0; b < nb; ++b) {
        out_b[b] = Mat::Zero(work.dims[b], work.dims[b]);
        for (int i = 0; i < m; ++i)
          if (work.rows[i].blocks[b].size() > 0) out_b[b] += yv[i] * work.rows[i].blocks[b];
      }
      out_d = Vec::Zero(nd);
      for (int i = 0; i < m; ++i) out_d += yv[i] * work.rows[i].diag;
    };

    // Predictor.
    Vec rhs = rp + apply_all(it.x, it.xd) + apply_all(wrdw, wrdw_d);
    Vec dy_aff = schur_chol.solve(rhs);
    std::vector<Mat> ds_aff(nb), adj_b(nb);
    Vec adj_d;
    adjoint(dy_aff, adj_b, adj_d);
    Vec dsd_aff = nd > 0 ? (rdd - adj_d).eval() : Vec();
    std::vector<Mat> dx_aff(nb);
    for (int b = 0; b < nb; ++b) {
      ds_aff[b] = rd[b] - adj_b[b];
      dx_aff[b] =
          -it.x[b] - nt.g[b] * (nt.g[b].transpose() * ds_aff[b] * nt.g[b]) * nt.g[b].transpose();
      dx_aff[b] = sym(dx_aff[b]);
    }
    Vec dxd_aff = nd > 0 ? (-it.xd - w2.cwiseProduct(dsd_aff)).eval() : Vec();

    const double ap_aff = std::min(1.0, max_step(nt.chol_x, dx_aff, it.xd, dxd_aff));
    const double ad_aff = std::min(1.0, max_step(nt.chol_s, ds_aff, it.sd, dsd_aff));
    double mu_aff = 0.0;
    for (int b = 0; b < nb; ++b)
      mu_aff += (it.x[b] + ap_aff * dx_aff[b]).cwiseProduct(it.s[b] + ad_aff * ds_aff[b]).sum();
    if (nd > 0) mu_aff += (it.xd + ap_aff * dxd_aff).dot(it.sd + ad_aff * dsd_aff);
    mu_aff /= std::max(1, work.total_dim());
    const double sigma_c = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 1e-10, 1.0);

    // Corrector in the scaled space.
    std::vector<Mat> rc(nb);
    for (int b = 0; b < nb; ++b) {
      const Mat dxh = nt.ginv[b] * dx_aff[b] * nt.ginv[b].transpose();
      const Mat dsh = nt.g[b].transpose() * ds_aff[b] * nt.g[b];
      const Mat cross = sym(dxh * dsh);
      const Vec& sg = nt.sigma[b];
      Mat rt = Mat::Zero(work.dims[b], work.dims[b]);
      for (int r = 0; r < rt.rows(); ++r)
        for (int c = 0; c < rt.cols(); ++c) {
          const double num = (r == c ? sigma_c * mu : 0.0) - cross(r, c);
          rt(r, c) = 2.0 * num / (sg[r] + sg[c]);
        }
      rt.diagonal() -= sg;
      rc[b] = nt.g[b] * rt * nt.g[b].transpose();
    }
    Vec rc_d(nd);
    for (int j = 0; j < nd; ++j) {
      const double dxh = dxd_aff[j] / nt.w_diag[j];
      const double dsh = dsd_aff[j] * nt.w_diag[j];
      rc_d[j] = nt.w_diag[j] * ((sigma_c * mu - dxh * dsh) / nt.sigma_diag[j] - nt.sigma_diag[j]);
    }

    rhs = rp - apply_all(rc, rc_d) + apply_all(wrdw, wrdw_d);
    Vec dy = schur_chol.solve(rhs);
    std::vector<Mat> ds(nb), dx(nb);
    adjoint(dy, adj_b, adj_d);
    Vec dsd = nd > 0 ? (rdd - adj_d).eval() : Vec();
    for (int b = 0; b < nb; ++b) {
      ds[b] = sym(rd[b] - adj_b[b]);
      dx[b] = sym(rc[b] - nt.g[b] * (nt.g[b].transpose() * ds[b] * nt.g[b]) * nt.g[b].transpose());
    }
    Vec dxd = nd > 0 ? (rc_d - w2.cwiseProduct(dsd)).eval() : Vec();

    double ap = knobs.step_frac * max_step(nt.chol_x, dx, it.xd, dxd);
    double ad = knobs.step_frac * max_step(nt.chol_s, ds, it.sd, dsd);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    if (trace)
      std::fprintf(stderr, "      sigma %.3e ap %.3e ad %.3e |dy| %.3e\n", sigma_c, ap, ad,
                   dy.norm());

    // Apply with backtracking in case rounding broke cone feasibility.
    bool applied = false;
    for (int tries = 0; tries < 6 && !applied; ++tries) {
      Iterate trial = it;
      for (int b = 0; b < nb; ++b) {
        trial.x[b] = sym(trial.x[b] + ap * dx[b]);
        trial.s[b] = sym(trial.s[b] + ad * ds[b]);
      }
      if (nd > 0) {
        trial.xd += ap * dxd;
        trial.sd += ad * dsd;
      }
      trial.y += ad * dy;
      bool ok = nd == 0 || (trial.xd.minCoeff() > 0.0 && trial.sd.minCoeff() > 0.0);
      for (int b = 0; ok && b < nb; ++b) {
        ok = Eigen::LLT<Mat>(trial.x[b]).info() == Eigen::Success &&
             Eigen::LLT<Mat>(trial.s[b]).info() == Eigen::Success;
      }
      if (ok) {
        it = std::move(trial);
        applied = true;
      } else {
        ap *= 0.7;
        ad *= 0.7;
      }
    }
    if (!applied) {
      out.message = "step rejected repeatedly";
      return out;
    }
    last_step = std::max(ap, ad);
  }

  const Metrics mt = user_metrics(orig, sc, it);
  if (mt.worst() < out.best_metrics.worst()) {
    out.best = it;
    out.best_metrics = mt;
  }
  if (mt.converged(tol)) {
    out.best = it;
    out.best_metrics = mt;
    out.status = Status::kOptimal;
    out.iterations = tol.max_iterations;
    return out;
  }
  out.status = Status::kIterationLimit;
  out.message = "iteration limit reached";
  out.iterations = tol.max_iterations;
  return out;
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const ToleranceSet& tol) {
  problem.validate();
  const SdpProblem embedded = embed_hermitian(problem);
  const Internal orig = build_internal(embedded);

  RunOutcome outcome;
  Scaling used_sc;
  const Knobs attempts[2] = {{3, 10.0, 10.0, 0.98}, {8, 1000.0, 1000.0, 0.9}};
  for (int attempt = 0; attempt < 2; ++attempt) {
    Internal work = orig;
    Scaling sc = equilibrate(work, attempts[attempt].equil_rounds);
    RunOutcome result = run_ipm(orig, std::move(work), sc, tol, attempts[attempt]);
    if (attempt == 0 || result.best_metrics.worst() < outcome.best_metrics.worst() ||
        result.status == Status::kOptimal || result.status == Status::kInfeasible) {
      outcome = std::move(result);
      used_sc = sc;
    }
    if (outcome.status == Status::kOptimal || outcome.status == Status::kInfeasible ||
        outcome.status == Status::kIterationLimit)
      break;
  }

  // Map the internal iterate back to the user's complex problem.
  SdpSolution sol;
  sol.status = outcome.status;
  sol.iterations = outcome.iterations;
  sol.message = outcome.message;

  const int nb = static_cast<int>(problem.block_dims.size());
  const int n_eq = static_cast<int>(problem.equalities.size());
  const int n_in = static_cast<int>(problem.inequalities.size());
  const Iterate& it = outcome.best;
  const Scaling& sc = used_sc;

  std::vector<Mat> xu(nb), su(nb);
  for (int b = 0; b < nb; ++b) {
    xu[b] = sc.block[b] * it.x[b];
    su[b] = it.s[b] / (sc.theta * sc.block[b]);
  }
  Vec xdu = orig.nd > 0 ? sc.diag.head(orig.nd).cwiseProduct(it.xd).eval() : Vec();
  Vec sdu = orig.nd > 0 ? it.sd.cwiseQuotient(sc.diag.head(orig.nd) * sc.theta).eval() : Vec();
  Vec yu(orig.rows.size());
  for (int i = 0; i < static_cast<int>(orig.rows.size()); ++i)
    yu[i] = sc.row[i] * it.y[i] / sc.theta;

  sol.blocks.resize(nb);
  sol.dual_blocks.resize(nb);
  for (int b = 0; b < nb; ++b) {
    sol.blocks[b] = lift_embedded_block(xu[b]);
    sol.dual_blocks[b] = 2.0 * lift_embedded_block(su[b]);
  }
  sol.scalars = orig.num_user_scalars > 0 ? xdu.head(orig.num_user_scalars).eval() : Vec();
  sol.dual_scalars = orig.num_user_scalars > 0 ? sdu.head(orig.num_user_scalars).eval() : Vec();
  sol.eq_duals = Vec(n_eq);
  for (int i = 0; i < n_eq; ++i) sol.eq_duals[i] = -yu[i];
  sol.ineq_duals = Vec(n_in);
  for (int j = 0; j < n_in; ++j) sol.ineq_duals[j] = -yu[n_eq + j];

  if (outcome.status == Status::kInfeasible && outcome.ray.size() > 0) {
    Vec ray(outcome.ray.size());
    for (int i = 0; i < ray.size(); ++i) ray[i] = -sc.row[i] * outcome.ray[i];
    sol.infeasibility_ray = ray;
  }

  const Metrics mt = outcome.best_metrics;
  const double sign = problem.sense == Sense::kMaximize ? -1.0 : 1.0;
  sol.primal_objective = sign * mt.pobj;
  sol.dual_objective = sign * mt.dobj;
  sol.rel_gap = mt.gap;
  sol.primal_residual = mt.pinf;
  sol.dual_residual = mt.dinf;

  sol.comp_slack = mt.comp;
  return sol;
}

}  // namespace wpt::sdp
