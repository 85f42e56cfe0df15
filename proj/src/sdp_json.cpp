#include <nlohmann/json.hpp>

#include "wpt/sdp.hpp"

namespace wpt::sdp {

namespace {

using nlohmann::json;

json matrix_to_json(const CMat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

CMat matrix_from_json(const json& j) {
  const int nr = static_cast<int>(j.size());
  const int nc = nr > 0 ? static_cast<int>(j.at(0).size()) : 0;
  CMat m(nr, nc);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) {
      const auto& e = j.at(r).at(c);
      m(r, c) = Complex(e.at(0).get<double>(), e.at(1).get<double>());
    }
  return m;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json expr_to_json(const LinearExpr& e) {
  json blocks = json::array();
  for (const auto& bt : e.blocks)
    blocks.push_back({{"block", bt.block}, {"coeff", matrix_to_json(bt.coeff)}});
  json scalars = json::array();
  for (const auto& st : e.scalars) scalars.push_back({{"index", st.index}, {"coeff", st.coeff}});
  return {{"blocks", std::move(blocks)}, {"scalars", std::move(scalars)}};
}

LinearExpr expr_from_json(const json& j) {
  LinearExpr e;
  for (const auto& b : j.at("blocks"))
    e.blocks.push_back({b.at("block").get<int>(), matrix_from_json(b.at("coeff"))});
  for (const auto& s : j.at("scalars"))
    e.scalars.push_back({s.at("index").get<int>(), s.at("coeff").get<double>()});
  return e;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kIterationLimit: return "iteration-limit";
    case Status::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

}  // namespace

nlohmann::json to_json(const SdpProblem& p) {
  json j;
  j["block_dims"] = p.block_dims;
  j["num_scalars"] = p.num_scalars;
  j["sense"] = p.sense == Sense::kMaximize ? "max" : "min";
  j["objective"] = expr_to_json(p.objective);
  json eqs = json::array();
  for (const auto& c : p.equalities) eqs.push_back({{"expr", expr_to_json(c.expr)}, {"rhs", c.rhs}});
  j["equalities"] = std::move(eqs);
  json ins = json::array();
  for (const auto& c : p.inequalities)
    ins.push_back({{"expr", expr_to_json(c.expr)}, {"rhs", c.rhs}});
  j["inequalities"] = std::move(ins);
  j["block_names"] = p.block_names;
  j["scalar_names"] = p.scalar_names;
  return j;
}

SdpProblem problem_from_json(const nlohmann::json& j) {
  SdpProblem p;
  p.block_dims = j.at("block_dims").get<std::vector<int>>();
  p.num_scalars = j.at("num_scalars").get<int>();
  p.sense = j.at("sense").get<std::string>() == "max" ? Sense::kMaximize : Sense::kMinimize;
  p.objective = expr_from_json(j.at("objective"));
  for (const auto& c : j.at("equalities"))
    p.equalities.push_back({expr_from_json(c.at("expr")), c.at("rhs").get<double>()});
  for (const auto& c : j.at("inequalities"))
    p.inequalities.push_back({expr_from_json(c.at("expr")), c.at("rhs").get<double>()});
  if (j.contains("block_names")) p.block_names = j.at("block_names").get<std::vector<std::string>>();
  if (j.contains("scalar_names"))
    p.scalar_names = j.at("scalar_names").get<std::vector<std::string>>();
  return p;
}

nlohmann::json to_json(const SdpSolution& s) {
  json j;
  j["status"] = status_name(s.status);
  json blocks = json::array();
  for (const auto& b : s.blocks) blocks.push_back(matrix_to_json(b));
  j["blocks"] = std::move(blocks);
  j["scalars"] = vec_to_json(s.scalars);
  j["eq_duals"] = vec_to_json(s.eq_duals);
  j["ineq_duals"] = vec_to_json(s.ineq_duals);
  json dual_blocks = json::array();
  for (const auto& b : s.dual_blocks) dual_blocks.push_back(matrix_to_json(b));
  j["dual_blocks"] = std::move(dual_blocks);
  j["dual_scalars"] = vec_to_json(s.dual_scalars);
  j["primal_objective"] = s.primal_objective;
  j["dual_objective"] = s.dual_objective;
  j["rel_gap"] = s.rel_gap;
  j["primal_residual"] = s.primal_residual;
  j["dual_residual"] = s.dual_residual;
  j["comp_slack"] = s.comp_slack;
  j["iterations"] = s.iterations;
  j["message"] = s.message;
  j["infeasibility_ray"] = vec_to_json(s.infeasibility_ray);
  return j;
}

}  // namespace wpt::sdp
