#include "wdropf/linresponse.hpp"

#include <fstream>

namespace wdropf {

Partition make_partition(const Network& net) {
  const int n = net.n_bus();
  Partition p;
  p.R = {net.ref_bus};
  p.S = net.pv_buses;
  p.L = net.pq_buses;
  for (int b : p.S) p.unknown_cols.push_back(b);          // theta_S
  for (int b : p.L) p.unknown_cols.push_back(b);          // theta_L
  for (int b : p.L) p.unknown_cols.push_back(n + b);      // v_L
  p.fixed_cols.push_back(net.ref_bus);                    // theta_R
  p.fixed_cols.push_back(n + net.ref_bus);                // v_R
  for (int b : p.S) p.fixed_cols.push_back(n + b);        // v_S
  for (int b : p.S) p.spec_rows.push_back(b);             // p_S
  for (int b : p.L) p.spec_rows.push_back(b);             // p_L
  for (int b : p.L) p.spec_rows.push_back(n + b);         // q_L
  p.out_rows.push_back(n + net.ref_bus);                  // q_R
  for (int b : p.S) p.out_rows.push_back(n + b);          // q_S
  return p;
}

namespace {

Eigen::MatrixXd coefficient_matrix(const Network& net, const AdmittanceSet& adm,
                                   CoefficientSource src, const SystemState* nominal) {
  const int n = net.n_bus();
  if (src == CoefficientSource::Tangent) {
    if (!nominal)
      throw validation_error("tangent response matrices need a nominal state");
    return injection_jacobian(*nominal, adm);
  }
  Eigen::MatrixXd Phi(2 * n, 2 * n);
  Phi.topLeftCorner(n, n) = -adm.Bprime;
  Phi.topRightCorner(n, n) = adm.G;
  Phi.bottomLeftCorner(n, n) = -adm.G;
  Phi.bottomRightCorner(n, n) = -adm.B;
  return Phi;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& A, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
  Eigen::MatrixXd S(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) S(r, c) = A(rows[r], cols[c]);
  return S;
}

}  // namespace

Eigen::MatrixXd lpf_matrix(const Network& net, const AdmittanceSet& adm) {
  return coefficient_matrix(net, adm, CoefficientSource::Lpf, nullptr);
}

ResponseMatrices build_response(const Network& net, const AdmittanceSet& adm,
                                CoefficientSource src, const SystemState* nominal) {
  const int n = net.n_bus();
  const int nw = net.n_wind();
  ResponseMatrices rm;
  rm.part = make_partition(net);
  const Partition& pt = rm.part;
  rm.l_buses = pt.L;
  rm.rs_buses = pt.R;
  rm.rs_buses.insert(rm.rs_buses.end(), pt.S.begin(), pt.S.end());

  Eigen::MatrixXd Phi = coefficient_matrix(net, adm, src, nominal);
  rm.N = submatrix(Phi, pt.spec_rows, pt.unknown_cols);
  rm.H = submatrix(Phi, pt.spec_rows, pt.fixed_cols);
  rm.L = submatrix(Phi, pt.out_rows, pt.unknown_cols);
  rm.M = submatrix(Phi, pt.out_rows, pt.fixed_cols);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(rm.N);
  if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() < 1e-12)
    throw validation_error("singular N block: check the R/S/L partition");

  // injection patterns: spec rows respond to alpha (through -omega) and zeta
  const int ns = static_cast<int>(pt.spec_rows.size());
  Eigen::MatrixXd Ea = Eigen::MatrixXd::Zero(ns, n);   // bus alpha into p_S rows
  Eigen::MatrixXd Ew = Eigen::MatrixXd::Zero(ns, nw);  // farm errors into p/q rows
  for (std::size_t r = 0; r < pt.S.size(); ++r) Ea(r, pt.S[r]) = 1.0;
  for (int w = 0; w < nw; ++w) {
    const auto& wf = net.wind_farms[w];
    for (std::size_t r = 0; r < pt.S.size(); ++r)
      if (pt.S[r] == wf.bus) Ew(r, w) += 1.0;
    for (std::size_t r = 0; r < pt.L.size(); ++r)
      if (pt.L[r] == wf.bus) {
        Ew(pt.S.size() + r, w) += 1.0;                       // p_L
        Ew(pt.S.size() + pt.L.size() + r, w) += wf.sigma();  // q_L
      }
  }

  // state sensitivities: du = N^{-1} dinj with dinj = -omega*Ea*a + Ew*zeta
  Eigen::MatrixXd Sa = lu.solve(Ea);
  Eigen::MatrixXd Sw = lu.solve(Ew);

  const int nL = static_cast<int>(pt.L.size());
  const int off_vL = static_cast<int>(pt.S.size()) + nL;  // v_L block in unknowns
  rm.Av = -Sa.middleRows(off_vL, nL);
  rm.Bv = Sw.middleRows(off_vL, nL);
  rm.Aq = -rm.L * Sa;
  rm.Bq = rm.L * Sw;

  // flow map restricted to the unknown states
  Eigen::MatrixXd F;
  if (src == CoefficientSource::Tangent) {
    F = branch_flow_jacobian(*nominal, net);
  } else {
    F.resize(net.n_branch(), 2 * n);
    F.leftCols(n) = adm.Bl;
    F.rightCols(n) = -adm.Gl;
  }
  Eigen::MatrixXd Fu = submatrix(F, [&] {
    std::vector<int> all(net.n_branch());
    for (int k = 0; k < net.n_branch(); ++k) all[k] = k;
    return all;
  }(), pt.unknown_cols);
  rm.Af = -Fu * Sa;
  rm.Bf = Fu * Sw;
  return rm;
}

SystemState lpf_solve(const Network& net, const AdmittanceSet& adm,
                      const DispatchContext& ctx) {
  const int n = net.n_bus();
  Partition pt = make_partition(net);
  Eigen::MatrixXd Phi = coefficient_matrix(net, adm, CoefficientSource::Lpf, nullptr);
  Eigen::MatrixXd N = submatrix(Phi, pt.spec_rows, pt.unknown_cols);
  Eigen::MatrixXd H = submatrix(Phi, pt.spec_rows, pt.fixed_cols);

  Eigen::VectorXd fixed(pt.fixed_cols.size());
  fixed[0] = ctx.theta_ref;
  fixed[1] = ctx.v_setpoint[net.ref_bus];
  for (std::size_t r = 0; r < pt.S.size(); ++r) fixed[2 + r] = ctx.v_setpoint[pt.S[r]];

  Eigen::VectorXd inj(pt.spec_rows.size());
  int r = 0;
  for (int b : pt.S) inj[r++] = ctx.p[b];
  for (int b : pt.L) inj[r++] = ctx.p[b];
  for (int b : pt.L) inj[r++] = ctx.q[b];

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(N);
  if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() < 1e-12)
    throw validation_error("singular N block: check the R/S/L partition");
  Eigen::VectorXd u = lu.solve(inj - H * fixed);

  SystemState st;
  st.theta = Eigen::VectorXd::Zero(n);
  st.v = Eigen::VectorXd::Zero(n);
  for (std::size_t c = 0; c < pt.fixed_cols.size(); ++c) {
    const int col = pt.fixed_cols[c];
    (col < n ? st.theta[col] : st.v[col - n]) = fixed[c];
  }
  for (std::size_t c = 0; c < pt.unknown_cols.size(); ++c) {
    const int col = pt.unknown_cols[c];
    (col < n ? st.theta[col] : st.v[col - n]) = u[c];
  }
  return st;
}

PredictedResponse predict_response(const ResponseMatrices& rm,
                                   const Eigen::VectorXd& alpha_bus,
                                   const Eigen::VectorXd& zeta,
                                   const Eigen::VectorXd& v_l_nom,
                                   const Eigen::VectorXd& q_rs_nom,
                                   const Eigen::VectorXd& flows_nom) {
  const double omega = zeta.sum();
  PredictedResponse out;
  out.v_l = v_l_nom + omega * (rm.Av * alpha_bus) + rm.Bv * zeta;
  out.q_rs = q_rs_nom + omega * (rm.Aq * alpha_bus) + rm.Bq * zeta;
  out.flows = flows_nom + omega * (rm.Af * alpha_bus) + rm.Bf * zeta;
  return out;
}

Eigen::VectorXd bus_alpha(const Network& net, const Eigen::VectorXd& alpha_gen) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(net.n_bus());
  for (int g = 0; g < net.n_gen(); ++g)
    if (net.generators[g].online) a[net.generators[g].bus] += alpha_gen[g];
  return a;
}

void dump_response_csv(const ResponseMatrices& rm, const std::string& prefix) {
  auto dump = [&](const char* name, const Eigen::MatrixXd& M) {
    std::ofstream out(prefix + name + ".csv");
    for (int r = 0; r < M.rows(); ++r) {
      for (int c = 0; c < M.cols(); ++c) out << (c ? "," : "") << M(r, c);
      out << "\n";
    }
  };
  dump("Av", rm.Av);
  dump("Bv", rm.Bv);
  dump("Aq", rm.Aq);
  dump("Bq", rm.Bq);
  dump("Af", rm.Af);
  dump("Bf", rm.Bf);
}

}  // namespace wdropf
