#pragma once

// Receding-horizon OCP for compliant pushing.
//
// Direct multiple shooting: states at N+1 nodes and inputs at N nodes are the
// decision variables, dynamics defects are enforced through explicit RK4 over
// one sampling period, and the hybrid contact modes enter as per-stage relaxed
// complementarity equalities  lambda_v^T phidot_v + eps = 0  with
// lambda_v = [mu f_x - f_y, mu f_x + f_y] >= 0 and phidot_v = [phi_dot_+,
// phi_dot_-] >= 0.
//
// The SQP iterates Gauss-Newton steps of the least-squares tracking cost with
// all constraints linearized; each subproblem is condensed onto the input
// increments and handed to the dense QP solver. An l1 merit line search
// globalizes the step.

#include <vector>

#include "pushmpc/compliant_model.hpp"
#include "pushmpc/qp.hpp"

namespace pushmpc {

struct ModelParams {
  LimitSurface ls;
  StiffnessMatrix stiffness;
  ObjectParams object;
};

struct MpcConfig {
  int horizon_samples{5};      // N
  double sample_rate{1000.0};  // nu_s, Hz
  Vec8 state_weights;          // w_x
  Vec5 input_weights;          // w_u
  double stage_state_scale{10.0};  // Lagrange term uses diag(scale * w_x, w_u)
  bool mayer_on_tracking_error{true};  // false: penalize the raw terminal state
  Vec8 state_lower, state_upper;
  Vec5 input_lower, input_upper;
  int max_sqp_iters{25};
  double kkt_tolerance{1e-8};  // feasibility tolerance (defects, complementarity)
  double step_tolerance{1e-6};
  bool warm_start{true};

  double dt() const { return 1.0 / sample_rate; }

  void validate() const {
    if (horizon_samples < 1) throw std::invalid_argument("MpcConfig: horizon_samples >= 1");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("MpcConfig: sample_rate > 0");
    if ((state_weights.array() < 0.0).any() || (input_weights.array() < 0.0).any()) {
      throw std::invalid_argument("MpcConfig: weights must be non-negative");
    }
    if ((state_lower.array() > state_upper.array()).any() ||
        (input_lower.array() > input_upper.array()).any()) {
      throw std::invalid_argument("MpcConfig: bounds must be ordered");
    }
  }
};

/// Pose references (x*, y*, theta*) per horizon node; every other state and
/// input reference entry is zero.
using Reference = std::vector<Eigen::Vector3d>;

struct ComplementarityTerms {
  Eigen::Vector2d lambda_v;
  Eigen::Vector2d phi_dot_v;
  double residual;
};

inline ComplementarityTerms complementarity_terms(const Vec8& x, const Vec5& u,
                                                  double mu_contact) {
  ComplementarityTerms t;
  const double fx = x[6], fy = x[7];
  t.lambda_v = {mu_contact * fx - fy, mu_contact * fx + fy};
  t.phi_dot_v = {u[0], u[1]};
  t.residual = t.lambda_v.dot(t.phi_dot_v) + u[4];
  return t;
}

enum class OcpStatus { Converged, MaxIters, Infeasible };

struct OcpSolution {
  std::vector<Vec8> X;  // N+1 state nodes
  std::vector<Vec5> U;  // N input nodes
  OcpStatus status{OcpStatus::MaxIters};
  int iterations{0};
  double kkt_residual{0.0};      // max of feasibility and last full-step norm
  double defect_residual{0.0};   // max dynamics defect (inf norm)
  double compl_residual{0.0};    // max |lambda^T phidot + eps| over stages
  bool sliding_in_plan{false};   // some stage rides a cone edge with slip
  int qp_iterations{0};
  Eigen::VectorXd qp_x, qp_y;    // QP warm-start carries
};

struct OcpNlp {
  MpcConfig config;
  ModelParams model;
  Vec8 x0;
  Reference ref;  // size N+1
};

inline OcpNlp transcribe(const MpcConfig& config, const Vec8& x0, const Reference& ref,
                         const ModelParams& model) {
  config.validate();
  if (static_cast<int>(ref.size()) < config.horizon_samples + 1) {
    throw std::invalid_argument("transcribe: reference shorter than horizon + 1");
  }
  return OcpNlp{config, model, x0, ref};
}

namespace detail {

inline Vec8 ref_state(const Eigen::Vector3d& pose_ref) {
  Vec8 r = Vec8::Zero();
  r.head<3>() = pose_ref;
  return r;
}

struct Linearization {
  std::vector<Vec8> F;     // RK4(x_k, u_k)
  std::vector<Mat8> A;
  std::vector<Mat85> B;
  std::vector<Vec8> defect;  // F_k - x_{k+1}
  std::vector<double> compl_res;
  std::vector<Eigen::Matrix<double, 1, 8>> compl_gx;
  std::vector<Eigen::Matrix<double, 1, 5>> compl_gu;
};

}  // namespace detail

class OcpSolver {
 public:
  explicit OcpSolver(QpSettings qp_settings = {}) : qp_settings_(qp_settings) {}

  /// Solves the NLP by SQP, optionally warm-started from a previous solution
  /// shifted by one stage.
  OcpSolution solve(const OcpNlp& nlp, const OcpSolution* warm = nullptr) const {
    const MpcConfig& cfg = nlp.config;
    const int N = cfg.horizon_samples;
    const double mu = nlp.model.object.mu_contact;

    OcpSolution sol;
    init_iterate(nlp, warm, sol);

    double merit_nu = 1.0;
    double last_step_norm = std::numeric_limits<double>::infinity();
    detail::Linearization lin;
    lin.F.resize(N);
    lin.A.resize(N);
    lin.B.resize(N);
    lin.defect.resize(N);
    lin.compl_res.resize(N);
    lin.compl_gx.resize(N);
    lin.compl_gu.resize(N);

    const int nU = 5 * N;
    std::vector<Eigen::MatrixXd> E(N + 1);  // d x_k / d U
    std::vector<Vec8> e(N + 1);             // affine defect propagation

    for (int it = 1; it <= cfg.max_sqp_iters; ++it) {
      linearize(nlp, sol, lin);

      double feas = 0.0;
      for (int k = 0; k < N; ++k) {
        feas = std::max(feas, lin.defect[k].lpNorm<Eigen::Infinity>());
        feas = std::max(feas, std::abs(lin.compl_res[k]));
      }
      if (feas <= cfg.kkt_tolerance && last_step_norm <= cfg.step_tolerance) {
        sol.status = OcpStatus::Converged;
        break;
      }

      // Condensing: Delta x_k = E_k Delta U + e_k.
      E[0] = Eigen::MatrixXd::Zero(8, nU);
      e[0].setZero();
      for (int k = 0; k < N; ++k) {
        E[k + 1].noalias() = lin.A[k] * E[k];
        E[k + 1].middleCols(5 * k, 5) += lin.B[k];
        e[k + 1] = lin.A[k] * e[k] + lin.defect[k];
      }

      Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nU, nU);
      Eigen::VectorXd q = Eigen::VectorXd::Zero(nU);
      const Vec8 wx_stage = cfg.stage_state_scale * cfg.state_weights;
      for (int k = 0; k <= N; ++k) {
        if (k < N) {
          const Vec8 ex = sol.X[k] - detail::ref_state(nlp.ref[k]) + e[k];
          add_state_cost(E[k], ex, wx_stage, P, q);
        } else {
          const Vec8 ex = cfg.mayer_on_tracking_error
                              ? Vec8(sol.X[k] - detail::ref_state(nlp.ref[k]) + e[k])
                              : Vec8(sol.X[k] + e[k]);
          add_state_cost(E[k], ex, cfg.state_weights, P, q);
        }
      }
      for (int k = 0; k < N; ++k) {
        for (int j = 0; j < 5; ++j) {
          P(5 * k + j, 5 * k + j) += 2.0 * cfg.input_weights[j];
          q[5 * k + j] += 2.0 * cfg.input_weights[j] * sol.U[k][j];
        }
      }
      P.diagonal().array() += 1e-10 * (1.0 + P.diagonal().maxCoeff());

      // Constraint rows: input box, complementarity equalities, cone
      // non-negativity, and bounded state entries (skipped at the fixed node 0).
      std::vector<int> bounded_states;
      for (int j = 0; j < 8; ++j) {
        if (cfg.state_lower[j] > -1e19 || cfg.state_upper[j] < 1e19) bounded_states.push_back(j);
      }
      const int mrows = nU + N + 2 * N + static_cast<int>(bounded_states.size()) * N;
      Eigen::MatrixXd Arows = Eigen::MatrixXd::Zero(mrows, nU);
      Eigen::VectorXd lo(mrows), hi(mrows);
      int row = 0;
      for (int k = 0; k < N; ++k) {
        for (int j = 0; j < 5; ++j) {
          Arows(row, 5 * k + j) = 1.0;
          lo[row] = cfg.input_lower[j] - sol.U[k][j];
          hi[row] = cfg.input_upper[j] - sol.U[k][j];
          ++row;
        }
      }
      for (int k = 0; k < N; ++k) {
        Arows.row(row).noalias() = lin.compl_gx[k] * E[k];
        Arows.row(row).segment(5 * k, 5) += lin.compl_gu[k];
        const double rhs = -(lin.compl_res[k] + lin.compl_gx[k] * e[k]);
        lo[row] = rhs;
        hi[row] = rhs;
        ++row;
      }
      for (int k = 1; k <= N; ++k) {
        // mu f_x - f_y >= 0 and mu f_x + f_y >= 0
        for (double sgn : {-1.0, 1.0}) {
          Eigen::Matrix<double, 1, 8> g = Eigen::Matrix<double, 1, 8>::Zero();
          g(0, 6) = mu;
          g(0, 7) = sgn;
          Arows.row(row).noalias() = g * E[k];
          const double val = mu * (sol.X[k][6] + e[k][6]) + sgn * (sol.X[k][7] + e[k][7]);
          lo[row] = -val;
          hi[row] = 1e20;
          ++row;
        }
      }
      for (int k = 1; k <= N; ++k) {
        for (int j : bounded_states) {
          Arows.row(row) = E[k].row(j);
          const double xk = sol.X[k][j] + e[k][j];
          lo[row] = cfg.state_lower[j] - xk;
          hi[row] = cfg.state_upper[j] - xk;
          ++row;
        }
      }

      QpResult qp = qp_.solve(P, q, Arows, lo, hi,
                              sol.qp_x.size() == nU ? &sol.qp_x : nullptr,
                              sol.qp_y.size() == mrows ? &sol.qp_y : nullptr, qp_settings_);
#ifdef PUSHMPC_SQP_DEBUG
      std::fprintf(stderr, "sqp it=%d feas=%.3e qp_status=%d qp_it=%d step=%.3e\n", it, feas,
                   static_cast<int>(qp.status), qp.iterations, qp.x.lpNorm<Eigen::Infinity>());
#endif
      sol.qp_iterations += qp.iterations;
      if (qp.status == QpStatus::PrimalInfeasible) {
        sol.status = OcpStatus::Infeasible;
        sol.iterations = it;
        break;
      }
      if (qp.status != QpStatus::Solved) {
        // Never step on an unconverged QP direction.
        sol.status = OcpStatus::MaxIters;
        sol.iterations = it;
        break;
      }
      sol.qp_x = qp.x;
      sol.qp_y = qp.y;

      // Reconstruct the state step and run the merit line search.
      std::vector<Vec8> dX(N + 1);
      for (int k = 0; k <= N; ++k) dX[k] = E[k] * qp.x + e[k];
      const double step_norm = qp.x.lpNorm<Eigen::Infinity>();
      last_step_norm = step_norm;
      if (step_norm > 1.0) {
        // The next linearization moves far; stale duals would mislead the QP.
        sol.qp_y.resize(0);
      }

      double y_eq_max = 0.0;
      for (int k = 0; k < N; ++k) y_eq_max = std::max(y_eq_max, std::abs(qp.y[nU + k]));
      // Defect multiplier estimates from the costate recursion at the stepped
      // point; the l1 penalty must dominate them for the QP direction to be a
      // merit descent direction.
      {
        Vec8 pc;
        const Vec8 exN = cfg.mayer_on_tracking_error
                             ? Vec8(sol.X[N] + dX[N] - detail::ref_state(nlp.ref[N]))
                             : Vec8(sol.X[N] + dX[N]);
        pc = 2.0 * cfg.state_weights.cwiseProduct(exN);
        double p_max = pc.lpNorm<Eigen::Infinity>();
        for (int k = N - 1; k >= 0; --k) {
          const Vec8 exk = sol.X[k] + dX[k] - detail::ref_state(nlp.ref[k]);
          pc = lin.A[k].transpose() * pc + 2.0 * wx_stage.cwiseProduct(exk) +
               qp.y[nU + k] * lin.compl_gx[k].transpose();
          p_max = std::max(p_max, pc.lpNorm<Eigen::Infinity>());
        }
        merit_nu = std::max(merit_nu, 1.5 * p_max + 1.0);
      }
      merit_nu = std::max(merit_nu, 2.0 * y_eq_max + 1.0);

      // l1 merit line search; if the direction fails for the current penalty,
      // escalate the penalty (the QP step is a descent direction for any
      // penalty at least as large as the multipliers).
      std::vector<Vec8> Xt(N + 1);
      std::vector<Vec5> Ut(N);
      double tau = 1.0;
      bool accepted = false;
      for (int round = 0; round < 3 && !accepted; ++round) {
        const double m0 = merit(nlp, sol.X, sol.U, merit_nu);
        tau = 1.0;
        for (int ls_it = 0; ls_it < 10; ++ls_it) {
          for (int k = 0; k <= N; ++k) Xt[k] = sol.X[k] + tau * dX[k];
          for (int k = 0; k < N; ++k) Ut[k] = sol.U[k] + tau * qp.x.segment<5>(5 * k);
          const double mt = merit(nlp, Xt, Ut, merit_nu);
          if (mt < m0) {
            accepted = true;
            break;
          }
          tau *= 0.5;
        }
        if (!accepted) merit_nu *= 10.0;
      }
      if (!accepted) {
        // No productive direction left; classify by feasibility of the iterate.
        sol.status = feas <= cfg.kkt_tolerance ? OcpStatus::Converged : OcpStatus::MaxIters;
        sol.iterations = it;
        break;
      }
#ifdef PUSHMPC_SQP_DEBUG
      std::fprintf(stderr, "   ls tau=%.5f nu=%.2e\n", tau, merit_nu);
#endif
      sol.X = Xt;
      sol.U = Ut;
      sol.iterations = it;

      if (step_norm <= cfg.step_tolerance) {
        // Re-evaluate feasibility at the accepted iterate before declaring victory.
        linearize(nlp, sol, lin, /*jacobians=*/false);
        double f2 = 0.0;
        for (int k = 0; k < N; ++k) {
          f2 = std::max(f2, lin.defect[k].lpNorm<Eigen::Infinity>());
          f2 = std::max(f2, std::abs(lin.compl_res[k]));
        }
        if (f2 <= cfg.kkt_tolerance) {
          sol.status = OcpStatus::Converged;
          break;
        }
      }
    }

    finalize_residuals(nlp, sol);
    return sol;
  }

 private:
  static void add_state_cost(const Eigen::MatrixXd& Ek, const Vec8& err, const Vec8& w,
                             Eigen::MatrixXd& P, Eigen::VectorXd& q) {
    for (int j = 0; j < 8; ++j) {
      if (w[j] <= 0.0) continue;
      P.noalias() += (2.0 * w[j]) * (Ek.row(j).transpose() * Ek.row(j));
      q.noalias() += (2.0 * w[j] * err[j]) * Ek.row(j).transpose();
    }
  }

  void init_iterate(const OcpNlp& nlp, const OcpSolution* warm, OcpSolution& sol) const {
    const int N = nlp.config.horizon_samples;
    const double h = nlp.config.dt();
    sol.X.assign(N + 1, nlp.x0);
    sol.U.assign(N, Vec5::Zero());
    if (warm != nullptr && nlp.config.warm_start &&
        static_cast<int>(warm->X.size()) == N + 1) {
      for (int k = 0; k < N - 1; ++k) sol.U[k] = warm->U[k + 1];
      sol.U[N - 1] = warm->U[N - 1];
      sol.X[0] = nlp.x0;
      for (int k = 1; k < N; ++k) sol.X[k] = warm->X[k + 1];
      sol.X[N] = rk4_step(sol.X[N - 1], sol.U[N - 1], h, nlp.model.ls, nlp.model.stiffness,
                          nlp.model.object);
      sol.qp_x = warm->qp_x;
      sol.qp_y = warm->qp_y;
    } else {
      for (int k = 0; k < N; ++k) {
        sol.X[k + 1] =
            rk4_step(sol.X[k], Vec5::Zero(), h, nlp.model.ls, nlp.model.stiffness, nlp.model.object);
      }
    }
    // Clamp the free nodes into the box so the first QP starts feasible.
    for (int k = 1; k <= N; ++k) {
      sol.X[k] = sol.X[k].cwiseMax(nlp.config.state_lower).cwiseMin(nlp.config.state_upper);
    }
    for (int k = 0; k < N; ++k) {
      sol.U[k] = sol.U[k].cwiseMax(nlp.config.input_lower).cwiseMin(nlp.config.input_upper);
    }
  }

  void linearize(const OcpNlp& nlp, const OcpSolution& sol, detail::Linearization& lin,
                 bool jacobians = true) const {
    const int N = nlp.config.horizon_samples;
    const double h = nlp.config.dt();
    const double mu = nlp.model.object.mu_contact;
    for (int k = 0; k < N; ++k) {
      if (jacobians) {
        lin.F[k] = rk4_step_with_sensitivities(sol.X[k], sol.U[k], h, nlp.model.ls,
                                               nlp.model.stiffness, nlp.model.object, lin.A[k],
                                               lin.B[k]);
      } else {
        lin.F[k] = rk4_step(sol.X[k], sol.U[k], h, nlp.model.ls, nlp.model.stiffness,
                            nlp.model.object);
      }
      lin.defect[k] = lin.F[k] - sol.X[k + 1];
      const auto ct = complementarity_terms(sol.X[k], sol.U[k], mu);
      lin.compl_res[k] = ct.residual;
      if (jacobians) {
        Eigen::Matrix<double, 1, 8> gx = Eigen::Matrix<double, 1, 8>::Zero();
        gx(0, 6) = mu * (ct.phi_dot_v[0] + ct.phi_dot_v[1]);
        gx(0, 7) = -ct.phi_dot_v[0] + ct.phi_dot_v[1];
        Eigen::Matrix<double, 1, 5> gu = Eigen::Matrix<double, 1, 5>::Zero();
        gu(0, 0) = ct.lambda_v[0];
        gu(0, 1) = ct.lambda_v[1];
        gu(0, 4) = 1.0;
        lin.compl_gx[k] = gx;
        lin.compl_gu[k] = gu;
      }
    }
  }

  double merit(const OcpNlp& nlp, const std::vector<Vec8>& X, const std::vector<Vec5>& U,
               double nu) const {
    const int N = nlp.config.horizon_samples;
    const double h = nlp.config.dt();
    const double mu = nlp.model.object.mu_contact;
    double cost = 0.0;
    const Vec8 wx_stage = nlp.config.stage_state_scale * nlp.config.state_weights;
    for (int k = 0; k <= N; ++k) {
      Vec8 err;
      Vec8 w;
      if (k == N) {
        w = nlp.config.state_weights;
        err = nlp.config.mayer_on_tracking_error ? Vec8(X[k] - detail::ref_state(nlp.ref[k]))
                                                 : X[k];
      } else {
        w = wx_stage;
        err = X[k] - detail::ref_state(nlp.ref[k]);
      }
      cost += err.cwiseProduct(w.cwiseProduct(err)).sum();
    }
    double viol = 0.0;
    for (int k = 0; k < N; ++k) {
      cost += U[k].cwiseProduct(nlp.config.input_weights.cwiseProduct(U[k])).sum();
      const Vec8 F = rk4_step(X[k], U[k], h, nlp.model.ls, nlp.model.stiffness, nlp.model.object);
      viol += (F - X[k + 1]).lpNorm<1>();
      viol += std::abs(complementarity_terms(X[k], U[k], mu).residual);
    }
    return cost + nu * viol;
  }

  void finalize_residuals(const OcpNlp& nlp, OcpSolution& sol) const {
    const int N = nlp.config.horizon_samples;
    const double h = nlp.config.dt();
    const double mu = nlp.model.object.mu_contact;
    double defect = 0.0, compl_res = 0.0;
    bool sliding = false;
    for (int k = 0; k < N; ++k) {
      const Vec8 F = rk4_step(sol.X[k], sol.U[k], h, nlp.model.ls, nlp.model.stiffness,
                              nlp.model.object);
      defect = std::max(defect, (F - sol.X[k + 1]).lpNorm<Eigen::Infinity>());
      const auto ct = complementarity_terms(sol.X[k], sol.U[k], mu);
      compl_res = std::max(compl_res, std::abs(ct.residual));
      if ((ct.lambda_v[0] < 1e-3 && ct.phi_dot_v[0] > 1e-3) ||
          (ct.lambda_v[1] < 1e-3 && ct.phi_dot_v[1] > 1e-3)) {
        sliding = true;
      }
    }
    sol.defect_residual = defect;
    sol.compl_residual = compl_res;
    sol.sliding_in_plan = sliding;
    sol.kkt_residual = std::max(defect, compl_res);
  }

  QpSolver qp_;
  QpSettings qp_settings_;
};

}  // namespace pushmpc
