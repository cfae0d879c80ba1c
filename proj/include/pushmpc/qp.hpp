#pragma once

// Dense convex QP solver:  min 1/2 x^T P x + q^T x  s.t.  lo <= A x <= hi.
//
// Ruiz equilibration followed by operator-splitting (ADMM) iterations with
// per-row step weights (equality rows run stiffer), then an active-set polish
// that solves the KKT system of the detected active constraints to snap
// residuals to machine precision. Warm-startable in both primal and dual
// variables; problem sizes here are a few hundred at most, so everything is
// dense. Termination residuals are evaluated on the unscaled problem.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace pushmpc {

enum class QpStatus { Solved, MaxIter, PrimalInfeasible };

struct QpSettings {
  double rho{0.1};
  double sigma{1e-6};
  double alpha{1.6};
  double eps_abs{1e-9};
  double eps_rel{1e-9};
  int max_iter{10000};
  int check_interval{10};
  bool polish{true};
  double polish_delta{1e-9};
  double eq_rho_scale{1e3};
  bool adaptive_rho{true};
  int ruiz_iters{12};
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // row multipliers: > 0 pushes on hi, < 0 on lo
  QpStatus status{QpStatus::MaxIter};
  int iterations{0};
  double prim_res{std::numeric_limits<double>::infinity()};
  double dual_res{std::numeric_limits<double>::infinity()};
  bool polished{false};
};

class QpSolver {
 public:
  QpResult solve(const Eigen::MatrixXd& P0, const Eigen::VectorXd& q0, const Eigen::MatrixXd& A0,
                 const Eigen::VectorXd& lo0, const Eigen::VectorXd& hi0,
                 const Eigen::VectorXd* x_warm = nullptr, const Eigen::VectorXd* y_warm = nullptr,
                 const QpSettings& s = {}) const {
    const int n = static_cast<int>(P0.rows());
    const int m = static_cast<int>(A0.rows());
    QpResult r;

    if (m == 0) {
      r.x = (P0 + s.sigma * Eigen::MatrixXd::Identity(n, n)).llt().solve(-q0);
      r.y.resize(0);
      r.status = QpStatus::Solved;
      r.prim_res = 0.0;
      r.dual_res = (P0 * r.x + q0).lpNorm<Eigen::Infinity>();
      return r;
    }

    // Ruiz equilibration of [P A^T; A 0] plus cost normalization.
    Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd E = Eigen::VectorXd::Ones(m);
    Eigen::MatrixXd P = P0;
    Eigen::MatrixXd A = A0;
    double cost_scale = 1.0;
    for (int it = 0; it < s.ruiz_iters; ++it) {
      for (int j = 0; j < n; ++j) {
        const double cn = std::max(P.col(j).lpNorm<Eigen::Infinity>(),
                                   A.col(j).lpNorm<Eigen::Infinity>());
        const double d = cn > 1e-12 ? 1.0 / std::sqrt(cn) : 1.0;
        P.col(j) *= d;
        P.row(j) *= d;
        A.col(j) *= d;
        D[j] *= d;
      }
      for (int i = 0; i < m; ++i) {
        const double rn = A.row(i).lpNorm<Eigen::Infinity>();
        const double e = rn > 1e-12 ? 1.0 / std::sqrt(rn) : 1.0;
        A.row(i) *= e;
        E[i] *= e;
      }
    }
    {
      const double pn = P.lpNorm<Eigen::Infinity>();
      const double qn = (D.cwiseProduct(q0)).lpNorm<Eigen::Infinity>();
      const double c = 1.0 / std::max({pn, qn, 1e-12});
      if (c > 1e-12 && c < 1e12) {
        P *= c;
        cost_scale = c;
      }
    }
    const Eigen::VectorXd q = cost_scale * D.cwiseProduct(q0);
    const Eigen::VectorXd lo = E.cwiseProduct(lo0.cwiseMax(-1e25));
    const Eigen::VectorXd hi = E.cwiseProduct(hi0.cwiseMin(1e25));

    Eigen::VectorXd rho_vec(m);
    double rho = s.rho;
    auto fill_rho = [&](double base) {
      for (int i = 0; i < m; ++i) {
        rho_vec[i] = (hi0[i] - lo0[i] < 1e-14) ? base * s.eq_rho_scale : base;
      }
    };
    fill_rho(rho);

    // Warm start maps into scaled coordinates.
    Eigen::VectorXd x = x_warm && x_warm->size() == n
                            ? Eigen::VectorXd(x_warm->cwiseQuotient(D))
                            : Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y = y_warm && y_warm->size() == m
                            ? Eigen::VectorXd(cost_scale * y_warm->cwiseQuotient(E))
                            : Eigen::VectorXd::Zero(m);
    Eigen::VectorXd z = (A * x).cwiseMax(lo).cwiseMin(hi);

    Eigen::LLT<Eigen::MatrixXd> llt;
    auto refactor = [&]() {
      Eigen::MatrixXd Kmat = P + s.sigma * Eigen::MatrixXd::Identity(n, n);
      Kmat.noalias() += A.transpose() * rho_vec.asDiagonal() * A;
      llt.compute(Kmat);
    };
    refactor();

    auto unscaled_residuals = [&](const Eigen::VectorXd& xs, const Eigen::VectorXd& ys,
                                  double& rp, double& rd) {
      const Eigen::VectorXd xu = D.cwiseProduct(xs);
      const Eigen::VectorXd yu = E.cwiseProduct(ys) / cost_scale;
      const Eigen::VectorXd Ax = A0 * xu;
      rp = std::max((lo0 - Ax).maxCoeff(), (Ax - hi0).maxCoeff());
      rp = std::max(rp, 0.0);
      rd = (P0 * xu + q0 + A0.transpose() * yu).lpNorm<Eigen::Infinity>();
    };

    Eigen::VectorXd xt(n), zt(m), z_relax(m), rhs(n);
    for (int it = 1; it <= s.max_iter; ++it) {
      rhs = s.sigma * x - q;
      rhs.noalias() += A.transpose() * (rho_vec.cwiseProduct(z) - y);
      xt = llt.solve(rhs);
      zt.noalias() = A * xt;

      x = s.alpha * xt + (1.0 - s.alpha) * x;
      z_relax = s.alpha * zt + (1.0 - s.alpha) * z;
      z = (z_relax + y.cwiseQuotient(rho_vec)).cwiseMax(lo).cwiseMin(hi);
      y += rho_vec.cwiseProduct(z_relax - z);

      if (it % s.check_interval == 0 || it == s.max_iter) {
        double rp_u, rd_u;
        unscaled_residuals(x, y, rp_u, rd_u);
        r.prim_res = rp_u;
        r.dual_res = rd_u;
        r.iterations = it;
        const double xs = (D.cwiseProduct(x)).lpNorm<Eigen::Infinity>();
        const double eps_p = s.eps_abs + s.eps_rel * std::max(1.0, xs);
        const double eps_d = s.eps_abs + s.eps_rel * std::max(1.0, q0.lpNorm<Eigen::Infinity>());
        if (rp_u <= eps_p && rd_u <= eps_d) {
          r.status = QpStatus::Solved;
          break;
        }
        if (s.adaptive_rho && it % (s.check_interval * 10) == 0) {
          const double scaled_rp = (A * x - z).lpNorm<Eigen::Infinity>();
          const double scaled_rd =
              (P * x + q + A.transpose() * y).lpNorm<Eigen::Infinity>();
          const double ratio = (scaled_rp + 1e-30) / (scaled_rd + 1e-30);
          if (ratio > 25.0 || ratio < 0.04) {
            rho = std::clamp(rho * std::sqrt(ratio), 1e-6, 1e6);
            fill_rho(rho);
            refactor();
          }
        }
      }
    }

    r.x = D.cwiseProduct(x);
    r.y = E.cwiseProduct(y) / cost_scale;
    if (r.status != QpStatus::Solved && r.prim_res > 1e-3) {
      r.status = QpStatus::PrimalInfeasible;
    }
    if (s.polish && r.status == QpStatus::Solved) {
      polish(P0, q0, A0, lo0, hi0, s, r);
    }
    return r;
  }

 private:
  static void polish(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
                     const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const QpSettings& s,
                     QpResult& r) {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(A.rows());
    std::vector<int> act;
    std::vector<double> act_rhs;
    const double ytol = 1e-10;
    for (int i = 0; i < m; ++i) {
      if (hi[i] - lo[i] < 1e-14) {
        act.push_back(i);
        act_rhs.push_back(lo[i]);
      } else if (r.y[i] < -ytol) {
        act.push_back(i);
        act_rhs.push_back(lo[i]);
      } else if (r.y[i] > ytol) {
        act.push_back(i);
        act_rhs.push_back(hi[i]);
      }
    }
    const int ma = static_cast<int>(act.size());
    Eigen::MatrixXd Kmat(n + ma, n + ma);
    Kmat.setZero();
    Kmat.topLeftCorner(n, n) = P + s.polish_delta * Eigen::MatrixXd::Identity(n, n);
    for (int k = 0; k < ma; ++k) {
      Kmat.block(n + k, 0, 1, n) = A.row(act[k]);
      Kmat.block(0, n + k, n, 1) = A.row(act[k]).transpose();
      Kmat(n + k, n + k) = -s.polish_delta;
    }
    Eigen::VectorXd rhs(n + ma);
    rhs.head(n) = -q;
    for (int k = 0; k < ma; ++k) rhs[n + k] = act_rhs[k];

    Eigen::LDLT<Eigen::MatrixXd> ldlt(Kmat);
    if (ldlt.info() != Eigen::Success) return;
    Eigen::VectorXd sol = ldlt.solve(rhs);
    // Refine against the unregularized KKT operator.
    for (int pass = 0; pass < 3; ++pass) {
      Eigen::VectorXd resid = rhs;
      resid.head(n) -= P * sol.head(n);
      for (int k = 0; k < ma; ++k) {
        resid.head(n) -= A.row(act[k]).transpose() * sol[n + k];
        resid[n + k] -= A.row(act[k]).dot(sol.head(n));
      }
      sol += ldlt.solve(resid);
    }

    const Eigen::VectorXd x_pol = sol.head(n);
    const Eigen::VectorXd Ax = A * x_pol;
    const double viol = std::max(std::max((lo - Ax).maxCoeff(), (Ax - hi).maxCoeff()), 0.0);
    Eigen::VectorXd y_pol = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < ma; ++k) y_pol[act[k]] = sol[n + k];
    const double dres = (P * x_pol + q + A.transpose() * y_pol).lpNorm<Eigen::Infinity>();
    if (viol <= 1e-9 && dres <= std::max(r.dual_res, 1e-9)) {
      r.x = x_pol;
      r.y = y_pol;
      r.prim_res = viol;
      r.dual_res = dres;
      r.polished = true;
    }
  }
};

}  // namespace pushmpc
