#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "pushmpc/qp.hpp"

using namespace pushmpc;

namespace {

// Brute-force reference: enumerate active sets of a small QP and return the
// optimal feasible point.
Eigen::VectorXd brute_force_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                               const Eigen::MatrixXd& A, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(A.rows());
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;

  // Each row can be inactive (0), at lo (1), or at hi (2).
  std::vector<int> state(m, 0);
  const long total = static_cast<long>(std::pow(3.0, m));
  for (long code = 0; code < total; ++code) {
    long c = code;
    bool skip = false;
    int na = 0;
    for (int i = 0; i < m; ++i) {
      state[i] = c % 3;
      c /= 3;
      if (state[i] != 0) ++na;
      if (state[i] == 2 && hi[i] > 1e19) skip = true;
      if (state[i] == 1 && lo[i] < -1e19) skip = true;
    }
    if (skip || na > n) continue;

    Eigen::MatrixXd K(n + na, n + na);
    K.setZero();
    K.topLeftCorner(n, n) = P;
    Eigen::VectorXd rhs(n + na);
    rhs.head(n) = -q;
    int r = 0;
    for (int i = 0; i < m; ++i) {
      if (state[i] == 0) continue;
      K.block(n + r, 0, 1, n) = A.row(i);
      K.block(0, n + r, n, 1) = A.row(i).transpose();
      rhs[n + r] = state[i] == 1 ? lo[i] : hi[i];
      ++r;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);

    const Eigen::VectorXd Ax = A * x;
    bool feasible = true;
    for (int i = 0; i < m; ++i) {
      if (Ax[i] < lo[i] - 1e-8 || Ax[i] > hi[i] + 1e-8) feasible = false;
    }
    if (!feasible) continue;
    const double obj = 0.5 * x.dot(P * x) + q.dot(x);
    if (obj < best - 1e-12) {
      best = obj;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST_CASE("equality-constrained QP matches the KKT solution") {
  Eigen::MatrixXd P(3, 3);
  P << 4, 1, 0, 1, 3, 0, 0, 0, 2;
  Eigen::VectorXd q(3);
  q << -1, 2, 0.5;
  Eigen::MatrixXd A(1, 3);
  A << 1, 1, 1;
  Eigen::VectorXd b(1);
  b << 1.0;

  const QpResult r = QpSolver().solve(P, q, A, b, b);
  REQUIRE(r.status == QpStatus::Solved);

  Eigen::MatrixXd K(4, 4);
  K.setZero();
  K.topLeftCorner(3, 3) = P;
  K.block(3, 0, 1, 3) = A;
  K.block(0, 3, 3, 1) = A.transpose();
  Eigen::VectorXd rhs(4);
  rhs << -q, b;
  const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
  REQUIRE((r.x - sol.head(3)).lpNorm<Eigen::Infinity>() < 1e-8);
  REQUIRE((A * r.x - b).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("box QP clamps the unconstrained optimum") {
  const int n = 4;
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd q(n);
  q << -2.0, 0.3, -0.1, 5.0;  // optimum at -q
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, 1.0);

  const QpResult r = QpSolver().solve(P, q, A, lo, hi);
  REQUIRE(r.status == QpStatus::Solved);
  Eigen::VectorXd expect = (-q).cwiseMax(lo).cwiseMin(hi);
  REQUIRE((r.x - expect).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("random small QPs match brute-force active-set enumeration") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + (trial % 2);
    const int m = 3;
    Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return u(rng); });
    Eigen::MatrixXd P = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(n, [&]() { return u(rng); });
    Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(m, n, [&]() { return u(rng); });
    Eigen::VectorXd lo(m), hi(m);
    for (int i = 0; i < m; ++i) {
      const double a = u(rng), b = u(rng);
      lo[i] = std::min(a, b) - 0.2;
      hi[i] = std::max(a, b) + 0.2;
    }
    // Make one row an equality now and then.
    if (trial % 5 == 0) hi[0] = lo[0];

    const Eigen::VectorXd ref = brute_force_qp(P, q, A, lo, hi);
    if (ref.size() == 0) continue;  // enumeration found nothing feasible

    const QpResult r = QpSolver().solve(P, q, A, lo, hi);
    REQUIRE(r.status == QpStatus::Solved);
    const double obj_ref = 0.5 * ref.dot(P * ref) + q.dot(ref);
    const double obj = 0.5 * r.x.dot(P * r.x) + q.dot(r.x);
    REQUIRE(obj <= obj_ref + 1e-6);
    REQUIRE((r.x - ref).lpNorm<Eigen::Infinity>() < 1e-5);
  }
}

TEST_CASE("KKT conditions hold at the reported solution") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 8, m = 14;

  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return u(rng); });
    Eigen::MatrixXd P = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(n, [&]() { return u(rng); });
    Eigen::MatrixXd A(m, n);
    A.topRows(n) = Eigen::MatrixXd::Identity(n, n);
    A.bottomRows(m - n) = Eigen::MatrixXd::NullaryExpr(m - n, n, [&]() { return u(rng); });
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(m, -1.5);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(m, 1.5);
    lo[n] = hi[n] = 0.3;  // one equality row

    const QpResult r = QpSolver().solve(P, q, A, lo, hi);
    REQUIRE(r.status == QpStatus::Solved);
    // Stationarity.
    REQUIRE((P * r.x + q + A.transpose() * r.y).lpNorm<Eigen::Infinity>() < 1e-6);
    // Primal feasibility and dual signs.
    const Eigen::VectorXd Ax = A * r.x;
    for (int i = 0; i < m; ++i) {
      REQUIRE(Ax[i] >= lo[i] - 1e-7);
      REQUIRE(Ax[i] <= hi[i] + 1e-7);
      if (hi[i] - lo[i] > 1e-12) {
        if (r.y[i] > 1e-6) REQUIRE(Ax[i] >= hi[i] - 1e-5);
        if (r.y[i] < -1e-6) REQUIRE(Ax[i] <= lo[i] + 1e-5);
      }
    }
  }
}

TEST_CASE("warm start speeds up repeated solves") {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 20, m = 30;
  Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return u(rng); });
  Eigen::MatrixXd P = M * M.transpose() + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(n, [&]() { return u(rng); });
  Eigen::MatrixXd A(m, n);
  A.topRows(n) = Eigen::MatrixXd::Identity(n, n);
  A.bottomRows(m - n) = Eigen::MatrixXd::NullaryExpr(m - n, n, [&]() { return u(rng); });
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(m, -1.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(m, 1.0);

  QpSolver solver;
  const QpResult cold = solver.solve(P, q, A, lo, hi);
  REQUIRE(cold.status == QpStatus::Solved);
  const QpResult warm = solver.solve(P, q, A, lo, hi, &cold.x, &cold.y);
  REQUIRE(warm.status == QpStatus::Solved);
  REQUIRE(warm.iterations <= cold.iterations);
}
