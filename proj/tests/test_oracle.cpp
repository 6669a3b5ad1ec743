#include <doctest.h>

#include <cmath>
#include <random>

#include "dmpc/errors.hpp"
#include "dmpc/relaxation.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace dmpc;

namespace {

Matrix riccati_lq(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, double dtau,
                  int steps, const Vector& x0) {
  const auto lq = oracle::euler_lq(a, b, q, r, dtau);
  return oracle::riccati_solve(lq.a, lq.b, lq.q, lq.r, steps, x0);
}

}  // namespace

TEST_CASE("dense Jacobian shape") {
  const auto def = support::scalar_integrator();
  const auto sys = oracle::dense_kkt_system(def, support::vec({1.0}), Vector::Zero(5));
  CHECK(sys.jacobian.rows() == 5);
  CHECK(sys.jacobian.cols() == def.unknown_dim());
  CHECK(sys.residual.size() == 5);
}

TEST_CASE("riccati fixture: scalar integrator") {
  // Discrete A = 1, B = 0.1, Q = R = 0.1, five steps from x0 = 1; pinned after an
  // independent evaluation of the recursion.
  const Matrix u = oracle::riccati_solve(support::mat({{1.0}}), support::mat({{0.1}}),
                                         support::mat({{0.1}}), support::mat({{0.1}}), 5,
                                         support::vec({1.0}));
  const double pinned[5] = {-0.3722718932129174, -0.2759946121450466, -0.1824772771986263,
                            -0.09078471502419219, 0.0};
  for (int k = 0; k < 5; ++k) CHECK(u(0, k) == doctest::Approx(pinned[k]).epsilon(1e-12));
}

TEST_CASE("riccati trivial cases and errors") {
  const Matrix a = support::mat({{0.0, 1.0}, {0.0, 0.0}}), b = support::mat({{0.0}, {1.0}});
  const Matrix r = support::mat({{1.0}});
  CHECK(riccati_lq(a, b, Matrix::Zero(2, 2), r, 0.1, 8, support::vec({1.0, -1.0})).isZero());
  CHECK(riccati_lq(a, b, Matrix::Identity(2, 2), r, 0.1, 8, Vector::Zero(2)).isZero());
  CHECK_THROWS_AS(oracle::riccati_solve(a, b, Matrix::Identity(2, 2), support::mat({{-1.0}}), 3,
                                        Vector::Zero(2)),
                  oracle::OracleFailure);
}

TEST_CASE("dense Newton and Riccati agree on random LQ problems") {
  std::mt19937_64 rng(42);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = 0.5 * support::random_matrix(rng, 2, 2);
    const Matrix b = support::random_matrix(rng, 2, 1);
    const Matrix g = support::random_matrix(rng, 2, 2);
    const Matrix q = g * g.transpose() + 0.1 * Matrix::Identity(2, 2);
    const Matrix r = support::mat({{0.5 + trial * 0.1}});
    const Vector x0 = support::random_matrix(rng, 2, 1);
    const auto def = support::lq_problem(a, b, q, r, 1.0, 10);
    const auto rep = oracle::dense_newton_solve(def, x0, HorizonSolution(1, 0, 10));
    const Matrix ref = riccati_lq(a, b, q, r, 0.1, 10, x0);
    worst = std::max(worst, (rep.solution.controls - ref).cwiseAbs().maxCoeff());
    CHECK(rep.residual_norm <= 1e-10);
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("dense Newton preconditions") {
  OcpDefinition empty;
  empty.grid = HorizonGrid(1.0, 1);
  CHECK_THROWS_AS(oracle::dense_newton_solve(empty, Vector(), HorizonSolution()), oracle::OracleFailure);
  CHECK_THROWS_AS(HorizonGrid(1.0, 0), DomainError);
  const auto def = support::scalar_integrator();
  CHECK_THROWS_AS(oracle::dense_newton_solve(def, support::vec({1.0}), HorizonSolution(1, 0, 4)),
                  oracle::OracleFailure);
  const auto big = support::scalar_integrator(401, 0.01);
  CHECK_THROWS_AS(oracle::dense_newton_solve(big, support::vec({1.0}), HorizonSolution(1, 0, 401)),
                  oracle::OracleFailure);
}

TEST_CASE("dense Newton keeps slacks positive and satisfies the multiplier identity") {
  auto def = support::scalar_integrator(3, 0.1);
  def.barrier_weight = 0.01;
  def.constraints.push_back(support::floor_constraint(1, 0.9));
  const Vector x0 = support::vec({1.0});
  HorizonSolution guess(1, 1, 3);
  for (Index k = 0; k < 3; ++k)
    consistent_slack_multiplier(0.1, def.barrier_weight, 1e-6, guess.slacks(0, k),
                                guess.multipliers(0, k));
  const auto rep = oracle::dense_newton_solve(def, x0, guess);
  CHECK(rep.solution.min_slack() > 0.0);
  for (Index k = 0; k < 3; ++k) {
    const double z2 = rep.solution.slacks(0, k) * rep.solution.slacks(0, k);
    CHECK(rep.solution.multipliers(0, k) == doctest::Approx(def.barrier_weight / (z2 * z2)));
  }
}

TEST_CASE("brute force: single step LQ lands within a grid cell of Riccati") {
  for (int steps : {1, 2}) {
    CAPTURE(steps);
    const auto def = support::scalar_integrator(steps, 0.1);
    const Vector x0 = support::vec({2.0});
    const double lo = -3.0, hi = 3.0;
    const int res = 601;
    const auto best = oracle::brute_force_tiny(def, x0, res, lo, hi);
    const Matrix ref = riccati_lq(support::mat({{0.0}}), support::mat({{1.0}}), support::mat({{1.0}}),
                                  support::mat({{1.0}}), 0.1, steps, x0);
    const double cell = (hi - lo) / (res - 1);
    for (int k = 0; k < steps; ++k) CHECK(std::abs(best.controls[k] - ref(0, k)) <= cell);
    CHECK(best.evaluated == static_cast<long>(std::pow(res, steps)));
  }
}

TEST_CASE("brute force: ties go to the lowest index") {
  const auto def = support::lq_problem(support::mat({{0.0}}), support::mat({{1.0}}),
                                       support::mat({{1.0}}), support::mat({{0.0}}), 0.2, 2);
  // B = 0 and R = 0: the cost does not depend on the controls at all.
  const auto flat = support::lq_problem(support::mat({{0.0}}), support::mat({{0.0}}),
                                        support::mat({{1.0}}), support::mat({{0.0}}), 0.2, 2);
  const auto best = oracle::brute_force_tiny(flat, support::vec({1.0}), 5, -1.0, 1.0);
  CHECK(best.controls == std::vector<double>{-1.0, -1.0});

  // Here u_0 moves x_1 but the last control reaches no penalized state.
  const auto partial = oracle::brute_force_tiny(def, support::vec({1.0}), 5, -1.0, 1.0);
  CHECK(partial.controls[1] == -1.0);
}

TEST_CASE("brute force: constrained optimum within the grid bound of the Newton optimum") {
  auto def = support::scalar_integrator(3, 0.1);
  def.barrier_weight = 0.01;
  def.constraints.push_back(support::floor_constraint(1, 0.9));
  const Vector x0 = support::vec({1.0});
  HorizonSolution guess(1, 1, 3);
  for (Index k = 0; k < 3; ++k)
    consistent_slack_multiplier(0.1, def.barrier_weight, 1e-6, guess.slacks(0, k),
                                guess.multipliers(0, k));
  const auto rep = oracle::dense_newton_solve(def, x0, guess);
  std::vector<double> u_star(3);
  for (int k = 0; k < 3; ++k) u_star[k] = rep.solution.controls(0, k);
  const double j_star = oracle::relaxed_cost(def, x0, u_star);

  const double lo = -2.0, hi = 1.0;
  const int res = 121;
  const double cell = (hi - lo) / (res - 1);
  const auto best = oracle::brute_force_tiny(def, x0, res, lo, hi);

  // Curvature of the relaxed cost around the optimum by central differences.
  double curvature = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      auto at = [&](double di, double dj) {
        auto u = u_star;
        u[i] += di;
        u[j] += dj;
        return oracle::relaxed_cost(def, x0, u);
      };
      const double h = cell;
      const double hij = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
      curvature += std::abs(hij);
    }
  const double radius2 = 3.0 * (cell / 2) * (cell / 2);
  const double bound = curvature * radius2;  // twice the quadratic model, for slack

  CHECK(best.cost >= j_star - 1e-12);
  CHECK(best.cost <= j_star + bound);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(best.controls[k] - u_star[k]) <= 2 * cell);
}

TEST_CASE("brute force: preconditions and infeasibility") {
  const auto def = support::scalar_integrator(4, 0.1);
  CHECK_THROWS_AS(oracle::brute_force_tiny(def, support::vec({1.0}), 3, -1.0, 1.0),
                  oracle::OracleFailure);
  const auto small = support::scalar_integrator(3, 0.1);
  CHECK_THROWS_AS(oracle::brute_force_tiny(small, support::vec({1.0}), 1, -1.0, 1.0),
                  oracle::OracleFailure);
  CHECK_THROWS_AS(oracle::brute_force_tiny(small, support::vec({1.0}), 1000, -1.0, 1.0),
                  oracle::OracleFailure);

  auto blocked = support::scalar_integrator(2, 0.1);
  blocked.constraints.push_back(support::floor_constraint(1, 5.0));
  CHECK_THROWS_AS(oracle::brute_force_tiny(blocked, support::vec({1.0}), 11, -1.0, 1.0),
                  oracle::OracleFailure);
  CHECK(std::isinf(oracle::relaxed_cost(blocked, support::vec({1.0}), {0.0, 0.0})));
}
