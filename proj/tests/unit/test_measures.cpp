#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smflow/functionals.hpp"
#include "smflow/measures.hpp"
#include "smflow/rng.hpp"

using namespace smflow;

namespace {

EmpiricalMeasure scalars(std::initializer_list<double> xs) {
  Points p;
  for (double x : xs) p.push_back(Vector::Constant(1, x));
  return EmpiricalMeasure(p);
}

EmpiricalMeasure random_measure(RandomStream& rng, std::size_t n, int d, double spread = 1.0) {
  Points p;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(d);
    for (auto& v : x) v = spread * rng.normal();
    p.push_back(x);
  }
  return EmpiricalMeasure(p);
}

double brute_force_w2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[perm[i]]).squaredNorm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

// A random cylindrical functional built from the catalogue.
CylindricalFunctional random_functional(RandomStream& rng, int d) {
  const int arity = 1 + static_cast<int>(rng.uniform() * 3);
  std::vector<InnerFunction> inner;
  for (int i = 0; i < arity; ++i) {
    Vector a(d);
    for (auto& v : a) v = rng.normal();
    const int kind = static_cast<int>(rng.uniform() * 4);
    if (kind == 0) inner.push_back(functionals::sine(a, rng.normal()));
    if (kind == 1) inner.push_back(functionals::cosine(a, rng.normal()));
    if (kind == 2) inner.push_back(functionals::gaussian_bump(a, 0.5 + rng.uniform()));
    if (kind == 3) inner.push_back(functionals::power(d, static_cast<int>(rng.uniform() * d), 2));
  }
  Vector c(arity);
  for (auto& v : c) v = rng.normal();
  const int outer = static_cast<int>(rng.uniform() * 3);
  if (outer == 0) return CylindricalFunctional(inner, functionals::square_norm(arity));
  if (outer == 1) return CylindricalFunctional(inner, functionals::product(arity));
  return CylindricalFunctional(inner, functionals::exponential(0.3 * c));
}

EmpiricalMeasure shifted(const EmpiricalMeasure& m, const std::vector<Vector>& dirs, double eps) {
  Points p;
  for (std::size_t i = 0; i < m.size(); ++i) p.push_back(m[i] + eps * dirs[i]);
  return EmpiricalMeasure(p);
}

}  // namespace

TEST_CASE("empirical measures validate their atoms") {
  CHECK_THROWS_AS(EmpiricalMeasure(Points{}), PreconditionError);
  CHECK_THROWS_AS(EmpiricalMeasure(Points{Vector::Zero(1), Vector::Zero(2)}), PreconditionError);
  CHECK_THROWS_AS(EmpiricalMeasure(Points{Vector::Constant(1, std::nan(""))}), PreconditionError);
  CHECK(scalars({1, 2, 3, 4}).weight() == 0.25);
}

TEST_CASE("W2 examples") {
  const auto a = scalars({0.0, 1.0});
  CHECK(wasserstein2(a, a) == 0.0);
  CHECK(wasserstein2(scalars({2.0}), scalars({-1.5})) == doctest::Approx(3.5));
  CHECK(wasserstein2(a, scalars({0.5, 2.0})) == doctest::Approx(0.7905694150420949).epsilon(1e-14));
  Points p{(Vector(2) << 0, 0).finished()}, q{(Vector(2) << 3, 4).finished()};
  CHECK(wasserstein2(EmpiricalMeasure(p), EmpiricalMeasure(q)) == doctest::Approx(5.0));
}

TEST_CASE("W2 preconditions") {
  CHECK_THROWS_AS(wasserstein2(scalars({0.0}), scalars({0.0, 1.0})), PreconditionError);
  RandomStream rng(41, 0);
  const auto big = random_measure(rng, 513, 1);
  CHECK_THROWS_AS(wasserstein2(big, big), PreconditionError);
  Points p{Vector::Zero(2)};
  CHECK_THROWS_AS(wasserstein2(scalars({0.0}), EmpiricalMeasure(p)), PreconditionError);
}

TEST_CASE("matcher equals brute force over all pairings") {
  RandomStream rng(42, 0);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int d : {1, 2, 3}) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_measure(rng, n, d);
        const auto b = random_measure(rng, n, d);
        CHECK(wasserstein2_squared(a, b) == brute_force_w2_squared(a, b));
      }
    }
  }
}

TEST_CASE("assignment on a known cost matrix") {
  Matrix cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto assignment = min_cost_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < 3; ++i) total += cost(i, assignment[i]);
  CHECK(total == 5.0);
  CHECK(min_cost_assignment(Matrix(0, 0)).empty());
}

TEST_CASE("W2 is a metric on probe sets") {
  RandomStream rng(43, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 3;
    const auto a = random_measure(rng, 12, d);
    const auto b = random_measure(rng, 12, d);
    const auto c = random_measure(rng, 12, d);
    CHECK(wasserstein2(a, b) == doctest::Approx(wasserstein2(b, a)).epsilon(1e-12));
    CHECK(wasserstein2(a, c) <= wasserstein2(a, b) + wasserstein2(b, c) + 1e-12);
    CHECK(wasserstein2(a, a) == 0.0);
    CHECK(wasserstein2(a, b) > 0.0);
  }
}

TEST_CASE("matcher scales to the size limit") {
  RandomStream rng(44, 0);
  const auto a = random_measure(rng, 512, 2);
  const auto b = random_measure(rng, 512, 2);
  const double w = wasserstein2(a, b);
  CHECK(w > 0.0);
  CHECK(w < 1.0);
}

TEST_CASE("push forward") {
  const auto m = scalars({1.0, 2.0});
  const auto id = push_forward(m, [](const Vector& x) { return x; });
  CHECK(wasserstein2(m, id) == 0.0);
  const auto doubled = push_forward(m, [](const Vector& x) { return Vector(2.0 * x); });
  CHECK(doubled[0][0] == 2.0);
  CHECK(doubled[1][0] == 4.0);
  RandomStream rng(45, 0);
  const auto r = random_measure(rng, 20, 3);
  Vector c(3);
  c << 0.3, -1.2, 0.4;
  const auto moved = push_forward(r, [&](const Vector& x) { return Vector(x + c); });
  CHECK(wasserstein2(r, moved) == doctest::Approx(c.norm()).epsilon(1e-12));
  CHECK_THROWS_AS(push_forward(m, [](const Vector& x) { return Vector(x / 0.0); }), NumericalError);
}

TEST_CASE("moments") {
  CHECK(moment(scalars({0.0}), 3.0) == 0.0);
  CHECK(moment(scalars({-1.0, 1.0}), 2.0) == 1.0);
  CHECK(moment(scalars({3.0}), 4.0) == 81.0);
  CHECK_THROWS_AS(moment(scalars({1.0}), -1.0), PreconditionError);
}

TEST_CASE("functional evaluation examples") {
  using namespace functionals;
  const auto mean = mean_coordinate(1);
  CHECK(eval_functional(mean, scalars({1.0, 2.0, 6.0})) == doctest::Approx(3.0));
  const CylindricalFunctional sq({coordinate(1, 0)}, square_norm(1));
  CHECK(eval_functional(sq, scalars({-1.0, 1.0})) == 0.0);
  const CylindricalFunctional second({power(1, 0, 2)}, linear(Vector::Ones(1)));
  CHECK(eval_functional(second, scalars({1.0, 2.0})) == 2.5);
}

TEST_CASE("Lions derivative examples") {
  using namespace functionals;
  const auto mean = mean_coordinate(1);
  CHECK(lions_derivative(mean, scalars({0.3, 7.0}), Vector::Constant(1, -2.0))[0] == 1.0);
  const CylindricalFunctional sq({coordinate(1, 0)}, square_norm(1));
  CHECK(lions_derivative(sq, scalars({-1.0, 1.0}), Vector::Constant(1, 0.5))[0] == 0.0);
  InnerFunction no_grad{[](const Vector& x) { return x[0]; }, nullptr, nullptr};
  const CylindricalFunctional missing({no_grad}, linear(Vector::Ones(1)));
  CHECK_THROWS_AS(lions_derivative(missing, scalars({1.0}), Vector::Zero(1)), PreconditionError);
}

TEST_CASE("Lions derivatives match finite differences for random functionals") {
  RandomStream rng(46, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const auto phi = random_functional(rng, d);
    const auto mu = random_measure(rng, 5, d);
    std::vector<Vector> dirs;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      Vector v(d);
      for (auto& x : v) x = rng.normal();
      dirs.push_back(v);
    }
    const double eps = 1e-5;
    const double fd = (eval_functional(phi, shifted(mu, dirs, eps)) - eval_functional(phi, shifted(mu, dirs, -eps))) /
                      (2.0 * eps);
    double analytic = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) analytic += mu.weight() * lions_derivative(phi, mu, mu[i]).dot(dirs[i]);
    CHECK(std::abs(fd - analytic) < 1e-5);
  }
}

TEST_CASE("second Lions derivatives match differences of the first") {
  RandomStream rng(47, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3;
    const auto phi = random_functional(rng, d);
    const auto mu = random_measure(rng, 4, d);
    const auto all = lions_derivatives_on_atoms(phi, mu);
    CHECK(all.value == doctest::Approx(eval_functional(phi, mu)));
    const double eps = 1e-5;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      CHECK((all.first[i] - lions_derivative(phi, mu, mu[i])).norm() < 1e-12);
      CHECK((all.gradient[i] - lions_gradient(phi, mu, mu[i])).norm() < 1e-12);
      for (std::size_t j = 0; j < mu.size(); ++j) {
        CHECK((all.second[i * mu.size() + j] - lions_second_derivative(phi, mu, mu[i], mu[j])).norm() < 1e-12);
        for (int b = 0; b < d; ++b) {
          std::vector<Vector> dirs(mu.size(), Vector::Zero(d));
          dirs[j] = Vector::Unit(d, b);
          const auto plus = shifted(mu, dirs, eps);
          const auto minus = shifted(mu, dirs, -eps);
          const Vector fd = (lions_derivative(phi, plus, plus[i]) - lions_derivative(phi, minus, minus[i])) / (2.0 * eps);
          Vector analytic = mu.weight() * all.second[i * mu.size() + j].col(b);
          if (i == j) analytic += all.gradient[i].col(b);
          CHECK((fd - analytic).norm() < 1e-5 * std::max(1.0, analytic.norm()));
        }
      }
    }
  }
}
