#include <doctest.h>

#include <cmath>

#include "smflow/data_space.hpp"

using namespace smflow;

TEST_CASE("weights are normalized") {
  const auto d = make_discrete_distribution(std::vector<double>{-1.0, 1.0}, {1.0, 1.0});
  CHECK(d.weight(0) == 0.5);
  CHECK(d.weight(1) == 0.5);
  CHECK(d.size() == 2);
  CHECK(d.atom_dimension() == 1);
}

TEST_CASE("mean of atoms {0, 2}") {
  const auto d = make_discrete_distribution(std::vector<double>{0.0, 2.0}, {0.5, 0.5});
  CHECK(d.mean()[0] == doctest::Approx(1.0));
  CHECK(d.total_variance() == doctest::Approx(1.0));
}

TEST_CASE("invalid distributions are rejected") {
  CHECK_THROWS_AS(make_discrete_distribution(std::vector<double>{}, {}), PreconditionError);
  CHECK_THROWS_AS(make_discrete_distribution(std::vector<double>{1.0}, {1.0, 1.0}), PreconditionError);
  CHECK_THROWS_AS(make_discrete_distribution(std::vector<double>{1.0, 2.0}, {1.0, 0.0}), PreconditionError);
  CHECK_THROWS_AS(make_discrete_distribution(std::vector<double>{1.0, 2.0}, {1.0, -1.0}), PreconditionError);
  std::vector<Vector> mixed{Vector::Zero(1), Vector::Zero(2)};
  CHECK_THROWS_AS(make_discrete_distribution(mixed, {1.0, 1.0}), PreconditionError);
}

TEST_CASE("single atom always samples index 0") {
  const auto d = make_discrete_distribution(std::vector<double>{3.5}, {1.0});
  RandomStream rng(1, 0);
  for (int i = 0; i < 100; ++i) CHECK(sample_datum(d, rng) == 0);
}

TEST_CASE("sampling frequencies follow the weights") {
  const auto d = make_discrete_distribution(std::vector<double>{-1.0, 1.0}, {1.0, 1.0});
  RandomStream rng(11, 0);
  const int n = 1000000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) zeros += sample_datum(d, rng) == 0;
  CHECK(std::abs(zeros / static_cast<double>(n) - 0.5) < 3.0 * std::sqrt(0.25 / n));

  const auto skewed = make_discrete_distribution(std::vector<double>{0.0, 1.0, 2.0}, {0.2, 0.3, 0.5});
  RandomStream rng2(12, 0);
  std::vector<int> counts(3, 0);
  const int m = 200000;
  for (int i = 0; i < m; ++i) ++counts[sample_datum(skewed, rng2)];
  for (int k = 0; k < 3; ++k) {
    const double p = skewed.weight(k);
    CHECK(std::abs(counts[k] / static_cast<double>(m) - p) < 5.0 * std::sqrt(p * (1 - p) / m));
  }
}

TEST_CASE("fixed seed gives identical index sequences") {
  const auto d = make_discrete_distribution(std::vector<double>{0.0, 1.0, 2.0}, {1.0, 2.0, 3.0});
  RandomStream a(9, 4), b(9, 4);
  for (int i = 0; i < 500; ++i) CHECK(sample_datum(d, a) == sample_datum(d, b));
}

TEST_CASE("increments reject non-positive dt") {
  const auto d = make_discrete_distribution(std::vector<double>{-1.0, 1.0}, {1.0, 1.0});
  RandomStream rng(1, 0);
  CHECK_THROWS_AS(draw_cylindrical_increment(d, 0.0, rng), PreconditionError);
  CHECK_THROWS_AS(draw_cylindrical_increment(d, -1.0, rng), PreconditionError);
  const auto inc = draw_cylindrical_increment(d, 0.01, rng);
  CHECK(inc.per_atom.size() == 2);
  CHECK(inc.dt == 0.01);
}

TEST_CASE("stochastic integral covariance matches dt E[g g^T]") {
  const auto d = make_discrete_distribution(std::vector<double>{-1.0, 1.0}, {1.0, 1.0});
  const double dt = 0.02;
  const int n = 100000;

  SUBCASE("constant integrand") {
    RandomStream rng(21, 0);
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto inc = draw_cylindrical_increment(d, dt, rng);
      const double v = integrate_cylindrical(d, inc, [](std::size_t) { return Vector::Constant(1, 2.0); })[0];
      sum_sq += v * v;
    }
    const double expected = 4.0 * dt;
    CHECK(std::abs(sum_sq / n - expected) < 5.0 * expected * std::sqrt(2.0 / n));
  }

  SUBCASE("g(theta) = -theta has unit variance per unit time") {
    RandomStream rng(22, 0);
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto inc = draw_cylindrical_increment(d, dt, rng);
      const double v = integrate_cylindrical(d, inc, [&](std::size_t k) { return Vector(-d.atom(k)); })[0];
      sum_sq += v * v;
    }
    CHECK(std::abs(sum_sq / n / dt - 1.0) < 5.0 * std::sqrt(2.0 / n));
  }

  SUBCASE("vector integrand on three weighted atoms") {
    const auto d3 = make_discrete_distribution(std::vector<double>{0.0, 1.0, 3.0}, {0.5, 0.25, 0.25});
    auto g = [&](std::size_t k) {
      Vector v(2);
      v << std::sin(d3.atom(k)[0]), 1.0 + d3.atom(k)[0];
      return v;
    };
    Matrix expected = Matrix::Zero(2, 2);
    for (std::size_t k = 0; k < 3; ++k) expected += d3.weight(k) * g(k) * g(k).transpose();
    expected *= dt;
    RandomStream rng(23, 0);
    Matrix sum = Matrix::Zero(2, 2), sum_sq = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      const auto inc = draw_cylindrical_increment(d3, dt, rng);
      const Vector v = integrate_cylindrical(d3, inc, g);
      const Matrix p = v * v.transpose();
      sum += p;
      sum_sq += p.cwiseProduct(p);
    }
    const Matrix mean = sum / n;
    const Matrix se = ((sum_sq / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) CHECK(std::abs(mean(a, b) - expected(a, b)) < 5.0 * se(a, b));
    }
  }
}

TEST_CASE("identical stream addresses give bit-identical increments") {
  const auto d = make_discrete_distribution(std::vector<double>{-1.0, 0.5, 1.0}, {1.0, 1.0, 2.0});
  RandomStream a(77, 3, StreamTag::kNoise), b(77, 3, StreamTag::kNoise);
  for (int i = 0; i < 50; ++i) CHECK(draw_cylindrical_increment(d, 0.1, a).per_atom ==
                                     draw_cylindrical_increment(d, 0.1, b).per_atom);
}
