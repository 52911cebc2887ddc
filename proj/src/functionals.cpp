#include "smflow/functionals.hpp"

#include <cmath>

namespace smflow::functionals {

InnerFunction coordinate(int dimension, int index) {
  require(index >= 0 && index < dimension, "coordinate functional: index out of range");
  return {
      [index](const Vector& x) { return x[index]; },
      [dimension, index](const Vector&) { return Vector(Vector::Unit(dimension, index)); },
      [dimension](const Vector&) { return Matrix(Matrix::Zero(dimension, dimension)); },
  };
}

InnerFunction power(int dimension, int index, int p) {
  require(index >= 0 && index < dimension, "power functional: index out of range");
  require(p >= 0, "power functional: exponent must be nonnegative");
  return {
      [index, p](const Vector& x) { return std::pow(x[index], p); },
      [dimension, index, p](const Vector& x) {
        Vector g = Vector::Zero(dimension);
        if (p >= 1) g[index] = p * std::pow(x[index], p - 1);
        return g;
      },
      [dimension, index, p](const Vector& x) {
        Matrix h = Matrix::Zero(dimension, dimension);
        if (p >= 2) h(index, index) = p * (p - 1) * std::pow(x[index], p - 2);
        return h;
      },
  };
}

InnerFunction sine(Vector frequency, double phase) {
  return {
      [frequency, phase](const Vector& x) { return std::sin(frequency.dot(x) + phase); },
      [frequency, phase](const Vector& x) { return Vector(std::cos(frequency.dot(x) + phase) * frequency); },
      [frequency, phase](const Vector& x) {
        return Matrix(-std::sin(frequency.dot(x) + phase) * frequency * frequency.transpose());
      },
  };
}

InnerFunction cosine(Vector frequency, double phase) {
  return {
      [frequency, phase](const Vector& x) { return std::cos(frequency.dot(x) + phase); },
      [frequency, phase](const Vector& x) { return Vector(-std::sin(frequency.dot(x) + phase) * frequency); },
      [frequency, phase](const Vector& x) {
        return Matrix(-std::cos(frequency.dot(x) + phase) * frequency * frequency.transpose());
      },
  };
}

InnerFunction gaussian_bump(Vector center, double width) {
  require(width > 0.0, "gaussian bump: width must be positive");
  const double inv = 1.0 / (width * width);
  return {
      [center, inv](const Vector& x) { return std::exp(-0.5 * inv * (x - center).squaredNorm()); },
      [center, inv](const Vector& x) {
        const Vector r = x - center;
        return Vector(-inv * std::exp(-0.5 * inv * r.squaredNorm()) * r);
      },
      [center, inv](const Vector& x) {
        const Vector r = x - center;
        const double g = std::exp(-0.5 * inv * r.squaredNorm());
        Matrix h = inv * inv * g * r * r.transpose();
        h.diagonal().array() -= inv * g;
        return h;
      },
  };
}

OuterFunction linear(Vector coefficients, double offset) {
  const auto n = coefficients.size();
  return {
      [coefficients, offset](const Vector& u) { return offset + coefficients.dot(u); },
      [coefficients](const Vector&) { return coefficients; },
      [n](const Vector&) { return Matrix(Matrix::Zero(n, n)); },
  };
}

OuterFunction square_norm(int arity) {
  return {
      [](const Vector& u) { return u.squaredNorm(); },
      [](const Vector& u) { return Vector(2.0 * u); },
      [arity](const Vector&) { return Matrix(2.0 * Matrix::Identity(arity, arity)); },
  };
}

OuterFunction product(int arity) {
  return {
      [](const Vector& u) { return u.prod(); },
      [arity](const Vector& u) {
        Vector g(arity);
        for (int i = 0; i < arity; ++i) {
          double p = 1.0;
          for (int j = 0; j < arity; ++j) {
            if (j != i) p *= u[j];
          }
          g[i] = p;
        }
        return g;
      },
      [arity](const Vector& u) {
        Matrix h = Matrix::Zero(arity, arity);
        for (int i = 0; i < arity; ++i) {
          for (int j = 0; j < arity; ++j) {
            if (i == j) continue;
            double p = 1.0;
            for (int k = 0; k < arity; ++k) {
              if (k != i && k != j) p *= u[k];
            }
            h(i, j) = p;
          }
        }
        return h;
      },
  };
}

OuterFunction exponential(Vector coefficients) {
  return {
      [coefficients](const Vector& u) { return std::exp(coefficients.dot(u)); },
      [coefficients](const Vector& u) { return Vector(std::exp(coefficients.dot(u)) * coefficients); },
      [coefficients](const Vector& u) {
        return Matrix(std::exp(coefficients.dot(u)) * coefficients * coefficients.transpose());
      },
  };
}

OuterFunction constant(int arity, double value) {
  return {
      [value](const Vector&) { return value; },
      [arity](const Vector&) { return Vector(Vector::Zero(arity)); },
      [arity](const Vector&) { return Matrix(Matrix::Zero(arity, arity)); },
  };
}

CylindricalFunctional mean_coordinate(int dimension, int index) {
  return CylindricalFunctional({coordinate(dimension, index)}, linear(Vector::Ones(1)));
}

}  // namespace smflow::functionals
