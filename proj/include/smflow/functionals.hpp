#pragma once

#include <string>
#include <vector>

#include "smflow/measures.hpp"

namespace smflow::functionals {

// x -> x_i
InnerFunction coordinate(int dimension, int index);
// x -> x_i^p
InnerFunction power(int dimension, int index, int p);
// x -> sin(a . x + b)
InnerFunction sine(Vector frequency, double phase);
// x -> cos(a . x + b)
InnerFunction cosine(Vector frequency, double phase);
// x -> exp(-|x - c|^2 / (2 s^2))
InnerFunction gaussian_bump(Vector center, double width);

// u -> c0 + c . u
OuterFunction linear(Vector coefficients, double offset = 0.0);
// u -> |u|^2
OuterFunction square_norm(int arity);
// u -> prod_i u_i
OuterFunction product(int arity);
// u -> exp(c . u)
OuterFunction exponential(Vector coefficients);
// u -> c
OuterFunction constant(int arity, double value);

// Phi(mu) = <x_i, mu>, the mean of coordinate i.
CylindricalFunctional mean_coordinate(int dimension, int index = 0);

}  // namespace smflow::functionals
