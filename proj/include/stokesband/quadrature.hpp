#pragma once

#include <vector>

#include "stokesband/mesh.hpp"

namespace stokesband {

/// Quadrature rule on the reference triangle {x >= 0, y >= 0, x + y <= 1}.
/// Weights are positive and sum to the reference area 1/2.
struct QuadratureRule {
    int degree = 0; // exact for all polynomials of total degree <= degree
    std::vector<Vec2> points;
    std::vector<double> weights;

    size_t size() const { return points.size(); }
};

/// Rule exact for total degree <= degree, 1 <= degree <= 6.
QuadratureRule quadrature_rule(int degree);

} // namespace stokesband
