#include "stokesband/quadrature.hpp"

#include "stokesband/errors.hpp"

namespace stokesband {

namespace {

// Appends the three points with barycentric coordinates (a, a, 1-2a) permuted.
void push3(QuadratureRule& r, double a, double w) {
    double b = 1.0 - 2.0 * a;
    // reference coords (x, y) correspond to barycentric (1-x-y, x, y)
    r.points.push_back({a, a});
    r.points.push_back({b, a});
    r.points.push_back({a, b});
    for (int i = 0; i < 3; ++i) r.weights.push_back(w * 0.5);
}

// Appends the six permutations of barycentric (a, b, 1-a-b).
void push6(QuadratureRule& r, double a, double b, double w) {
    double c = 1.0 - a - b;
    r.points.push_back({b, c});
    r.points.push_back({c, b});
    r.points.push_back({a, c});
    r.points.push_back({c, a});
    r.points.push_back({a, b});
    r.points.push_back({b, a});
    for (int i = 0; i < 6; ++i) r.weights.push_back(w * 0.5);
}

} // namespace

QuadratureRule quadrature_rule(int degree) {
    if (degree < 1 || degree > 6)
        throw invalid_parameter_error("quadrature degree must be in 1..6");

    QuadratureRule r;
    r.degree = degree;
    switch (degree) {
        case 1:
            r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
            r.weights.push_back(0.5);
            break;
        case 2:
            push3(r, 1.0 / 6.0, 1.0 / 3.0);
            break;
        case 3: // Dunavant's degree-3 rule has a negative weight; use degree 4.
        case 4:
            r.degree = 4;
            push3(r, 0.445948490915965, 0.223381589678011);
            push3(r, 0.091576213509771, 0.109951743655322);
            break;
        case 5:
            r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
            r.weights.push_back(0.225 * 0.5);
            push3(r, 0.470142064105115, 0.132394152788506);
            push3(r, 0.101286507323456, 0.125939180544827);
            break;
        case 6:
            push3(r, 0.249286745170910, 0.116786275726379);
            push3(r, 0.063089014491502, 0.050844906370207);
            push6(r, 0.310352451033785, 0.053145049844816, 0.082851075618374);
            break;
    }
    return r;
}

} // namespace stokesband
