#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stokesband {

struct invalid_parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct out_of_domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

struct empty_selection_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct region_covers_domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct assembly_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct singular_matrix_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct over_constrained_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct degenerate_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when an iterative eigensolve hits its iteration cap. Carries the
// last iterate so callers can inspect how far the iteration got.
struct convergence_error : std::runtime_error {
    convergence_error(const std::string& msg, double value, std::vector<double> iterate)
        : std::runtime_error(msg), last_value(value), last_iterate(std::move(iterate)) {}
    double last_value;
    std::vector<double> last_iterate;
};

} // namespace stokesband
