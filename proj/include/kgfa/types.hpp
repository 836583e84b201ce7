#ifndef KGFA_TYPES_HPP
#define KGFA_TYPES_HPP

#include <Eigen/Dense>
#include <random>
#include <stdexcept>

namespace kgfa {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Malformed or inconsistent configuration (dims, splits, attribute maps).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unparseable or invalid input file.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values or failed factorization during computation.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Negative-tuple (or synthetic-tuple) sampling could not find a valid draw.
struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kgfa

#endif  // KGFA_TYPES_HPP
