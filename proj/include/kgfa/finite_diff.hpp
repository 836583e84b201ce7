#ifndef KGFA_FINITE_DIFF_HPP
#define KGFA_FINITE_DIFF_HPP

#include <algorithm>
#include <cmath>

#include "kgfa/types.hpp"

namespace kgfa {

/// Central finite-difference gradient of a scalar function of a vector.
template <typename F>
Vector finite_difference_gradient(F&& f, const Vector& x, double step = 1e-5) {
    Vector grad(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + step;
        const double plus = f(probe);
        probe[i] = original - step;
        const double minus = f(probe);
        probe[i] = original;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    return grad;
}

/// |a - b| / max(1, |a|, |b|), the usual gradient-check error measure.
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_relative_error(const Vector& a, const Vector& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        worst = std::max(worst, relative_error(a[i], b[i]));
    return worst;
}

}  // namespace kgfa

#endif  // KGFA_FINITE_DIFF_HPP
