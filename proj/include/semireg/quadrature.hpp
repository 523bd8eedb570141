#pragma once

#include "semireg/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace semireg {

namespace detail {

template <class F>
double gk_recurse(const F& f, double a, double b, double abs_tol, int depth) {
    double err = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
    if (!std::isfinite(value)) {
        throw Error(ErrorCode::integration_failure, "quadrature",
                    "non-finite integrand sample on [" + std::to_string(a) + ", " +
                        std::to_string(b) + "]");
    }
    if (err <= abs_tol || depth <= 0) return value;
    const double mid = 0.5 * (a + b);
    return gk_recurse(f, a, mid, 0.5 * abs_tol, depth - 1) +
           gk_recurse(f, mid, b, 0.5 * abs_tol, depth - 1);
}

}  // namespace detail

/// Adaptive Gauss–Kronrod (7/15) quadrature of f over [a, b] to an absolute
/// error estimate of abs_tol, splitting first at any interior breakpoints.
template <class F>
double integrate_adaptive(const F& f, double a, double b, double abs_tol = 1e-12,
                          std::span<const double> breakpoints = {}) {
    if (a == b) return 0.0;
    if (a > b) return -integrate_adaptive(f, b, a, abs_tol, breakpoints);
    std::vector<double> cuts{a};
    for (double c : breakpoints) {
        if (c > a && c < b) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(b);
    double total = 0.0;
    const double per_piece = abs_tol / static_cast<double>(cuts.size() - 1);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += detail::gk_recurse(f, cuts[i], cuts[i + 1], per_piece, 30);
    }
    return total;
}

}  // namespace semireg
