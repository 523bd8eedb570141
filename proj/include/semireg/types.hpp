#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace semireg {

inline constexpr int kMaxDim = 3;

/// Small fixed-capacity vectors and matrices; N ≤ 3 keeps them on the stack.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Interval [lo, hi] (or (lo, hi) depending on use); hi may be +inf.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
    bool contains_open(double v) const { return v > lo && v < hi; }
    bool contains_closed(double v) const { return v >= lo && v <= hi; }
    bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace semireg
