#pragma once

#include <span>
#include <vector>

namespace semireg {

/// Piecewise cubic Hermite interpolant on strictly increasing knots with the
/// Fritsch–Carlson limiter, so monotone data give a monotone C¹ curve.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    /// Slopes estimated from the data (three-point formula, then limited).
    MonotoneCubic(std::vector<double> x, std::vector<double> y);
    /// Supplied slopes (e.g. exact derivatives), limited only where they
    /// would break monotonicity.
    MonotoneCubic(std::vector<double> x, std::vector<double> y, std::vector<double> slopes);

    double operator()(double v) const;
    double derivative(double v) const;

    double lo() const { return x_.front(); }
    double hi() const { return x_.back(); }
    std::size_t size() const { return x_.size(); }
    bool empty() const { return x_.empty(); }
    std::span<const double> knots() const { return x_; }
    std::span<const double> values() const { return y_; }
    std::span<const double> slopes() const { return d_; }
    /// Number of knot slopes the limiter changed.
    std::size_t limited() const { return limited_; }

private:
    void check_and_limit();
    std::size_t interval(double v) const;

    std::vector<double> x_, y_, d_;
    std::size_t limited_ = 0;
};

}  // namespace semireg
