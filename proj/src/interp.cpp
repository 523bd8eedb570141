#include "semireg/interp.hpp"

#include "semireg/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "interp";

}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw Error(ErrorCode::contract_violation, kModule, "need at least two knots");
    d_.assign(n, 0.0);
    std::vector<double> sec(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) sec[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    if (n == 2) {
        d_[0] = d_[1] = sec[0];
    } else {
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            d_[i] = (sec[i - 1] * sec[i] <= 0.0) ? 0.0 : (h1 * sec[i - 1] + h0 * sec[i]) / (h0 + h1);
        }
        d_[0] = sec[0];
        d_[n - 1] = sec[n - 2];
    }
    check_and_limit();
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y, std::vector<double> slopes)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(slopes)) {
    if (x_.size() < 2 || y_.size() != x_.size() || d_.size() != x_.size()) {
        throw Error(ErrorCode::contract_violation, kModule, "knot, value and slope counts differ");
    }
    check_and_limit();
}

void MonotoneCubic::check_and_limit() {
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
        if (!(x_[i + 1] > x_[i])) {
            std::ostringstream os;
            os << "knots not strictly increasing at index " << i + 1;
            throw Error(ErrorCode::contract_violation, kModule, os.str());
        }
    }
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
        const double sec = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        if (sec == 0.0) {
            if (d_[i] != 0.0 || d_[i + 1] != 0.0) ++limited_;
            d_[i] = d_[i + 1] = 0.0;
            continue;
        }
        double a = d_[i] / sec, b = d_[i + 1] / sec;
        if (a < 0.0) { d_[i] = 0.0; a = 0.0; ++limited_; }
        if (b < 0.0) { d_[i + 1] = 0.0; b = 0.0; ++limited_; }
        const double r2 = a * a + b * b;
        if (r2 > 9.0) {
            const double s = 3.0 / std::sqrt(r2);
            d_[i] = s * a * sec;
            d_[i + 1] = s * b * sec;
            ++limited_;
        }
    }
}

std::size_t MonotoneCubic::interval(double v) const {
    const double span = x_.back() - x_.front();
    const double slack = 1e-12 * span;
    if (!(v >= x_.front() - slack && v <= x_.back() + slack)) {
        std::ostringstream os;
        os.precision(17);
        os << "evaluation point " << v << " outside [" << x_.front() << ", " << x_.back() << "]";
        throw Error(ErrorCode::domain_violation, kModule, os.str());
    }
    const auto it = std::upper_bound(x_.begin(), x_.end(), v);
    std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(k, x_.size() - 2);
}

double MonotoneCubic::operator()(double v) const {
    const std::size_t k = interval(v);
    const double h = x_[k + 1] - x_[k];
    const double s = std::clamp((v - x_[k]) / h, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * y_[k] + h10 * h * d_[k] + h01 * y_[k + 1] + h11 * h * d_[k + 1];
}

double MonotoneCubic::derivative(double v) const {
    const std::size_t k = interval(v);
    const double h = x_[k + 1] - x_[k];
    const double s = std::clamp((v - x_[k]) / h, 0.0, 1.0);
    const double s2 = s * s;
    const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1;
    const double d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
    return (d00 * y_[k] + d01 * y_[k + 1]) / h + d10 * d_[k] + d11 * d_[k + 1];
}

}  // namespace semireg
