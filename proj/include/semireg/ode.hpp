#pragma once

#include "semireg/error.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace semireg {

using ScalarRhs = std::function<double(double t, double y)>;

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-14;
    /// Step underflow threshold, relative to the integration span.
    double min_step_factor = 1e-14;
    std::size_t max_steps = 50'000'000;
    /// Integration stops as blown up once y reaches this value.
    double ceiling = std::numeric_limits<double>::infinity();
    /// Values beyond this magnitude count as a blow-up rather than stiffness.
    double blow_up_magnitude = 1e100;
};

struct OdeStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_calls = 0;
    double min_step = std::numeric_limits<double>::infinity();
};

/// Solution sampled at the requested nodes. When the solution blows up
/// before the last node, the tables stop at the last node reached.
struct OdeTable {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> dy;  // rhs(t, y)
    bool blew_up = false;
    double blow_up_time = std::numeric_limits<double>::quiet_NaN();
    double last_t = 0.0;  // furthest accepted time
    double last_y = 0.0;
    OdeStats stats;
};

class StiffnessError : public Error {
public:
    StiffnessError(double t, double y, double h, const std::string& message)
        : Error(ErrorCode::stiffness_failure, "ode", message), t_(t), y_(y), h_(h) {}
    double time() const { return t_; }
    double value() const { return y_; }
    double step() const { return h_; }

private:
    double t_, y_, h_;
};

/// Dormand–Prince 5(4) with PI-free standard step control; every node in
/// `nodes` (increasing, nodes[0] is the initial time) is hit exactly.
OdeTable integrate_tabulated(const ScalarRhs& rhs, double y0, std::span<const double> nodes,
                             const OdeOptions& options = {});

/// Integrates from t0 until y first reaches `target`; returns the crossing
/// time located by bisection on the step, or nullopt with the reached state
/// in `table` when the solution saturates, blows up, or passes t_limit.
std::optional<double> integrate_until(const ScalarRhs& rhs, double t0, double y0, double target, double t_limit,
                                      const OdeOptions& options, OdeTable* table = nullptr);

}  // namespace semireg
