#include "semireg/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace semireg {

namespace {

struct Attempt {
    double y5 = 0.0;
    double err = 0.0;  // scaled error norm
    double f_end = 0.0;
    bool finite = true;
};

class DormandPrince {
public:
    DormandPrince(const ScalarRhs& rhs, const OdeOptions& opt, OdeStats& stats)
        : rhs_(rhs), opt_(opt), stats_(stats) {}

    double eval(double t, double y) {
        ++stats_.rhs_calls;
        return rhs_(t, y);
    }

    Attempt attempt(double t, double y, double f1, double h) {
        Attempt a;
        const double k1 = f1;
        const double k2 = eval(t + h / 5.0, y + h * (k1 / 5.0));
        const double k3 = eval(t + 3.0 * h / 10.0, y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
        const double k4 = eval(t + 4.0 * h / 5.0, y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
        const double k5 = eval(t + 8.0 * h / 9.0,
                               y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 -
                                        212.0 / 729.0 * k4));
        const double k6 = eval(t + h, y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                                               49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5));
        a.y5 = y + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5 +
                        11.0 / 84.0 * k6);
        a.f_end = eval(t + h, a.y5);
        const double e = h * (71.0 / 57600.0 * k1 - 71.0 / 16695.0 * k3 + 71.0 / 1920.0 * k4 -
                              17253.0 / 339200.0 * k5 + 22.0 / 525.0 * k6 - 1.0 / 40.0 * a.f_end);
        a.finite = std::isfinite(k2) && std::isfinite(k3) && std::isfinite(k4) && std::isfinite(k5) &&
                   std::isfinite(k6) && std::isfinite(a.y5) && std::isfinite(a.f_end);
        const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y), std::abs(a.y5));
        a.err = a.finite ? std::abs(e) / sc : kHuge;
        return a;
    }

    bool escaped(const Attempt& a) const {
        return !a.finite || a.y5 >= opt_.ceiling || std::abs(a.y5) > opt_.blow_up_magnitude;
    }

    static double next_step(double h, double err) {
        const double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
        return h * std::clamp(fac, 0.2, 5.0);
    }

    static constexpr double kHuge = 1e300;

private:
    const ScalarRhs& rhs_;
    const OdeOptions& opt_;
    OdeStats& stats_;
};

// Growth away from zero on a time scale comparable to the step floor.
bool runaway(double y, double f, double h_min, const OdeOptions& opt) {
    if (std::abs(y) > opt.blow_up_magnitude) return true;
    return y * f > 0.0 && std::abs(y) < 1e6 * h_min * std::abs(f);
}

[[noreturn]] void stiff(double t, double y, double h) {
    std::ostringstream os;
    os.precision(17);
    os << "step size underflow (h = " << h << ") at t = " << t << ", y = " << y << " without blow-up";
    throw StiffnessError(t, y, h, os.str());
}

}  // namespace

OdeTable integrate_tabulated(const ScalarRhs& rhs, double y0, std::span<const double> nodes,
                             const OdeOptions& options) {
    if (nodes.empty()) throw Error(ErrorCode::contract_violation, "ode", "no tabulation nodes");
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (!(nodes[i] > nodes[i - 1])) {
            throw Error(ErrorCode::contract_violation, "ode", "tabulation nodes must increase strictly");
        }
    }
    OdeTable out;
    DormandPrince dp(rhs, options, out.stats);
    double t = nodes[0], y = y0;
    double f = dp.eval(t, y);
    if (!std::isfinite(f) || !std::isfinite(y)) {
        throw Error(ErrorCode::contract_violation, "ode", "non-finite initial state");
    }
    out.t.push_back(t);
    out.y.push_back(y);
    out.dy.push_back(f);
    const double span = nodes.back() - nodes.front();
    const double h_min = options.min_step_factor * std::max(span, 1.0);
    double h = std::max(span * 1e-3, h_min * 10.0);
    std::size_t next = 1;
    while (next < nodes.size()) {
        if (out.stats.accepted + out.stats.rejected > options.max_steps) {
            throw StiffnessError(t, y, h, "maximum number of steps exceeded");
        }
        const double remaining = nodes[next] - t;
        const bool clipped = h >= remaining;
        const double h_try = clipped ? remaining : h;
        const Attempt a = dp.attempt(t, y, f, h_try);
        if (a.err <= 1.0 && !dp.escaped(a)) {
            t = clipped ? nodes[next] : t + h_try;
            y = a.y5;
            f = a.f_end;
            ++out.stats.accepted;
            out.stats.min_step = std::min(out.stats.min_step, h_try);
            if (clipped) {
                out.t.push_back(t);
                out.y.push_back(y);
                out.dy.push_back(f);
                ++next;
            }
            const double proposal = DormandPrince::next_step(h_try, a.err);
            h = clipped ? std::max(h, proposal) : proposal;
            continue;
        }
        ++out.stats.rejected;
        h = dp.escaped(a) ? 0.25 * h_try : DormandPrince::next_step(h_try, std::min(a.err, DormandPrince::kHuge));
        if (h < h_min) {
            const bool blow = dp.escaped(a) || y >= options.ceiling || runaway(y, f, h_min, options);
            if (!blow) stiff(t, y, h);
            out.blew_up = true;
            out.blow_up_time = t;
            break;
        }
    }
    out.last_t = t;
    out.last_y = y;
    return out;
}

std::optional<double> integrate_until(const ScalarRhs& rhs, double t0, double y0, double target, double t_limit,
                                      const OdeOptions& options, OdeTable* table) {
    OdeTable local;
    OdeTable& out = table ? *table : local;
    out = OdeTable{};
    DormandPrince dp(rhs, options, out.stats);
    double t = t0, y = y0, f = dp.eval(t, y);
    out.last_t = t;
    out.last_y = y;
    if (y >= target) return t;
    const double h_min = options.min_step_factor * std::max(t_limit - t0, 1.0);
    double h = std::max((t_limit - t0) * 1e-6, h_min * 10.0);
    while (t < t_limit) {
        if (out.stats.accepted + out.stats.rejected > options.max_steps) {
            throw StiffnessError(t, y, h, "maximum number of steps exceeded");
        }
        const double h_try = std::min(h, t_limit - t);
        const Attempt a = dp.attempt(t, y, f, h_try);
        if (a.err <= 1.0 && a.finite && a.y5 >= target && std::abs(a.y5) <= options.blow_up_magnitude) {
            // Crossing inside this step: bisect on the sub-step length.
            double lo = 0.0, hi = h_try;
            for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(t)); ++it) {
                const double mid = 0.5 * (lo + hi);
                const Attempt s = dp.attempt(t, y, f, mid);
                if (s.finite && s.y5 >= target) hi = mid; else lo = mid;
            }
            out.last_t = t + hi;
            out.last_y = target;
            ++out.stats.accepted;
            return t + hi;
        }
        if (a.err <= 1.0 && !dp.escaped(a)) {
            t += h_try;
            y = a.y5;
            f = a.f_end;
            ++out.stats.accepted;
            out.stats.min_step = std::min(out.stats.min_step, h_try);
            out.last_t = t;
            out.last_y = y;
            h = DormandPrince::next_step(h_try, a.err);
            continue;
        }
        ++out.stats.rejected;
        h = dp.escaped(a) ? 0.25 * h_try : DormandPrince::next_step(h_try, a.err);
        if (h < h_min) {
            const bool blow = dp.escaped(a) || runaway(y, f, h_min, options);
            if (!blow) stiff(t, y, h);
            out.blew_up = true;
            out.blow_up_time = t;
            return std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace semireg
