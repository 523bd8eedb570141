#include "semireg/transform.hpp"

#include "semireg/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "transform";

std::vector<double> uniform_nodes(double hi, int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t[i] = hi * i / (n - 1);
    t.back() = hi;
    return t;
}

void check_mode(TransformMode mode, double l) {
    if (mode == TransformMode::semiconcave && !(l > 3.0)) {
        std::ostringstream os;
        os << "semiconcave mode requires exponent l > 3 (got " << l << ")";
        throw Error(ErrorCode::parameter_violation, kModule, os.str());
    }
}

ScalarRhs make_rhs(const Primitive& primitive, TransformMode mode, double l) {
    return [primitive, mode, l](double t, double y) {
        if (!std::isfinite(y)) return std::numeric_limits<double>::quiet_NaN();
        return std::exp(profile_exponent(mode, l, t) + 2.0 * primitive(y));
    };
}

}  // namespace

const char* to_string(TransformMode mode) {
    return mode == TransformMode::semiconvex ? "semiconvex" : "semiconcave";
}

Primitive primitive_lambda(const ValueScalar& lambda_fn, double c) {
    if (!lambda_fn) throw Error(ErrorCode::configuration_error, kModule, "lambda missing");
    if (!std::isfinite(lambda_fn(c))) {
        throw Error(ErrorCode::integration_failure, kModule, "lambda is not finite at the left end of I");
    }
    return [lambda_fn, c](double u) {
        try {
            return integrate_adaptive(lambda_fn, c, u, 1e-13);
        } catch (const Error& e) {
            throw Error(ErrorCode::integration_failure, kModule, e.what());
        }
    };
}

double profile_exponent(TransformMode mode, double l, double tau) {
    if (mode == TransformMode::semiconvex) return 4.0 * std::sqrt(tau + 1.0);
    return -2.0 / (l + 1.0) * std::pow(tau + 1.0, l + 1.0);
}

double profile_exponent_slope(TransformMode mode, double l, double tau) {
    if (mode == TransformMode::semiconvex) return 2.0 / std::sqrt(tau + 1.0);
    return -2.0 * std::pow(tau + 1.0, l);
}

ScalarJet transformed_lambda(TransformMode mode, double l, double tau) {
    const double s = tau + 1.0;
    if (mode == TransformMode::semiconvex) {
        return {-1.0 / std::sqrt(s), 0.5 * std::pow(s, -1.5), -0.75 * std::pow(s, -2.5)};
    }
    return {std::pow(s, l), l * std::pow(s, l - 1.0), l * (l - 1.0) * std::pow(s, l - 2.0)};
}

double TransformPair::slope(double t) const {
    return std::exp(profile_exponent(mode, exponent_l, t) + 2.0 * primitive(Q(t)));
}

double TransformPair::curvature(double t) const {
    const double qp = slope(t);
    return qp * (profile_exponent_slope(mode, exponent_l, t) + 2.0 * lambda_fn(Q(t)) * qp);
}

TransformPair solve_Q(const ValueScalar& lambda_fn, double c, TransformMode mode, double l, double tau_max,
                      const TransformOptions& options) {
    check_mode(mode, l);
    if (!(tau_max > 0.0) || options.nodes < 3) {
        throw Error(ErrorCode::parameter_violation, kModule, "need tau_max > 0 and at least 3 nodes");
    }
    TransformPair pair;
    pair.mode = mode;
    pair.exponent_l = l;
    pair.c = c;
    pair.lambda_fn = lambda_fn;
    pair.primitive = primitive_lambda(lambda_fn, c);
    const std::vector<double> nodes = uniform_nodes(tau_max, options.nodes);
    OdeTable table = integrate_tabulated(make_rhs(pair.primitive, mode, l), c, nodes, options.ode);
    pair.stats = table.stats;
    pair.blew_up = table.blew_up;
    pair.blow_up_time = table.blew_up ? table.blow_up_time : 0.0;
    if (table.t.size() < 3) {
        std::ostringstream os;
        os.precision(17);
        os << "Q blows up at tau = " << table.blow_up_time << " before the second tabulation node";
        throw Error(ErrorCode::blow_up, kModule, os.str());
    }
    pair.tau = std::move(table.t);
    pair.q = std::move(table.y);
    pair.dq = std::move(table.dy);
    pair.tau_max = pair.tau.back();
    pair.Q = MonotoneCubic(pair.tau, pair.q, pair.dq);
    pair.P = invert(pair);
    pair.image = {pair.q.front(), pair.q.back()};
    pair.min_slope = *std::min_element(pair.dq.begin(), pair.dq.end());
    return pair;
}

TransformPair solve_Q_covering(const ValueScalar& lambda_fn, double c, TransformMode mode, double l,
                               double cover_hi, const TransformOptions& options) {
    check_mode(mode, l);
    if (!(cover_hi > c)) throw Error(ErrorCode::parameter_violation, kModule, "cover target must exceed c");
    const Primitive primitive = primitive_lambda(lambda_fn, c);
    const ScalarRhs rhs = make_rhs(primitive, mode, l);
    const double target = cover_hi + options.margin * (cover_hi - c);
    OdeTable probe;
    const auto hit = integrate_until(rhs, 0.0, c, target, options.search_limit, options.ode, &probe);
    if (hit) return solve_Q(lambda_fn, c, mode, l, *hit, options);
    if (probe.blew_up) {
        TransformPair pair = solve_Q(lambda_fn, c, mode, l, probe.blow_up_time, options);
        pair.blew_up = true;
        pair.blow_up_time = probe.blow_up_time;
        return pair;
    }
    // Saturation: stop once one tabulation cell adds less than ~1e-12 relative.
    const double q_inf = probe.last_y;
    const double resolvable = 1e-12 * std::max(1.0, std::abs(q_inf)) * options.nodes;
    double t = 1.0 / 64.0;
    while (t < options.search_limit && rhs(2.0 * t, q_inf) * 2.0 * t > resolvable) t *= 2.0;
    TransformPair pair = solve_Q(lambda_fn, c, mode, l, std::min(t, options.search_limit), options);
    pair.saturated = true;
    return pair;
}

MonotoneCubic invert(const TransformPair& pair) {
    const std::size_t n = pair.q.size();
    std::vector<double> slopes(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(pair.dq[i] > 0.0) || (i > 0 && !(pair.q[i] > pair.q[i - 1]))) {
            std::ostringstream os;
            os << "Q tabulation is not strictly increasing at node " << i;
            throw Error(ErrorCode::contract_violation, kModule, os.str());
        }
        slopes[i] = 1.0 / pair.dq[i];
    }
    return MonotoneCubic(pair.q, pair.tau, slopes);
}

RoundTrip round_trip_error(const TransformPair& pair, int probes) {
    RoundTrip rt;
    rt.probes = probes;
    for (int k = 0; k < probes; ++k) {
        const double s = (k + 0.5) / probes;
        const double t = s * pair.tau_max;
        rt.tau_error = std::max(rt.tau_error, std::abs(pair.P(pair.Q(t)) - t));
        const double u = pair.image.lo + s * pair.image.length();
        rt.value_error = std::max(rt.value_error, std::abs(pair.Q(pair.P(u)) - u));
    }
    return rt;
}

double ode_midpoint_residual(const TransformPair& pair) {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < pair.tau.size(); ++i) {
        const double m = 0.5 * (pair.tau[i] + pair.tau[i + 1]);
        worst = std::max(worst, std::abs(pair.Q.derivative(m) - pair.slope(m)));
    }
    return worst;
}

StructuralReport structural_check(const TransformPair& pair, const ValueScalar& eta_fn, const Interval& interval,
                                  int probes) {
    StructuralReport rep;
    rep.mode = pair.mode;
    rep.exponent_l = pair.exponent_l;
    rep.probes = probes;
    rep.interval_covered = interval.lo >= pair.image.lo && interval.hi <= pair.image.hi;
    const double lo = std::clamp(interval.lo, pair.image.lo, pair.image.hi);
    const double hi = std::clamp(interval.hi, pair.image.lo, pair.image.hi);
    rep.tau_range = {pair.P(lo), pair.P(hi)};
    if (!rep.interval_covered) rep.failures.push_back("value interval not covered by the image of Q");

    const bool semiconvex = pair.mode == TransformMode::semiconvex;
    rep.lambda_min = rep.lambda_prime_min = rep.structure_min = kInf;
    rep.lambda_max = rep.lambda_prime_max = rep.structure_max = -kInf;
    rep.eta_finite = true;
    for (int k = 0; k < probes; ++k) {
        const double t = rep.tau_range.lo + rep.tau_range.length() * k / std::max(1, probes - 1);
        const ScalarJet j = transformed_lambda(pair.mode, pair.exponent_l, t);
        const double s = j.value * j.d2 - 2.0 * j.d1 * j.d1;
        rep.lambda_min = std::min(rep.lambda_min, j.value);
        rep.lambda_max = std::max(rep.lambda_max, j.value);
        rep.lambda_prime_min = std::min(rep.lambda_prime_min, j.d1);
        rep.lambda_prime_max = std::max(rep.lambda_prime_max, j.d1);
        rep.structure_min = std::min(rep.structure_min, s);
        rep.structure_max = std::max(rep.structure_max, s);
        if (eta_fn) {
            const double e = eta_fn(pair.Q(t));
            if (!std::isfinite(e)) rep.eta_finite = false; else rep.eta_sup = std::max(rep.eta_sup, std::abs(e));
        }
    }
    rep.lambda_sign_ok = semiconvex ? rep.lambda_max < 0.0 : rep.lambda_min > 0.0;
    rep.lambda_prime_positive = rep.lambda_prime_min > 0.0;
    rep.structure_positive = rep.structure_min > 0.0;
    if (semiconvex) {
        rep.required_margin = 0.25 * std::pow(1.0 + rep.tau_range.hi, -3.0);
        rep.margin_ok = rep.structure_min >= rep.required_margin * (1.0 - 1e-12);
    } else {
        rep.margin_ok = rep.structure_positive;
    }
    if (!rep.lambda_sign_ok) rep.failures.push_back(semiconvex ? "transformed lambda not negative" : "transformed lambda not positive");
    if (!rep.lambda_prime_positive) rep.failures.push_back("transformed lambda not increasing");
    if (!rep.structure_positive) rep.failures.push_back("lambda*lambda'' - 2*lambda'^2 not positive");
    if (!rep.margin_ok && rep.structure_positive) rep.failures.push_back("structural margin below (1+tau_max)^-3/4");
    if (!rep.eta_finite) rep.failures.push_back("eta o Q not finite");

    // Rederive the gradient weight from the table: λ(Q)Q′ − ½(ln Q′)′.
    const std::size_t n = pair.tau.size();
    const double h = pair.tau[1] - pair.tau[0];
    double max_q2 = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double d2 = (pair.q[i + 1] - 2.0 * pair.q[i] + pair.q[i - 1]) / (h * h);
        rep.q_second_difference_max = std::max(rep.q_second_difference_max, std::abs(d2));
        max_q2 = std::max(max_q2, std::abs(pair.curvature(pair.tau[i])));
        if (pair.tau[i] < rep.tau_range.lo || pair.tau[i] > rep.tau_range.hi) continue;
        const double log_slope = (std::log(pair.dq[i + 1]) - std::log(pair.dq[i - 1])) / (2.0 * h);
        const double numeric = pair.lambda_fn(pair.q[i]) * pair.dq[i] - 0.5 * log_slope;
        const double exact = transformed_lambda(pair.mode, pair.exponent_l, pair.tau[i]).value;
        rep.derivation_error = std::max(rep.derivation_error, std::abs(numeric - exact) / std::abs(exact));
    }
    rep.q_c2_ok = std::isfinite(rep.q_second_difference_max) &&
                  rep.q_second_difference_max <= 2.0 * max_q2 + 1e-8 * (1.0 + max_q2);
    if (!rep.q_c2_ok) rep.failures.push_back("Q tabulation second differences unbounded");

    rep.hypothesis_holds = rep.interval_covered && rep.lambda_sign_ok && rep.lambda_prime_positive &&
                           rep.structure_positive && rep.margin_ok && rep.eta_finite && rep.q_c2_ok;
    return rep;
}

CoefficientSet transformed_coefficients(const CoefficientSet& coeffs, const TransformPair& pair) {
    auto shared = std::make_shared<const TransformPair>(pair);
    CoefficientSet out = coeffs;
    const TransformMode mode = pair.mode;
    const double l = pair.exponent_l;
    out.lambda_fn = [mode, l](double t) { return transformed_lambda(mode, l, t).value; };
    const ValueScalar eta = coeffs.eta_fn;
    out.eta_fn = [shared, eta](double t) { return eta(shared->Q(t)); };
    const SourceTerm f = coeffs.f;
    out.f = [shared, f](const Vec& x, double t, double tau) {
        return f(x, t, shared->Q(tau)) / shared->slope(tau);
    };
    const Interval I = coeffs.value_interval;
    const double lo = pair.P(std::clamp(I.lo, pair.image.lo, pair.image.hi));
    const double hi = pair.P(std::clamp(I.hi, pair.image.lo, pair.image.hi));
    out.value_interval = {lo, hi};
    out.domain = {-1e-13 * pair.tau_max, pair.tau_max};
    return out;
}

}  // namespace semireg
