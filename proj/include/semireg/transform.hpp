#pragma once

#include "semireg/interp.hpp"
#include "semireg/model.hpp"
#include "semireg/ode.hpp"

#include <functional>
#include <string>
#include <vector>

namespace semireg {

using Primitive = std::function<double(double u)>;

/// Λ(u) = ∫_c^u λ by adaptive quadrature; Λ(c) = 0.
Primitive primitive_lambda(const ValueScalar& lambda_fn, double c);

enum class TransformMode { semiconvex, semiconcave };

const char* to_string(TransformMode mode);

/// Time-profile exponent φ in Q′ = exp(φ(τ) + 2Λ(Q)):
///   semiconvex   φ(τ) = 4√(τ+1)
///   semiconcave  φ(τ) = −2(τ+1)^{l+1}/(l+1)
double profile_exponent(TransformMode mode, double l, double tau);
double profile_exponent_slope(TransformMode mode, double l, double tau);

/// Value and first two τ-derivatives of the gradient weight of the equation
/// satisfied by τ = P∘u, which is −φ′/2.
struct ScalarJet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};
ScalarJet transformed_lambda(TransformMode mode, double l, double tau);

struct TransformOptions {
    int nodes = 4001;
    double margin = 0.05;        // covering margin, fraction of |I|
    double search_limit = 1e4;   // largest τ examined when covering
    OdeOptions ode;
};

/// Tabulated increasing change of variable u = Q(τ), its inverse P and the
/// primitive Λ used to build it.
struct TransformPair {
    TransformMode mode = TransformMode::semiconvex;
    double exponent_l = 4.0;
    double c = 0.0;
    double tau_max = 0.0;
    ValueScalar lambda_fn;
    Primitive primitive;
    std::vector<double> tau, q, dq;
    MonotoneCubic Q;
    MonotoneCubic P;
    bool blew_up = false;
    double blow_up_time = 0.0;
    bool saturated = false;    // Q′ vanished numerically before reaching the target
    Interval image;            // [Q(0), Q(τ_max)] actually attained
    double min_slope = 0.0;
    OdeStats stats;

    double q_at(double t) const { return Q(t); }
    double p_at(double u) const { return P(u); }
    /// Q′ from the defining ODE at (τ, Q(τ)).
    double slope(double t) const;
    /// Q″ = Q′(φ′ + 2λ(Q)Q′).
    double curvature(double t) const;
};

/// Q′ = exp(φ(τ) + 2Λ(Q)), Q(0) = c, tabulated on a uniform grid over
/// [0, tau_max]. A blow-up before tau_max truncates the table and is reported.
TransformPair solve_Q(const ValueScalar& lambda_fn, double c, TransformMode mode, double l, double tau_max,
                      const TransformOptions& options = {});

/// As solve_Q, with tau_max chosen so that Q(tau_max) covers `cover_hi`
/// plus margin·(cover_hi − c). When the solution blows up or saturates first
/// the returned pair carries the image attained.
TransformPair solve_Q_covering(const ValueScalar& lambda_fn, double c, TransformMode mode, double l,
                               double cover_hi, const TransformOptions& options = {});

/// Monotone cubic inverse through (Q(τᵢ), τᵢ) with slopes 1/Q′(τᵢ).
MonotoneCubic invert(const TransformPair& pair);

struct RoundTrip {
    double tau_error = 0.0;    // max |P(Q(τ)) − τ|
    double value_error = 0.0;  // max |Q(P(u)) − u|
    int probes = 0;
};
RoundTrip round_trip_error(const TransformPair& pair, int probes = 10000);

/// max |Q′_interp − rhs(τ, Q_interp)| at the tabulation midpoints.
double ode_midpoint_residual(const TransformPair& pair);

struct StructuralReport {
    TransformMode mode = TransformMode::semiconvex;
    double exponent_l = 0.0;
    Interval tau_range;  // P(I)
    int probes = 0;
    bool interval_covered = false;

    double lambda_min = 0.0, lambda_max = 0.0;
    double lambda_prime_min = 0.0, lambda_prime_max = 0.0;
    double structure_min = 0.0, structure_max = 0.0;  // λ̃λ̃″ − 2λ̃′²
    bool lambda_sign_ok = false;        // < 0 (semiconvex) or > 0 (semiconcave)
    bool lambda_prime_positive = false;
    bool structure_positive = false;
    /// Semiconvex mode: min of the structural quantity against ¼(1+τ_max)^{−3}.
    double required_margin = 0.0;
    bool margin_ok = false;

    /// λ̃ recomputed from the tabulated Q as λ(Q)Q′ − ½(ln Q′)′, relative error.
    double derivation_error = 0.0;
    double eta_sup = 0.0;
    bool eta_finite = false;
    double q_second_difference_max = 0.0;
    bool q_c2_ok = false;

    bool hypothesis_holds = false;
    std::vector<std::string> failures;
};

StructuralReport structural_check(const TransformPair& pair, const ValueScalar& eta_fn, const Interval& interval,
                                  int probes = 1001);

/// Coefficients of the equation satisfied by τ = P∘u: same σ, μ, w; gradient
/// weight from transformed_lambda; η∘Q; source f(x,t,Q(τ))/Q′(τ).
CoefficientSet transformed_coefficients(const CoefficientSet& coeffs, const TransformPair& pair);

}  // namespace semireg
