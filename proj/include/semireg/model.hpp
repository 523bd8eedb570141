#pragma once

#include "semireg/error.hpp"
#include "semireg/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace semireg {

using TimeScalar = std::function<double(double t)>;
using TimeMatrix = std::function<Mat(double t)>;
using VectorField = std::function<Vec(const Vec& x, double t)>;
using ValueScalar = std::function<double(double u)>;
using SourceTerm = std::function<double(const Vec& x, double t, double u)>;
using SpaceTimeScalar = std::function<double(const Vec& x, double t)>;

/// Lipschitz-in-time moduli L(g) of the coefficients; required by the
/// time-regularity bound constants.
struct TimeModuli {
    std::optional<double> sigma_sigma_t;
    std::optional<double> sigma_t;
    std::optional<double> w;
    std::optional<double> mu;
    std::optional<double> f;

    bool complete() const { return sigma_sigma_t && sigma_t && w && mu && f; }
};

/// Coefficients of  ∂ₜu + H(x,t,u,∇u,∇²u) = 0  with
///   H = −½tr(σσᵀX) + ⟨μ,p⟩ + λ(u)|σᵀp|² + η(u)⟨σᵀp,w⟩ + f(x,t,u).
struct CoefficientSet {
    int dim = 1;        // N
    int noise_dim = 1;  // d
    TimeMatrix sigma;   // N×d
    VectorField mu;     // N-vector
    VectorField w;      // d-vector; empty means w ≡ 0
    ValueScalar lambda_fn;
    ValueScalar eta_fn;
    SourceTerm f;
    Interval domain{-kInf, kInf};  // open (a, b)
    Interval value_interval;       // closed I ⊂ (a, b)
    bool range_compatible = false;
    double horizon = 1.0;
    TimeModuli moduli;

    /// Checks dimensions, I ⊂ (a,b) with positive distance to finite ends,
    /// constant rank of σ on sampled times, and w ∈ Im(σᵀ) on sampled points
    /// when range_compatible is set.
    void validate() const;

    Vec w_at(const Vec& x, double t) const;
};

/// Scalar field g(x,t) with optional analytic derivatives. Missing
/// derivatives fall back to central differences scaled by `scale`.
struct SmoothField {
    SpaceTimeScalar value;
    VectorField gradient;
    std::function<Mat(const Vec& x, double t)> hessian;
    SpaceTimeScalar time_derivative;
    double scale = 1.0;

    double operator()(const Vec& x, double t) const { return value(x, t); }
    Vec grad(const Vec& x, double t) const;
    Mat hess(const Vec& x, double t) const;
    double dt(const Vec& x, double t) const;
};

/// Deterministic short rate r(t) with optional discontinuity locations,
/// which the quadrature splits at.
struct RateCurve {
    TimeScalar r;
    std::vector<double> breakpoints;
    double operator()(double t) const { return r(t); }
};

/// ∫ₐᵇ r, ξ(t) = exp(∫₀ᵗ r) and D(t,s) = exp(−∫ₜˢ r(T−κ)dκ), by adaptive
/// Gauss–Kronrod quadrature to absolute tolerance 1e−12.
class DiscountCurve {
public:
    DiscountCurve(RateCurve rate, double horizon);

    double integral(double a, double b) const;
    double xi(double t) const;
    double xi_prime(double t) const { return rate_(t) * xi(t); }
    double discount(double t, double s) const;
    double rate(double t) const { return rate_(t); }
    double horizon() const { return horizon_; }

private:
    RateCurve rate_;
    double horizon_;
};

/// The MBS pricing equation
///   ∂ₜU − ½tr(σσᵀ∇²U) − ⟨μ,∇U⟩ + ρ|σᵀ∇U|²/(U+h+ξ) + r(U+h) − τh = 0,  U(·,0) ≡ 0.
struct MbsModel {
    double rho = 0.5;
    double coupon_tau = 0.0;
    RateCurve rate;
    SmoothField principal;  // h(x,t) ≥ 0, h(·,0) ≡ 0
    double horizon_T = 1.0;
    Interval value_interval{0.5, 3.0};  // where u = U + h + ξ lives

    void validate(int dim) const;
};

/// Volatility and drift shared by the MBS model and its factor process.
struct FactorDynamics {
    int dim = 1;
    int noise_dim = 1;
    TimeMatrix sigma;
    VectorField mu;
    std::optional<double> sigma_time_lipschitz;
    std::optional<double> mu_time_lipschitz;
};

struct DiscountPair {
    std::function<double(double)> xi;
    std::function<double(double, double)> discount;
};

DiscountPair discount_and_xi(const MbsModel& model);

/// H(x,t,u,p,X) exactly as written; throws on u ∉ (a,b) or non-symmetric X.
double hamiltonian_eval(const Vec& x, double t, double u, const Vec& p, const Mat& X,
                        const CoefficientSet& coeffs);

/// Coefficients frozen at one time t, for repeated evaluation over a grid.
class HamiltonianFrame {
public:
    HamiltonianFrame(const CoefficientSet& coeffs, double t);

    /// Drift term uses p_back where μⱼ > 0 and p_fwd otherwise; the
    /// nonlinear terms use p_central.
    double eval(const Vec& x, double u, const Vec& p_back, const Vec& p_fwd,
                const Vec& p_central, const Mat& X) const;

    double eval(const Vec& x, double u, const Vec& p, const Mat& X) const {
        return eval(x, u, p, p, p, X);
    }

    const Mat& sigma() const { return sigma_; }
    const Mat& diffusion() const { return diffusion_; }
    double time() const { return t_; }

private:
    const CoefficientSet* coeffs_;
    double t_;
    Mat sigma_;
    Mat diffusion_;
};

/// Rewrites the MBS equation for u = U + h + ξ in the general form:
/// λ(u) = ρ/u, η(u) = −2ρ/u, w = σᵀ∇h, drift −μ, and
/// f = −∂ₜh − ξ′ + ½tr(σσᵀ∇²h) + ⟨μ,∇h⟩ + ρ|w|²/u + r(u−ξ) − τh.
CoefficientSet mbs_to_general(const MbsModel& model, const FactorDynamics& dynamics);

/// g = h + ξ with derivatives; the solver marches U = u − g against it.
SmoothField mbs_shift(const MbsModel& model);

}  // namespace semireg
