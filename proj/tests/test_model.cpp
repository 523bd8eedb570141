#include "semireg/families.hpp"
#include "semireg/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace semireg;

namespace {

CoefficientSet scalar_set(double sigma, double mu, double lambda, double eta, double f_const) {
    CoefficientSet c;
    c.dim = 1;
    c.noise_dim = 1;
    c.sigma = families::constant_matrix(Mat::Constant(1, 1, sigma));
    c.mu = families::constant_vector(Vec::Constant(1, mu));
    c.lambda_fn = [lambda](double) { return lambda; };
    c.eta_fn = [eta](double) { return eta; };
    c.f = [f_const](const Vec&, double, double) { return f_const; };
    c.domain = {-kInf, kInf};
    c.value_interval = {-10.0, 10.0};
    return c;
}

Vec vec1(double v) { return Vec::Constant(1, v); }
Mat mat1(double v) { return Mat::Constant(1, 1, v); }

// Probe function φ(x,t) = α + βt + Σⱼ γⱼ sin(κⱼxⱼ + ωt) with exact derivatives.
struct Probe {
    double alpha, beta, omega;
    Vec gamma, kappa;

    double value(const Vec& x, double t) const {
        double v = alpha + beta * t;
        for (int j = 0; j < x.size(); ++j) v += gamma(j) * std::sin(kappa(j) * x(j) + omega * t);
        return v;
    }
    double dt(const Vec& x, double t) const {
        double v = beta;
        for (int j = 0; j < x.size(); ++j) v += gamma(j) * omega * std::cos(kappa(j) * x(j) + omega * t);
        return v;
    }
    Vec grad(const Vec& x, double t) const {
        Vec g(x.size());
        for (int j = 0; j < x.size(); ++j) g(j) = gamma(j) * kappa(j) * std::cos(kappa(j) * x(j) + omega * t);
        return g;
    }
    Mat hess(const Vec& x, double t) const {
        Mat h = Mat::Zero(x.size(), x.size());
        for (int j = 0; j < x.size(); ++j)
            h(j, j) = -gamma(j) * kappa(j) * kappa(j) * std::sin(kappa(j) * x(j) + omega * t);
        return h;
    }
};

struct MbsCase {
    MbsModel model;
    FactorDynamics dyn;
};

MbsCase two_factor_case() {
    MbsCase c;
    c.model.rho = 0.4;
    c.model.coupon_tau = 0.06;
    c.model.rate = families::affine_rate(0.02, 0.03);
    Vec center(2);
    center << 0.3, -0.2;
    c.model.principal = families::gaussian_bump(1.0, center, 0.9, 2.0);
    c.model.horizon_T = 1.0;
    c.model.value_interval = {0.2, 5.0};
    c.dyn.dim = 2;
    c.dyn.noise_dim = 2;
    Mat s(2, 2);
    s << 0.8, 0.1, -0.2, 0.6;
    Mat slope(2, 2);
    slope << 0.1, 0.0, 0.05, -0.1;
    c.dyn.sigma = families::affine_matrix(s, slope);
    Mat a(2, 2);
    a << -0.5, 0.2, 0.1, -0.3;
    Vec b(2);
    b << 0.1, -0.05;
    c.dyn.mu = families::linear_vector(a, b);
    return c;
}

// Left side of the MBS equation at U = φ, written out directly.
double mbs_residual(const MbsCase& c, const Probe& phi, const Vec& x, double t) {
    const DiscountCurve curve(c.model.rate, c.model.horizon_T);
    const Mat s = c.dyn.sigma(t);
    const double U = phi.value(x, t);
    const double h = c.model.principal(x, t);
    const double xi = curve.xi(t);
    const Vec gU = phi.grad(x, t);
    const double r = curve.rate(t);
    return phi.dt(x, t) - 0.5 * ((s * s.transpose()).cwiseProduct(phi.hess(x, t))).sum() -
           c.dyn.mu(x, t).dot(gU) + c.model.rho * (s.transpose() * gU).squaredNorm() / (U + h + xi) +
           r * (U + h) - c.model.coupon_tau * h;
}

double general_residual(const MbsCase& c, const CoefficientSet& coeffs, const Probe& phi, const Vec& x, double t) {
    const DiscountCurve curve(c.model.rate, c.model.horizon_T);
    const SmoothField& h = c.model.principal;
    const double u = phi.value(x, t) + h(x, t) + curve.xi(t);
    const Vec p = phi.grad(x, t) + h.grad(x, t);
    const Mat X = phi.hess(x, t) + h.hess(x, t);
    const double ut = phi.dt(x, t) + h.dt(x, t) + curve.xi_prime(t);
    return ut + hamiltonian_eval(x, t, u, p, X, coeffs);
}

}  // namespace

TEST_CASE("hamiltonian: vanishing arguments give zero") {
    const CoefficientSet c = scalar_set(1.0, 0.7, 0.3, 0.2, 0.0);
    CHECK(hamiltonian_eval(vec1(0.4), 0.1, 1.0, vec1(0.0), mat1(0.0), c) == 0.0);
}

TEST_CASE("hamiltonian: pure trace term") {
    const CoefficientSet c = scalar_set(1.0, 0.0, 0.0, 0.0, 0.0);
    CHECK(hamiltonian_eval(vec1(0.0), 0.0, 1.0, vec1(0.0), mat1(1.0), c) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("hamiltonian: each term as written") {
    CoefficientSet c = scalar_set(2.0, 0.5, 0.25, -1.0, 0.0);
    c.w = families::constant_vector(vec1(3.0));
    c.f = [](const Vec& x, double t, double u) { return x(0) + t + u; };
    // −½·4·X + μp + λ(2p)² + η(2p)(3) + f
    const double x = 0.2, t = 0.3, u = 1.5, p = 0.7, X = -0.4;
    const double expect = -2.0 * X + 0.5 * p + 0.25 * 4 * p * p - 1.0 * 2 * p * 3 + (x + t + u);
    CHECK(hamiltonian_eval(vec1(x), t, u, vec1(p), mat1(X), c) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("hamiltonian: linear in X") {
    const MbsCase mc = two_factor_case();
    const CoefficientSet c = mbs_to_general(mc.model, mc.dyn);
    Vec x(2), p(2);
    x << 0.1, 0.4;
    p << -0.3, 0.8;
    Mat X1(2, 2), X2(2, 2);
    X1 << 1.0, 0.3, 0.3, -2.0;
    X2 << -0.5, 0.7, 0.7, 0.9;
    const Mat Z = Mat::Zero(2, 2);
    const double u = 1.7, t = 0.4;
    const double lhs = hamiltonian_eval(x, t, u, p, X1 + X2, c) - hamiltonian_eval(x, t, u, p, X1, c) -
                       hamiltonian_eval(x, t, u, p, X2, c) + hamiltonian_eval(x, t, u, p, Z, c);
    CHECK(std::abs(lhs) < 1e-12);
}

TEST_CASE("hamiltonian: domain and symmetry errors") {
    CoefficientSet c = scalar_set(1.0, 0.0, 0.0, 0.0, 0.0);
    c.domain = {0.0, kInf};
    c.value_interval = {0.5, 2.0};
    try {
        hamiltonian_eval(vec1(0.0), 0.0, -1.0, vec1(0.0), mat1(0.0), c);
        FAIL("expected domain violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::domain_violation);
    }
    CoefficientSet c2 = scalar_set(1.0, 0.0, 0.0, 0.0, 0.0);
    c2.dim = 2;
    c2.noise_dim = 1;
    c2.sigma = families::constant_matrix(Mat::Constant(2, 1, 1.0));
    c2.mu = families::constant_vector(Vec::Zero(2));
    Mat X(2, 2);
    X << 1.0, 2.0, 0.0, 1.0;
    try {
        hamiltonian_eval(Vec::Zero(2), 0.0, 1.0, Vec::Zero(2), X, c2);
        FAIL("expected contract violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::contract_violation);
    }
}

TEST_CASE("mapping: zero principal and zero rate") {
    MbsModel m;
    m.rho = 0.5;
    m.coupon_tau = 0.05;
    m.rate = families::constant_rate(0.0);
    m.principal = families::zero_field();
    FactorDynamics d;
    d.sigma = families::constant_matrix(mat1(1.0));
    d.mu = families::constant_vector(vec1(0.0));
    const CoefficientSet c = mbs_to_general(m, d);
    for (double x : {-1.0, 0.0, 2.0}) {
        for (double t : {0.0, 0.5}) {
            CHECK(c.w(vec1(x), t)(0) == 0.0);
            CHECK(c.f(vec1(x), t, 1.3) == doctest::Approx(0.0).epsilon(1e-15));
        }
    }
    CHECK(c.lambda_fn(2.0) == doctest::Approx(0.25));
    // At (x=0,t=0.5,u=2,p=1,X=0): U = 1, ∇U = 1, so the MBS left side without ∂ₜU is ρ·1/2.
    CHECK(hamiltonian_eval(vec1(0.0), 0.5, 2.0, vec1(1.0), mat1(0.0), c) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("mapping: rate equal to coupon makes the zero deviation exact") {
    MbsCase mc = two_factor_case();
    mc.model.rate = families::constant_rate(mc.model.coupon_tau);
    const CoefficientSet c = mbs_to_general(mc.model, mc.dyn);
    Probe zero{0.0, 0.0, 0.0, Vec::Zero(2), Vec::Zero(2)};
    for (double t : {0.1, 0.5, 0.9}) {
        for (double x0 : {-1.0, 0.0, 0.7}) {
            Vec x(2);
            x << x0, -0.5 * x0;
            CHECK(std::abs(general_residual(mc, c, zero, x, t)) < 1e-12);
        }
    }
}

TEST_CASE("mapping: residual equality on random probe functions") {
    const MbsCase mc = two_factor_case();
    const CoefficientSet c = mbs_to_general(mc.model, mc.dyn);
    c.validate();
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Probe phi{0.5 + 0.5 * unif(gen), unif(gen), 2.0 * unif(gen), Vec(2), Vec(2)};
        phi.gamma << 0.2 * unif(gen), 0.2 * unif(gen);
        phi.kappa << 3.0 * unif(gen), 3.0 * unif(gen);
        for (int q = 0; q < 8; ++q) {
            Vec x(2);
            x << 2.0 * unif(gen), 2.0 * unif(gen);
            const double t = 0.5 * (1.0 + unif(gen)) * 0.999;
            const double a = mbs_residual(mc, phi, x, t);
            const double b = general_residual(mc, c, phi, x, t);
            worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(a)));
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("mapping: nonpositive value interval is rejected") {
    MbsCase mc = two_factor_case();
    mc.model.value_interval = {-0.1, 2.0};
    try {
        mbs_to_general(mc.model, mc.dyn);
        FAIL("expected positivity violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::positivity_violation);
    }
}

TEST_CASE("discount: closed forms") {
    MbsModel m;
    m.horizon_T = 1.0;
    m.rate = families::constant_rate(0.0);
    auto d0 = discount_and_xi(m);
    CHECK(d0.xi(0.7) == 1.0);
    CHECK(d0.discount(0.1, 0.9) == 1.0);

    m.rate = families::constant_rate(0.05);
    auto d1 = discount_and_xi(m);
    CHECK(d1.discount(0.0, 1.0) == doctest::Approx(std::exp(-0.05)).epsilon(1e-14));
    CHECK(d1.discount(0.0, 1.0) == doctest::Approx(0.951229).epsilon(1e-6));

    m.rate = families::affine_rate(0.0, 1.0);
    auto d2 = discount_and_xi(m);
    CHECK(d2.xi(0.0) == 1.0);
    CHECK(d2.xi(1.0) == doctest::Approx(std::exp(0.5)).epsilon(1e-14));
    CHECK(d2.xi(1.0) == doctest::Approx(1.648721).epsilon(1e-6));
}

TEST_CASE("discount: multiplicative, unit diagonal, decreasing") {
    MbsModel m;
    m.horizon_T = 2.0;
    m.rate = families::piecewise_constant_rate({0.5, 1.2}, {0.01, 0.04, 0.02});
    auto d = discount_and_xi(m);
    CHECK(d.discount(0.3, 0.3) == 1.0);
    CHECK(d.discount(0.2, 0.9) * d.discount(0.9, 1.7) == doctest::Approx(d.discount(0.2, 1.7)).epsilon(1e-13));
    double prev = 1.0;
    for (int k = 1; k <= 20; ++k) {
        const double v = d.discount(0.0, 0.1 * k);
        CHECK(v < prev);
        prev = v;
    }
    // ∫₀² r = 0.5·0.01 + 0.7·0.04 + 0.8·0.02
    CHECK(d.xi(2.0) == doctest::Approx(std::exp(0.005 + 0.028 + 0.016)).epsilon(1e-13));
}

TEST_CASE("families: spec parsing") {
    const FamilySpec s = FamilySpec::parse("gaussian_bump amplitude=1.5 center=0.1,0.2 0.7");
    CHECK(s.name == "gaussian_bump");
    CHECK(s.number("amplitude", 5) == 1.5);
    CHECK(s.list("center").size() == 2);
    CHECK(s.positional.size() == 1);
    CHECK(FamilySpec::parse(s.canonical()).canonical() == s.canonical());
    try {
        make_rate(FamilySpec::parse("lognormal 1"));
        FAIL("expected configuration error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::configuration_error);
    }
}

TEST_CASE("families: gaussian bump derivatives match differences") {
    Vec c(2);
    c << 0.2, -0.1;
    SmoothField h = families::gaussian_bump(1.3, c, 0.8, 2.0);
    SmoothField numeric;
    numeric.value = h.value;
    Vec x(2);
    x << 0.5, 0.3;
    const double t = 0.6;
    CHECK((h.grad(x, t) - numeric.grad(x, t)).norm() < 1e-9);
    CHECK((h.hess(x, t) - numeric.hess(x, t)).norm() < 1e-6);
    CHECK(std::abs(h.dt(x, t) - numeric.dt(x, t)) < 1e-9);
    CHECK(h(x, 0.0) == 0.0);
}
