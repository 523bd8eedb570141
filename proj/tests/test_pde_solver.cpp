#include "semireg/families.hpp"
#include "semireg/pde_solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace semireg;

namespace {

CoefficientSet heat_coeffs(int dim = 1, double horizon = 1.0) {
    CoefficientSet c;
    c.dim = dim;
    c.noise_dim = dim;
    c.sigma = families::constant_matrix(Mat::Identity(dim, dim));
    c.mu = families::constant_vector(Vec::Zero(dim));
    c.lambda_fn = [](double) { return 0.0; };
    c.eta_fn = [](double) { return 0.0; };
    c.f = [](const Vec&, double, double) { return 0.0; };
    c.domain = {-kInf, kInf};
    c.value_interval = {-0.5, 1.5};
    c.horizon = horizon;
    return c;
}

double heat_exact(double x, double t) { return std::exp(-x * x / (2.0 * (1.0 + t))) / std::sqrt(1.0 + t); }

GridSpec small_grid(double half_width, int nodes, int steps, double horizon) {
    GridSpec g;
    g.dim = 1;
    g.half_width = {half_width, 1.0, 1.0};
    g.nodes = {nodes, 1, 1};
    g.steps = steps;
    g.horizon = horizon;
    return g;
}

double heat_error(int nodes) {
    const CoefficientSet c = heat_coeffs();
    const GridSpec g = GridSpec::stability_limited(1, 8.0, nodes, 1.0, c);
    const SolutionField u = solve(c, [](const Vec& x) { return std::exp(-0.5 * x(0) * x(0)); }, g);
    double err = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        err = std::max(err, std::abs(u.value(g.steps, i) - heat_exact(g.coordinates(i)(0), 1.0)));
    }
    return err;
}

SolutionField frozen_field(const CoefficientSet& c, const GridSpec& g, const InitialDatum& fn) {
    SolutionField field(g, std::make_shared<const CoefficientSet>(c));
    std::vector<double> v(g.node_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(g.coordinates(i));
    for (int k = 0; k < field.slices(); ++k) field.assign_slice(k, v);
    return field;
}

}  // namespace

TEST_CASE("stencil: constant field gives the source") {
    CoefficientSet c = heat_coeffs();
    c.lambda_fn = [](double) { return 3.0; };
    c.mu = families::constant_vector(Vec::Constant(1, -1.0));
    c.f = [](const Vec&, double, double u) { return 2.0 * u + 1.0; };
    const GridSpec g = small_grid(1.0, 9, 4, 1.0);
    const SolutionField field = frozen_field(c, g, [](const Vec&) { return 0.7; });
    for (std::size_t i = 1; i + 1 < g.node_count(); ++i) {
        CHECK(discretize_hamiltonian(field, 2, i) == doctest::Approx(2.4).epsilon(1e-14));
    }
}

TEST_CASE("stencil: linear data with drift is exact") {
    CoefficientSet c = heat_coeffs();
    c.mu = families::constant_vector(Vec::Constant(1, 2.0));
    c.value_interval = {-5.0, 5.0};
    const GridSpec g = small_grid(1.0, 9, 4, 1.0);
    const SolutionField field = frozen_field(c, g, [](const Vec& x) { return x(0); });
    for (std::size_t i = 1; i + 1 < g.node_count(); ++i) {
        CHECK(discretize_hamiltonian(field, 0, i) == doctest::Approx(2.0).epsilon(1e-13));
    }
}

TEST_CASE("stencil: quadratic data with negative gradient weight") {
    CoefficientSet c = heat_coeffs();
    c.lambda_fn = [](double) { return -1.0; };
    c.value_interval = {-5.0, 5.0};
    const GridSpec g = small_grid(1.0, 5, 4, 1.0);
    const SolutionField field = frozen_field(c, g, [](const Vec& x) { return x(0) * x(0); });
    CHECK(g.coordinates(3)(0) == doctest::Approx(0.5));
    CHECK(discretize_hamiltonian(field, 0, 3) == doctest::Approx(-2.0).epsilon(1e-13));
}

TEST_CASE("stencil: boundary index is refused") {
    const CoefficientSet c = heat_coeffs();
    const GridSpec g = small_grid(1.0, 5, 4, 1.0);
    const SolutionField field = frozen_field(c, g, [](const Vec&) { return 0.0; });
    try {
        discretize_hamiltonian(field, 0, 0);
        FAIL("expected contract violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::contract_violation);
    }
}

TEST_CASE("step: heat reduction matches the explicit stencil") {
    const CoefficientSet c = heat_coeffs();
    const GridSpec g = GridSpec::stability_limited(1, 4.0, 81, 0.1, c);
    auto u0 = [](const Vec& x) { return std::exp(-0.5 * x(0) * x(0)); };
    SolutionField field(g, std::make_shared<const CoefficientSet>(c));
    std::vector<double> v(g.node_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = u0(g.coordinates(i));
    field.assign_slice(0, v);
    const auto next = step(field, 0);
    const double h = g.dx(0);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const double expect = v[i] + 0.5 * g.dt() * (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        CHECK(next[i] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("step: linear source decays constants") {
    CoefficientSet c = heat_coeffs();
    c.f = [](const Vec&, double, double u) { return u; };
    const GridSpec g = small_grid(2.0, 21, 10, 0.05);
    SolutionField field(g, std::make_shared<const CoefficientSet>(c));
    std::vector<double> ones(g.node_count(), 1.0);
    field.assign_slice(0, ones);
    const auto next = step(field, 0);
    for (double v : next) CHECK(v == doctest::Approx(1.0 - g.dt()).epsilon(1e-15));
}

TEST_CASE("step: excursion beyond tolerance raises blow-up") {
    CoefficientSet c = heat_coeffs();
    c.f = [](const Vec&, double, double) { return -1.0; };
    c.value_interval = {0.0, 1.0};
    const GridSpec g = small_grid(2.0, 21, 100, 1.0);
    try {
        solve(c, [](const Vec&) { return 0.95; }, g);
        FAIL("expected blow-up");
    } catch (const BlowUpError& e) {
        CHECK(e.code() == ErrorCode::blow_up);
        CHECK(e.step() == 6);
    }
}

TEST_CASE("solve: stability bound enforced") {
    const CoefficientSet c = heat_coeffs();
    const GridSpec g = small_grid(8.0, 401, 100, 1.0);
    try {
        solve(c, [](const Vec&) { return 0.0; }, g);
        FAIL("expected stability violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::stability_violation);
    }
}

TEST_CASE("solve: heat kernel oracle and residuals") {
    const CoefficientSet c = heat_coeffs();
    const GridSpec g = GridSpec::stability_limited(1, 8.0, 401, 1.0, c);
    CHECK(g.steps == 1389);
    const SolutionField u = solve(c, [](const Vec& x) { return std::exp(-0.5 * x(0) * x(0)); }, g);
    double err = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        err = std::max(err, std::abs(u.value(g.steps, i) - heat_exact(g.coordinates(i)(0), 1.0)));
    }
    CHECK(err <= 5e-3);
    CHECK(u.clamp_report().clamped == 0);
    CHECK(residual_field(u).summary.max <= 5e-2);

    SolutionField exact(g, std::make_shared<const CoefficientSet>(c));
    std::vector<double> v(g.node_count());
    for (int k = 0; k <= g.steps; ++k) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = heat_exact(g.coordinates(i)(0), g.time(k));
        exact.assign_slice(k, v);
    }
    CHECK(residual_field(exact).summary.max <= 1e-2);
}

TEST_CASE("solve: grid refinement improves heat error by at least three") {
    const double coarse = heat_error(101);
    const double fine = heat_error(201);
    CHECK(coarse / fine >= 3.0);
}

TEST_CASE("solve: constants are preserved without a source") {
    CoefficientSet c = heat_coeffs(2, 0.5);
    c.lambda_fn = [](double) { return 0.8; };
    c.mu = families::constant_vector(Vec::Constant(2, 0.3));
    const GridSpec g = GridSpec::stability_limited(2, 2.0, 21, 0.5, c);
    const SolutionField u = solve(c, [](const Vec&) { return 0.4; }, g);
    for (int k = 0; k <= g.steps; ++k) {
        for (std::size_t i = 0; i < g.node_count(); ++i) CHECK(std::abs(u.value(k, i) - 0.4) <= 1e-13);
    }
    const ResidualField r = residual_field(u);
    CHECK(r.summary.max == 0.0);
}

TEST_CASE("solve: comparison of ordered data") {
    CoefficientSet c = heat_coeffs(1, 0.5);
    c.lambda_fn = [](double u) { return 0.5 / (1.0 + u); };
    c.mu = [](const Vec& x, double) -> Vec { return Vec::Constant(1, -0.5 * x(0)); };
    c.f = [](const Vec& x, double, double u) { return 0.1 * u - 0.05 * std::cos(x(0)); };
    c.value_interval = {0.0, 3.0};
    const GridSpec g = GridSpec::stability_limited(1, 4.0, 81, 0.5, c);
    auto lo = [](const Vec& x) { return 1.0 + 0.3 * std::exp(-x(0) * x(0)); };
    auto hi = [](const Vec& x) { return 1.2 + 0.5 * std::exp(-x(0) * x(0)); };
    const SolutionField u = solve(c, lo, g), v = solve(c, hi, g);
    double worst = -kInf;
    for (int k = 0; k <= g.steps; ++k)
        for (std::size_t i = 0; i < g.node_count(); ++i) worst = std::max(worst, u.value(k, i) - v.value(k, i));
    CHECK(worst <= 1e-8);
}

TEST_CASE("solve: no diffusion along the kernel direction") {
    CoefficientSet c = heat_coeffs(2, 0.5);
    c.noise_dim = 1;
    Mat s(2, 1);
    s << 0.0, 1.0;
    c.sigma = families::constant_matrix(s);
    const GridSpec g = GridSpec::stability_limited(2, 3.0, 31, 0.5, c);
    const SolutionField u = solve(c, [](const Vec& x) { return std::exp(-0.5 * x(1) * x(1)); }, g);
    double spread = 0.0;
    for (int k = 0; k <= g.steps; ++k) {
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            MultiIndex idx = g.unravel(i);
            idx[0] = 0;
            spread = std::max(spread, std::abs(u.value(k, i) - u.value(k, g.ravel(idx))));
        }
    }
    CHECK(spread <= 1e-10);
}

TEST_CASE("solve: mortgage equation with rate equal to coupon keeps zero deviation") {
    MbsModel m;
    m.rho = 0.5;
    m.coupon_tau = 0.06;
    m.rate = families::constant_rate(0.06);
    m.principal = families::gaussian_bump(1.0, Vec::Zero(1), 1.0, 2.0);
    m.value_interval = {0.5, 3.0};
    FactorDynamics d;
    d.sigma = families::constant_matrix(Mat::Identity(1, 1));
    d.mu = families::constant_vector(Vec::Zero(1));
    const CoefficientSet c = mbs_to_general(m, d);
    const GridSpec g = GridSpec::stability_limited(1, 6.0, 121, 1.0, c);
    auto shift = std::make_shared<const SmoothField>(mbs_shift(m));
    SolutionField field(g, std::make_shared<const CoefficientSet>(c), shift);
    std::vector<double> u0(g.node_count());
    for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = field.shift_value(0, i);
    field.assign_slice(0, u0);
    double worst = 0.0;
    for (int k = 0; k < g.steps; ++k) {
        step(field, k);
        for (std::size_t i = 0; i < g.node_count(); ++i) worst = std::max(worst, std::abs(field.deviation(k + 1, i)));
        REQUIRE(worst <= 1e-12);
    }
}
