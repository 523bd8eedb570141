#include "semireg/families.hpp"
#include "semireg/rng.hpp"
#include "semireg/sde_mc.hpp"

#include <doctest.h>

#include <cmath>

using namespace semireg;

namespace {

FactorDynamics brownian(int dim = 1) {
    FactorDynamics d;
    d.dim = dim;
    d.noise_dim = dim;
    d.sigma = families::constant_matrix(Mat::Identity(dim, dim));
    d.mu = families::constant_vector(Vec::Zero(dim));
    return d;
}

MbsModel benchmark(double rate = 0.03) {
    MbsModel m;
    m.rho = 0.5;
    m.coupon_tau = 0.06;
    m.rate = families::constant_rate(rate);
    m.principal = families::gaussian_bump(1.0, Vec::Zero(1), 1.0, 2.0);
    m.horizon_T = 1.0;
    m.value_interval = {0.5, 3.0};
    return m;
}

SolutionField solve_mbs(const MbsModel& m, const FactorDynamics& d, int nodes = 121) {
    const CoefficientSet c = mbs_to_general(m, d);
    const GridSpec g = GridSpec::stability_limited(1, 6.0, nodes, m.horizon_T, c);
    auto shift = std::make_shared<const SmoothField>(mbs_shift(m));
    SolutionField field(g, std::make_shared<const CoefficientSet>(c), shift);
    std::vector<double> u0(g.node_count());
    for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = field.shift_value(0, i);
    field.assign_slice(0, u0);
    for (int k = 0; k < g.steps; ++k) step(field, k);
    return field;
}

SimulationOptions sim(std::size_t paths, int steps, double T = 1.0) {
    SimulationOptions o;
    o.n_paths = paths;
    o.n_steps = steps;
    o.horizon = T;
    o.seed = 20261014;
    return o;
}

}  // namespace

TEST_CASE("philox: known-answer vectors") {
    using B = Philox4x32::Block;
    CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal stream: moments and addressability") {
    const NormalStream s(7);
    double m1 = 0.0, m2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n / 2; ++i) {
        const auto z = s.pair(static_cast<std::uint64_t>(i), 3, 0);
        m1 += z[0] + z[1];
        m2 += z[0] * z[0] + z[1] * z[1];
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::abs(m1) <= 3.0 / std::sqrt(n));
    CHECK(std::abs(m2 - 1.0) <= 0.02);
    CHECK(s.pair(5, 9, 1) == s.pair(5, 9, 1));
    CHECK(s.pair(5, 9, 1) != s.pair(5, 9, 0));
}

TEST_CASE("simulate: Brownian terminal moments") {
    const PathEnsemble e = simulate(brownian(), Vec::Constant(1, 0.3), sim(100000, 4));
    std::vector<double> xT(e.paths());
    for (std::size_t p = 0; p < e.paths(); ++p) xT[p] = e.state(p, e.steps())(0);
    const SampleStats s = sample_stats(xT);
    CHECK(std::abs(s.mean - 0.3) <= 3.0 * s.se);
    CHECK(std::abs(s.variance - 1.0) <= 0.05);
    std::vector<double> inc(e.paths());
    for (std::size_t p = 0; p < e.paths(); ++p) inc[p] = e.increment(p, 1)(0);
    CHECK(sample_stats(inc).variance == doctest::Approx(0.25).epsilon(0.05));
    for (double w : e.log_weight) CHECK(w == 0.0);
}

TEST_CASE("simulate: frozen linear drift without noise") {
    FactorDynamics d = brownian();
    d.sigma = families::constant_matrix(Mat::Zero(1, 1));
    d.mu = [](const Vec& x, double) -> Vec { return -x; };
    const int steps = 1000;
    const PathEnsemble e = simulate(d, Vec::Constant(1, 2.0), sim(3, steps));
    for (std::size_t p = 0; p < 3; ++p) {
        const double xt = e.state(p, steps)(0);
        CHECK(xt == doctest::Approx(2.0 * std::pow(1.0 - 1.0 / steps, steps)).epsilon(1e-12));
        CHECK(std::abs(xt - 2.0 * std::exp(-1.0)) <= 2.0 / steps);
    }
}

TEST_CASE("simulate: coarse increments are sums of the fine ones") {
    SimulationOptions fine = sim(20, 16), coarse = sim(20, 8);
    coarse.substeps = 2;
    const PathEnsemble f = simulate(brownian(), Vec::Zero(1), fine);
    const PathEnsemble c = simulate(brownian(), Vec::Zero(1), coarse);
    for (std::size_t p = 0; p < 20; ++p) {
        for (int k = 0; k < 8; ++k) {
            CHECK(c.increment(p, k)(0) ==
                  doctest::Approx(f.increment(p, 2 * k)(0) + f.increment(p, 2 * k + 1)(0)).epsilon(1e-13));
        }
        CHECK(c.state(p, 8)(0) == doctest::Approx(f.state(p, 16)(0)).epsilon(1e-12));
    }
}

TEST_CASE("simulate: same seed gives identical ensembles") {
    const PathEnsemble a = simulate(brownian(2), Vec::Zero(2), sim(500, 10));
    const PathEnsemble b = simulate(brownian(2), Vec::Zero(2), sim(500, 10));
    CHECK(a.states == b.states);
    CHECK(a.increments == b.increments);
    SimulationOptions other = sim(500, 10);
    other.seed = 99;
    CHECK(simulate(brownian(2), Vec::Zero(2), other).states != a.states);
}

TEST_CASE("simulate: measure Q needs a kernel") {
    SimulationOptions o = sim(10, 5);
    o.measure = Measure::Q;
    CHECK_THROWS_AS(simulate(brownian(), Vec::Zero(1), o), Error);
}

TEST_CASE("interpolant: exact at nodes and bounded by the slice") {
    const MbsModel m = benchmark();
    const FactorDynamics d = brownian();
    const SolutionField field = solve_mbs(m, d, 61);
    const GradientInterpolant gi(field);
    const GridSpec& g = field.grid();
    const int k = g.steps / 2;
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        CHECK(gi.value(g.coordinates(i), g.time(k)) == field.deviation(k, i));
        lo = std::min(lo, field.deviation(k, i));
        hi = std::max(hi, field.deviation(k, i));
    }
    for (int j = 0; j < 200; ++j) {
        const double v = gi.value(Vec::Constant(1, -5.9 + 0.059 * j), g.time(k));
        CHECK(v >= lo);
        CHECK(v <= hi);
    }
    const auto out = gi(Vec::Constant(1, 7.0), 0.5);
    CHECK(out.clamped);
    CHECK_FALSE(gi(Vec::Constant(1, 1.0), 0.5).clamped);
}

TEST_CASE("girsanov: zero kernel gives unit weights and identical Q paths") {
    const MbsModel m = benchmark();
    const FactorDynamics d = brownian();
    const CoefficientSet c = mbs_to_general(m, d);
    SolutionField field(GridSpec::stability_limited(1, 6.0, 61, 1.0, c), std::make_shared<const CoefficientSet>(c),
                        std::make_shared<const SmoothField>(mbs_shift(m)));
    for (int k = 0; k < field.slices(); ++k) {
        std::vector<double> g(field.grid().node_count());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = field.shift_value(k, i);
        field.assign_slice(k, g);
    }
    const GradientInterpolant gi(field);
    SimulationOptions o = sim(200, 20);
    const DualityKernel kernel(m, d, gi, o);
    const PathEnsemble p = simulate(d, Vec::Zero(1), o);
    for (double w : girsanov_log_weight(p, kernel)) CHECK(w == 0.0);
    o.measure = Measure::Q;
    const PathEnsemble q = simulate(d, Vec::Zero(1), o, &kernel);
    CHECK(q.states == p.states);
}

TEST_CASE("girsanov: constant kernel weights") {
    const double g = 0.7;
    const ConstantKernel kernel(Vec::Constant(1, g));
    const PathEnsemble e = simulate(brownian(), Vec::Zero(1), sim(100000, 1));
    const std::vector<double> lw = girsanov_log_weight(e, kernel);
    std::vector<double> w(lw.size());
    for (std::size_t p = 0; p < lw.size(); ++p) {
        CHECK(lw[p] == doctest::Approx(-g * e.increment(p, 0)(0) - 0.5 * g * g).epsilon(1e-14));
        w[p] = std::exp(lw[p]);
    }
    const SampleStats s = sample_stats(w);
    CHECK(std::abs(s.mean - 1.0) <= 3.0 * s.se);
}

TEST_CASE("payoff: vanishing and constant integrands") {
    MbsModel m = benchmark();
    const SimulationOptions o = sim(1, 50);
    std::vector<double> path(51, 0.4);
    MbsModel zero = m;
    zero.principal = families::zero_field();
    CHECK(payoff_discounted(path, 1, zero, o) == 0.0);
    MbsModel flat = m;
    flat.rate = families::constant_rate(m.coupon_tau);
    CHECK(payoff_discounted(path, 1, flat, o) == 0.0);

    MbsModel unit = m;
    unit.rate = families::constant_rate(0.0);
    unit.principal.value = [](const Vec&, double) { return 1.0; };
    SimulationOptions late = o;
    late.t0 = 0.25;
    CHECK(payoff_discounted(path, 1, unit, late) == doctest::Approx(0.06 * 0.75).epsilon(1e-13));
}

TEST_CASE("pricing: zero principal gives zero on both sides") {
    MbsModel m = benchmark();
    m.principal = families::zero_field();
    const FactorDynamics d = brownian();
    const SolutionField field = solve_mbs(m, d, 61);
    PriceOptions po;
    po.n_paths = 2000;
    po.n_steps = 20;
    const PriceComparison c = price_and_compare(m, d, field, Vec::Zero(1), 0.0, po);
    CHECK(c.pde_value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.q_drift.mean == 0.0);
    CHECK(c.p_weighted.mean == 0.0);
    CHECK(c.q_within);
    CHECK(c.cross_within);
}

TEST_CASE("pricing: rate equal to coupon gives zero") {
    const MbsModel m = benchmark(0.06);
    const FactorDynamics d = brownian();
    const SolutionField field = solve_mbs(m, d, 61);
    PriceOptions po;
    po.n_paths = 2000;
    po.n_steps = 20;
    const PriceComparison c = price_and_compare(m, d, field, Vec::Zero(1), 0.0, po);
    CHECK(std::abs(c.pde_value) <= 1e-12);
    CHECK(c.q_drift.mean == 0.0);
    CHECK(c.p_weighted.mean == 0.0);
}

TEST_CASE("pricing: refuses points outside the interior collar") {
    const MbsModel m = benchmark();
    const FactorDynamics d = brownian();
    const SolutionField field = solve_mbs(m, d, 61);
    try {
        price_and_compare(m, d, field, Vec::Constant(1, 5.5), 0.0, PriceOptions{});
        FAIL("expected refusal");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::extrapolation_refusal);
    }
}

TEST_CASE("pricing: benchmark estimators agree with the PDE at reduced size") {
    const MbsModel m = benchmark();
    const FactorDynamics d = brownian();
    const SolutionField field = solve_mbs(m, d);
    PriceOptions po;
    po.n_paths = 20000;
    po.n_steps = 100;
    const PriceComparison c = price_and_compare(m, d, field, Vec::Zero(1), 0.0, po);
    MESSAGE("pde ", c.pde_value, " q ", c.q_drift.mean, " +- ", c.q_drift.se, " pw ", c.p_weighted.mean, " +- ",
            c.p_weighted.se, " residual ", c.residual_max);
    CHECK(c.pde_value > 0.0);
    CHECK(c.q_within);
    CHECK(c.p_within);
    CHECK(c.cross_within);
    CHECK(std::abs(c.p_weighted.weight_mean - 1.0) <= 3.0 * c.p_weighted.weight_se);
    CHECK_FALSE(c.clamp_flag);
    const PriceComparison again = price_and_compare(m, d, field, Vec::Zero(1), 0.0, po);
    CHECK(again.q_drift.mean == c.q_drift.mean);
    CHECK(again.p_weighted.mean == c.p_weighted.mean);
}

TEST_CASE("pricing: halving the step changes the price by less than the standard error") {
    const MbsModel m = benchmark();
    const FactorDynamics d = brownian();
    const SolutionField field = solve_mbs(m, d);
    const GradientInterpolant gi(field);
    PriceOptions coarse;
    coarse.n_paths = 100000;
    coarse.n_steps = 50;
    coarse.substeps = 2;
    PriceOptions fine = coarse;
    fine.n_steps = 100;
    fine.substeps = 1;
    const PriceEstimate a = estimate_price(m, d, gi, Vec::Zero(1), 0.0, PricingMode::q_drift, coarse);
    const PriceEstimate b = estimate_price(m, d, gi, Vec::Zero(1), 0.0, PricingMode::q_drift, fine);
    MESSAGE("coarse ", a.mean, " fine ", b.mean, " se ", b.se);
    CHECK(std::abs(a.mean - b.mean) < b.se);
}
