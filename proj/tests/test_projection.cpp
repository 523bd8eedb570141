#include "semireg/families.hpp"
#include "semireg/projection.hpp"

#include <doctest.h>

#include <cmath>

using namespace semireg;

namespace {

FactorDynamics degenerate(const VectorField& mu) {
    FactorDynamics d;
    d.dim = 2;
    d.noise_dim = 1;
    Mat s(2, 1);
    s << 0.0, 1.0;
    d.sigma = families::constant_matrix(s);
    d.mu = mu;
    return d;
}

SimulationOptions sim(std::size_t paths, int steps) {
    SimulationOptions o;
    o.n_paths = paths;
    o.n_steps = steps;
    o.seed = 4242;
    return o;
}

}  // namespace

TEST_CASE("kernel: degenerate column") {
    Mat s(2, 1);
    s << 0.0, 1.0;
    const KernelDecomposition d = kernel_basis(s);
    CHECK(d.m == 1);
    CHECK(d.rank == 1);
    CHECK(std::abs(std::abs(d.basis(0, 0)) - 1.0) <= 1e-12);
    CHECK(std::abs(d.basis(1, 0)) <= 1e-12);
    CHECK(d.sigma_residual <= 1e-12);
    CHECK((d.M.transpose().col(0) - d.basis.col(0)).norm() <= 1e-15);
    CHECK(d.condition_number == doctest::Approx(1.0));
}

TEST_CASE("kernel: full rank and two-dimensional kernels") {
    Mat full(2, 2);
    full << 1.0, 0.3, -0.2, 0.8;
    CHECK(kernel_basis(full).m == 0);
    Mat col(3, 1);
    col << 0.0, 0.0, 1.0;
    const KernelDecomposition d = kernel_basis(col);
    REQUIRE(d.m == 2);
    CHECK(d.orthonormality_error <= 1e-12);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(d.basis(2, i)) <= 1e-12);
    Mat tilted(3, 1);
    tilted << 1.0, 2.0, -1.0;
    const KernelDecomposition t = kernel_basis(tilted);
    CHECK(t.m == 2);
    CHECK(t.sigma_residual <= 1e-12);
}

TEST_CASE("projection: zero drift keeps the kernel coordinate at the origin") {
    const FactorDynamics dyn = degenerate(families::constant_vector(Vec::Zero(2)));
    const PathEnsemble e = simulate(dyn, Vec::Zero(2), sim(2000, 50));
    const KernelDecomposition d = kernel_basis(dyn.sigma(0.0));
    const ProjectionPaths pi = projection_paths(e, d, dyn);
    for (double v : pi.pi) CHECK(v == 0.0);
    CHECK(pi.max_quadratic_variation == 0.0);
    const ContinuityReport r = continuity_diagnostic(pi.slice(50), 1);
    CHECK(r.atom_score == 1.0);
    CHECK(r.atomic);
    CHECK(r.heuristic);
}

TEST_CASE("projection: constant drift moves linearly") {
    Vec c(2);
    c << 0.7, -0.3;
    const FactorDynamics dyn = degenerate(families::constant_vector(c));
    const PathEnsemble e = simulate(dyn, Vec::Zero(2), sim(50, 40));
    const KernelDecomposition d = kernel_basis(dyn.sigma(0.0));
    const ProjectionPaths pi = projection_paths(e, d, dyn);
    const double b = d.basis(0, 0);
    for (std::size_t p = 0; p < 50; ++p)
        for (int k = 0; k <= 40; ++k) CHECK(pi.value(p, k, 0) == doctest::Approx(e.options.time(k) * 0.7 * b).epsilon(1e-12));
    CHECK(pi.max_quadratic_variation <= pi.tolerance);
}

TEST_CASE("projection: drift fed by the noisy block has a continuous law") {
    const FactorDynamics dyn = degenerate([](const Vec& x, double) -> Vec {
        Vec m(2);
        m << x(1), 0.0;
        return m;
    });
    const PathEnsemble e = simulate(dyn, Vec::Zero(2), sim(5000, 50));
    const KernelDecomposition d = kernel_basis(dyn.sigma(0.0));
    const ProjectionPaths pi = projection_paths(e, d, dyn);
    CHECK(pi.max_quadratic_variation <= pi.tolerance);
    const ContinuityReport r = continuity_diagnostic(pi.slice(50), 1);
    CHECK_FALSE(r.atomic);
    CHECK(r.atom_score <= 10.0 * r.uniform_baseline);
    double mass = 0.0;
    for (double v : r.density) mass += v * (r.bin_centers[1] - r.bin_centers[0]);
    CHECK(mass == doctest::Approx(1.0));
}

TEST_CASE("projection: full rank gives empty output") {
    FactorDynamics dyn;
    dyn.dim = 2;
    dyn.noise_dim = 2;
    dyn.sigma = families::constant_matrix(Mat::Identity(2, 2));
    dyn.mu = families::constant_vector(Vec::Zero(2));
    const PathEnsemble e = simulate(dyn, Vec::Zero(2), sim(10, 5));
    const ProjectionPaths pi = projection_paths(e, kernel_basis(dyn.sigma(0.0)), dyn);
    CHECK(pi.m == 0);
    CHECK(pi.pi.empty());
    CHECK(continuity_diagnostic({}, 0).samples == 0);
}

TEST_CASE("projection: mismatched kernel is detected") {
    const FactorDynamics dyn = degenerate(families::constant_vector(Vec::Zero(2)));
    const PathEnsemble e = simulate(dyn, Vec::Zero(2), sim(10, 20));
    KernelDecomposition wrong = kernel_basis(dyn.sigma(0.0));
    wrong.basis(0, 0) = 0.0;
    wrong.basis(1, 0) = 1.0;
    CHECK_THROWS_AS(projection_paths(e, wrong, dyn), Error);
}

TEST_CASE("continuity: too few samples") {
    std::vector<double> few(100, 0.0);
    CHECK_THROWS_AS(continuity_diagnostic(few, 1), Error);
}

TEST_CASE("counterexample: occupation converges to half the horizon") {
    const OccupationEstimate one = counterexample_run(1.0, 20000, 200, 11);
    CHECK(std::abs(one.mean - 0.5) <= 3.0 * one.se + 0.25 / 200);
    const OccupationEstimate none = counterexample_run(1.0, 1000, 50, 11, true);
    CHECK(none.mean == 0.0);
}
