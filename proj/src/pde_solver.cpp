#include "semireg/pde_solver.hpp"

#include "semireg/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "pde_solver";

int hessian_slots(int n) { return n * (n + 1) / 2; }

int sym_slot(int n, int a, int b) {
    if (a > b) std::swap(a, b);
    // row-major upper triangle
    return a * n - a * (a - 1) / 2 + (b - a);
}

}  // namespace

double GridSpec::min_dx() const {
    double m = dx(0);
    for (int a = 1; a < dim; ++a) m = std::min(m, dx(a));
    return m;
}

std::size_t GridSpec::node_count() const {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(nodes[a]);
    return n;
}

std::size_t GridSpec::stride(int axis) const {
    std::size_t s = 1;
    for (int a = 0; a < axis; ++a) s *= static_cast<std::size_t>(nodes[a]);
    return s;
}

MultiIndex GridSpec::unravel(std::size_t i) const {
    MultiIndex idx{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
        idx[a] = static_cast<int>(i % nodes[a]);
        i /= nodes[a];
    }
    return idx;
}

std::size_t GridSpec::ravel(const MultiIndex& idx) const {
    std::size_t i = 0;
    for (int a = dim - 1; a >= 0; --a) i = i * nodes[a] + idx[a];
    return i;
}

Vec GridSpec::coordinates(std::size_t i) const {
    const MultiIndex idx = unravel(i);
    Vec x(dim);
    for (int a = 0; a < dim; ++a) x(a) = -half_width[a] + idx[a] * dx(a);
    return x;
}

bool GridSpec::on_boundary(std::size_t i) const { return !inside_collar(i, 1); }

bool GridSpec::inside_collar(std::size_t i, int collar) const {
    const MultiIndex idx = unravel(i);
    for (int a = 0; a < dim; ++a) {
        if (idx[a] < collar || idx[a] > nodes[a] - 1 - collar) return false;
    }
    return true;
}

void GridSpec::validate() const {
    if (dim < 1 || dim > kMaxDim) {
        throw Error(ErrorCode::contract_violation, kModule, "grid dimension must be 1, 2 or 3");
    }
    for (int a = 0; a < dim; ++a) {
        if (nodes[a] < 5 || nodes[a] % 2 == 0) {
            throw Error(ErrorCode::contract_violation, kModule,
                        "nodes per axis must be odd and at least 5 so the origin is a node");
        }
        if (!(half_width[a] > 0.0)) {
            throw Error(ErrorCode::contract_violation, kModule, "half-width must be positive");
        }
    }
    if (steps < 1 || !(horizon > 0.0)) {
        throw Error(ErrorCode::contract_violation, kModule, "need steps >= 1 and horizon > 0");
    }
}

double max_diffusion_norm(const CoefficientSet& coeffs, int samples) {
    double m = 0.0;
    for (int k = 0; k <= samples; ++k) {
        // σ is only required on [0,T); stay just inside the right end.
        const double t = std::min(coeffs.horizon * k / samples, coeffs.horizon * (1.0 - 1e-12));
        const Mat s = coeffs.sigma(t);
        const Eigen::MatrixXd a = Eigen::MatrixXd(s) * Eigen::MatrixXd(s).transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
        m = std::max(m, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    return m;
}

void check_stability(const GridSpec& grid, const CoefficientSet& coeffs, double theta) {
    if (!(theta > 0.0 && theta <= 0.45)) {
        throw Error(ErrorCode::parameter_violation, kModule, "safety factor theta must lie in (0, 0.45]");
    }
    const double norm = max_diffusion_norm(coeffs);
    if (norm == 0.0) return;
    const double limit = theta * grid.min_dx() * grid.min_dx() / (grid.dim * norm);
    if (grid.dt() > limit) {
        std::ostringstream os;
        os.precision(17);
        os << "time step " << grid.dt() << " exceeds parabolic bound " << limit;
        throw Error(ErrorCode::stability_violation, kModule, os.str());
    }
}

GridSpec GridSpec::stability_limited(int dim, double half_width, int nodes_per_axis, double horizon,
                                     const CoefficientSet& coeffs, double theta) {
    GridSpec g;
    g.dim = dim;
    g.half_width = {half_width, half_width, half_width};
    g.nodes = {1, 1, 1};
    for (int a = 0; a < dim; ++a) g.nodes[a] = nodes_per_axis;
    g.horizon = horizon;
    const double norm = max_diffusion_norm(coeffs);
    if (norm == 0.0) {
        g.steps = 1;
    } else {
        const double limit = theta * g.min_dx() * g.min_dx() / (dim * norm);
        g.steps = std::max(1, static_cast<int>(std::ceil(horizon / limit)));
        while (g.dt() > limit) ++g.steps;
    }
    return g;
}

SolutionField::SolutionField(GridSpec grid, std::shared_ptr<const CoefficientSet> coeffs,
                             std::shared_ptr<const SmoothField> shift)
    : grid_(grid), coeffs_(std::move(coeffs)), shift_(std::move(shift)) {
    grid_.validate();
    const std::size_t total = static_cast<std::size_t>(slices()) * grid_.node_count();
    state_.assign(total, 0.0);
    if (shift_) {
        shift_values_.assign(total, 0.0);
        for (int k = 0; k < slices(); ++k) {
            const double t = grid_.time(k);
            auto sl = shift_slice(k);
            for (std::size_t i = 0; i < sl.size(); ++i) sl[i] = (*shift_)(grid_.coordinates(i), t);
        }
    }
}

double SolutionField::value(int k, std::size_t i) const {
    return state_[offset(k) + i] + shift_value(k, i);
}

std::vector<double> SolutionField::slice_values(int k) const {
    std::vector<double> out(grid_.node_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(k, i);
    return out;
}

std::span<double> SolutionField::shift_slice(int k) {
    if (shift_values_.empty()) return {};
    return {shift_values_.data() + offset(k), grid_.node_count()};
}

std::span<const double> SolutionField::shift_slice(int k) const {
    if (shift_values_.empty()) return {};
    return {shift_values_.data() + offset(k), grid_.node_count()};
}

void SolutionField::assign_slice(int k, std::span<const double> u) {
    if (u.size() != grid_.node_count()) {
        throw Error(ErrorCode::contract_violation, kModule, "slice size mismatch");
    }
    auto st = state_slice(k);
    for (std::size_t i = 0; i < u.size(); ++i) st[i] = u[i] - shift_value(k, i);
}

DiscreteJet discrete_jet(const SolutionField& field, int k, std::size_t i) {
    const GridSpec& g = field.grid();
    if (g.on_boundary(i)) {
        throw Error(ErrorCode::contract_violation, kModule, "stencil requested at a boundary node");
    }
    const int n = g.dim;
    const auto v = field.state_slice(k);
    DiscreteJet jet;
    jet.u = v[i];
    jet.p_back.resize(n);
    jet.p_fwd.resize(n);
    jet.p_central.resize(n);
    jet.hessian.resize(n, n);
    for (int a = 0; a < n; ++a) {
        const std::size_t sa = g.stride(a);
        const double h = g.dx(a);
        const double vp = v[i + sa], vm = v[i - sa];
        jet.p_back(a) = (v[i] - vm) / h;
        jet.p_fwd(a) = (vp - v[i]) / h;
        jet.p_central(a) = (vp - vm) / (2.0 * h);
        jet.hessian(a, a) = (vp - 2.0 * v[i] + vm) / (h * h);
        for (int b = a + 1; b < n; ++b) {
            const std::size_t sb = g.stride(b);
            const double cross = (v[i + sa + sb] - v[i + sa - sb] - v[i - sa + sb] + v[i - sa - sb]) /
                                 (4.0 * h * g.dx(b));
            jet.hessian(a, b) = jet.hessian(b, a) = cross;
        }
    }
    if (const SmoothField* s = field.shift()) {
        const Vec x = g.coordinates(i);
        const double t = g.time(k);
        const Vec gs = s->grad(x, t);
        jet.u += field.shift_value(k, i);
        jet.p_back += gs;
        jet.p_fwd += gs;
        jet.p_central += gs;
        jet.hessian += s->hess(x, t);
    }
    return jet;
}

namespace {

double frame_hamiltonian(const SolutionField& field, const HamiltonianFrame& frame, int k, std::size_t i) {
    const DiscreteJet jet = discrete_jet(field, k, i);
    return frame.eval(field.grid().coordinates(i), jet.u, jet.p_back, jet.p_fwd, jet.p_central, jet.hessian);
}

double shift_rate(const SolutionField& field, int k, std::size_t i) {
    const SmoothField* s = field.shift();
    if (!s) return 0.0;
    return s->dt(field.grid().coordinates(i), field.grid().time(k));
}

void extrapolate_boundary(const GridSpec& g, std::span<double> v) {
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t sa = g.stride(a);
        const int last = g.nodes[a] - 1;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const int ia = g.unravel(i)[a];
            if (ia == 0) {
                v[i] = 2.0 * v[i + sa] - v[i + 2 * sa];
            } else if (ia == last) {
                v[i] = 2.0 * v[i - sa] - v[i - 2 * sa];
            }
        }
    }
}

}  // namespace

double discretize_hamiltonian(const SolutionField& field, int k, std::size_t i) {
    const CoefficientSet* c = field.coefficients();
    if (!c) throw Error(ErrorCode::contract_violation, kModule, "field carries no coefficients");
    return frame_hamiltonian(field, HamiltonianFrame(*c, field.grid().time(k)), k, i);
}

std::vector<double> step(SolutionField& field, int k) {
    const GridSpec& g = field.grid();
    if (k < 0 || k >= g.steps) throw Error(ErrorCode::contract_violation, kModule, "step index out of range");
    const CoefficientSet* c = field.coefficients();
    if (!c) throw Error(ErrorCode::contract_violation, kModule, "field carries no coefficients");

    const HamiltonianFrame frame(*c, g.time(k));
    const double dt = g.dt();
    const auto cur = field.state_slice(k);
    auto next = field.state_slice(k + 1);
    const std::size_t n = g.node_count();

    parallel_for(n, [&](std::size_t i) {
        if (g.on_boundary(i)) return;
        const double rhs = frame_hamiltonian(field, frame, k, i) + shift_rate(field, k, i);
        next[i] = cur[i] - dt * rhs;
    });
    extrapolate_boundary(g, next);

    const Interval I = c->value_interval;
    ClampReport& report = field.clamp_report();
    report.tolerance = 1e-9 * I.length();
    const auto shift_next = field.shift_slice(k + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double gv = shift_next.empty() ? 0.0 : shift_next[i];
        const double u = next[i] + gv;
        ++report.updates;
        double target = u;
        if (!(u >= I.lo)) {
            target = I.lo;
        } else if (!(u <= I.hi)) {
            target = I.hi;
        } else {
            continue;
        }
        const double excursion = std::isfinite(u) ? std::abs(u - target) : kInf;
        if (excursion > report.tolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "value " << u << " left the value interval [" << I.lo << ", " << I.hi << "] at node " << i
               << " (x = " << g.coordinates(i).transpose() << ") on step " << k + 1;
            throw BlowUpError(i, k + 1, u, os.str());
        }
        next[i] = target - gv;
        ++report.clamped;
        report.max_excursion = std::max(report.max_excursion, excursion);
    }
    return field.slice_values(k + 1);
}

SolutionField solve(const CoefficientSet& coeffs, const InitialDatum& u0, const GridSpec& grid,
                    const SolveOptions& options, std::shared_ptr<const SmoothField> shift) {
    coeffs.validate();
    grid.validate();
    if (grid.dim != coeffs.dim) {
        throw Error(ErrorCode::contract_violation, kModule, "grid and coefficient dimensions differ");
    }
    if (std::abs(grid.horizon - coeffs.horizon) > 1e-12 * coeffs.horizon) {
        throw Error(ErrorCode::contract_violation, kModule, "grid horizon differs from coefficient horizon");
    }
    check_stability(grid, coeffs, options.theta);

    SolutionField field(grid, std::make_shared<const CoefficientSet>(coeffs), std::move(shift));
    const Interval I = coeffs.value_interval;
    std::vector<double> first(grid.node_count());
    for (std::size_t i = 0; i < first.size(); ++i) {
        first[i] = u0(grid.coordinates(i));
        if (!(first[i] >= I.lo - 1e-9 * I.length() && first[i] <= I.hi + 1e-9 * I.length())) {
            std::ostringstream os;
            os << "initial datum " << first[i] << " outside the value interval at node " << i;
            throw Error(ErrorCode::domain_violation, kModule, os.str());
        }
    }
    field.assign_slice(0, first);
    for (int k = 0; k < grid.steps; ++k) step(field, k);
    if (options.cache_derivatives) field.compute_derivatives();
    return field;
}

void SolutionField::compute_derivatives() {
    const int n = grid_.dim;
    const std::size_t nodes = grid_.node_count();
    const int hs = hessian_slots(n);
    gradient_.assign(static_cast<std::size_t>(slices()) * nodes * n, 0.0);
    hessian_.assign(static_cast<std::size_t>(slices()) * nodes * hs, 0.0);
    for (int k = 0; k < slices(); ++k) {
        parallel_for(nodes, [&](std::size_t i) {
            MultiIndex idx = grid_.unravel(i);
            for (int a = 0; a < n; ++a) idx[a] = std::clamp(idx[a], 1, grid_.nodes[a] - 2);
            const std::size_t src = grid_.ravel(idx);
            const DiscreteJet jet = discrete_jet(*this, k, src);
            Vec grad = jet.p_central;
            Mat hess = jet.hessian;
            if (src != i && shift_) {
                // Shift derivatives are exact at the node itself.
                const Vec x = grid_.coordinates(i), xs = grid_.coordinates(src);
                const double t = grid_.time(k);
                grad += shift_->grad(x, t) - shift_->grad(xs, t);
                hess += shift_->hess(x, t) - shift_->hess(xs, t);
            }
            const std::size_t base = (offset(k) + i);
            for (int a = 0; a < n; ++a) {
                gradient_[base * n + a] = grad(a);
                for (int b = a; b < n; ++b) hessian_[base * hs + sym_slot(n, a, b)] = hess(a, b);
            }
        });
    }
}

Vec SolutionField::gradient(int k, std::size_t i) const {
    if (!has_derivatives()) throw Error(ErrorCode::contract_violation, kModule, "derivatives not cached");
    const int n = grid_.dim;
    Vec g(n);
    const std::size_t base = (offset(k) + i) * n;
    for (int a = 0; a < n; ++a) g(a) = gradient_[base + a];
    return g;
}

Mat SolutionField::hessian(int k, std::size_t i) const {
    if (!has_derivatives()) throw Error(ErrorCode::contract_violation, kModule, "derivatives not cached");
    const int n = grid_.dim;
    const int hs = hessian_slots(n);
    Mat h(n, n);
    const std::size_t base = (offset(k) + i) * hs;
    for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) h(a, b) = h(b, a) = hessian_[base + sym_slot(n, a, b)];
    }
    return h;
}

int default_collar(const GridSpec& grid) {
    int m = grid.nodes[0];
    for (int a = 1; a < grid.dim; ++a) m = std::min(m, grid.nodes[a]);
    return std::max(1, (m - 1) / 10);
}

ResidualField residual_field(const SolutionField& field, int collar) {
    const GridSpec& g = field.grid();
    const CoefficientSet* c = field.coefficients();
    if (!c) throw Error(ErrorCode::contract_violation, kModule, "field carries no coefficients");
    if (collar < 0) collar = default_collar(g);
    collar = std::max(collar, 1);

    ResidualField out;
    out.grid = g;
    const std::size_t n = g.node_count();
    const int interior_times = std::max(0, g.steps - 1);
    out.values.assign(static_cast<std::size_t>(interior_times) * n, std::numeric_limits<double>::quiet_NaN());
    out.summary.collar = collar;
    double sum = 0.0;
    for (int k = 1; k < g.steps; ++k) {
        const HamiltonianFrame frame(*c, g.time(k));
        const auto prev = field.state_slice(k - 1);
        const auto next = field.state_slice(k + 1);
        double* row = out.values.data() + static_cast<std::size_t>(k - 1) * n;
        parallel_for(n, [&](std::size_t i) {
            if (g.on_boundary(i)) return;
            const double dvdt = (next[i] - prev[i]) / (2.0 * g.dt());
            row[i] = std::abs(dvdt + shift_rate(field, k, i) + frame_hamiltonian(field, frame, k, i));
        });
        for (std::size_t i = 0; i < n; ++i) {
            if (!g.inside_collar(i, collar)) continue;
            out.summary.max = std::max(out.summary.max, row[i]);
            sum += row[i];
            ++out.summary.count;
        }
    }
    out.summary.mean = out.summary.count ? sum / out.summary.count : 0.0;
    return out;
}

}  // namespace semireg
