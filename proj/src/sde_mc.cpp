#include "semireg/sde_mc.hpp"

#include "semireg/parallel.hpp"
#include "semireg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "sde_mc";
constexpr std::size_t kMaxStoredValues = 100'000'000;

// Node coordinates reproduce stored values exactly despite rounding in x/Δx.
double snap(double s) {
    const double r = std::round(s);
    return std::abs(s - r) <= 1e-9 * std::max(1.0, std::abs(r)) ? r : s;
}

}  // namespace

const char* to_string(Measure m) noexcept { return m == Measure::P ? "P" : "Q"; }

const char* to_string(PricingMode m) noexcept { return m == PricingMode::q_drift ? "q" : "pw"; }

// ---------------------------------------------------------------- interpolant

GradientInterpolant::GradientInterpolant(const SolutionField& field) : field_(&field), grid_(field.grid()) {
    const std::size_t n = grid_.node_count();
    const int dim = grid_.dim;
    const auto slices = static_cast<std::size_t>(field.slices());
    values_.resize(slices * n);
    gradient_.resize(slices * n * dim);
    for (std::size_t k = 0; k < slices; ++k) {
        const auto v = field.state_slice(static_cast<int>(k));
        std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(k * n));
    }
    parallel_for(
        slices,
        [&](std::size_t k) {
            const double* v = values_.data() + k * n;
            for (std::size_t i = 0; i < n; ++i) {
                const MultiIndex idx = grid_.unravel(i);
                for (int a = 0; a < dim; ++a) {
                    const std::size_t s = grid_.stride(a);
                    const double h = grid_.dx(a);
                    double g;
                    if (idx[a] == 0) {
                        g = (v[i + s] - v[i]) / h;
                    } else if (idx[a] == grid_.nodes[a] - 1) {
                        g = (v[i] - v[i - s]) / h;
                    } else {
                        g = (v[i + s] - v[i - s]) / (2.0 * h);
                    }
                    gradient_[(k * n + i) * dim + a] = g;
                }
            }
        },
        16);
}

Vec GradientInterpolant::node_gradient(int k, std::size_t i) const {
    const int dim = grid_.dim;
    Vec g(dim);
    const std::size_t base = (static_cast<std::size_t>(k) * grid_.node_count() + i) * dim;
    for (int a = 0; a < dim; ++a) g(a) = gradient_[base + a];
    return g;
}

GradientInterpolant::Sample GradientInterpolant::operator()(const Vec& x, double pde_time) const {
    const int dim = grid_.dim;
    Sample out;
    out.gradient = Vec::Zero(dim);
    std::array<int, kMaxDim> lo{0, 0, 0};
    std::array<double, kMaxDim> frac{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) {
        const int last = grid_.nodes[a] - 1;
        double s = snap((x(a) + grid_.half_width[a]) / grid_.dx(a));
        if (s < 0.0 || s > last) {
            if (s < -1e-9 || s > last + 1e-9) out.clamped = true;
            s = std::clamp(s, 0.0, static_cast<double>(last));
        }
        lo[a] = std::min(static_cast<int>(s), last - 1);
        frac[a] = s - lo[a];
    }
    const int steps = grid_.steps;
    const double tau = std::clamp(snap(pde_time / grid_.dt()), 0.0, static_cast<double>(steps));
    const int k0 = std::min(static_cast<int>(tau), steps - 1);
    const double ft = tau - k0;
    const std::size_t n = grid_.node_count();
    for (int corner = 0; corner < (1 << dim); ++corner) {
        double w = 1.0;
        std::size_t i = 0;
        for (int a = 0; a < dim; ++a) {
            const int bit = (corner >> a) & 1;
            w *= bit ? frac[a] : 1.0 - frac[a];
            i += static_cast<std::size_t>(lo[a] + bit) * grid_.stride(a);
        }
        if (w == 0.0) continue;
        for (int kk = 0; kk < 2; ++kk) {
            const double wt = w * (kk ? ft : 1.0 - ft);
            if (wt == 0.0) continue;
            const std::size_t k = static_cast<std::size_t>(k0 + kk);
            out.value += wt * values_[k * n + i];
            for (int a = 0; a < dim; ++a) out.gradient(a) += wt * gradient_[(k * n + i) * dim + a];
        }
    }
    return out;
}

// ---------------------------------------------------------------- kernel

DualityKernel::DualityKernel(const MbsModel& model, const FactorDynamics& dynamics, const GradientInterpolant& grad,
                             const SimulationOptions& grid)
    : model_(&model), grad_(&grad), grid_(grid) {
    if (std::abs(grid.horizon - model.horizon_T) > 1e-12 * std::max(1.0, model.horizon_T)) {
        throw Error(ErrorCode::contract_violation, kModule, "simulation horizon differs from the model horizon");
    }
    const DiscountCurve curve(model.rate, model.horizon_T);
    sigma_t_.reserve(static_cast<std::size_t>(grid.n_steps) + 1);
    xi_.reserve(static_cast<std::size_t>(grid.n_steps) + 1);
    for (int k = 0; k <= grid.n_steps; ++k) {
        const double pde_t = grid.horizon - grid.time(k);
        sigma_t_.push_back(dynamics.sigma(pde_t).transpose());
        xi_.push_back(curve.xi(pde_t));
    }
    floor_ = grid.positivity_floor >= 0.0 ? grid.positivity_floor : 1e-8 * curve.xi(0.0);
}

Vec DualityKernel::operator()(const Vec& x, int k, std::size_t path, bool* clamped) const {
    const double pde_t = grid_.horizon - grid_.time(k);
    const GradientInterpolant::Sample s = (*grad_)(x, pde_t);
    if (clamped) *clamped = s.clamped;
    const double u = s.value + model_->principal(x, pde_t) + xi_[static_cast<std::size_t>(k)];
    if (!(u >= floor_)) {
        std::ostringstream os;
        os.precision(17);
        os << "U+h+xi = " << u << " below the positivity floor " << floor_ << " on path " << path << " at step "
           << k;
        throw Error(ErrorCode::degeneracy, kModule, os.str());
    }
    return model_->rho * (sigma_t_[static_cast<std::size_t>(k)] * s.gradient) / u;
}

// ---------------------------------------------------------------- paths

Vec PathEnsemble::state(std::size_t path, int k) const {
    Vec x(dim);
    const std::size_t base = (path * static_cast<std::size_t>(options.n_steps + 1) + static_cast<std::size_t>(k)) * dim;
    for (int a = 0; a < dim; ++a) x(a) = states[base + a];
    return x;
}

Vec PathEnsemble::increment(std::size_t path, int k) const {
    Vec w(noise_dim);
    const std::size_t base = (path * static_cast<std::size_t>(options.n_steps) + static_cast<std::size_t>(k)) * noise_dim;
    for (int j = 0; j < noise_dim; ++j) w(j) = increments[base + j];
    return w;
}

std::span<const double> PathEnsemble::path_states(std::size_t path) const {
    const std::size_t len = static_cast<std::size_t>(options.n_steps + 1) * dim;
    return {states.data() + path * len, len};
}

namespace {

void check_options(const SimulationOptions& o) {
    if (o.n_steps < 1 || o.substeps < 1 || o.n_paths < 1 || !(o.horizon > o.t0)) {
        throw Error(ErrorCode::parameter_violation, kModule, "steps, substeps and paths must be positive and t0 < T");
    }
}

/// Shared Euler–Maruyama engine; every output pointer is optional.
class PathEngine {
public:
    PathEngine(const FactorDynamics& dyn, const Vec& x0, const SimulationOptions& opt, const GirsanovKernel* kernel)
        : dyn_(dyn), x0_(x0), opt_(opt), kernel_(kernel), noise_(opt.seed) {
        check_options(opt);
        if (x0.size() != dyn.dim) throw Error(ErrorCode::contract_violation, kModule, "x0 dimension mismatch");
        if (opt.measure == Measure::Q && !kernel) {
            throw Error(ErrorCode::contract_violation, kModule, "measure Q requires the gradient of the solution");
        }
        for (int k = 0; k < opt.n_steps; ++k) sigma_.push_back(dyn.sigma(opt.horizon - opt.time(k)));
    }

    struct PathOut {
        double* states = nullptr;
        double* increments = nullptr;
        double log_weight = 0.0;
        double integral = 0.0;
        std::size_t clamped = 0;
        std::size_t kernel_calls = 0;
    };

    using Integrand = std::function<double(int, double, const Vec&)>;

    void run(std::size_t path, bool weigh, const Integrand* integrand, PathOut& out) const {
        const int N = dyn_.dim, d = dyn_.noise_dim;
        const double ds = opt_.dt();
        const double sub_scale = std::sqrt(ds / opt_.substeps);
        Vec x = x0_;
        Vec dw(d);
        std::array<double, 2 * kMaxDim> z{};
        auto record = [&](int k) {
            if (out.states) {
                for (int a = 0; a < N; ++a) out.states[static_cast<std::size_t>(k) * N + a] = x(a);
            }
            if (integrand) {
                const double w = (k == 0 || k == opt_.n_steps) ? 0.5 * ds : ds;
                out.integral += w * (*integrand)(k, opt_.time(k), x);
            }
        };
        record(0);
        for (int k = 0; k < opt_.n_steps; ++k) {
            dw.setZero();
            for (int m = 0; m < opt_.substeps; ++m) {
                noise_.fill(path, static_cast<std::uint32_t>(k * opt_.substeps + m), d, z);
                for (int j = 0; j < d; ++j) dw(j) += sub_scale * z[j];
            }
            const double pde_t = opt_.horizon - opt_.time(k);
            Vec drift = dyn_.mu(x, pde_t);
            const bool need_kernel = opt_.measure == Measure::Q || weigh;
            if (need_kernel) {
                bool clamped = false;
                const Vec g = (*kernel_)(x, k, path, &clamped);
                ++out.kernel_calls;
                if (clamped) ++out.clamped;
                if (opt_.measure == Measure::Q) drift -= sigma_[static_cast<std::size_t>(k)] * g;
                if (weigh) out.log_weight += -g.dot(dw) - 0.5 * g.squaredNorm() * ds;
            }
            if (out.increments) {
                for (int j = 0; j < d; ++j) out.increments[static_cast<std::size_t>(k) * d + j] = dw(j);
            }
            x += drift * ds + sigma_[static_cast<std::size_t>(k)] * dw;
            record(k + 1);
        }
    }

private:
    const FactorDynamics& dyn_;
    Vec x0_;
    SimulationOptions opt_;
    const GirsanovKernel* kernel_;
    NormalStream noise_;
    std::vector<Mat> sigma_;
};

}  // namespace

PathEnsemble simulate(const FactorDynamics& dynamics, const Vec& x0, const SimulationOptions& options,
                      const GirsanovKernel* kernel) {
    const PathEngine engine(dynamics, x0, options, kernel);
    PathEnsemble e;
    e.dim = dynamics.dim;
    e.noise_dim = dynamics.noise_dim;
    e.options = options;
    e.measure = options.measure;
    const std::size_t per_path = static_cast<std::size_t>(options.n_steps + 1) * e.dim;
    const std::size_t per_inc = static_cast<std::size_t>(options.n_steps) * e.noise_dim;
    if (options.n_paths * (per_path + per_inc) > kMaxStoredValues) {
        throw Error(ErrorCode::parameter_violation, kModule,
                    "ensemble too large to store; use the streaming estimators");
    }
    e.states.resize(options.n_paths * per_path);
    e.increments.resize(options.n_paths * per_inc);
    e.log_weight.assign(options.n_paths, 0.0);
    std::vector<std::size_t> clamped(options.n_paths, 0), calls(options.n_paths, 0);
    parallel_for(
        options.n_paths,
        [&](std::size_t p) {
            PathEngine::PathOut out;
            out.states = e.states.data() + p * per_path;
            out.increments = e.increments.data() + p * per_inc;
            engine.run(p, false, nullptr, out);
            clamped[p] = out.clamped;
            calls[p] = out.kernel_calls;
        },
        64);
    for (std::size_t p = 0; p < options.n_paths; ++p) {
        e.clamped += clamped[p];
        e.kernel_evaluations += calls[p];
    }
    return e;
}

std::vector<double> girsanov_log_weight(const PathEnsemble& ensemble, const GirsanovKernel& kernel) {
    if (ensemble.measure != Measure::P) {
        throw Error(ErrorCode::contract_violation, kModule, "reweighting needs an ensemble simulated under P");
    }
    const double ds = ensemble.options.dt();
    std::vector<double> out(ensemble.paths(), 0.0);
    parallel_for(
        ensemble.paths(),
        [&](std::size_t p) {
            double lw = 0.0;
            for (int k = 0; k < ensemble.steps(); ++k) {
                const Vec g = kernel(ensemble.state(p, k), k, p);
                lw += -g.dot(ensemble.increment(p, k)) - 0.5 * g.squaredNorm() * ds;
            }
            out[p] = lw;
        },
        64);
    return out;
}

// ---------------------------------------------------------------- payoff

PayoffSchedule::PayoffSchedule(const MbsModel& model, const SimulationOptions& grid) : model_(&model), grid_(grid) {
    check_options(grid);
    const DiscountCurve curve(model.rate, model.horizon_T);
    const double T = model.horizon_T;
    const double ds = grid.dt();
    weights_.resize(static_cast<std::size_t>(grid.n_steps) + 1);
    for (int k = 0; k <= grid.n_steps; ++k) {
        const double s = grid.time(k);
        const double trap = (k == 0 || k == grid.n_steps) ? 0.5 * ds : ds;
        weights_[static_cast<std::size_t>(k)] = trap * (model.coupon_tau - curve.rate(T - s)) * curve.discount(grid.t0, s);
    }
}

double PayoffSchedule::operator()(std::span<const double> states, int dim) const {
    if (states.size() != static_cast<std::size_t>(grid_.n_steps + 1) * dim) {
        throw Error(ErrorCode::contract_violation, kModule, "path does not span the step grid");
    }
    double total = 0.0;
    Vec x(dim);
    for (int k = 0; k <= grid_.n_steps; ++k) {
        const double w = weights_[static_cast<std::size_t>(k)];
        if (w == 0.0) continue;
        for (int a = 0; a < dim; ++a) x(a) = states[static_cast<std::size_t>(k) * dim + a];
        total += w * model_->principal(x, model_->horizon_T - grid_.time(k));
    }
    return total;
}

double payoff_discounted(std::span<const double> states, int dim, const MbsModel& model,
                         const SimulationOptions& grid) {
    return PayoffSchedule(model, grid)(states, dim);
}

SampleStats sample_stats(std::span<const double> values) {
    SampleStats s;
    s.n = values.size();
    if (s.n == 0) return s;
    s.mean = pairwise_sum(values.data(), s.n) / static_cast<double>(s.n);
    if (s.n < 2) return s;
    std::vector<double> sq(s.n);
    for (std::size_t i = 0; i < s.n; ++i) sq[i] = (values[i] - s.mean) * (values[i] - s.mean);
    s.variance = pairwise_sum(sq.data(), s.n) / static_cast<double>(s.n - 1);
    s.se = std::sqrt(s.variance / static_cast<double>(s.n));
    return s;
}

std::vector<double> path_integrals(const FactorDynamics& dynamics, const Vec& x0, const SimulationOptions& options,
                                   const std::function<double(int k, double s, const Vec& x)>& integrand) {
    if (options.measure == Measure::Q) {
        throw Error(ErrorCode::contract_violation, kModule, "streamed path integrals run under P");
    }
    const PathEngine engine(dynamics, x0, options, nullptr);
    std::vector<double> out(options.n_paths, 0.0);
    const PathEngine::Integrand fn = integrand;
    parallel_for(
        options.n_paths,
        [&](std::size_t p) {
            PathEngine::PathOut o;
            engine.run(p, false, &fn, o);
            out[p] = o.integral;
        },
        256);
    return out;
}

// ---------------------------------------------------------------- pricing

PriceEstimate estimate_price(const MbsModel& model, const FactorDynamics& dynamics, const GradientInterpolant& grad,
                             const Vec& x0, double t, PricingMode mode, const PriceOptions& options) {
    SimulationOptions sim;
    sim.t0 = t;
    sim.horizon = model.horizon_T;
    sim.n_steps = options.n_steps;
    sim.substeps = options.substeps;
    sim.n_paths = options.n_paths;
    sim.seed = options.seed;
    sim.positivity_floor = options.positivity_floor;
    sim.measure = mode == PricingMode::q_drift ? Measure::Q : Measure::P;
    const DualityKernel kernel(model, dynamics, grad, sim);
    const PayoffSchedule schedule(model, sim);
    const PathEngine engine(dynamics, x0, sim, &kernel);
    const PathEngine::Integrand payoff = [&](int k, double s, const Vec& x) {
        const double trap = (k == 0 || k == sim.n_steps) ? 0.5 * sim.dt() : sim.dt();
        return schedule.weight(k) / trap * model.principal(x, model.horizon_T - s);
    };
    const bool weigh = mode == PricingMode::p_weighted;
    std::vector<double> y(sim.n_paths), w(sim.n_paths);
    std::vector<std::size_t> clamped(sim.n_paths), calls(sim.n_paths);
    parallel_for(
        sim.n_paths,
        [&](std::size_t p) {
            PathEngine::PathOut o;
            engine.run(p, weigh, &payoff, o);
            w[p] = std::exp(o.log_weight);
            y[p] = w[p] * o.integral;
            clamped[p] = o.clamped;
            calls[p] = o.kernel_calls;
        },
        256);
    PriceEstimate est;
    est.mode = mode;
    const SampleStats ys = sample_stats(y), ws = sample_stats(w);
    est.mean = ys.mean;
    est.se = ys.se;
    est.weight_mean = ws.mean;
    est.weight_se = ws.se;
    for (std::size_t p = 0; p < sim.n_paths; ++p) {
        est.clamped += clamped[p];
        est.kernel_evaluations += calls[p];
    }
    return est;
}

PriceComparison price_and_compare(const MbsModel& model, const FactorDynamics& dynamics, const SolutionField& field,
                                  const Vec& x0, double t, const PriceOptions& options,
                                  std::optional<PricingMode> only) {
    const GridSpec& g = field.grid();
    if (std::abs(g.horizon - model.horizon_T) > 1e-12 * std::max(1.0, model.horizon_T)) {
        throw Error(ErrorCode::contract_violation, kModule, "field horizon differs from the model horizon");
    }
    if (x0.size() != g.dim) throw Error(ErrorCode::contract_violation, kModule, "x0 dimension mismatch");
    const int collar = default_collar(g);
    for (int a = 0; a < g.dim; ++a) {
        const double edge = g.half_width[a] - collar * g.dx(a);
        if (!(std::abs(x0(a)) <= edge)) {
            std::ostringstream os;
            os << "x0 component " << a << " = " << x0(a) << " lies outside the interior collar |x| <= " << edge;
            throw Error(ErrorCode::extrapolation_refusal, kModule, os.str());
        }
    }
    if (!(t >= 0.0 && t < model.horizon_T)) {
        throw Error(ErrorCode::parameter_violation, kModule, "valuation time must lie in [0, T)");
    }
    const GradientInterpolant grad(field);
    PriceComparison c;
    c.x0 = x0;
    c.t = t;
    c.pde_value = grad.value(x0, model.horizon_T - t);
    c.residual_max = residual_field(field).summary.max;
    c.allowance = 10.0 * c.residual_max;
    const bool run_q = !only || *only == PricingMode::q_drift;
    const bool run_p = !only || *only == PricingMode::p_weighted;
    if (run_q) c.q_drift = estimate_price(model, dynamics, grad, x0, t, PricingMode::q_drift, options);
    c.p_weighted.mode = PricingMode::p_weighted;
    if (run_p) c.p_weighted = estimate_price(model, dynamics, grad, x0, t, PricingMode::p_weighted, options);
    auto z = [](double err, double se) { return se > 0.0 ? err / se : (err == 0.0 ? 0.0 : kInf); };
    c.q_error = std::abs(c.q_drift.mean - c.pde_value);
    c.p_error = std::abs(c.p_weighted.mean - c.pde_value);
    c.q_z = z(c.q_error, c.q_drift.se);
    c.p_z = z(c.p_error, c.p_weighted.se);
    const double combined = std::hypot(c.q_drift.se, c.p_weighted.se);
    const double cross = std::abs(c.q_drift.mean - c.p_weighted.mean);
    c.cross_z = z(cross, combined);
    c.q_within = run_q && c.q_error <= 3.0 * c.q_drift.se + c.allowance;
    c.p_within = run_p && c.p_error <= 3.0 * c.p_weighted.se + c.allowance;
    c.cross_within = run_q && run_p && cross <= 3.0 * combined;
    if (!(run_q && run_p)) c.cross_z = 0.0;
    c.clamp_flag = c.q_drift.clamp_fraction() > 0.01 || c.p_weighted.clamp_fraction() > 0.01;
    return c;
}

}  // namespace semireg
