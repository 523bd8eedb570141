#include "semireg/regularity.hpp"

#include "semireg/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "regularity_diag";

int resolve_collar(const GridSpec& g, int collar) { return std::max(1, collar < 0 ? default_collar(g) : collar); }

bool index_inside(const GridSpec& g, const MultiIndex& idx, int collar) {
    for (int a = 0; a < g.dim; ++a) {
        if (idx[a] < collar || idx[a] > g.nodes[a] - 1 - collar) return false;
    }
    return true;
}

struct Offset {
    MultiIndex delta{0, 0, 0};
    double length2 = 0.0;
};

std::vector<Offset> second_difference_offsets(const GridSpec& g, double cap, bool diagonals) {
    std::vector<Offset> out;
    for (int a = 0; a < g.dim; ++a) {
        const double h = g.dx(a);
        for (int m = 1; m * h <= cap * (1.0 + 1e-12); ++m) {
            Offset o;
            o.delta[a] = m;
            o.length2 = (m * h) * (m * h);
            out.push_back(o);
        }
    }
    if (diagonals) {
        for (int a = 0; a < g.dim; ++a) {
            for (int b = a + 1; b < g.dim; ++b) {
                const double step2 = g.dx(a) * g.dx(a) + g.dx(b) * g.dx(b);
                for (int m = 1; m * m * step2 <= cap * cap * (1.0 + 1e-12); ++m) {
                    for (int sign : {1, -1}) {
                        Offset o;
                        o.delta[a] = m;
                        o.delta[b] = sign * m;
                        o.length2 = m * m * step2;
                        out.push_back(o);
                    }
                }
            }
        }
    }
    return out;
}

SliceNorms norms_from_values(const GridSpec& g, std::span<const double> v, int collar) {
    SliceNorms n;
    const int dim = g.dim;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!g.inside_collar(i, collar)) continue;
        n.value = std::max(n.value, std::abs(v[i]));
        Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1> grad(dim);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim> hess(dim, dim);
        for (int a = 0; a < dim; ++a) {
            const std::size_t sa = g.stride(a);
            const double h = g.dx(a);
            grad(a) = (v[i + sa] - v[i - sa]) / (2.0 * h);
            hess(a, a) = (v[i + sa] - 2.0 * v[i] + v[i - sa]) / (h * h);
            for (int b = a + 1; b < dim; ++b) {
                const std::size_t sb = g.stride(b);
                hess(a, b) = hess(b, a) =
                    (v[i + sa + sb] - v[i + sa - sb] - v[i - sa + sb] + v[i - sa - sb]) / (4.0 * h * g.dx(b));
            }
        }
        n.gradient = std::max(n.gradient, grad.norm());
        if (dim == 1) {
            n.hessian = std::max(n.hessian, std::abs(hess(0, 0)));
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(hess), Eigen::EigenvaluesOnly);
            n.hessian = std::max(n.hessian, es.eigenvalues().cwiseAbs().maxCoeff());
        }
    }
    return n;
}

double spectral_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    const Eigen::MatrixXd d = m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
    return svd.singularValues()(0);
}

std::vector<int> lattice_indices(int lo, int hi, int count) {
    std::vector<int> out;
    if (hi < lo) return out;
    const int span = hi - lo;
    const int n = std::min(count, span + 1);
    for (int j = 0; j < n; ++j) {
        const int idx = n == 1 ? lo + span / 2 : lo + static_cast<int>(std::lround(static_cast<double>(span) * j / (n - 1)));
        if (out.empty() || out.back() != idx) out.push_back(idx);
    }
    return out;
}

std::vector<Vec> lattice_points(const GridSpec& g, int per_axis) {
    const int collar = resolve_collar(g, -1);
    std::vector<std::vector<int>> axes(g.dim);
    for (int a = 0; a < g.dim; ++a) axes[a] = lattice_indices(collar, g.nodes[a] - 1 - collar, per_axis);
    std::vector<Vec> pts;
    MultiIndex pos{0, 0, 0};
    std::function<void(int)> rec = [&](int a) {
        if (a == g.dim) {
            pts.push_back(g.coordinates(g.ravel(pos)));
            return;
        }
        for (int idx : axes[a]) {
            pos[a] = idx;
            rec(a + 1);
        }
    };
    rec(0);
    return pts;
}

std::vector<double> time_lattice(double horizon, int n) {
    std::vector<double> t(static_cast<std::size_t>(std::max(n, 1)));
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = horizon * static_cast<double>(j) / t.size();
    return t;
}

std::vector<double> value_lattice(const Interval& I, int n) {
    std::vector<double> u(static_cast<std::size_t>(std::max(n, 2)));
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = I.lo + I.length() * j / (u.size() - 1);
    return u;
}

/// Unit directions used for the momentum lattice.
std::vector<Vec> direction_lattice(int dim, int count) {
    std::vector<Vec> dirs;
    if (dim == 1) {
        dirs.push_back(Vec::Constant(1, 1.0));
        dirs.push_back(Vec::Constant(1, -1.0));
        return dirs;
    }
    if (dim == 2) {
        for (int k = 0; k < count; ++k) {
            const double th = 2.0 * std::numbers::pi * k / count;
            Vec d(2);
            d << std::cos(th), std::sin(th);
            dirs.push_back(d);
        }
        return dirs;
    }
    // Fibonacci sphere
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        Vec d(3);
        d << r * std::cos(golden * k), r * std::sin(golden * k), z;
        dirs.push_back(d);
    }
    return dirs;
}

}  // namespace

SemiconvexityConstants second_difference_constants(const GridSpec& g, std::span<const double> v,
                                                   const SecondDifferenceOptions& options) {
    if (v.size() != g.node_count()) {
        throw Error(ErrorCode::contract_violation, kModule, "slice size does not match the grid");
    }
    double min_hw = g.half_width[0];
    for (int a = 1; a < g.dim; ++a) min_hw = std::min(min_hw, g.half_width[a]);
    const double cap = options.offset_cap < 0.0 ? 0.25 * min_hw : options.offset_cap;
    const int collar = resolve_collar(g, options.collar);
    const std::vector<Offset> offsets = second_difference_offsets(g, cap, options.diagonals);
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const MultiIndex idx = g.unravel(i);
        if (!index_inside(g, idx, collar)) continue;
        for (const Offset& o : offsets) {
            MultiIndex plus = idx, minus = idx;
            for (int a = 0; a < g.dim; ++a) {
                plus[a] += o.delta[a];
                minus[a] -= o.delta[a];
            }
            if (!index_inside(g, plus, collar) || !index_inside(g, minus, collar)) continue;
            const double q = (v[g.ravel(plus)] + v[g.ravel(minus)] - 2.0 * v[i]) / o.length2;
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
    }
    SemiconvexityConstants out;
    if (lo == kInf) return out;
    out.lower = std::max(0.0, -lo);
    out.upper = std::max(0.0, hi);
    return out;
}

SemiconvexityConstants second_difference_constants(const SolutionField& field, int k,
                                                   const SecondDifferenceOptions& options) {
    const std::vector<double> v = field.slice_values(k);
    return second_difference_constants(field.grid(), v, options);
}

bool Envelope::finite() const {
    return std::isfinite(m0) && std::isfinite(rate) && std::isfinite(offset) && std::isfinite(max_slack);
}

double Envelope::operator()(double t) const { return m0 * std::exp(rate * t) + offset; }

Envelope envelope_fit(std::span<const double> L, std::span<const double> t) {
    if (L.size() != t.size()) throw Error(ErrorCode::contract_violation, kModule, "series and times differ in length");
    if (L.size() < 4) throw Error(ErrorCode::parameter_violation, kModule, "envelope fit needs at least 4 samples");
    const std::size_t n = L.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(L[i]) || !std::isfinite(t[i])) {
            throw Error(ErrorCode::contract_violation, kModule, "non-finite sample in envelope series");
        }
    }
    Envelope env;
    const auto [mn, mx] = std::minmax_element(L.begin(), L.end());
    if (*mx == 0.0 && *mn == 0.0) return env;
    if (*mx - *mn <= 1e-14 * std::max(std::abs(*mx), std::abs(*mn))) {
        env.offset = *mx;
        return env;
    }

    double mean = 0.0;
    for (double v : L) mean += v;
    mean /= static_cast<double>(n);
    const double t0 = *std::min_element(t.begin(), t.end());
    const double span = *std::max_element(t.begin(), t.end()) - t0;
    if (!(span > 0.0)) throw Error(ErrorCode::contract_violation, kModule, "envelope times must not coincide");

    // For fixed C, (M₀, C₀) is linear least squares; M₀ < 0 falls back to a constant.
    struct Profile {
        double m0, c0, sse;
    };
    auto profile = [&](double rate) {
        Eigen::MatrixXd A(n, 2);
        Eigen::VectorXd b(n);
        for (std::size_t i = 0; i < n; ++i) {
            A(i, 0) = std::exp(rate * (t[i] - t0));
            A(i, 1) = 1.0;
            b(i) = L[i];
        }
        Eigen::Vector2d x = A.colPivHouseholderQr().solve(b);
        Profile p{x(0), x(1), 0.0};
        if (!(p.m0 >= 0.0) || !std::isfinite(p.m0)) p = {0.0, mean, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const double r = p.m0 * std::exp(rate * (t[i] - t0)) + p.c0 - L[i];
            p.sse += r * r;
        }
        return p;
    };

    const double c_max = 50.0 / span;
    constexpr int kScan = 401;
    double best_c = 0.0, best_sse = kInf;
    int best_j = 0;
    for (int j = 0; j < kScan; ++j) {
        const double c = -c_max + 2.0 * c_max * j / (kScan - 1);
        const double s = profile(c).sse;
        if (s < best_sse) {
            best_sse = s;
            best_c = c;
            best_j = j;
        }
    }
    const double cell = 2.0 * c_max / (kScan - 1);
    double a = -c_max + cell * std::max(0, best_j - 1);
    double b = -c_max + cell * std::min(kScan - 1, best_j + 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = profile(x1).sse, f2 = profile(x2).sse;
    for (int it = 0; it < 200 && b - a > 1e-13 * (1.0 + std::abs(a)); ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = profile(x1).sse;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = profile(x2).sse;
        }
    }
    const double refined = 0.5 * (a + b);
    if (profile(refined).sse <= best_sse) best_c = refined;
    const Profile p = profile(best_c);

    env.rate = p.m0 == 0.0 ? 0.0 : best_c;
    env.m0 = p.m0 * std::exp(-env.rate * t0);
    env.offset = p.c0;
    env.rss = p.sse;
    double shift = -kInf;
    for (std::size_t i = 0; i < n; ++i) shift = std::max(shift, L[i] - env(t[i]));
    env.offset += shift;
    // Large M₀ with a small rate cancels against C₀; re-shift on the evaluated form.
    for (int pass = 0; pass < 4; ++pass) {
        double deficit = 0.0;
        for (std::size_t i = 0; i < n; ++i) deficit = std::max(deficit, L[i] - env(t[i]));
        if (deficit == 0.0) break;
        env.offset += std::max(deficit, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(env.offset));
    }
    env.max_slack = 0.0;
    for (std::size_t i = 0; i < n; ++i) env.max_slack = std::max(env.max_slack, env(t[i]) - L[i]);
    return env;
}

LipschitzReport lipschitz_estimates(const SolutionField& field, int collar) {
    const GridSpec& g = field.grid();
    LipschitzReport rep;
    rep.collar = resolve_collar(g, collar);
    rep.lip_x.assign(static_cast<std::size_t>(field.slices()), 0.0);
    std::vector<double> prev, cur;
    for (int k = 0; k < field.slices(); ++k) {
        cur = field.slice_values(k);
        double lx = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const MultiIndex idx = g.unravel(i);
            if (!index_inside(g, idx, rep.collar)) continue;
            for (int a = 0; a < g.dim; ++a) {
                MultiIndex nb = idx;
                ++nb[a];
                if (!index_inside(g, nb, rep.collar)) continue;
                lx = std::max(lx, std::abs(cur[g.ravel(nb)] - cur[i]) / g.dx(a));
            }
            if (k > 0) rep.lip_t = std::max(rep.lip_t, std::abs(cur[i] - prev[i]) / g.dt());
        }
        rep.lip_x[static_cast<std::size_t>(k)] = lx;
        prev.swap(cur);
    }
    return rep;
}

SliceNorms slice_norms(const SolutionField& field, int k, int collar) {
    const std::vector<double> v = field.slice_values(k);
    return norms_from_values(field.grid(), v, resolve_collar(field.grid(), collar));
}

SliceNorms datum_norms(const GridSpec& grid, const InitialDatum& u0, int collar) {
    std::vector<double> v(grid.node_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = u0(grid.coordinates(i));
    return norms_from_values(grid, v, resolve_collar(grid, collar));
}

double BoundConstants::alpha(double t) const {
    const double growth = b1 == 0.0 ? t : std::expm1(b1 * t) / b1;
    return growth * (c0_init * b1 + b2);
}

BoundConstants bound_constants(const CoefficientSet& coeffs, const GridSpec& box, const SliceNorms& u0,
                               const SliceNorms& solution, const LatticeOptions& lattice) {
    std::vector<std::string> missing;
    const TimeModuli& m = coeffs.moduli;
    if (!m.sigma_sigma_t) missing.push_back("L(sigma sigma^T)");
    if (!m.sigma_t) missing.push_back("L(sigma^T)");
    if (!m.w) missing.push_back("L(w)");
    if (!m.mu) missing.push_back("L(mu)");
    if (!m.f) missing.push_back("L(f)");
    if (!missing.empty()) {
        std::string names;
        for (const auto& s : missing) names += (names.empty() ? "" : ", ") + s;
        throw Error(ErrorCode::configuration_error, kModule, "missing time modulus: " + names);
    }
    if (!std::isfinite(u0.gradient) || !std::isfinite(u0.hessian) || !std::isfinite(solution.w2())) {
        throw Error(ErrorCode::contract_violation, kModule, "norms must be finite");
    }

    BoundConstants out;
    out.lattice = lattice;
    out.moduli = m;
    out.solution_w1 = solution.w1();
    out.solution_w2 = solution.w2();
    const int dim = coeffs.dim;
    const double p_cap = u0.gradient, x_cap = u0.hessian;
    const std::vector<Vec> xs = lattice_points(box, lattice.x_per_axis);
    const std::vector<double> ts = time_lattice(coeffs.horizon, lattice.t_samples);
    const std::vector<double> us = value_lattice(coeffs.value_interval, lattice.u_samples);
    const std::vector<Vec> dirs = direction_lattice(dim, lattice.p_directions);

    double h_sup = -kInf, h_inf = kInf;
    for (double t : ts) {
        const HamiltonianFrame frame(coeffs, t);
        const Mat A = frame.diffusion();
        const double trace_extreme = 0.5 * x_cap * A.trace();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(A)};
        out.sigma_t_sup = std::max(out.sigma_t_sup, spectral_norm(frame.sigma().transpose()));
        for (const Vec& x : xs) {
            const Vec mu = coeffs.mu(x, t);
            const Vec w = coeffs.w_at(x, t);
            out.w_sup = std::max(out.w_sup, w.norm());
            const Vec sw = frame.sigma() * w;
            for (double u : us) {
                const double lam = coeffs.lambda_fn(u), eta = coeffs.eta_fn(u);
                const Vec b = mu + eta * sw;
                auto q = [&](const Vec& p) { return b.dot(p) + lam * p.dot(A * p); };
                double qmax = 0.0, qmin = 0.0;  // p = 0
                ++out.lattice_points;
                auto consider = [&](const Vec& p) {
                    const double v = q(p);
                    qmax = std::max(qmax, v);
                    qmin = std::min(qmin, v);
                    ++out.lattice_points;
                };
                if (p_cap > 0.0) {
                    if (b.norm() > 0.0) {
                        consider(p_cap * b.normalized());
                        consider(-p_cap * b.normalized());
                    }
                    for (int i = 0; i < dim; ++i) {
                        const Vec v = es.eigenvectors().col(i);
                        consider(p_cap * v);
                        consider(-p_cap * v);
                    }
                    for (int r = 1; r <= lattice.p_radii; ++r) {
                        const double rad = p_cap * r / lattice.p_radii;
                        for (const Vec& d : dirs) consider(rad * d);
                    }
                    if (lam != 0.0) {
                        Vec p = Vec::Zero(dim);
                        const double amax = es.eigenvalues().cwiseAbs().maxCoeff();
                        for (int i = 0; i < dim; ++i) {
                            const double a = es.eigenvalues()(i);
                            if (std::abs(a) <= 1e-10 * amax) continue;
                            const Vec v = es.eigenvectors().col(i);
                            p -= (v.dot(b) / (2.0 * lam * a)) * v;
                        }
                        if (p.norm() <= p_cap) consider(p);
                    }
                }
                const double fv = coeffs.f(x, t, u);
                h_sup = std::max(h_sup, trace_extreme + qmax + fv);
                h_inf = std::min(h_inf, -trace_extreme + qmin + fv);
            }
        }
    }
    out.c0_sup = h_sup;
    out.c0_neg_inf = -h_inf;
    out.c0_init = std::max({0.0, h_sup, -h_inf});

    const std::vector<double> fine_u = value_lattice(coeffs.value_interval, 257);
    for (double u : fine_u) {
        out.lambda_sup = std::max(out.lambda_sup, std::abs(coeffs.lambda_fn(u)));
        out.eta_sup = std::max(out.eta_sup, std::abs(coeffs.eta_fn(u)));
    }
    for (double t : time_lattice(coeffs.horizon, 64)) {
        out.sigma_t_sup = std::max(out.sigma_t_sup, spectral_norm(coeffs.sigma(t).transpose()));
    }

    const double s1 = out.solution_w1, s2 = out.solution_w2;
    const double ls = out.lambda_sup, es_ = out.eta_sup, st = out.sigma_t_sup, ws = out.w_sup;
    out.b1 = ls * st * st * s1 * s1 + es_ * st * ws * s1 + *m.f;
    out.b2 = *m.sigma_sigma_t * (0.5 * dim * dim * s2 + ls * s1 * s1) + s1 * (*m.sigma_t * ws + *m.w * st + *m.mu);
    return out;
}

std::vector<std::string> estimate_time_moduli(CoefficientSet& coeffs, const GridSpec& box,
                                              const LatticeOptions& lattice) {
    std::vector<std::string> estimated;
    TimeModuli& m = coeffs.moduli;
    const int nt = std::max(8, 4 * lattice.t_samples);
    std::vector<double> ts(static_cast<std::size_t>(nt) + 1);
    for (int j = 0; j <= nt; ++j) ts[j] = coeffs.horizon * (1.0 - 1e-9) * j / nt;
    const std::vector<Vec> xs = lattice_points(box, std::min(lattice.x_per_axis, 21));
    const std::vector<double> us = value_lattice(coeffs.value_interval, lattice.u_samples);

    auto quotient_max = [&](auto&& g) {
        double best = 0.0;
        for (std::size_t j = 0; j + 1 < ts.size(); ++j) best = std::max(best, g(ts[j], ts[j + 1]) / (ts[j + 1] - ts[j]));
        return best;
    };
    if (!m.sigma_sigma_t) {
        m.sigma_sigma_t = quotient_max([&](double a, double b) {
            const Mat sa = coeffs.sigma(a), sb = coeffs.sigma(b);
            return spectral_norm(sb * sb.transpose() - sa * sa.transpose());
        });
        estimated.push_back("sigma_sigma_t");
    }
    if (!m.sigma_t) {
        m.sigma_t = quotient_max([&](double a, double b) {
            return spectral_norm((coeffs.sigma(b) - coeffs.sigma(a)).transpose());
        });
        estimated.push_back("sigma_t");
    }
    if (!m.mu) {
        m.mu = quotient_max([&](double a, double b) {
            double best = 0.0;
            for (const Vec& x : xs) best = std::max(best, (coeffs.mu(x, b) - coeffs.mu(x, a)).norm());
            return best;
        });
        estimated.push_back("mu");
    }
    if (!m.w) {
        m.w = quotient_max([&](double a, double b) {
            double best = 0.0;
            for (const Vec& x : xs) best = std::max(best, (coeffs.w_at(x, b) - coeffs.w_at(x, a)).norm());
            return best;
        });
        estimated.push_back("w");
    }
    if (!m.f) {
        m.f = quotient_max([&](double a, double b) {
            double best = 0.0;
            for (const Vec& x : xs)
                for (double u : us) best = std::max(best, std::abs(coeffs.f(x, b, u) - coeffs.f(x, a, u)));
            return best;
        });
        estimated.push_back("f");
    }
    return estimated;
}

DeviationReport initial_deviation_check(const SolutionField& field, double c0, double tolerance, double fraction,
                                        int collar) {
    const GridSpec& g = field.grid();
    const int cl = resolve_collar(g, collar);
    DeviationReport rep;
    rep.c0 = c0;
    rep.tolerance = tolerance;
    const std::vector<double> u0 = field.slice_values(0);
    for (int k = 1; k <= g.steps; ++k) {
        const double t = g.time(k);
        if (t > fraction * g.horizon * (1.0 + 1e-12)) break;
        const std::vector<double> u = field.slice_values(k);
        double dev = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (g.inside_collar(i, cl)) dev = std::max(dev, std::abs(u[i] - u0[i]));
        }
        const double bound = c0 * t + tolerance;
        rep.times.push_back(t);
        rep.deviation.push_back(dev);
        rep.bound.push_back(bound);
        const double ratio = bound > 0.0 ? dev / bound : (dev > 0.0 ? kInf : 0.0);
        rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        if (dev > bound) rep.holds = false;
    }
    return rep;
}

TimeLipschitzCheck time_lipschitz_check(double lip_t, const BoundConstants& bounds, double horizon,
                                        double tolerance) {
    TimeLipschitzCheck c;
    c.lip_t = lip_t;
    c.bound = bounds.c0_init + bounds.alpha(horizon) + tolerance;
    c.within = lip_t <= c.bound;
    c.within_twice = lip_t <= 2.0 * c.bound;
    return c;
}

RegularityReport regularity_report(const SolutionField& field, int slices, const SecondDifferenceOptions& options) {
    const GridSpec& g = field.grid();
    RegularityReport rep;
    rep.collar = resolve_collar(g, options.collar);
    double min_hw = g.half_width[0];
    for (int a = 1; a < g.dim; ++a) min_hw = std::min(min_hw, g.half_width[a]);
    rep.offset_cap = options.offset_cap < 0.0 ? 0.25 * min_hw : options.offset_cap;

    std::vector<int> ks;
    if (slices <= 0 || slices >= field.slices()) {
        for (int k = 0; k < field.slices(); ++k) ks.push_back(k);
    } else {
        for (int j = 0; j < slices; ++j) {
            const int k = static_cast<int>(std::lround(static_cast<double>(g.steps) * j / std::max(1, slices - 1)));
            if (ks.empty() || ks.back() != k) ks.push_back(k);
        }
    }
    const LipschitzReport lip = lipschitz_estimates(field, rep.collar);
    rep.lip_t = lip.lip_t;
    rep.times.resize(ks.size());
    rep.lower.resize(ks.size());
    rep.upper.resize(ks.size());
    rep.lip_x.resize(ks.size());
    rep.w2.resize(ks.size());
    parallel_for(
        ks.size(),
        [&](std::size_t j) {
            const int k = ks[j];
            const SemiconvexityConstants sc = second_difference_constants(field, k, options);
            rep.times[j] = g.time(k);
            rep.lower[j] = sc.lower;
            rep.upper[j] = sc.upper;
            rep.lip_x[j] = lip.lip_x[static_cast<std::size_t>(k)];
            rep.w2[j] = slice_norms(field, k, rep.collar).w2();
        },
        1);
    if (ks.size() >= 4) {
        rep.lower_envelope = envelope_fit(rep.lower, rep.times);
        rep.upper_envelope = envelope_fit(rep.upper, rep.times);
    }
    return rep;
}

}  // namespace semireg
