#include "semireg/model.hpp"

#include "semireg/quadrature.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <memory>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "model";

int numerical_rank(const Mat& m) {
    if (m.size() == 0) return 0;
    const Eigen::MatrixXd dense = m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
    const auto& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    if (smax == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > 1e-10 * smax) ++rank;
    }
    return rank;
}

std::vector<Vec> probe_points(int dim) {
    std::vector<Vec> pts;
    pts.push_back(Vec::Zero(dim));
    for (int a = 0; a < dim; ++a) {
        for (double s : {-1.0, 1.0}) {
            Vec x = Vec::Zero(dim);
            x(a) = s;
            pts.push_back(x);
        }
    }
    return pts;
}

}  // namespace

Vec CoefficientSet::w_at(const Vec& x, double t) const {
    if (!w) return Vec::Zero(noise_dim);
    return w(x, t);
}

void CoefficientSet::validate() const {
    if (dim < 1 || dim > kMaxDim || noise_dim < 1 || noise_dim > dim) {
        throw Error(ErrorCode::contract_violation, kModule,
                    "dimensions must satisfy 1 <= d <= N <= 3");
    }
    if (!sigma || !mu || !lambda_fn || !eta_fn || !f) {
        throw Error(ErrorCode::configuration_error, kModule, "coefficient callable missing");
    }
    if (!(domain.lo < domain.hi)) {
        throw Error(ErrorCode::domain_violation, kModule, "domain interval must satisfy a < b");
    }
    if (!value_interval.finite() || value_interval.lo > value_interval.hi) {
        throw Error(ErrorCode::domain_violation, kModule, "value interval must be a bounded closed interval");
    }
    if (!(value_interval.lo > domain.lo) || !(value_interval.hi < domain.hi)) {
        throw Error(ErrorCode::domain_violation, kModule,
                    "value interval must sit strictly inside the domain interval");
    }
    if (!(horizon > 0.0)) {
        throw Error(ErrorCode::parameter_violation, kModule, "horizon must be positive");
    }
    int rank0 = -1;
    constexpr int kSamples = 16;
    for (int k = 0; k < kSamples; ++k) {
        const double t = horizon * k / kSamples;
        const Mat s = sigma(t);
        if (s.rows() != dim || s.cols() != noise_dim) {
            throw Error(ErrorCode::contract_violation, kModule, "sigma(t) has wrong shape");
        }
        const int rk = numerical_rank(s);
        if (rank0 < 0) rank0 = rk;
        if (rk != rank0) {
            throw Error(ErrorCode::contract_violation, kModule, "sigma(t) must have constant rank on [0,T)");
        }
        if (range_compatible && w) {
            // w ∈ Im(σᵀ)  ⇔  w is orthogonal to Ker(σ).
            const Eigen::MatrixXd st = Eigen::MatrixXd(s).transpose();
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(st, Eigen::ComputeFullU);
            for (const Vec& x : probe_points(dim)) {
                const Eigen::VectorXd wv = w(x, t);
                Eigen::VectorXd proj = Eigen::VectorXd::Zero(noise_dim);
                for (int i = 0; i < rk; ++i) {
                    proj += svd.matrixU().col(i) * svd.matrixU().col(i).dot(wv);
                }
                if ((wv - proj).norm() > 1e-10 * (1.0 + wv.norm())) {
                    throw Error(ErrorCode::contract_violation, kModule, "w(x,t) outside Im(sigma^T)");
                }
            }
        }
    }
}

Vec SmoothField::grad(const Vec& x, double t) const {
    if (gradient) return gradient(x, t);
    const double step = std::cbrt(std::numeric_limits<double>::epsilon()) * scale;
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp(i) += step;
        xm(i) -= step;
        g(i) = (value(xp, t) - value(xm, t)) / (2.0 * step);
    }
    return g;
}

Mat SmoothField::hess(const Vec& x, double t) const {
    if (hessian) return hessian(x, t);
    // Second differences need a larger step than first ones: roundoff scales
    // like eps/step², truncation like step².
    const double step = std::pow(std::numeric_limits<double>::epsilon(), 0.25) * scale;
    const Eigen::Index n = x.size();
    Mat h(n, n);
    const double f0 = value(x, t);
    for (Eigen::Index i = 0; i < n; ++i) {
        Vec xp = x, xm = x;
        xp(i) += step;
        xm(i) -= step;
        h(i, i) = (value(xp, t) - 2.0 * f0 + value(xm, t)) / (step * step);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            Vec pp = x, pm = x, mp = x, mm = x;
            pp(i) += step; pp(j) += step;
            pm(i) += step; pm(j) -= step;
            mp(i) -= step; mp(j) += step;
            mm(i) -= step; mm(j) -= step;
            h(i, j) = h(j, i) =
                (value(pp, t) - value(pm, t) - value(mp, t) + value(mm, t)) / (4.0 * step * step);
        }
    }
    return h;
}

double SmoothField::dt(const Vec& x, double t) const {
    if (time_derivative) return time_derivative(x, t);
    const double step = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(t));
    return (value(x, t + step) - value(x, t - step)) / (2.0 * step);
}

DiscountCurve::DiscountCurve(RateCurve rate, double horizon)
    : rate_(std::move(rate)), horizon_(horizon) {
    if (!rate_.r) throw Error(ErrorCode::configuration_error, kModule, "rate curve missing");
}

double DiscountCurve::integral(double a, double b) const {
    return integrate_adaptive([this](double s) { return rate_(s); }, a, b, 1e-12,
                              std::span<const double>(rate_.breakpoints));
}

double DiscountCurve::xi(double t) const { return std::exp(integral(0.0, t)); }

double DiscountCurve::discount(double t, double s) const {
    // ∫ₜˢ r(T−κ)dκ = ∫_{T−s}^{T−t} r(v)dv
    return std::exp(-integral(horizon_ - s, horizon_ - t));
}

DiscountPair discount_and_xi(const MbsModel& model) {
    auto curve = std::make_shared<DiscountCurve>(model.rate, model.horizon_T);
    return DiscountPair{
        [curve](double t) { return curve->xi(t); },
        [curve](double t, double s) { return curve->discount(t, s); },
    };
}

void MbsModel::validate(int dim) const {
    if (!(rho > 0.0 && rho < 1.0)) {
        throw Error(ErrorCode::parameter_violation, kModule, "rho must lie in (0, 1)");
    }
    if (!(coupon_tau > 0.0)) {
        throw Error(ErrorCode::parameter_violation, kModule, "coupon rate tau must be positive");
    }
    if (!(horizon_T > 0.0)) {
        throw Error(ErrorCode::parameter_violation, kModule, "horizon T must be positive");
    }
    if (!rate.r || !principal.value) {
        throw Error(ErrorCode::configuration_error, kModule, "rate or principal missing");
    }
    if (!(value_interval.lo > 0.0)) {
        throw Error(ErrorCode::positivity_violation, kModule,
                    "u = U + h + xi must stay positive: value interval lower end must be > 0");
    }
    // h ≥ 0 and h(·,0) ≡ 0 on a probe set.
    for (const Vec& x : probe_points(dim)) {
        if (std::abs(principal(x, 0.0)) > 1e-14) {
            throw Error(ErrorCode::contract_violation, kModule, "principal h must vanish at t = 0");
        }
        for (double t : {0.25 * horizon_T, 0.5 * horizon_T, horizon_T}) {
            const double hv = principal(x, t);
            if (!std::isfinite(hv) || hv < 0.0) {
                throw Error(ErrorCode::contract_violation, kModule, "principal h must be finite and >= 0");
            }
            const Vec g = principal.grad(x, t);
            const Mat hh = principal.hess(x, t);
            if (!g.allFinite() || !hh.allFinite() || !std::isfinite(principal.dt(x, t))) {
                throw Error(ErrorCode::contract_violation, kModule, "principal h must be C^{2,1}");
            }
        }
    }
}

double hamiltonian_eval(const Vec& x, double t, double u, const Vec& p, const Mat& X,
                        const CoefficientSet& coeffs) {
    if (!coeffs.domain.contains_open(u)) {
        std::ostringstream os;
        os << "u = " << u << " outside (" << coeffs.domain.lo << ", " << coeffs.domain.hi << ")";
        throw Error(ErrorCode::domain_violation, kModule, os.str());
    }
    const double scale = 1.0 + X.cwiseAbs().maxCoeff();
    if ((X - X.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error(ErrorCode::contract_violation, kModule, "X must be symmetric");
    }
    if (p.size() != coeffs.dim || X.rows() != coeffs.dim || X.cols() != coeffs.dim || x.size() != coeffs.dim) {
        throw Error(ErrorCode::contract_violation, kModule, "argument dimension mismatch");
    }
    return HamiltonianFrame(coeffs, t).eval(x, u, p, X);
}

HamiltonianFrame::HamiltonianFrame(const CoefficientSet& coeffs, double t)
    : coeffs_(&coeffs), t_(t), sigma_(coeffs.sigma(t)) {
    diffusion_ = sigma_ * sigma_.transpose();
}

double HamiltonianFrame::eval(const Vec& x, double u, const Vec& p_back, const Vec& p_fwd,
                              const Vec& p_central, const Mat& X) const {
    const CoefficientSet& c = *coeffs_;
    const double trace_term = -0.5 * (diffusion_.cwiseProduct(X)).sum();
    const Vec mu = c.mu(x, t_);
    double drift = 0.0;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        drift += mu(j) * (mu(j) > 0.0 ? p_back(j) : p_fwd(j));
    }
    const Vec stp = sigma_.transpose() * p_central;
    const double quad = c.lambda_fn(u) * stp.squaredNorm();
    double cross = 0.0;
    if (c.w) {
        cross = c.eta_fn(u) * stp.dot(c.w(x, t_));
    }
    return trace_term + drift + quad + cross + c.f(x, t_, u);
}

CoefficientSet mbs_to_general(const MbsModel& model, const FactorDynamics& dyn) {
    model.validate(dyn.dim);
    if (!dyn.sigma || !dyn.mu) {
        throw Error(ErrorCode::configuration_error, kModule, "factor dynamics missing sigma or mu");
    }
    auto curve = std::make_shared<DiscountCurve>(model.rate, model.horizon_T);
    const double rho = model.rho;
    const double tau = model.coupon_tau;
    const SmoothField h = model.principal;
    const TimeMatrix sigma = dyn.sigma;
    const VectorField mu = dyn.mu;

    CoefficientSet c;
    c.dim = dyn.dim;
    c.noise_dim = dyn.noise_dim;
    c.sigma = sigma;
    c.mu = [mu](const Vec& x, double t) -> Vec { return -mu(x, t); };
    c.w = [h, sigma](const Vec& x, double t) -> Vec { return sigma(t).transpose() * h.grad(x, t); };
    c.lambda_fn = [rho](double u) { return rho / u; };
    c.eta_fn = [rho](double u) { return -2.0 * rho / u; };
    c.f = [h, sigma, mu, curve, rho, tau](const Vec& x, double t, double u) {
        const Mat s = sigma(t);
        const Vec gh = h.grad(x, t);
        const Vec w = s.transpose() * gh;
        const double xi = curve->xi(t);
        const double r = curve->rate(t);
        const double lin = -h.dt(x, t) + 0.5 * ((s * s.transpose()).cwiseProduct(h.hess(x, t))).sum() +
                           mu(x, t).dot(gh);
        return lin - r * xi + rho * w.squaredNorm() / u + r * (u - xi) - tau * h(x, t);
    };
    c.domain = {0.0, kInf};
    c.value_interval = model.value_interval;
    c.range_compatible = true;
    c.horizon = model.horizon_T;
    if (dyn.sigma_time_lipschitz) {
        c.moduli.sigma_t = dyn.sigma_time_lipschitz;
    }
    if (dyn.mu_time_lipschitz) {
        c.moduli.mu = dyn.mu_time_lipschitz;
    }
    return c;
}

SmoothField mbs_shift(const MbsModel& model) {
    auto curve = std::make_shared<DiscountCurve>(model.rate, model.horizon_T);
    const SmoothField h = model.principal;
    SmoothField g;
    g.scale = h.scale;
    g.value = [h, curve](const Vec& x, double t) { return h(x, t) + curve->xi(t); };
    g.gradient = [h](const Vec& x, double t) { return h.grad(x, t); };
    g.hessian = [h](const Vec& x, double t) { return h.hess(x, t); };
    g.time_derivative = [h, curve](const Vec& x, double t) { return h.dt(x, t) + curve->xi_prime(t); };
    return g;
}

}  // namespace semireg
