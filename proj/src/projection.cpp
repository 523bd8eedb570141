#include "semireg/projection.hpp"

#include "semireg/families.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "projection_check";

}  // namespace

KernelDecomposition kernel_basis(const Mat& sigma) {
    const Eigen::MatrixXd s = sigma;
    const int N = static_cast<int>(s.rows());
    KernelDecomposition d;
    d.dim = N;
    const Eigen::MatrixXd A = s * s.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    d.eigenvalues = es.eigenvalues();
    const double norm = d.eigenvalues.cwiseAbs().maxCoeff();
    d.threshold = 1e-10 * norm;
    std::vector<int> kernel, range;
    for (int i = 0; i < N; ++i) (d.eigenvalues(i) <= d.threshold ? kernel : range).push_back(i);
    d.m = static_cast<int>(kernel.size());
    d.rank = N - d.m;
    d.basis.resize(N, d.m);
    d.M.resize(N, N);
    int row = 0;
    for (int i : kernel) {
        d.basis.col(row) = es.eigenvectors().col(i);
        d.M.row(row++) = es.eigenvectors().col(i).transpose();
    }
    for (int i : range) d.M.row(row++) = es.eigenvectors().col(i).transpose();

    for (int i = 0; i < d.m; ++i) {
        d.sigma_residual = std::max(d.sigma_residual, (s.transpose() * d.basis.col(i)).cwiseAbs().maxCoeff());
    }
    if (d.m > 0) {
        d.orthonormality_error =
            (d.basis.transpose() * d.basis - Eigen::MatrixXd::Identity(d.m, d.m)).cwiseAbs().maxCoeff();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.M);
    const auto sv = svd.singularValues();
    d.condition_number = sv(0) / sv(sv.size() - 1);
    const double scale = std::max(1.0, std::sqrt(norm));
    if (d.sigma_residual > 1e-12 * scale || d.orthonormality_error > 1e-12) {
        std::ostringstream os;
        os << "kernel basis fails its checks: max|sigma^T b| = " << d.sigma_residual
           << ", orthonormality error = " << d.orthonormality_error;
        throw Error(ErrorCode::decomposition_inconsistency, kModule, os.str());
    }
    return d;
}

std::vector<double> ProjectionPaths::slice(int k) const {
    std::vector<double> out(paths * static_cast<std::size_t>(m));
    for (std::size_t p = 0; p < paths; ++p)
        for (int i = 0; i < m; ++i) out[p * m + i] = value(p, k, i);
    return out;
}

ProjectionPaths projection_paths(const PathEnsemble& e, const KernelDecomposition& d, const FactorDynamics& dyn) {
    if (e.measure != Measure::P) {
        throw Error(ErrorCode::contract_violation, kModule, "projection paths need an ensemble simulated under P");
    }
    if (d.dim != e.dim) throw Error(ErrorCode::contract_violation, kModule, "decomposition dimension mismatch");
    ProjectionPaths out;
    out.m = d.m;
    out.paths = e.paths();
    out.steps = e.steps();
    if (d.m == 0) return out;
    const auto n1 = static_cast<std::size_t>(e.steps() + 1);
    out.pi.resize(out.paths * n1 * d.m);
    out.mu_pi.resize(out.paths * static_cast<std::size_t>(e.steps()) * d.m);
    const double ds = e.options.dt();
    double x_max = 0.0;
    for (double v : e.states) x_max = std::max(x_max, std::abs(v));
    const double eps = std::numeric_limits<double>::epsilon();
    out.tolerance = e.steps() * std::pow(64.0 * eps * (1.0 + x_max), 2);
    for (std::size_t p = 0; p < out.paths; ++p) {
        double qv = 0.0;
        for (int k = 0; k <= e.steps(); ++k) {
            const Vec x = e.state(p, k);
            const Eigen::VectorXd xd = x;
            for (int i = 0; i < d.m; ++i) {
                out.pi[(p * n1 + static_cast<std::size_t>(k)) * d.m + i] = d.basis.col(i).dot(xd);
            }
            if (k == e.steps()) break;
            const Eigen::VectorXd mu = dyn.mu(x, e.options.horizon - e.options.time(k));
            for (int i = 0; i < d.m; ++i) {
                out.mu_pi[(p * static_cast<std::size_t>(e.steps()) + static_cast<std::size_t>(k)) * d.m + i] =
                    d.basis.col(i).dot(mu);
            }
        }
        for (int k = 0; k < e.steps(); ++k) {
            for (int i = 0; i < d.m; ++i) {
                const double inc = out.value(p, k + 1, i) - out.value(p, k, i);
                const double drift =
                    out.mu_pi[(p * static_cast<std::size_t>(e.steps()) + static_cast<std::size_t>(k)) * d.m + i];
                qv += (inc - ds * drift) * (inc - ds * drift);
            }
        }
        out.max_quadratic_variation = std::max(out.max_quadratic_variation, qv);
    }
    if (out.max_quadratic_variation > out.tolerance) {
        std::ostringstream os;
        os << "projection carries quadratic variation " << out.max_quadratic_variation << " above tolerance "
           << out.tolerance;
        throw Error(ErrorCode::decomposition_inconsistency, kModule, os.str());
    }
    return out;
}

ContinuityReport continuity_diagnostic(std::span<const double> samples, int m) {
    ContinuityReport r;
    r.m = m;
    if (m == 0) return r;
    if (m < 0 || samples.size() % static_cast<std::size_t>(m) != 0) {
        throw Error(ErrorCode::contract_violation, kModule, "sample array is not n x m");
    }
    const std::size_t n = samples.size() / m;
    r.samples = n;
    if (n < 1000) throw Error(ErrorCode::parameter_violation, kModule, "continuity diagnostic needs 1000 samples");

    std::vector<double> lo(m, kInf), hi(m, -kInf);
    for (std::size_t p = 0; p < n; ++p)
        for (int i = 0; i < m; ++i) {
            lo[i] = std::min(lo[i], samples[p * m + i]);
            hi[i] = std::max(hi[i], samples[p * m + i]);
        }
    for (int i = 0; i < m; ++i) r.range = std::max(r.range, hi[i] - lo[i]);
    r.epsilon = r.range * 1e-6;

    // Collapse duplicates, then scan windows in the first coordinate.
    std::vector<std::size_t> order(n);
    for (std::size_t p = 0; p < n; ++p) order[p] = p;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return std::lexicographical_compare(samples.begin() + x * m, samples.begin() + (x + 1) * m,
                                            samples.begin() + y * m, samples.begin() + (y + 1) * m);
    });
    std::vector<std::size_t> first;
    std::vector<std::size_t> weight;
    for (std::size_t j = 0; j < n; ++j) {
        const bool same = !first.empty() && std::equal(samples.begin() + order[j] * m,
                                                       samples.begin() + (order[j] + 1) * m,
                                                       samples.begin() + first.back() * m);
        if (same) {
            ++weight.back();
        } else {
            first.push_back(order[j]);
            weight.push_back(1);
        }
    }
    const std::size_t u = first.size();
    std::vector<std::size_t> prefix(u + 1, 0);
    for (std::size_t j = 0; j < u; ++j) prefix[j + 1] = prefix[j] + weight[j];
    auto coord = [&](std::size_t j, int i) { return samples[first[j] * m + i]; };
    const double eps2 = r.epsilon * r.epsilon;
    std::size_t best = 0, left = 0, right = 0;
    for (std::size_t j = 0; j < u; ++j) {
        const double xj = coord(j, 0);
        while (coord(left, 0) < xj - r.epsilon) ++left;
        if (right < j) right = j;
        while (right + 1 < u && coord(right + 1, 0) <= xj + r.epsilon) ++right;
        std::size_t count = 0;
        if (m == 1) {
            count = prefix[right + 1] - prefix[left];
        } else {
            for (std::size_t q = left; q <= right; ++q) {
                double d2 = 0.0;
                for (int i = 0; i < m; ++i) d2 += (coord(q, i) - coord(j, i)) * (coord(q, i) - coord(j, i));
                if (d2 <= eps2) count += weight[q];
            }
        }
        best = std::max(best, count);
    }
    r.atom_score = static_cast<double>(best) / static_cast<double>(n);
    r.uniform_baseline = 1.0 / static_cast<double>(n) + (r.range > 0.0 ? std::pow(2.0e-6, m) : 0.0);
    r.atomic = r.atom_score > std::max(0.01, 100.0 * r.uniform_baseline);

    constexpr int kBins = 64;
    const double a = lo[0], width = r.range > 0.0 ? (hi[0] - lo[0]) / kBins : 1.0;
    r.bin_centers.resize(kBins);
    r.density.assign(kBins, 0.0);
    for (int b = 0; b < kBins; ++b) r.bin_centers[b] = a + (b + 0.5) * width;
    for (std::size_t p = 0; p < n; ++p) {
        const int b = std::clamp(static_cast<int>((samples[p * m] - a) / width), 0, kBins - 1);
        r.density[b] += 1.0;
    }
    for (double& v : r.density) v /= static_cast<double>(n) * width;
    return r;
}

bool OccupationSet::contains(const Vec& x, double s) const {
    if (empty_window || s < t_lo || s > t_hi) return false;
    for (int a = 0; a < x.size(); ++a) {
        if (exact[static_cast<std::size_t>(a)]) {
            if (x(a) != lo(a)) return false;
        } else if (!(x(a) >= lo(a) && x(a) < hi(a))) {
            return false;
        }
    }
    return true;
}

OccupationEstimate counterexample_run(double horizon, std::size_t n_paths, int n_steps, std::uint64_t seed,
                                      bool empty_window) {
    if (!(horizon > 0.0)) throw Error(ErrorCode::parameter_violation, kModule, "horizon must be positive");
    FactorDynamics dyn;
    dyn.dim = 2;
    dyn.noise_dim = 1;
    Mat s(2, 1);
    s << 0.0, 1.0;
    dyn.sigma = families::constant_matrix(s);
    dyn.mu = families::constant_vector(Vec::Zero(2));

    OccupationSet B;
    B.lo = Vec(2);
    B.hi = Vec(2);
    B.lo << 0.0, -kInf;
    B.hi << 0.0, 0.0;
    B.exact = {true, false};
    B.t_lo = 0.0;
    B.t_hi = horizon;
    B.empty_window = empty_window;

    SimulationOptions opt;
    opt.horizon = horizon;
    opt.n_steps = n_steps;
    opt.n_paths = n_paths;
    opt.seed = seed;
    const std::vector<double> occ = path_integrals(dyn, Vec::Zero(2), opt, [&](int, double t, const Vec& x) {
        return B.contains(x, t) ? 1.0 : 0.0;
    });
    const SampleStats st = sample_stats(occ);
    OccupationEstimate e;
    e.mean = st.mean;
    e.se = st.se;
    e.horizon = horizon;
    e.target = 0.5 * horizon;
    e.relative_error = std::abs(e.mean - e.target) / e.target;
    e.paths = n_paths;
    e.steps = n_steps;
    return e;
}

}  // namespace semireg
