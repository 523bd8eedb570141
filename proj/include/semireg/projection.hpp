#pragma once

#include "semireg/sde_mc.hpp"

#include <Eigen/Core>

#include <vector>

namespace semireg {

/// Orthonormal basis of Ker(σᵀ) completed to an orthogonal M whose first m
/// rows are the kernel vectors (Mᵀeᵢ = bᵢ).
struct KernelDecomposition {
    int dim = 0;
    int rank = 0;
    int m = 0;
    Eigen::MatrixXd basis;  // N × m
    Eigen::MatrixXd M;      // N × N
    Eigen::VectorXd eigenvalues;  // of σσᵀ, ascending
    double threshold = 0.0;       // 1e−10·‖σσᵀ‖
    double sigma_residual = 0.0;  // max |σᵀbᵢ|
    double orthonormality_error = 0.0;
    double condition_number = 1.0;
};

/// Kernel of σᵀ from the eigen-decomposition of σσᵀ.
KernelDecomposition kernel_basis(const Mat& sigma);

struct ProjectionPaths {
    int m = 0;
    std::size_t paths = 0;
    int steps = 0;
    std::vector<double> pi;      // paths × (steps+1) × m
    std::vector<double> mu_pi;   // paths × steps × m, ⟨μ(X_k, T−s_k), bᵢ⟩
    double max_quadratic_variation = 0.0;  // max over paths of Σ(Δπ − Δs·μ_π)²
    double tolerance = 0.0;

    double value(std::size_t path, int k, int i) const {
        return pi[(path * static_cast<std::size_t>(steps + 1) + static_cast<std::size_t>(k)) * m + i];
    }
    /// Samples of π at step k, row-major n × m.
    std::vector<double> slice(int k) const;
};

/// π = ⟨X, bᵢ⟩ along a P ensemble; throws decomposition_inconsistency when
/// the residual quadratic variation exceeds the rounding tolerance.
ProjectionPaths projection_paths(const PathEnsemble& ensemble, const KernelDecomposition& decomp,
                                 const FactorDynamics& dynamics);

/// Heuristic absolute-continuity diagnostic: the law is flagged atomic when a
/// single point carries a visible fraction of the sample.
struct ContinuityReport {
    bool heuristic = true;
    int m = 0;
    std::size_t samples = 0;
    double epsilon = 0.0;  // sample range · 1e−6
    double range = 0.0;
    double atom_score = 0.0;
    double uniform_baseline = 0.0;
    bool atomic = false;
    std::vector<double> bin_centers;  // first π component
    std::vector<double> density;
};

ContinuityReport continuity_diagnostic(std::span<const double> samples, int m);

/// Half-open spatial box with optional exact-value axes, over a closed time window.
struct OccupationSet {
    Vec lo;
    Vec hi;
    std::vector<bool> exact;  // axis a requires x_a == lo_a
    double t_lo = 0.0;
    double t_hi = 0.0;
    bool empty_window = false;

    bool contains(const Vec& x, double s) const;
};

struct OccupationEstimate {
    double mean = 0.0;
    double se = 0.0;
    double horizon = 0.0;
    double target = 0.0;  // T/2
    double relative_error = 0.0;
    std::size_t paths = 0;
    int steps = 0;
};

/// Estimate of E∫₀ᵀ 1_B(X_s, s)ds for X = (0, W) with B = {0}×(−∞,0)×window.
OccupationEstimate counterexample_run(double horizon, std::size_t n_paths, int n_steps, std::uint64_t seed = 1,
                                      bool empty_window = false);

}  // namespace semireg
