#pragma once

#include "semireg/model.hpp"
#include "semireg/pde_solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semireg {

enum class Measure { P, Q };
const char* to_string(Measure m) noexcept;

enum class PricingMode { q_drift, p_weighted };
const char* to_string(PricingMode m) noexcept;

/// Multilinear interpolation (in x, and linearly in PDE time) of the marched
/// part U of a field and of its node gradients. When the field carries a shift
/// g, U = u − g is interpolated; otherwise U = u. Points outside the box are
/// clamped onto the nearest face and flagged.
class GradientInterpolant {
public:
    explicit GradientInterpolant(const SolutionField& field);

    struct Sample {
        double value = 0.0;  // U
        Vec gradient;        // ∇U
        bool clamped = false;
    };

    Sample operator()(const Vec& x, double pde_time) const;
    double value(const Vec& x, double pde_time) const { return (*this)(x, pde_time).value; }

    const SolutionField& field() const { return *field_; }
    /// Node gradient of U on slice k (central inside, one-sided on faces).
    Vec node_gradient(int k, std::size_t i) const;

private:
    const SolutionField* field_;
    GridSpec grid_;
    std::vector<double> values_;    // slices × nodes
    std::vector<double> gradient_;  // slices × nodes × N
};

struct SimulationOptions {
    double t0 = 0.0;           // start time t
    double horizon = 1.0;      // T
    int n_steps = 200;
    int substeps = 1;          // Gaussian draws summed per increment (shared fine path)
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    Measure measure = Measure::P;
    double positivity_floor = -1.0;  // negative: 1e−8·ξ(0)

    double dt() const { return (horizon - t0) / n_steps; }
    double time(int k) const { return k == n_steps ? horizon : t0 + k * dt(); }
};

/// Drift adjustment γ(x, s_k) on a step grid.
class GirsanovKernel {
public:
    virtual ~GirsanovKernel() = default;
    virtual Vec operator()(const Vec& x, int k, std::size_t path, bool* clamped = nullptr) const = 0;
};

/// γ ≡ g.
class ConstantKernel final : public GirsanovKernel {
public:
    explicit ConstantKernel(Vec g) : g_(std::move(g)) {}
    Vec operator()(const Vec&, int, std::size_t, bool* clamped = nullptr) const override {
        if (clamped) *clamped = false;
        return g_;
    }

private:
    Vec g_;
};

/// γ(x, s) = ρσᵀ(T−s)∇U(x,T−s)/(U+h+ξ)(x,T−s).
class DualityKernel final : public GirsanovKernel {
public:
    DualityKernel(const MbsModel& model, const FactorDynamics& dynamics, const GradientInterpolant& grad,
                  const SimulationOptions& grid);

    /// Throws degeneracy when U+h+ξ falls below the positivity floor.
    Vec operator()(const Vec& x, int k, std::size_t path, bool* clamped = nullptr) const override;
    double floor() const { return floor_; }

private:
    const MbsModel* model_;
    const GradientInterpolant* grad_;
    SimulationOptions grid_;
    std::vector<Mat> sigma_t_;  // σᵀ(T−s_k)
    std::vector<double> xi_;    // ξ(T−s_k)
    double floor_ = 0.0;
};

struct PathEnsemble {
    int dim = 1;
    int noise_dim = 1;
    SimulationOptions options;
    Measure measure = Measure::P;
    std::vector<double> states;      // paths × (steps+1) × N
    std::vector<double> increments;  // paths × steps × d
    std::vector<double> log_weight;  // per path; 0 when simulated under the target drift
    std::size_t clamped = 0;
    std::size_t kernel_evaluations = 0;

    std::size_t paths() const { return log_weight.size(); }
    int steps() const { return options.n_steps; }
    Vec state(std::size_t path, int k) const;
    Vec increment(std::size_t path, int k) const;
    std::span<const double> path_states(std::size_t path) const;
};

/// Euler–Maruyama paths of dX = b ds + σ(T−s)dW with b = μ(X,T−s) under P
/// and b = μ − σγ under Q (Q requires a kernel).
PathEnsemble simulate(const FactorDynamics& dynamics, const Vec& x0, const SimulationOptions& options,
                      const GirsanovKernel* kernel = nullptr);

/// −Σγᵀ ΔW − ½Σ|γ|²Δs per path of a P ensemble.
std::vector<double> girsanov_log_weight(const PathEnsemble& ensemble, const GirsanovKernel& kernel);

/// Deterministic per-step weights (τ − r(T−s))·D(t,s) and the trapezoid rule.
class PayoffSchedule {
public:
    PayoffSchedule(const MbsModel& model, const SimulationOptions& grid);
    /// ∫ₜᵀ (τ−r(T−s))D(t,s)h(X_s,T−s)ds by the trapezoid rule along `states`.
    double operator()(std::span<const double> states, int dim) const;
    double weight(int k) const { return weights_[static_cast<std::size_t>(k)]; }

private:
    const MbsModel* model_;
    SimulationOptions grid_;
    std::vector<double> weights_;  // trapezoid × (τ−r)·D
};

double payoff_discounted(std::span<const double> states, int dim, const MbsModel& model,
                         const SimulationOptions& grid);

/// Mean and standard error of a sample, with pairwise summation.
struct SampleStats {
    double mean = 0.0;
    double se = 0.0;
    double variance = 0.0;
    std::size_t n = 0;
};
SampleStats sample_stats(std::span<const double> values);

/// Streams paths without storing them and returns per-path trapezoid
/// integrals of integrand(k, s, x) over the step grid.
std::vector<double> path_integrals(const FactorDynamics& dynamics, const Vec& x0, const SimulationOptions& options,
                                   const std::function<double(int k, double s, const Vec& x)>& integrand);

struct PriceEstimate {
    PricingMode mode = PricingMode::q_drift;
    double mean = 0.0;
    double se = 0.0;
    double weight_mean = 1.0;  // sample mean of dQ/dP (1 in Q-drift mode)
    double weight_se = 0.0;
    std::size_t clamped = 0;
    std::size_t kernel_evaluations = 0;
    double clamp_fraction() const {
        return kernel_evaluations == 0 ? 0.0 : static_cast<double>(clamped) / kernel_evaluations;
    }
};

struct PriceOptions {
    std::size_t n_paths = 100000;
    int n_steps = 200;
    int substeps = 1;
    std::uint64_t seed = 1;
    double positivity_floor = -1.0;
};

PriceEstimate estimate_price(const MbsModel& model, const FactorDynamics& dynamics, const GradientInterpolant& grad,
                             const Vec& x0, double t, PricingMode mode, const PriceOptions& options);

struct PriceComparison {
    Vec x0;
    double t = 0.0;
    double pde_value = 0.0;  // U(x₀, T−t)
    double residual_max = 0.0;
    double allowance = 0.0;  // 10·residual_max
    PriceEstimate q_drift;
    PriceEstimate p_weighted;
    double q_error = 0.0;  // |MC − PDE|
    double q_z = 0.0;
    double p_error = 0.0;
    double p_z = 0.0;
    double cross_z = 0.0;  // |Q − PW| / combined SE
    bool clamp_flag = false;  // > 1 % clamped kernel evaluations
    bool q_within = false;
    bool p_within = false;
    bool cross_within = false;
};

/// Both estimators (or only `only`) against the PDE value; refuses x₀
/// outside the interior collar.
PriceComparison price_and_compare(const MbsModel& model, const FactorDynamics& dynamics, const SolutionField& field,
                                  const Vec& x0, double t, const PriceOptions& options,
                                  std::optional<PricingMode> only = std::nullopt);

}  // namespace semireg
