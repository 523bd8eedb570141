#pragma once

#include "semireg/error.hpp"
#include "semireg/model.hpp"
#include "semireg/types.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace semireg {

using MultiIndex = std::array<int, kMaxDim>;

/// Uniform tensor grid on [−R, R]ᴺ × [0, T] with an odd node count per axis.
struct GridSpec {
    int dim = 1;
    std::array<double, kMaxDim> half_width{1.0, 1.0, 1.0};
    std::array<int, kMaxDim> nodes{3, 1, 1};
    int steps = 1;
    double horizon = 1.0;

    double dx(int axis) const { return 2.0 * half_width[axis] / (nodes[axis] - 1); }
    double min_dx() const;
    double dt() const { return horizon / steps; }
    double time(int k) const { return k == steps ? horizon : k * dt(); }
    std::size_t node_count() const;
    std::size_t stride(int axis) const;
    MultiIndex unravel(std::size_t i) const;
    std::size_t ravel(const MultiIndex& idx) const;
    Vec coordinates(std::size_t i) const;
    bool on_boundary(std::size_t i) const;
    /// True when every axis index keeps at least `collar` nodes to the edge.
    bool inside_collar(std::size_t i, int collar) const;

    /// Shape checks only (dimension, odd node counts, positive extents).
    void validate() const;

    /// Uniform grid with `nodes_per_axis` on every axis and the smallest step
    /// count meeting the parabolic bound for `coeffs`.
    static GridSpec stability_limited(int dim, double half_width, int nodes_per_axis, double horizon,
                                      const CoefficientSet& coeffs, double theta = 0.45);
};

/// max over sampled t ∈ [0,T] of the spectral norm of σσᵀ(t).
double max_diffusion_norm(const CoefficientSet& coeffs, int samples = 64);

/// Throws stability_violation unless Δt ≤ θΔx²/(N·max‖σσᵀ‖), θ ≤ 0.45.
void check_stability(const GridSpec& grid, const CoefficientSet& coeffs, double theta = 0.45);

class BlowUpError : public Error {
public:
    BlowUpError(std::size_t node, int step, double value, const std::string& message)
        : Error(ErrorCode::blow_up, "pde_solver", message), node_(node), step_(step), value_(value) {}
    std::size_t node() const { return node_; }
    int step() const { return step_; }
    double value() const { return value_; }

private:
    std::size_t node_;
    int step_;
    double value_;
};

/// Excursions of the explicit update outside I that were clamped back.
struct ClampReport {
    std::size_t clamped = 0;
    std::size_t updates = 0;
    double max_excursion = 0.0;
    double tolerance = 0.0;
    double fraction() const { return updates == 0 ? 0.0 : static_cast<double>(clamped) / updates; }
};

/// Space-time samples of u. When a known shift g is attached the field stores
/// the marched deviation V = u − g separately, so u = V + g.
class SolutionField {
public:
    SolutionField(GridSpec grid, std::shared_ptr<const CoefficientSet> coeffs,
                  std::shared_ptr<const SmoothField> shift = nullptr);

    const GridSpec& grid() const { return grid_; }
    const CoefficientSet* coefficients() const { return coeffs_.get(); }
    std::shared_ptr<const CoefficientSet> coefficients_ptr() const { return coeffs_; }
    const SmoothField* shift() const { return shift_.get(); }
    std::shared_ptr<const SmoothField> shift_ptr() const { return shift_; }

    int slices() const { return grid_.steps + 1; }
    double value(int k, std::size_t i) const;
    /// V = u − g (equal to u when no shift is attached).
    double deviation(int k, std::size_t i) const { return state_[offset(k) + i]; }
    double shift_value(int k, std::size_t i) const {
        return shift_values_.empty() ? 0.0 : shift_values_[offset(k) + i];
    }
    std::vector<double> slice_values(int k) const;

    std::span<double> state_slice(int k) { return {state_.data() + offset(k), grid_.node_count()}; }
    std::span<const double> state_slice(int k) const {
        return {state_.data() + offset(k), grid_.node_count()};
    }
    std::span<double> shift_slice(int k);
    std::span<const double> shift_slice(int k) const;

    /// Sets u at slice k directly (stores V = u − g).
    void assign_slice(int k, std::span<const double> u);

    /// Central-difference gradient/Hessian caches (shift-aware). Boundary
    /// nodes use one-sided copies of the nearest interior value.
    void compute_derivatives();
    bool has_derivatives() const { return !gradient_.empty(); }
    Vec gradient(int k, std::size_t i) const;
    Mat hessian(int k, std::size_t i) const;

    ClampReport& clamp_report() { return clamp_; }
    const ClampReport& clamp_report() const { return clamp_; }

private:
    std::size_t offset(int k) const { return static_cast<std::size_t>(k) * grid_.node_count(); }

    GridSpec grid_;
    std::shared_ptr<const CoefficientSet> coeffs_;
    std::shared_ptr<const SmoothField> shift_;
    std::vector<double> state_;
    std::vector<double> shift_values_;
    std::vector<double> gradient_;  // slices × nodes × N
    std::vector<double> hessian_;   // slices × nodes × N(N+1)/2
    ClampReport clamp_;
};

/// Discrete jet of the field at an interior node: upwind one-sided
/// differences, central gradient and central Hessian (shift derivatives
/// added analytically).
struct DiscreteJet {
    double u = 0.0;
    Vec p_back;
    Vec p_fwd;
    Vec p_central;
    Mat hessian;
};

DiscreteJet discrete_jet(const SolutionField& field, int k, std::size_t i);

/// H at interior node i of slice k with upwinded drift and central stencils.
double discretize_hamiltonian(const SolutionField& field, int k, std::size_t i);

/// Advances slice k to k+1 in place; returns the new u values.
std::vector<double> step(SolutionField& field, int k);

using InitialDatum = std::function<double(const Vec& x)>;

struct SolveOptions {
    double theta = 0.45;
    bool cache_derivatives = true;
};

/// Forward-Euler march of ∂ₜu = −H from u₀ on the grid.
SolutionField solve(const CoefficientSet& coeffs, const InitialDatum& u0, const GridSpec& grid,
                    const SolveOptions& options = {}, std::shared_ptr<const SmoothField> shift = nullptr);

/// Default boundary collar: a tenth of the nodes on the shortest axis.
int default_collar(const GridSpec& grid);

struct ResidualSummary {
    double max = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
    int collar = 0;
};

/// |∂ₜu + H| with centered time differences at interior times 1..M−1.
struct ResidualField {
    GridSpec grid;
    std::vector<double> values;  // (M−1) × nodes, NaN outside the interior
    ResidualSummary summary;
    double at(int k, std::size_t i) const { return values[(k - 1) * grid.node_count() + i]; }
};

ResidualField residual_field(const SolutionField& field, int collar = -1);

}  // namespace semireg
