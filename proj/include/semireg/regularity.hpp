#pragma once

#include "semireg/model.hpp"
#include "semireg/pde_solver.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace semireg {

struct SecondDifferenceOptions {
    /// Largest offset length; negative means a quarter of the smallest half-width.
    double offset_cap = -1.0;
    /// Boundary collar in nodes; negative means default_collar(grid).
    int collar = -1;
    /// Also use diagonal offsets (m·e_a ± m·e_b) on multi-dimensional grids.
    bool diagonals = true;
};

struct SemiconvexityConstants {
    double lower = 0.0;  // L⁻: u(x+h)+u(x−h)−2u(x) ≥ −L⁻|h|²
    double upper = 0.0;  // L⁺: u(x+h)+u(x−h)−2u(x) ≤  L⁺|h|²
};

SemiconvexityConstants second_difference_constants(const GridSpec& grid, std::span<const double> values,
                                                   const SecondDifferenceOptions& options = {});
SemiconvexityConstants second_difference_constants(const SolutionField& field, int k,
                                                   const SecondDifferenceOptions& options = {});

/// Upper envelope M₀e^{Ct} + C₀ of a sampled series.
struct Envelope {
    double m0 = 0.0;
    double rate = 0.0;    // C
    double offset = 0.0;  // C₀
    double max_slack = 0.0;  // max over samples of envelope − L (≥ 0)
    double rss = 0.0;        // residual sum of squares of the fit before shifting
    bool finite() const;
    double operator()(double t) const;
};

/// Least-squares fit of L(t) ≈ M₀e^{Ct} + C₀ with M₀ ≥ 0 (variable projection:
/// golden-section search in C, linear solve for M₀ and C₀), then a vertical
/// shift so the envelope dominates every sample.
Envelope envelope_fit(std::span<const double> series, std::span<const double> times);

struct LipschitzReport {
    std::vector<double> lip_x;  // per slice
    double lip_t = 0.0;
    int collar = 0;
};

LipschitzReport lipschitz_estimates(const SolutionField& field, int collar = -1);

/// Sup norms of a slice: values, gradient (Euclidean), Hessian (spectral), on
/// interior nodes inside the collar.
struct SliceNorms {
    double value = 0.0;
    double gradient = 0.0;
    double hessian = 0.0;
    double w1() const { return std::max(value, gradient); }
    double w2() const { return std::max(w1(), hessian); }
};

SliceNorms slice_norms(const SolutionField& field, int k, int collar = -1);
/// Norms of the initial datum's derivatives sampled on the grid.
SliceNorms datum_norms(const GridSpec& grid, const InitialDatum& u0, int collar = -1);

struct LatticeOptions {
    int x_per_axis = 41;
    int t_samples = 9;
    int u_samples = 9;
    int p_directions = 64;  // directions per radius in N ≥ 2
    int p_radii = 4;
};

/// Norms and moduli entering the time-regularity constants; all measured on
/// the computational box × [0,T) × I.
struct BoundConstants {
    double c0_init = 0.0;
    double c0_sup = 0.0;      // sup H on the lattice
    double c0_neg_inf = 0.0;  // −inf H on the lattice
    double b1 = 0.0;
    double b2 = 0.0;
    double lambda_sup = 0.0;
    double eta_sup = 0.0;
    double sigma_t_sup = 0.0;
    double w_sup = 0.0;
    double solution_w1 = 0.0;
    double solution_w2 = 0.0;
    TimeModuli moduli;
    LatticeOptions lattice;
    std::size_t lattice_points = 0;  // (t, x, u, p) probes, p = 0 included

    /// α(t) = (e^{B₁t} − 1)/B₁·(C₀B₁ + B₂), B₂t in the limit B₁ → 0.
    double alpha(double t) const;
};

/// sup/inf of H over the lattice with |p| ≤ u0.gradient and ‖X‖ ≤ u0.hessian,
/// then B₁, B₂ from the coefficient norms, `solution` sup norms and the time
/// moduli stored in coeffs.moduli (configuration error when any is missing).
BoundConstants bound_constants(const CoefficientSet& coeffs, const GridSpec& box, const SliceNorms& u0,
                               const SliceNorms& solution, const LatticeOptions& lattice = {});

/// Fills absent time moduli by sampling difference quotients in t over the
/// lattice. Returns the names of the moduli it estimated.
std::vector<std::string> estimate_time_moduli(CoefficientSet& coeffs, const GridSpec& box,
                                              const LatticeOptions& lattice = {});

struct DeviationReport {
    std::vector<double> times;
    std::vector<double> deviation;  // max_x |u(·,t) − u₀|
    std::vector<double> bound;      // C0·t + tolerance
    double c0 = 0.0;
    double tolerance = 0.0;
    double worst_ratio = 0.0;  // max deviation / bound
    bool holds = true;
};

/// Checks max_x|u(·,t) − u₀| ≤ C0·t + tolerance on slices with t ≤ fraction·T.
DeviationReport initial_deviation_check(const SolutionField& field, double c0, double tolerance,
                                        double fraction = 0.1, int collar = -1);

struct TimeLipschitzCheck {
    double lip_t = 0.0;
    double bound = 0.0;  // C0 + α(T) + tolerance
    bool within = false;
    bool within_twice = false;
};

TimeLipschitzCheck time_lipschitz_check(double lip_t, const BoundConstants& bounds, double horizon,
                                        double tolerance);

struct RegularityReport {
    std::vector<double> times;
    std::vector<double> lower;  // L⁻(t)
    std::vector<double> upper;  // L⁺(t)
    std::vector<double> lip_x;
    std::vector<double> w2;     // W^{2,∞} slice norm
    double lip_t = 0.0;
    Envelope lower_envelope;
    Envelope upper_envelope;
    int collar = 0;
    double offset_cap = 0.0;
};

/// Per-slice constants on `slices` evenly spaced time indices (all when ≤ 0).
RegularityReport regularity_report(const SolutionField& field, int slices = 0,
                                   const SecondDifferenceOptions& options = {});

}  // namespace semireg
