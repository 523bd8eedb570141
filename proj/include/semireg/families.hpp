#pragma once

#include "semireg/model.hpp"
#include "semireg/pde_solver.hpp"

#include <map>
#include <string>
#include <vector>

namespace semireg {

/// A coefficient family selected by name, e.g.
///   "gaussian_bump amplitude=1 width=0.8 ramp=2"   or   "constant 0.03".
/// Bare numbers are positional, `key=value` pairs are named; list values are
/// comma separated.
struct FamilySpec {
    std::string name;
    std::vector<double> positional;
    std::map<std::string, std::vector<double>> named;

    static FamilySpec parse(const std::string& text);
    std::string canonical() const;

    double number(const std::string& key, std::size_t position, double fallback) const;
    double number(const std::string& key, std::size_t position) const;
    std::vector<double> list(const std::string& key) const;
    bool has(const std::string& key) const { return named.count(key) > 0; }
};

namespace families {

// h(x,t) = A(1 − e^{−kt}) exp(−|x−c|²/(2w²)), analytic derivatives.
SmoothField gaussian_bump(double amplitude, const Vec& center, double width, double ramp);
SmoothField zero_field();

RateCurve constant_rate(double r);
RateCurve affine_rate(double intercept, double slope);
RateCurve piecewise_constant_rate(std::vector<double> times, std::vector<double> values);

TimeMatrix constant_matrix(const Mat& m);
TimeMatrix affine_matrix(const Mat& base, const Mat& slope);
VectorField constant_vector(const Vec& v);
VectorField linear_vector(const Mat& a, const Vec& b);

// Gaussian datum offset + A exp(−|x−c|²/(2w²)).
InitialDatum gaussian_datum(double offset, double amplitude, const Vec& center, double width);
// offset + A exp(−(x_axis − c)²/(2w²)), constant in the other coordinates.
InitialDatum gaussian_ridge(double offset, double amplitude, int axis, double center, double width);
InitialDatum constant_datum(double c);
// offset + A cos(k·x₁)
InitialDatum cosine_datum(double offset, double amplitude, double wavenumber);

}  // namespace families

/// Builders from named specs. `dim`/`noise_dim` set the expected shapes.
SmoothField make_principal(const FamilySpec& spec, int dim);
RateCurve make_rate(const FamilySpec& spec);
/// Also fills the σᵀ and σσᵀ time moduli on [0, horizon] when `moduli` is given.
TimeMatrix make_sigma(const FamilySpec& spec, int dim, int noise_dim, double horizon,
                      TimeModuli* moduli = nullptr);
VectorField make_vector_field(const FamilySpec& spec, int dim, std::optional<double>* lipschitz = nullptr);
ValueScalar make_value_scalar(const FamilySpec& spec);
SourceTerm make_source(const FamilySpec& spec, std::optional<double>* lipschitz = nullptr);
InitialDatum make_datum(const FamilySpec& spec, int dim);

}  // namespace semireg
