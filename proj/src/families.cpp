#include "semireg/families.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "model";

[[noreturn]] void bad_spec(const std::string& what) {
    throw Error(ErrorCode::configuration_error, kModule, what);
}

double to_number(const std::string& token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        bad_spec("not a number: '" + token + "'");
    }
    if (used != token.size()) bad_spec("not a number: '" + token + "'");
    return v;
}

std::vector<double> to_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(to_number(item));
    }
    return out;
}

double op_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    const Eigen::MatrixXd dense = m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
    return svd.singularValues()(0);
}

Mat matrix_from(const std::vector<double>& values, int rows, int cols, const std::string& what) {
    if (values.size() == 1) {
        Mat m = Mat::Zero(rows, cols);
        for (int i = 0; i < std::min(rows, cols); ++i) m(i, i) = values[0];
        return m;
    }
    if (values.size() != static_cast<std::size_t>(rows * cols)) {
        bad_spec(what + ": expected " + std::to_string(rows * cols) + " row-major entries");
    }
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = values[i * cols + j];
    return m;
}

Vec vector_from(const std::vector<double>& values, int dim, const std::string& what) {
    if (values.size() == 1) return Vec::Constant(dim, values[0]);
    if (values.size() != static_cast<std::size_t>(dim)) {
        bad_spec(what + ": expected " + std::to_string(dim) + " entries");
    }
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = values[i];
    return v;
}

std::vector<double> values_of(const FamilySpec& spec, const std::string& key) {
    if (spec.has(key)) return spec.list(key);
    return spec.positional;
}

}  // namespace

FamilySpec FamilySpec::parse(const std::string& text) {
    FamilySpec spec;
    std::stringstream ss(text);
    std::string token;
    if (!(ss >> spec.name)) bad_spec("empty family specification");
    while (ss >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            for (double v : to_list(token)) spec.positional.push_back(v);
        } else {
            spec.named[token.substr(0, eq)] = to_list(token.substr(eq + 1));
        }
    }
    return spec;
}

std::string FamilySpec::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << name;
    for (double v : positional) os << ' ' << v;
    for (const auto& [k, vs] : named) {
        os << ' ' << k << '=';
        for (std::size_t i = 0; i < vs.size(); ++i) os << (i ? "," : "") << vs[i];
    }
    return os.str();
}

double FamilySpec::number(const std::string& key, std::size_t position, double fallback) const {
    if (auto it = named.find(key); it != named.end()) {
        if (it->second.size() != 1) bad_spec(name + ": '" + key + "' must be a single number");
        return it->second[0];
    }
    if (position < positional.size()) return positional[position];
    return fallback;
}

double FamilySpec::number(const std::string& key, std::size_t position) const {
    if (!has(key) && position >= positional.size()) bad_spec(name + ": missing parameter '" + key + "'");
    return number(key, position, 0.0);
}

std::vector<double> FamilySpec::list(const std::string& key) const {
    auto it = named.find(key);
    if (it == named.end()) bad_spec(name + ": missing list '" + key + "'");
    return it->second;
}

namespace families {

SmoothField gaussian_bump(double amplitude, const Vec& center, double width, double ramp) {
    if (!(width > 0.0) || !(ramp > 0.0) || amplitude < 0.0) {
        bad_spec("gaussian_bump needs amplitude >= 0, width > 0, ramp > 0");
    }
    const double inv_w2 = 1.0 / (width * width);
    auto spatial = [center, inv_w2](const Vec& x) {
        return std::exp(-0.5 * (x - center).squaredNorm() * inv_w2);
    };
    auto ramp_fn = [amplitude, ramp](double t) { return -amplitude * std::expm1(-ramp * t); };
    SmoothField h;
    h.scale = width;
    h.value = [=](const Vec& x, double t) { return ramp_fn(t) * spatial(x); };
    h.gradient = [=](const Vec& x, double t) -> Vec {
        return -(ramp_fn(t) * spatial(x) * inv_w2) * (x - center);
    };
    h.hessian = [=](const Vec& x, double t) -> Mat {
        const Vec d = x - center;
        const double v = ramp_fn(t) * spatial(x);
        Mat m = (d * d.transpose()) * (inv_w2 * inv_w2);
        m.diagonal().array() -= inv_w2;
        return v * m;
    };
    h.time_derivative = [=](const Vec& x, double t) {
        return amplitude * ramp * std::exp(-ramp * t) * spatial(x);
    };
    return h;
}

SmoothField zero_field() {
    SmoothField h;
    h.value = [](const Vec&, double) { return 0.0; };
    h.gradient = [](const Vec& x, double) -> Vec { return Vec::Zero(x.size()); };
    h.hessian = [](const Vec& x, double) -> Mat { return Mat::Zero(x.size(), x.size()); };
    h.time_derivative = [](const Vec&, double) { return 0.0; };
    return h;
}

RateCurve constant_rate(double r) { return RateCurve{[r](double) { return r; }, {}}; }

RateCurve affine_rate(double intercept, double slope) {
    return RateCurve{[intercept, slope](double t) { return intercept + slope * t; }, {}};
}

RateCurve piecewise_constant_rate(std::vector<double> times, std::vector<double> values) {
    if (values.size() != times.size() + 1) {
        bad_spec("piecewise_constant rate needs one more value than breakpoints");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) bad_spec("piecewise_constant breakpoints must increase");
    }
    RateCurve rc;
    rc.breakpoints = times;
    rc.r = [times, values](double t) {
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        return values[static_cast<std::size_t>(it - times.begin())];
    };
    return rc;
}

TimeMatrix constant_matrix(const Mat& m) {
    return [m](double) { return m; };
}

TimeMatrix affine_matrix(const Mat& base, const Mat& slope) {
    return [base, slope](double t) -> Mat { return base + t * slope; };
}

VectorField constant_vector(const Vec& v) {
    return [v](const Vec&, double) { return v; };
}

VectorField linear_vector(const Mat& a, const Vec& b) {
    return [a, b](const Vec& x, double) -> Vec { return a * x + b; };
}

InitialDatum gaussian_datum(double offset, double amplitude, const Vec& center, double width) {
    const double inv_w2 = 1.0 / (width * width);
    return [=](const Vec& x) { return offset + amplitude * std::exp(-0.5 * (x - center).squaredNorm() * inv_w2); };
}

InitialDatum gaussian_ridge(double offset, double amplitude, int axis, double center, double width) {
    const double inv_w2 = 1.0 / (width * width);
    return [=](const Vec& x) {
        const double d = x(axis) - center;
        return offset + amplitude * std::exp(-0.5 * d * d * inv_w2);
    };
}

InitialDatum constant_datum(double c) {
    return [c](const Vec&) { return c; };
}

InitialDatum cosine_datum(double offset, double amplitude, double wavenumber) {
    return [=](const Vec& x) { return offset + amplitude * std::cos(wavenumber * x(0)); };
}

}  // namespace families

SmoothField make_principal(const FamilySpec& spec, int dim) {
    if (spec.name == "zero") return families::zero_field();
    if (spec.name == "gaussian_bump") {
        const Vec center = spec.has("center") ? vector_from(spec.list("center"), dim, "center") : Vec::Zero(dim);
        return families::gaussian_bump(spec.number("amplitude", 0), center, spec.number("width", 1, 1.0),
                                       spec.number("ramp", 2, 1.0));
    }
    bad_spec("unknown principal family '" + spec.name + "'");
}

RateCurve make_rate(const FamilySpec& spec) {
    if (spec.name == "constant") return families::constant_rate(spec.number("value", 0));
    if (spec.name == "affine") {
        return families::affine_rate(spec.number("intercept", 0), spec.number("slope", 1));
    }
    if (spec.name == "piecewise_constant") {
        return families::piecewise_constant_rate(spec.list("times"), spec.list("values"));
    }
    bad_spec("unknown rate family '" + spec.name + "'");
}

TimeMatrix make_sigma(const FamilySpec& spec, int dim, int noise_dim, double horizon, TimeModuli* moduli) {
    if (spec.name == "constant" || spec.name == "matrix") {
        const Mat m = matrix_from(values_of(spec, "values"), dim, noise_dim, "sigma");
        if (moduli) {
            moduli->sigma_t = 0.0;
            moduli->sigma_sigma_t = 0.0;
        }
        return families::constant_matrix(m);
    }
    if (spec.name == "affine") {
        const Mat base = matrix_from(spec.list("base"), dim, noise_dim, "sigma base");
        const Mat slope = matrix_from(spec.list("slope"), dim, noise_dim, "sigma slope");
        if (moduli) {
            moduli->sigma_t = op_norm(slope);
            const Mat sym = base * slope.transpose() + slope * base.transpose();
            moduli->sigma_sigma_t = op_norm(sym) + 2.0 * horizon * op_norm(slope * slope.transpose());
        }
        return families::affine_matrix(base, slope);
    }
    bad_spec("unknown sigma family '" + spec.name + "'");
}

VectorField make_vector_field(const FamilySpec& spec, int dim, std::optional<double>* lipschitz) {
    if (lipschitz) *lipschitz = 0.0;
    if (spec.name == "zero") return families::constant_vector(Vec::Zero(dim));
    if (spec.name == "constant") return families::constant_vector(vector_from(values_of(spec, "values"), dim, "vector"));
    if (spec.name == "linear") {
        const Mat a = matrix_from(spec.list("matrix"), dim, dim, "linear matrix");
        const Vec b = spec.has("offset") ? vector_from(spec.list("offset"), dim, "offset") : Vec::Zero(dim);
        return families::linear_vector(a, b);
    }
    bad_spec("unknown vector family '" + spec.name + "'");
}

ValueScalar make_value_scalar(const FamilySpec& spec) {
    if (spec.name == "zero") return [](double) { return 0.0; };
    if (spec.name == "constant") {
        const double v = spec.number("value", 0);
        return [v](double) { return v; };
    }
    if (spec.name == "reciprocal") {
        const double c = spec.number("coefficient", 0);
        return [c](double u) { return c / u; };
    }
    if (spec.name == "affine") {
        const double a = spec.number("intercept", 0), b = spec.number("slope", 1);
        return [a, b](double u) { return a + b * u; };
    }
    bad_spec("unknown scalar family '" + spec.name + "'");
}

SourceTerm make_source(const FamilySpec& spec, std::optional<double>* lipschitz) {
    if (lipschitz) *lipschitz = 0.0;
    if (spec.name == "zero") return [](const Vec&, double, double) { return 0.0; };
    if (spec.name == "constant") {
        const double c = spec.number("value", 0);
        return [c](const Vec&, double, double) { return c; };
    }
    if (spec.name == "affine_u") {
        const double a = spec.number("slope", 0), b = spec.number("intercept", 1, 0.0);
        return [a, b](const Vec&, double, double u) { return a * u + b; };
    }
    bad_spec("unknown source family '" + spec.name + "'");
}

InitialDatum make_datum(const FamilySpec& spec, int dim) {
    if (spec.name == "constant") return families::constant_datum(spec.number("value", 0));
    if (spec.name == "gaussian") {
        const Vec center = spec.has("center") ? vector_from(spec.list("center"), dim, "center") : Vec::Zero(dim);
        return families::gaussian_datum(spec.number("offset", 0, 0.0), spec.number("amplitude", 1, 1.0), center,
                                        spec.number("width", 2, 1.0));
    }
    if (spec.name == "ridge") {
        const double axis = spec.number("axis", 3, 0.0);
        if (axis != std::floor(axis) || axis < 0 || axis >= dim) bad_spec("ridge: axis out of range");
        return families::gaussian_ridge(spec.number("offset", 0, 0.0), spec.number("amplitude", 1, 1.0),
                                        static_cast<int>(axis), spec.number("center", 4, 0.0),
                                        spec.number("width", 2, 1.0));
    }
    if (spec.name == "cosine") {
        return families::cosine_datum(spec.number("offset", 0, 0.0), spec.number("amplitude", 1, 1.0),
                                      spec.number("wavenumber", 2, 1.0));
    }
    bad_spec("unknown datum family '" + spec.name + "'");
}

}  // namespace semireg
