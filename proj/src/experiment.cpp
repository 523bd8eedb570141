#include "semireg/experiment.hpp"

#include "semireg/families.hpp"
#include "semireg/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "cli";

namespace fs = std::filesystem;

[[noreturn]] void config_fail(const Config& c, const std::string& key, const std::string& what) {
    throw Error(ErrorCode::configuration_error, kModule, c.source() + ": [" + key + "] " + what);
}

FamilySpec family(const Config& c, const std::string& key, const std::string& fallback) {
    const std::string text = c.get_string(key, fallback);
    try {
        return FamilySpec::parse(text);
    } catch (const Error& e) {
        config_fail(c, key, e.what());
    }
}

// Builders report bad parameters from the model module; rewrap with the key.
template <class F>
auto build(const Config& c, const std::string& key, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::configuration_error || e.code() == ErrorCode::parameter_violation ||
            e.code() == ErrorCode::contract_violation) {
            config_fail(c, key, e.what());
        }
        throw;
    }
}

Interval interval_of(const Config& c, const std::string& key, const std::vector<double>& fallback) {
    const std::vector<double> v = fallback.empty() ? c.get_list(key) : c.get_list(key, fallback);
    if (v.size() != 2 || !(v[0] < v[1])) config_fail(c, key, "must be two increasing numbers");
    return {v[0], v[1]};
}

Vec point_of(const Config& c, const std::string& key, int dim) {
    const std::vector<double> v = c.get_list(key, std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    if (static_cast<int>(v.size()) != dim) config_fail(c, key, "needs " + std::to_string(dim) + " entries");
    Vec x(dim);
    for (int a = 0; a < dim; ++a) x(a) = v[static_cast<std::size_t>(a)];
    return x;
}

int positive_int(const Config& c, const std::string& key, long long fallback, long long lo = 1) {
    const long long v = c.get_int(key, fallback);
    if (v < lo || v > 2'000'000'000LL) config_fail(c, key, "out of range");
    return static_cast<int>(v);
}

std::string identity_sigma(int dim, int noise_dim) {
    std::ostringstream os;
    os << "constant values=";
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < noise_dim; ++j) os << (i || j ? "," : "") << (i == j ? 1 : 0);
    return os.str();
}

void read_moduli(const Config& c, TimeModuli& m) {
    auto opt = [&](const char* name, std::optional<double>& slot) {
        const std::string key = std::string("moduli.") + name;
        if (!c.has(key)) return;
        const double v = c.get_double(key);
        if (!(v >= 0.0)) config_fail(c, key, "must be nonnegative");
        slot = v;
    };
    opt("sigma_sigma_t", m.sigma_sigma_t);
    opt("sigma_t", m.sigma_t);
    opt("w", m.w);
    opt("mu", m.mu);
    opt("f", m.f);
}

ModelSetup load_model(const Config& c) {
    ModelSetup s;
    const std::string kind = c.get_string("model.kind", "mbs");
    if (kind != "mbs" && kind != "general") config_fail(c, "model.kind", "must be 'mbs' or 'general'");
    s.mbs = kind == "mbs";
    const int dim = positive_int(c, "model.dim", 1);
    if (dim > kMaxDim) config_fail(c, "model.dim", "at most " + std::to_string(kMaxDim));
    const int noise_dim = positive_int(c, "model.noise_dim", dim);
    if (noise_dim > kMaxDim) config_fail(c, "model.noise_dim", "at most " + std::to_string(kMaxDim));
    const double horizon = c.get_double("model.horizon", 1.0);
    if (!(horizon > 0.0 && std::isfinite(horizon))) config_fail(c, "model.horizon", "must be positive");

    TimeModuli moduli;
    const FamilySpec sigma_spec = family(c, "model.sigma", identity_sigma(dim, noise_dim));
    const TimeMatrix sigma =
        build(c, "model.sigma", [&] { return make_sigma(sigma_spec, dim, noise_dim, horizon, &moduli); });
    const FamilySpec mu_spec = family(c, "model.mu", "zero");
    std::optional<double> mu_lip;
    const VectorField mu = build(c, "model.mu", [&] { return make_vector_field(mu_spec, dim, &mu_lip); });
    moduli.mu = mu_lip;

    s.dynamics.dim = dim;
    s.dynamics.noise_dim = noise_dim;
    s.dynamics.sigma = sigma;

    CoefficientSet coeffs;
    if (s.mbs) {
        s.dynamics.mu = mu;
        s.dynamics.sigma_time_lipschitz = moduli.sigma_t;
        s.dynamics.mu_time_lipschitz = moduli.mu;
        MbsModel& m = s.market;
        m.rho = c.get_double("model.rho", 0.5);
        m.coupon_tau = c.get_double("model.coupon", 0.06);
        m.horizon_T = horizon;
        const FamilySpec rate = family(c, "model.rate", "constant 0.03");
        m.rate = build(c, "model.rate", [&] { return make_rate(rate); });
        const FamilySpec principal = family(c, "model.principal", "gaussian_bump amplitude=1 width=1 ramp=2");
        m.principal = build(c, "model.principal", [&] { return make_principal(principal, dim); });
        m.value_interval = interval_of(c, "model.value_interval", {0.5, 3.0});
        build(c, "model", [&] {
            m.validate(dim);
            return 0;
        });
        coeffs = build(c, "model", [&] { return mbs_to_general(m, s.dynamics); });
        coeffs.moduli.sigma_sigma_t = moduli.sigma_sigma_t;
        s.shift = std::make_shared<const SmoothField>(mbs_shift(m));
    } else {
        coeffs.dim = dim;
        coeffs.noise_dim = noise_dim;
        coeffs.sigma = sigma;
        coeffs.mu = mu;
        coeffs.horizon = horizon;
        coeffs.moduli = moduli;
        const FamilySpec lambda = family(c, "model.lambda", "zero");
        coeffs.lambda_fn = build(c, "model.lambda", [&] { return make_value_scalar(lambda); });
        const FamilySpec eta = family(c, "model.eta", "zero");
        coeffs.eta_fn = build(c, "model.eta", [&] { return make_value_scalar(eta); });
        const FamilySpec source = family(c, "model.source", "zero");
        std::optional<double> f_lip;
        coeffs.f = build(c, "model.source", [&] { return make_source(source, &f_lip); });
        coeffs.moduli.f = f_lip;
        const std::string w_text = c.get_string("model.w", "zero");
        if (w_text != "zero") {
            const FamilySpec w = family(c, "model.w", w_text);
            std::optional<double> w_lip;
            coeffs.w = build(c, "model.w", [&] { return make_vector_field(w, noise_dim, &w_lip); });
            coeffs.moduli.w = w_lip;
        } else {
            coeffs.moduli.w = 0.0;
        }
        coeffs.domain = interval_of(c, "model.domain", {-kInf, kInf});
        coeffs.value_interval = interval_of(c, "model.value_interval", {});
        coeffs.range_compatible = c.get_bool("model.range_compatible", false);
        // forward-time factor process of the linear part: dX = −μ dt + σ dW
        s.dynamics.mu = [mu](const Vec& x, double t) -> Vec { return -mu(x, t); };
    }
    read_moduli(c, coeffs.moduli);
    build(c, "model", [&] {
        coeffs.validate();
        return 0;
    });
    s.coeffs = std::make_shared<const CoefficientSet>(coeffs);

    const std::string datum_text = c.get_string("model.datum", s.mbs ? "shift" : "");
    if (datum_text.empty()) config_fail(c, "model.datum", "is required for the general model");
    if (datum_text == "shift") {
        if (!s.mbs) config_fail(c, "model.datum", "'shift' needs the mortgage model");
        const auto shift = s.shift;
        s.datum = [shift](const Vec& x) { return (*shift)(x, 0.0); };
    } else {
        const FamilySpec datum = family(c, "model.datum", datum_text);
        s.datum = build(c, "model.datum", [&] { return make_datum(datum, dim); });
    }
    return s;
}

GridSetup load_grid(const Config& c, const ModelSetup& model) {
    GridSetup s;
    const double half_width = c.get_double("grid.half_width", 6.0);
    const int nodes = positive_int(c, "grid.nodes", 121, 3);
    const int steps = positive_int(c, "grid.steps", 0, 0);
    s.theta = c.get_double("grid.theta", 0.45);
    if (!(half_width > 0.0 && std::isfinite(half_width))) config_fail(c, "grid.half_width", "must be positive");
    if (nodes % 2 == 0) config_fail(c, "grid.nodes", "must be odd");
    if (!(s.theta > 0.0 && s.theta <= 0.45)) config_fail(c, "grid.theta", "must lie in (0, 0.45]");
    const CoefficientSet& coeffs = *model.coeffs;
    if (steps == 0) {
        s.grid = GridSpec::stability_limited(coeffs.dim, half_width, nodes, coeffs.horizon, coeffs, s.theta);
        c.record("grid.resolved_steps", s.grid.steps);
    } else {
        s.stability_limited = false;
        s.grid.dim = coeffs.dim;
        for (int a = 0; a < kMaxDim; ++a) {
            s.grid.half_width[a] = a < coeffs.dim ? half_width : 1.0;
            s.grid.nodes[a] = a < coeffs.dim ? nodes : 1;
        }
        s.grid.steps = steps;
        s.grid.horizon = coeffs.horizon;
        s.grid.validate();
        check_stability(s.grid, coeffs, s.theta);
    }
    return s;
}

PricingSetup load_pricing(const Config& c, const ModelSetup& model, const std::string& default_mode) {
    if (!model.mbs) config_fail(c, "model.kind", "pricing needs the mortgage model");
    PricingSetup s;
    s.options.n_paths = static_cast<std::size_t>(positive_int(c, "mc.paths", 100000));
    s.options.n_steps = positive_int(c, "mc.steps", 200);
    s.options.substeps = positive_int(c, "mc.substeps", 1);
    s.options.seed = c.get_seed("mc.seed", 1);
    s.options.positivity_floor = c.get_double("mc.positivity_floor", -1.0);
    const std::string mode = c.get_string("mc.mode", default_mode);
    if (mode == "q") {
        s.mode = PricingMode::q_drift;
    } else if (mode == "pw") {
        s.mode = PricingMode::p_weighted;
    } else if (mode != "both") {
        config_fail(c, "mc.mode", "must be q, pw or both");
    }
    s.x0 = point_of(c, "mc.x0", model.dynamics.dim);
    s.t = c.get_double("mc.t", 0.0);
    return s;
}

DiagnosticsSetup load_diagnostics(const Config& c) {
    DiagnosticsSetup s;
    s.regularity = c.get_bool("diagnostics.regularity", true);
    s.deviation = c.get_bool("diagnostics.deviation", true);
    s.slices = positive_int(c, "diagnostics.slices", 21, 0);
    s.second_differences.offset_cap = c.get_double("diagnostics.offset_cap", -1.0);
    s.second_differences.collar = static_cast<int>(c.get_int("diagnostics.collar", -1));
    s.second_differences.diagonals = c.get_bool("diagnostics.diagonals", true);
    s.lattice.x_per_axis = positive_int(c, "diagnostics.lattice_x", 41, 2);
    s.lattice.t_samples = positive_int(c, "diagnostics.lattice_t", 9);
    s.lattice.u_samples = positive_int(c, "diagnostics.lattice_u", 9, 2);
    s.lattice.p_directions = positive_int(c, "diagnostics.lattice_directions", 64);
    s.lattice.p_radii = positive_int(c, "diagnostics.lattice_radii", 4);
    s.deviation_fraction = c.get_double("diagnostics.deviation_fraction", 0.1);
    s.tolerance_factor = c.get_double("diagnostics.tolerance_factor", 10.0);
    if (!(s.deviation_fraction > 0.0 && s.deviation_fraction <= 1.0))
        config_fail(c, "diagnostics.deviation_fraction", "must lie in (0, 1]");
    return s;
}

DegeneracySetup load_degeneracy(const Config& c, const ModelSetup& model) {
    DegeneracySetup s;
    s.simulation.n_paths = static_cast<std::size_t>(positive_int(c, "degeneracy.paths", 5000));
    s.simulation.n_steps = positive_int(c, "degeneracy.steps", 200);
    s.simulation.seed = c.get_seed("degeneracy.seed", 1);
    s.simulation.horizon = model.coeffs->horizon;
    s.x0 = point_of(c, "degeneracy.x0", model.dynamics.dim);
    s.kernel_spread = c.get_bool("degeneracy.kernel_spread", true);
    return s;
}

TransformSetup load_transform(const Config& c, const ModelSetup& model) {
    TransformSetup s;
    const std::string mode = c.get_string("transform.mode", "semiconvex");
    if (mode == "semiconvex") {
        s.mode = TransformMode::semiconvex;
    } else if (mode == "semiconcave") {
        s.mode = TransformMode::semiconcave;
    } else {
        config_fail(c, "transform.mode", "must be semiconvex or semiconcave");
    }
    s.exponent = c.get_double("transform.exponent", 4.0);
    const Interval base = model.coeffs->value_interval;
    s.interval = interval_of(c, "transform.interval", {base.lo, base.hi});
    s.c = c.get_double("transform.c", s.interval.lo);
    s.options.nodes = positive_int(c, "transform.nodes", 4001, 3);
    s.options.margin = c.get_double("transform.margin", 0.05);
    s.probes = positive_int(c, "transform.probes", 1001, 2);
    const std::string lambda = c.get_string("transform.lambda", "model");
    s.lambda_fn = lambda == "model" ? model.coeffs->lambda_fn
                                    : build(c, "transform.lambda", [&] {
                                          return make_value_scalar(FamilySpec::parse(lambda));
                                      });
    const std::string eta = c.get_string("transform.eta", "model");
    s.eta_fn = eta == "model" ? model.coeffs->eta_fn
                              : build(c, "transform.eta", [&] { return make_value_scalar(FamilySpec::parse(eta)); });
    return s;
}

CounterexampleSetup load_counterexample(const Config& c) {
    CounterexampleSetup s;
    s.horizons = c.get_list("counterexample.horizons", s.horizons);
    for (double t : s.horizons)
        if (!(t > 0.0 && std::isfinite(t))) config_fail(c, "counterexample.horizons", "must be positive");
    s.paths = static_cast<std::size_t>(positive_int(c, "counterexample.paths", 100000));
    s.steps = positive_int(c, "counterexample.steps", 1000);
    s.seed = c.get_seed("counterexample.seed", 1);
    return s;
}

std::string model_tag(const Config& c) {
    nlohmann::ordered_json tag = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c.manifest().items()) {
        if (k.rfind("model.", 0) == 0 || k.rfind("moduli.", 0) == 0 || k.rfind("grid.", 0) == 0) tag[k] = v;
    }
    return dump_json(tag, -1);
}

bool needs_model(Pipeline p) { return p != Pipeline::counterexample; }

bool needs_grid(Pipeline p) {
    return p == Pipeline::solve || p == Pipeline::price || p == Pipeline::verify_duality ||
           p == Pipeline::diagnose_regularity;
}

// ---------------------------------------------------------------- pipelines

struct Run {
    ExperimentConfig& cfg;
    std::ostream& log;
    Json artifacts = Json::array();

    std::string path(const std::string& name) {
        artifacts.push_back(name);
        return (fs::path(cfg.output_dir) / name).string();
    }
    const ModelSetup& model() const { return *cfg.model; }
    const GridSetup& grid() const { return *cfg.grid; }
};

Json solve_summary(const SolutionField& field, const ResidualSummary& residual, const ModelSetup& model) {
    const GridSpec& g = field.grid();
    double max_dev = 0.0;
    double u_min = kInf;
    double u_max = -kInf;
    for (int k = 0; k < field.slices(); ++k) {
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            max_dev = std::max(max_dev, std::abs(field.deviation(k, i)));
            const double u = field.value(k, i);
            u_min = std::min(u_min, u);
            u_max = std::max(u_max, u);
        }
    }
    Json j;
    j["model"] = model.mbs ? "mbs" : "general";
    j["grid"] = grid_json(g);
    j["residual"] = residual_json(residual);
    j["clamp"] = clamp_json(field.clamp_report());
    j["u_min"] = json_number(u_min);
    j["u_max"] = json_number(u_max);
    if (model.mbs) j["deviation_max"] = json_number(max_dev);
    return j;
}

SolutionField solve_and_store(Run& run, Json& report) {
    run.log << "solving on " << run.grid().grid.node_count() << " nodes x " << run.grid().grid.steps << " steps\n";
    SolutionField field = solve_configured(run.model(), run.grid());
    const ResidualSummary residual = residual_field(field).summary;
    const Config& c = run.cfg.raw;
    const int slices = positive_int(c, "output.solution_slices", 11, 2);
    write_solution_csv(run.path("solution.csv"), field, slices);
    save_field((fs::path(run.cfg.output_dir) / "field").string(), field, run.model().tag);
    run.artifacts.push_back("field/field.json");
    run.artifacts.push_back("field/state.csv");
    report = solve_summary(field, residual, run.model());
    write_json(run.path("solve.json"), report);
    return field;
}

SolutionField obtain_field(Run& run) {
    if (!run.cfg.field_dir.empty()) {
        run.log << "loading field from " << run.cfg.field_dir << "\n";
        return load_field(run.cfg.field_dir, run.model().coeffs, run.model().shift, run.model().tag);
    }
    Json ignored;
    return solve_and_store(run, ignored);
}

Json regularity_pipeline(Run& run, const SolutionField& field) {
    const DiagnosticsSetup& d = *run.cfg.diagnostics;
    run.log << "measuring semiconvexity constants\n";
    const RegularityReport rep = regularity_report(field, d.slices, d.second_differences);
    write_csv(run.path("regularity.csv"), {"t", "lower", "upper", "lip_x"}, {rep.times, rep.lower, rep.upper, rep.lip_x});
    Json j;
    j["grid"] = grid_json(field.grid());
    j["constants"] = regularity_json(rep);
    const ResidualSummary residual = residual_field(field, d.second_differences.collar).summary;
    j["residual"] = residual_json(residual);
    j["tolerance"] = json_number(d.tolerance_factor * residual.max);
    if (d.deviation) {
        run.log << "evaluating time-regularity bounds\n";
        const TimeBoundReport tb = time_bound_report(field, run.model().datum, d, rep.lip_t);
        Json b = bounds_json(tb.bounds);
        b["estimated_moduli"] = tb.estimated_moduli;
        j["bounds"] = b;
        j["initial_deviation"] = deviation_json(tb.deviation);
        j["time_lipschitz"] = {{"lip_t", json_number(tb.time_lipschitz.lip_t)},
                               {"bound", json_number(tb.time_lipschitz.bound)},
                               {"within", tb.time_lipschitz.within},
                               {"within_twice", tb.time_lipschitz.within_twice}};
    }
    write_json(run.path("regularity.json"), j);
    return j;
}

Json pricing_pipeline(Run& run, const SolutionField& field) {
    const PricingSetup& p = *run.cfg.pricing;
    run.log << "pricing with " << p.options.n_paths << " paths\n";
    const PriceComparison c =
        price_and_compare(run.model().market, run.model().dynamics, field, p.x0, p.t, p.options, p.mode);
    Json j = comparison_json(c, p.mode);
    write_json(run.path("pricing.json"), j);
    return j;
}

Json degeneracy_pipeline(Run& run) {
    const DegeneracySetup& d = *run.cfg.degeneracy;
    const FactorDynamics& dyn = run.model().dynamics;
    const KernelDecomposition k = kernel_basis(dyn.sigma(0.0));
    Json j;
    j["dim"] = k.dim;
    j["rank"] = k.rank;
    j["kernel_dim"] = k.m;
    j["threshold"] = json_number(k.threshold);
    j["sigma_residual"] = json_number(k.sigma_residual);
    j["orthonormality_error"] = json_number(k.orthonormality_error);
    j["condition_number"] = json_number(k.condition_number);
    Json basis = Json::array();
    for (int i = 0; i < k.m; ++i) {
        std::vector<double> col(static_cast<std::size_t>(k.dim));
        for (int a = 0; a < k.dim; ++a) col[static_cast<std::size_t>(a)] = k.basis(a, i);
        basis.push_back(json_array(col));
    }
    j["kernel_basis"] = basis;
    if (k.m == 0) {
        write_json(run.path("degeneracy.json"), j);
        return j;
    }
    run.log << "simulating " << d.simulation.n_paths << " factor paths\n";
    const PathEnsemble e = simulate(dyn, d.x0, d.simulation);
    const ProjectionPaths pi = projection_paths(e, k, dyn);
    j["projection"] = {{"paths", pi.paths},
                       {"steps", pi.steps},
                       {"max_quadratic_variation", json_number(pi.max_quadratic_variation)},
                       {"tolerance", json_number(pi.tolerance)},
                       {"within_tolerance", pi.max_quadratic_variation <= pi.tolerance}};
    const std::vector<double> terminal = pi.slice(pi.steps);
    if (pi.paths >= 1000) {
        const ContinuityReport r = continuity_diagnostic(terminal, pi.m);
        j["continuity"] = {{"heuristic", r.heuristic},
                           {"samples", r.samples},
                           {"epsilon", json_number(r.epsilon)},
                           {"range", json_number(r.range)},
                           {"atom_score", json_number(r.atom_score)},
                           {"uniform_baseline", json_number(r.uniform_baseline)},
                           {"atomic", r.atomic}};
        write_csv(run.path("projection_density.csv"), {"pi", "density"}, {r.bin_centers, r.density});
    } else {
        j["continuity"] = nullptr;
    }
    if (d.kernel_spread) {
        std::vector<int> axes;
        for (int i = 0; i < k.m; ++i) {
            for (int a = 0; a < k.dim; ++a)
                if (std::abs(std::abs(k.basis(a, i)) - 1.0) <= 1e-12) axes.push_back(a);
        }
        if (static_cast<int>(axes.size()) == k.m) {
            run.log << "solving to measure constancy along the kernel\n";
            const SolutionField field = solve_configured(run.model(), run.grid());
            const GridSpec& g = field.grid();
            double spread = 0.0;
            for (int s = 0; s < field.slices(); ++s) {
                for (std::size_t i = 0; i < g.node_count(); ++i) {
                    MultiIndex idx = g.unravel(i);
                    for (int a : axes) idx[a] = 0;
                    spread = std::max(spread, std::abs(field.value(s, i) - field.value(s, g.ravel(idx))));
                }
            }
            j["kernel_spread"] = {{"axes", axes}, {"max", json_number(spread)}, {"grid", grid_json(g)}};
        } else {
            j["kernel_spread"] = nullptr;
        }
    }
    write_json(run.path("degeneracy.json"), j);
    return j;
}

Json transform_pipeline(Run& run) {
    const TransformSetup& t = *run.cfg.transform;
    run.log << "integrating the change of variable\n";
    const TransformPair pair = solve_Q_covering(t.lambda_fn, t.c, t.mode, t.exponent, t.interval.hi, t.options);
    Json j;
    j["mode"] = to_string(t.mode);
    j["exponent"] = json_number(t.exponent);
    j["c"] = json_number(t.c);
    j["interval"] = json_array({t.interval.lo, t.interval.hi});
    j["tau_max"] = json_number(pair.tau_max);
    j["image"] = json_array({pair.image.lo, pair.image.hi});
    j["blew_up"] = pair.blew_up;
    j["blow_up_time"] = json_number(pair.blow_up_time);
    j["saturated"] = pair.saturated;
    j["min_slope"] = json_number(pair.min_slope);
    j["ode_midpoint_residual"] = json_number(ode_midpoint_residual(pair));
    const RoundTrip rt = round_trip_error(pair);
    j["round_trip"] = {{"tau_error", json_number(rt.tau_error)},
                       {"value_error", json_number(rt.value_error)},
                       {"probes", rt.probes}};
    const StructuralReport rep = structural_check(pair, t.eta_fn, t.interval, t.probes);
    j["structure"] = structural_json(rep);
    write_csv(run.path("transform.csv"), {"tau", "Q", "Q_prime"}, {pair.tau, pair.q, pair.dq});
    write_json(run.path("transform.json"), j);
    return j;
}

Json counterexample_pipeline(Run& run) {
    const CounterexampleSetup& s = *run.cfg.counterexample;
    Json runs = Json::array();
    for (double horizon : s.horizons) {
        run.log << "occupation estimate for horizon " << horizon << "\n";
        const OccupationEstimate e = counterexample_run(horizon, s.paths, s.steps, s.seed);
        runs.push_back({{"horizon", json_number(e.horizon)},
                        {"mean", json_number(e.mean)},
                        {"se", json_number(e.se)},
                        {"target", json_number(e.target)},
                        {"relative_error", json_number(e.relative_error)},
                        {"within_one_percent", e.relative_error <= 0.01},
                        {"paths", e.paths},
                        {"steps", e.steps}});
    }
    Json j;
    j["runs"] = runs;
    write_json(run.path("counterexample.json"), j);
    return j;
}

}  // namespace

const char* to_string(Pipeline p) noexcept {
    switch (p) {
        case Pipeline::solve: return "solve";
        case Pipeline::price: return "price";
        case Pipeline::verify_duality: return "verify-duality";
        case Pipeline::diagnose_regularity: return "diagnose-regularity";
        case Pipeline::diagnose_degeneracy: return "diagnose-degeneracy";
        case Pipeline::transform_check: return "transform-check";
        case Pipeline::counterexample: return "counterexample";
    }
    return "unknown";
}

Pipeline parse_pipeline(const std::string& name) {
    for (Pipeline p : {Pipeline::solve, Pipeline::price, Pipeline::verify_duality, Pipeline::diagnose_regularity,
                       Pipeline::diagnose_degeneracy, Pipeline::transform_check, Pipeline::counterexample}) {
        if (name == to_string(p)) return p;
    }
    throw Error(ErrorCode::configuration_error, kModule, "unknown pipeline '" + name + "'");
}

ExperimentConfig ExperimentConfig::load(Config raw, Pipeline pipeline, const std::string& output_override,
                                        const std::string& field_dir) {
    ExperimentConfig e;
    e.pipeline = pipeline;
    e.field_dir = field_dir;
    e.raw = std::move(raw);
    const Config& c = e.raw;
    if (!output_override.empty()) {
        e.output_dir = output_override;
    } else if (const char* env = std::getenv("SEMIREG_OUT"); env && *env) {
        e.output_dir = env;
    } else {
        e.output_dir = c.get_string("output.dir", "out");
    }
    if (needs_model(pipeline)) e.model = load_model(c);
    if (needs_grid(pipeline)) e.grid = load_grid(c, *e.model);
    switch (pipeline) {
        case Pipeline::price: e.pricing = load_pricing(c, *e.model, "q"); break;
        case Pipeline::verify_duality:
            e.pricing = load_pricing(c, *e.model, "both");
            e.diagnostics = load_diagnostics(c);
            break;
        case Pipeline::diagnose_regularity: e.diagnostics = load_diagnostics(c); break;
        case Pipeline::diagnose_degeneracy:
            e.degeneracy = load_degeneracy(c, *e.model);
            if (e.degeneracy->kernel_spread) e.grid = load_grid(c, *e.model);
            break;
        case Pipeline::transform_check: e.transform = load_transform(c, *e.model); break;
        case Pipeline::counterexample: e.counterexample = load_counterexample(c); break;
        case Pipeline::solve: break;
    }
    if (e.model) e.model->tag = model_tag(c);
    return e;
}

Json error_json(const std::string& module, const std::string& config, const std::string& code,
                const std::string& message) {
    Json j;
    j["module"] = module;
    j["config"] = config;
    j["code"] = code;
    j["message"] = message;
    return j;
}

int run_experiment(ExperimentConfig& config, std::ostream& log, std::ostream& err) {
    ensure_directory(config.output_dir);
    Run run{config, log};
    Json error;
    try {
        switch (config.pipeline) {
            case Pipeline::solve: {
                Json ignored;
                solve_and_store(run, ignored);
                break;
            }
            case Pipeline::price: pricing_pipeline(run, obtain_field(run)); break;
            case Pipeline::verify_duality: {
                Json solve_report;
                const SolutionField field = solve_and_store(run, solve_report);
                if (config.diagnostics->regularity) regularity_pipeline(run, field);
                const Json pricing = pricing_pipeline(run, field);
                log << "duality " << (pricing.value("holds", false) ? "holds" : "fails") << "\n";
                break;
            }
            case Pipeline::diagnose_regularity: regularity_pipeline(run, obtain_field(run)); break;
            case Pipeline::diagnose_degeneracy: degeneracy_pipeline(run); break;
            case Pipeline::transform_check: transform_pipeline(run); break;
            case Pipeline::counterexample: counterexample_pipeline(run); break;
        }
    } catch (const Error& e) {
        error = error_json(e.module(), config.raw.source(), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        error = error_json(kModule, config.raw.source(), "internal_error", e.what());
    }
    Json manifest;
    manifest["pipeline"] = to_string(config.pipeline);
    manifest["config"] = config.raw.source();
    manifest["field"] = config.field_dir.empty() ? Json(nullptr) : Json(config.field_dir);
    manifest["parameters"] = config.raw.manifest();
    manifest["unused_keys"] = config.raw.unused_keys();
    manifest["artifacts"] = run.artifacts;
    manifest["status"] = error.is_null() ? "ok" : "error";
    if (!error.is_null()) {
        manifest["error"] = error;
        write_json((fs::path(config.output_dir) / "error.json").string(), error);
        err << dump_json(error, -1) << "\n";
    }
    write_json((fs::path(config.output_dir) / "manifest.json").string(), manifest);
    return error.is_null() ? 0 : 1;
}

int run_from_file(const std::string& path, Pipeline pipeline, const std::vector<std::string>& overrides,
                  const std::string& output_override, const std::string& field_dir, std::ostream& log,
                  std::ostream& err) {
    std::string out_dir = output_override;
    if (out_dir.empty())
        if (const char* env = std::getenv("SEMIREG_OUT"); env && *env) out_dir = env;
    try {
        Config raw = path.empty() ? Config::parse("", "<none>") : Config::load(path);
        for (const std::string& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos || o.find('.') > eq) {
                throw Error(ErrorCode::configuration_error, kModule,
                            "override '" + o + "' must look like section.key=value");
            }
            raw.set(o.substr(0, eq), o.substr(eq + 1));
        }
        ExperimentConfig cfg = ExperimentConfig::load(std::move(raw), pipeline, output_override, field_dir);
        return run_experiment(cfg, log, err);
    } catch (const Error& e) {
        const Json error = error_json(e.module(), path, to_string(e.code()), e.what());
        err << dump_json(error, -1) << "\n";
        if (!out_dir.empty()) {
            try {
                ensure_directory(out_dir);
                write_json((fs::path(out_dir) / "error.json").string(), error);
            } catch (const Error&) {
            }
        }
        return 1;
    }
}

TimeBoundReport time_bound_report(const SolutionField& field, const InitialDatum& datum,
                                  const DiagnosticsSetup& d, double lip_t) {
    TimeBoundReport r;
    CoefficientSet coeffs = *field.coefficients();
    const GridSpec& g = field.grid();
    const int collar = d.second_differences.collar;
    r.estimated_moduli = estimate_time_moduli(coeffs, g, d.lattice);
    const SliceNorms u0 = datum_norms(g, datum, collar);
    SliceNorms sup;
    for (int k = 0; k < field.slices(); ++k) {
        const SliceNorms s = slice_norms(field, k, collar);
        sup.value = std::max(sup.value, s.value);
        sup.gradient = std::max(sup.gradient, s.gradient);
        sup.hessian = std::max(sup.hessian, s.hessian);
    }
    r.bounds = bound_constants(coeffs, g, u0, sup, d.lattice);
    r.residual_max = residual_field(field, collar).summary.max;
    r.tolerance = d.tolerance_factor * r.residual_max;
    r.deviation = initial_deviation_check(field, r.bounds.c0_init, r.tolerance, d.deviation_fraction, collar);
    r.time_lipschitz = time_lipschitz_check(lip_t, r.bounds, g.horizon, r.tolerance);
    return r;
}

SolutionField solve_configured(const ModelSetup& model, const GridSetup& grid) {
    SolveOptions options;
    options.theta = grid.theta;
    return solve(*model.coeffs, model.datum, grid.grid, options, model.shift);
}

// ---------------------------------------------------------------- reports

Json grid_json(const GridSpec& g) {
    Json j;
    j["dim"] = g.dim;
    j["half_width"] = json_array({g.half_width.begin(), g.half_width.begin() + g.dim});
    j["nodes"] = std::vector<int>(g.nodes.begin(), g.nodes.begin() + g.dim);
    j["steps"] = g.steps;
    j["horizon"] = json_number(g.horizon);
    j["dx"] = json_number(g.min_dx());
    j["dt"] = json_number(g.dt());
    return j;
}

Json residual_json(const ResidualSummary& s) {
    return {{"max", json_number(s.max)}, {"mean", json_number(s.mean)}, {"count", s.count}, {"collar", s.collar}};
}

Json clamp_json(const ClampReport& c) {
    return {{"clamped", c.clamped},
            {"updates", c.updates},
            {"fraction", json_number(c.fraction())},
            {"max_excursion", json_number(c.max_excursion)},
            {"tolerance", json_number(c.tolerance)}};
}

Json envelope_json(const Envelope& e) {
    return {{"m0", json_number(e.m0)},
            {"rate", json_number(e.rate)},
            {"offset", json_number(e.offset)},
            {"max_slack", json_number(e.max_slack)},
            {"rss", json_number(e.rss)},
            {"finite", e.finite()}};
}

Json regularity_json(const RegularityReport& r) {
    Json j;
    j["times"] = json_array(r.times);
    j["lower"] = json_array(r.lower);
    j["upper"] = json_array(r.upper);
    j["lip_x"] = json_array(r.lip_x);
    j["w2"] = json_array(r.w2);
    j["lip_t"] = json_number(r.lip_t);
    j["collar"] = r.collar;
    j["offset_cap"] = json_number(r.offset_cap);
    j["lower_envelope"] = envelope_json(r.lower_envelope);
    j["upper_envelope"] = envelope_json(r.upper_envelope);
    return j;
}

Json estimate_json(const PriceEstimate& e) {
    return {{"mode", to_string(e.mode)},
            {"mean", json_number(e.mean)},
            {"se", json_number(e.se)},
            {"weight_mean", json_number(e.weight_mean)},
            {"weight_se", json_number(e.weight_se)},
            {"clamped", e.clamped},
            {"kernel_evaluations", e.kernel_evaluations},
            {"clamp_fraction", json_number(e.clamp_fraction())}};
}

Json comparison_json(const PriceComparison& c, std::optional<PricingMode> only) {
    Json j;
    j["x0"] = json_array({c.x0.data(), c.x0.data() + c.x0.size()});
    j["t"] = json_number(c.t);
    j["pde_value"] = json_number(c.pde_value);
    j["residual_max"] = json_number(c.residual_max);
    j["allowance"] = json_number(c.allowance);
    bool holds = true;
    if (!only || *only == PricingMode::q_drift) {
        Json q = estimate_json(c.q_drift);
        q["error"] = json_number(c.q_error);
        q["z"] = json_number(c.q_z);
        q["within"] = c.q_within;
        j["q_drift"] = q;
        holds = holds && c.q_within;
    }
    if (!only || *only == PricingMode::p_weighted) {
        Json p = estimate_json(c.p_weighted);
        p["error"] = json_number(c.p_error);
        p["z"] = json_number(c.p_z);
        p["within"] = c.p_within;
        j["p_weighted"] = p;
        holds = holds && c.p_within;
    }
    if (!only) {
        j["cross_z"] = json_number(c.cross_z);
        j["cross_within"] = c.cross_within;
        holds = holds && c.cross_within;
    }
    j["clamp_flag"] = c.clamp_flag;
    j["holds"] = holds;
    return j;
}

Json structural_json(const StructuralReport& r) {
    Json j;
    j["mode"] = to_string(r.mode);
    j["exponent"] = json_number(r.exponent_l);
    j["tau_range"] = json_array({r.tau_range.lo, r.tau_range.hi});
    j["probes"] = r.probes;
    j["interval_covered"] = r.interval_covered;
    j["lambda_range"] = json_array({r.lambda_min, r.lambda_max});
    j["lambda_prime_range"] = json_array({r.lambda_prime_min, r.lambda_prime_max});
    j["structure_range"] = json_array({r.structure_min, r.structure_max});
    j["lambda_sign_ok"] = r.lambda_sign_ok;
    j["lambda_prime_positive"] = r.lambda_prime_positive;
    j["structure_positive"] = r.structure_positive;
    j["required_margin"] = json_number(r.required_margin);
    j["margin_ok"] = r.margin_ok;
    j["derivation_error"] = json_number(r.derivation_error);
    j["eta_sup"] = json_number(r.eta_sup);
    j["eta_finite"] = r.eta_finite;
    j["q_second_difference_max"] = json_number(r.q_second_difference_max);
    j["q_c2_ok"] = r.q_c2_ok;
    j["hypothesis_holds"] = r.hypothesis_holds;
    j["failures"] = r.failures;
    return j;
}

Json bounds_json(const BoundConstants& b) {
    Json moduli;
    auto put = [&](const char* name, const std::optional<double>& v) {
        moduli[name] = v ? json_number(*v) : Json(nullptr);
    };
    put("sigma_sigma_t", b.moduli.sigma_sigma_t);
    put("sigma_t", b.moduli.sigma_t);
    put("w", b.moduli.w);
    put("mu", b.moduli.mu);
    put("f", b.moduli.f);
    Json j;
    j["c0_init"] = json_number(b.c0_init);
    j["hamiltonian_sup"] = json_number(b.c0_sup);
    j["hamiltonian_neg_inf"] = json_number(b.c0_neg_inf);
    j["b1"] = json_number(b.b1);
    j["b2"] = json_number(b.b2);
    j["lambda_sup"] = json_number(b.lambda_sup);
    j["eta_sup"] = json_number(b.eta_sup);
    j["sigma_t_sup"] = json_number(b.sigma_t_sup);
    j["w_sup"] = json_number(b.w_sup);
    j["solution_w1"] = json_number(b.solution_w1);
    j["solution_w2"] = json_number(b.solution_w2);
    j["moduli"] = moduli;
    j["lattice_points"] = b.lattice_points;
    return j;
}

Json deviation_json(const DeviationReport& d) {
    return {{"c0", json_number(d.c0)},
            {"tolerance", json_number(d.tolerance)},
            {"worst_ratio", json_number(d.worst_ratio)},
            {"holds", d.holds},
            {"times", json_array(d.times)},
            {"deviation", json_array(d.deviation)},
            {"bound", json_array(d.bound)}};
}

}  // namespace semireg
