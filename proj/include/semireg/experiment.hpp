#pragma once

#include "semireg/config.hpp"
#include "semireg/field_io.hpp"
#include "semireg/model.hpp"
#include "semireg/pde_solver.hpp"
#include "semireg/regularity.hpp"
#include "semireg/sde_mc.hpp"
#include "semireg/transform.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace semireg {

enum class Pipeline {
    solve,
    price,
    verify_duality,
    diagnose_regularity,
    diagnose_degeneracy,
    transform_check,
    counterexample,
};

const char* to_string(Pipeline p) noexcept;
Pipeline parse_pipeline(const std::string& name);

struct ModelSetup {
    bool mbs = true;
    MbsModel market;
    FactorDynamics dynamics;
    std::shared_ptr<const CoefficientSet> coeffs;
    std::shared_ptr<const SmoothField> shift;  // set for the mortgage model
    InitialDatum datum;                        // u(·,0)
    std::string tag;  // canonical model + grid settings, guards reloaded fields
};

struct GridSetup {
    GridSpec grid;
    double theta = 0.45;
    bool stability_limited = true;
};

struct PricingSetup {
    PriceOptions options;
    std::optional<PricingMode> mode;  // empty: both
    Vec x0;
    double t = 0.0;
};

struct DiagnosticsSetup {
    bool regularity = true;
    bool deviation = true;
    int slices = 21;
    SecondDifferenceOptions second_differences;
    LatticeOptions lattice;
    double deviation_fraction = 0.1;
    double tolerance_factor = 10.0;
};

struct DegeneracySetup {
    SimulationOptions simulation;
    Vec x0;
    bool kernel_spread = true;
};

struct TransformSetup {
    TransformMode mode = TransformMode::semiconvex;
    double exponent = 4.0;
    double c = 0.0;
    Interval interval;
    ValueScalar lambda_fn;
    ValueScalar eta_fn;
    TransformOptions options;
    int probes = 1001;
};

struct CounterexampleSetup {
    std::vector<double> horizons{1.0, 2.0};
    std::size_t paths = 100000;
    int steps = 1000;
    std::uint64_t seed = 1;
};

/// Resolved settings for one pipeline. Only the sections a pipeline uses are
/// read, so the manifest lists exactly the consumed parameters.
struct ExperimentConfig {
    Pipeline pipeline = Pipeline::solve;
    Config raw;
    std::string output_dir = "out";
    std::string field_dir;  // load a saved field instead of solving
    std::optional<ModelSetup> model;
    std::optional<GridSetup> grid;
    std::optional<PricingSetup> pricing;
    std::optional<DiagnosticsSetup> diagnostics;
    std::optional<DegeneracySetup> degeneracy;
    std::optional<TransformSetup> transform;
    std::optional<CounterexampleSetup> counterexample;

    /// Validates families and the grid stability bound. `output_override`
    /// wins over SEMIREG_OUT, which wins over output.dir.
    static ExperimentConfig load(Config raw, Pipeline pipeline, const std::string& output_override = "",
                                 const std::string& field_dir = "");
};

/// Machine-readable error record: module, config source, code, message.
Json error_json(const std::string& module, const std::string& config, const std::string& code,
                const std::string& message);

/// Runs the pipeline and writes its artifacts plus manifest.json into
/// output_dir. Returns 0 on success; on failure error.json is written, the
/// record is printed to `err`, and 1 is returned.
int run_experiment(ExperimentConfig& config, std::ostream& log, std::ostream& err);

/// Loads the configuration file and runs; configuration errors are reported
/// the same way as module errors.
int run_from_file(const std::string& path, Pipeline pipeline, const std::vector<std::string>& overrides,
                  const std::string& output_override, const std::string& field_dir, std::ostream& log,
                  std::ostream& err);

// Report builders shared with the acceptance runner.
Json grid_json(const GridSpec& grid);
Json residual_json(const ResidualSummary& summary);
Json clamp_json(const ClampReport& clamp);
Json regularity_json(const RegularityReport& report);
Json envelope_json(const Envelope& envelope);
Json estimate_json(const PriceEstimate& estimate);
Json comparison_json(const PriceComparison& comparison, std::optional<PricingMode> only = std::nullopt);
Json structural_json(const StructuralReport& report);
Json bounds_json(const BoundConstants& bounds);
Json deviation_json(const DeviationReport& report);

struct TimeBoundReport {
    BoundConstants bounds;
    DeviationReport deviation;
    TimeLipschitzCheck time_lipschitz;
    std::vector<std::string> estimated_moduli;
    double residual_max = 0.0;
    double tolerance = 0.0;
};

/// Bound constants from the datum and solution norms, then the initial
/// deviation and time-Lipschitz checks with tolerance factor·(residual max).
TimeBoundReport time_bound_report(const SolutionField& field, const InitialDatum& datum,
                                  const DiagnosticsSetup& diagnostics, double lip_t);

/// The marched field for the configured model and grid.
SolutionField solve_configured(const ModelSetup& model, const GridSetup& grid);

}  // namespace semireg
