#include "semireg/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
};

// A saved field may be named by its directory or by either of its files.
std::string field_directory(const std::string& path) {
    if (path.empty()) return path;
    const std::filesystem::path p(path);
    return std::filesystem::is_regular_file(p) ? p.parent_path().string() : path;
}

template <class T>
void forward(std::vector<std::string>& overrides, const std::string& key, const std::optional<T>& v) {
    if (v) overrides.push_back(key + "=" + std::to_string(*v));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semilinear parabolic solver, Monte Carlo duality checks and regularity diagnostics"};
    app.require_subcommand(1);

    std::map<std::string, Common> common;
    std::map<std::string, std::string> field;
    std::optional<long long> paths, steps;
    std::optional<unsigned long long> seed;
    std::string mode;
    std::vector<double> horizons;

    auto add = [&](const std::string& name, const std::string& help, bool config_required) {
        CLI::App* sub = app.add_subcommand(name, help);
        Common& c = common[name];
        auto* opt = sub->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
        if (config_required) opt->required();
        sub->add_option("--out", c.out, "output directory (overrides SEMIREG_OUT and output.dir)");
        sub->add_option("--set", c.overrides, "override a setting, section.key=value (repeatable)");
        return sub;
    };

    add("solve", "march the PDE and export the field", true);
    CLI::App* price = add("price", "Monte Carlo price against a solved field", true);
    price->add_option("--field", field["price"], "saved field directory (solved inline when omitted)");
    price->add_option("--paths", paths, "number of paths");
    price->add_option("--mode", mode, "q or pw")->check(CLI::IsMember({"q", "pw", "both"}));
    price->add_option("--seed", seed, "generator seed");
    CLI::App* duality = add("verify-duality", "solve, diagnose, price with both estimators and compare", true);
    duality->add_option("--paths", paths, "number of paths");
    duality->add_option("--seed", seed, "generator seed");
    CLI::App* reg = add("diagnose-regularity", "semiconvexity constants, envelopes and time bounds", true);
    reg->add_option("--field", field["diagnose-regularity"], "saved field directory or its state.csv");
    CLI::App* deg = add("diagnose-degeneracy", "kernel decomposition and projection diagnostics", true);
    deg->add_option("--paths", paths, "number of paths");
    deg->add_option("--seed", seed, "generator seed");
    add("transform-check", "change-of-variable construction and structural report", true);
    CLI::App* counter = add("counterexample", "occupation time of the degenerate two-factor example", false);
    counter->add_option("--T", horizons, "horizons")->expected(1, -1);
    counter->add_option("--paths", paths, "number of paths");
    counter->add_option("--steps", steps, "time steps");
    counter->add_option("--seed", seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string name = app.get_subcommands().front()->get_name();
    const semireg::Pipeline pipeline = semireg::parse_pipeline(name);
    Common& c = common[name];
    std::vector<std::string> overrides;
    std::string section = "mc";
    if (pipeline == semireg::Pipeline::diagnose_degeneracy) section = "degeneracy";
    if (pipeline == semireg::Pipeline::counterexample) section = "counterexample";
    forward(overrides, section + ".paths", paths);
    forward(overrides, section + ".steps", steps);
    forward(overrides, section + ".seed", seed);
    if (!mode.empty()) overrides.push_back("mc.mode=" + mode);
    if (!horizons.empty()) {
        std::string list;
        for (std::size_t i = 0; i < horizons.size(); ++i) list += (i ? "," : "") + semireg::format_double(horizons[i]);
        overrides.push_back("counterexample.horizons=" + list);
    }
    overrides.insert(overrides.end(), c.overrides.begin(), c.overrides.end());
    return semireg::run_from_file(c.config, pipeline, overrides, c.out, field_directory(field[name]), std::cerr,
                                  std::cerr);
}
