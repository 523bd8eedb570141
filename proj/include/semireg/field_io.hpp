#pragma once

#include "semireg/pde_solver.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace semireg {

using Json = nlohmann::ordered_json;

/// %.17g; non-finite values as "inf", "-inf", "nan".
std::string format_double(double v);

/// JSON text with every floating-point number printed at 17 significant digits.
std::string dump_json(const Json& j, int indent = 2);
void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

/// Finite doubles as numbers, others as strings.
Json json_number(double v);
Json json_array(const std::vector<double>& v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

/// Plot-ready rows (t, x₁..x_N, u, U) on `slices` evenly spaced time indices.
void write_solution_csv(const std::string& path, const SolutionField& field, int slices);

/// Full marched state: field.json (grid and model tag) and state.csv (one slice per line).
void save_field(const std::string& dir, const SolutionField& field, const std::string& model_tag);

/// Reloads a saved field against freshly built coefficients and shift; the
/// stored model tag must match.
SolutionField load_field(const std::string& dir, std::shared_ptr<const CoefficientSet> coeffs,
                         std::shared_ptr<const SmoothField> shift, const std::string& model_tag);

void ensure_directory(const std::string& dir);

}  // namespace semireg
