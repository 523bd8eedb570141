#include "semireg/field_io.hpp"

#include "semireg/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "io";

void dump(const Json& j, std::string& out, int indent, int depth) {
    const auto newline = [&](int d) {
        if (indent < 0) return;
        out += '\n';
        out.append(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += '{';
            bool first = true;
            for (const auto& [k, v] : j.items()) {
                if (!first) out += ',';
                first = false;
                newline(depth + 1);
                out += Json(k).dump();
                out += indent < 0 ? ":" : ": ";
                dump(v, out, indent, depth + 1);
            }
            newline(depth);
            out += '}';
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // numeric arrays stay on one line
            const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
            out += '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += flat ? ", " : ",";
                first = false;
                if (!flat) newline(depth + 1);
                dump(v, out, indent, depth + 1);
            }
            if (!flat) newline(depth);
            out += ']';
            return;
        }
        case Json::value_t::number_float:
            out += format_double(j.get<double>());
            return;
        default:
            out += j.dump();
    }
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string dump_json(const Json& j, int indent) {
    std::string out;
    dump(j, out, indent, 0);
    return out;
}

Json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

Json json_array(const std::vector<double>& v) {
    Json a = Json::array();
    for (double d : v) a.push_back(json_number(d));
    return a;
}

void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io_error, kModule, "cannot create directory " + dir + ": " + ec.message());
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, kModule, "cannot write " + path);
    out << dump_json(j) << '\n';
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, kModule, "cannot read " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::io_error, kModule, path + ": " + e.what());
    }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size()) throw Error(ErrorCode::contract_violation, kModule, "csv header mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, kModule, "cannot write " + path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    const std::size_t rows = columns.empty() ? 0 : columns[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << format_double(columns[c][r]);
        out << '\n';
    }
}

void write_solution_csv(const std::string& path, const SolutionField& field, int slices) {
    const GridSpec& g = field.grid();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, kModule, "cannot write " + path);
    out << 't';
    for (int a = 0; a < g.dim; ++a) out << ",x" << (a + 1);
    out << ",u,U\n";
    const int count = std::max(2, std::min(slices, field.slices()));
    int last = -1;
    for (int j = 0; j < count; ++j) {
        const int k = static_cast<int>(std::lround(static_cast<double>(g.steps) * j / (count - 1)));
        if (k == last) continue;
        last = k;
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const Vec x = g.coordinates(i);
            out << format_double(g.time(k));
            for (int a = 0; a < g.dim; ++a) out << ',' << format_double(x(a));
            out << ',' << format_double(field.value(k, i)) << ',' << format_double(field.deviation(k, i)) << '\n';
        }
    }
}

void save_field(const std::string& dir, const SolutionField& field, const std::string& model_tag) {
    ensure_directory(dir);
    const GridSpec& g = field.grid();
    Json meta;
    meta["dim"] = g.dim;
    meta["half_width"] = json_array({g.half_width.begin(), g.half_width.begin() + g.dim});
    meta["nodes"] = std::vector<int>(g.nodes.begin(), g.nodes.begin() + g.dim);
    meta["steps"] = g.steps;
    meta["horizon"] = g.horizon;
    meta["shifted"] = field.shift() != nullptr;
    meta["model"] = model_tag;
    write_json((std::filesystem::path(dir) / "field.json").string(), meta);
    std::ofstream out((std::filesystem::path(dir) / "state.csv").string(), std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, kModule, "cannot write state in " + dir);
    for (int k = 0; k < field.slices(); ++k) {
        const auto s = field.state_slice(k);
        for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << format_double(s[i]);
        out << '\n';
    }
}

SolutionField load_field(const std::string& dir, std::shared_ptr<const CoefficientSet> coeffs,
                         std::shared_ptr<const SmoothField> shift, const std::string& model_tag) {
    const Json meta = read_json((std::filesystem::path(dir) / "field.json").string());
    if (meta.value("model", std::string()) != model_tag) {
        throw Error(ErrorCode::configuration_error, kModule,
                    "field in " + dir + " was solved for a different model configuration");
    }
    GridSpec g;
    g.dim = meta.at("dim").get<int>();
    for (int a = 0; a < g.dim; ++a) {
        g.half_width[a] = meta.at("half_width").at(a).get<double>();
        g.nodes[a] = meta.at("nodes").at(a).get<int>();
    }
    g.steps = meta.at("steps").get<int>();
    g.horizon = meta.at("horizon").get<double>();
    g.validate();
    if (meta.at("shifted").get<bool>() != (shift != nullptr)) {
        throw Error(ErrorCode::configuration_error, kModule, "saved field and model disagree on the shift");
    }
    SolutionField field(g, std::move(coeffs), std::move(shift));
    std::ifstream in((std::filesystem::path(dir) / "state.csv").string());
    if (!in) throw Error(ErrorCode::io_error, kModule, "cannot read state in " + dir);
    std::string line;
    for (int k = 0; k < field.slices(); ++k) {
        if (!std::getline(in, line)) throw Error(ErrorCode::io_error, kModule, "state file is truncated");
        auto dst = field.state_slice(k);
        std::size_t i = 0;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            if (i >= dst.size()) throw Error(ErrorCode::io_error, kModule, "state row too long");
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc()) throw Error(ErrorCode::io_error, kModule, "bad state value '" + cell + "'");
            dst[i++] = v;
        }
        if (i != dst.size()) throw Error(ErrorCode::io_error, kModule, "state row too short");
    }
    return field;
}

}  // namespace semireg
