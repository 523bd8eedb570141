#include "semireg/config.hpp"

#include "semireg/error.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace semireg {

namespace {

constexpr const char* kModule = "cli";

std::optional<double> parse_number(const std::string& text) {
    std::string t = boost::algorithm::trim_copy(text);
    std::string lower = boost::algorithm::to_lower_copy(t);
    if (lower == "inf" || lower == "+inf") return std::numeric_limits<double>::infinity();
    if (lower == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
    return v;
}

nlohmann::ordered_json number_json(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

}  // namespace

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, kModule, "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

Config Config::parse(const std::string& text, const std::string& source) {
    Config c;
    c.source_ = source;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error(ErrorCode::configuration_error, kModule,
                    source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    return c;
}

std::optional<std::string> Config::raw(const std::string& key) const {
    read_.insert(key);
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    std::string s = *v;
    // strip trailing comments
    const auto hash = s.find_first_of("#;");
    if (hash != std::string::npos) s.erase(hash);
    boost::algorithm::trim(s);
    return s;
}

bool Config::has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

void Config::fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorCode::configuration_error, kModule, source_ + ": [" + key + "] " + what);
}

std::string Config::get_string(const std::string& key) const {
    const auto v = raw(key);
    if (!v || v->empty()) fail(key, "is required");
    manifest_[key] = *v;
    return *v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto v = raw(key);
    const std::string out = v && !v->empty() ? *v : fallback;
    manifest_[key] = out;
    return out;
}

double Config::get_double(const std::string& key) const {
    const auto v = raw(key);
    if (!v || v->empty()) fail(key, "is required");
    const auto d = parse_number(*v);
    if (!d) fail(key, "is not a number: '" + *v + "'");
    manifest_[key] = number_json(*d);
    return *d;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    if (!v || v->empty()) {
        manifest_[key] = number_json(fallback);
        return fallback;
    }
    return get_double(key);
}

long long Config::get_int(const std::string& key) const {
    const auto v = raw(key);
    if (!v || v->empty()) fail(key, "is required");
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) fail(key, "is not an integer: '" + *v + "'");
    manifest_[key] = out;
    return out;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    const auto v = raw(key);
    if (!v || v->empty()) {
        manifest_[key] = fallback;
        return fallback;
    }
    return get_int(key);
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
    const auto v = raw(key);
    std::uint64_t out = fallback;
    if (v && !v->empty()) {
        const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc() || ptr != v->data() + v->size()) fail(key, "is not an unsigned integer: '" + *v + "'");
    }
    manifest_[key] = out;
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto v = raw(key);
    bool out = fallback;
    if (v && !v->empty()) {
        const std::string s = boost::algorithm::to_lower_copy(*v);
        if (s == "true" || s == "yes" || s == "on" || s == "1") {
            out = true;
        } else if (s == "false" || s == "no" || s == "off" || s == "0") {
            out = false;
        } else {
            fail(key, "is not a boolean: '" + *v + "'");
        }
    }
    manifest_[key] = out;
    return out;
}

std::vector<double> Config::get_list(const std::string& key) const {
    const auto v = raw(key);
    if (!v || v->empty()) fail(key, "is required");
    std::vector<std::string> parts;
    boost::algorithm::split(parts, *v, boost::algorithm::is_any_of(", \t"), boost::algorithm::token_compress_on);
    std::vector<double> out;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : parts) {
        if (p.empty()) continue;
        const auto d = parse_number(p);
        if (!d) fail(key, "has a non-numeric entry '" + p + "'");
        out.push_back(*d);
        arr.push_back(number_json(*d));
    }
    manifest_[key] = arr;
    return out;
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
    const auto v = raw(key);
    if (!v || v->empty()) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (double d : fallback) arr.push_back(number_json(d));
        manifest_[key] = arr;
        return fallback;
    }
    return get_list(key);
}

void Config::set(const std::string& key, const std::string& value) { tree_.put(key, value); }

void Config::record(const std::string& key, const nlohmann::ordered_json& value) const { manifest_[key] = value; }

std::vector<std::string> Config::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [section, body] : tree_) {
        if (body.empty()) {
            if (!read_.count(section)) out.push_back(section);
            continue;
        }
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (!read_.count(full)) out.push_back(full);
        }
    }
    return out;
}

}  // namespace semireg
