#pragma once

#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace semireg {

/// Sectioned key = value configuration. Every lookup (explicit or defaulted)
/// is recorded in the manifest under "section.key".
class Config {
public:
    static Config load(const std::string& path);
    static Config parse(const std::string& text, const std::string& source = "<inline>");

    const std::string& source() const { return source_; }
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    /// Command-line overrides replace or add keys before they are read.
    void set(const std::string& key, const std::string& value);

    /// Records a value computed from other settings (e.g. a derived step count).
    void record(const std::string& key, const nlohmann::ordered_json& value) const;

    const nlohmann::ordered_json& manifest() const { return manifest_; }
    std::vector<std::string> unused_keys() const;

private:
    std::optional<std::string> raw(const std::string& key) const;
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

    boost::property_tree::ptree tree_;
    std::string source_;
    mutable nlohmann::ordered_json manifest_ = nlohmann::ordered_json::object();
    mutable std::set<std::string> read_;
};

}  // namespace semireg
