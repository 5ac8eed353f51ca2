#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#define TOML_HEADER_ONLY 1
#include <toml.hpp>

namespace psfunmix::cli {

/// Read-once view of a TOML config. Every lookup records the resolved value
/// (default or explicit) for the manifest echo; keys that are never looked up
/// are reported by finish() so typos fail loudly.
class Config {
public:
    static constexpr std::int64_t kSchemaVersion = 1;

    /// Empty config: every key takes its default.
    Config() = default;
    /// Parses `path`. Missing file, syntax errors and a wrong schema_version
    /// raise ValidationError / ParseError.
    static Config load(const std::string& path);
    static Config parse(std::string_view text, const std::string& source = "<string>");

    double number(const std::string& key, double fallback);
    std::optional<double> optional_number(const std::string& key);
    std::int64_t integer(const std::string& key, std::int64_t fallback);
    std::size_t count(const std::string& key, std::size_t fallback, std::size_t minimum = 0);
    bool boolean(const std::string& key, bool fallback);
    std::string string(const std::string& key, const std::string& fallback);
    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
    std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback);
    std::vector<std::vector<double>> nested_numbers(const std::string& key,
                                                    const std::vector<std::vector<double>>& fallback);
    /// Keys of a sub-table mapped to numbers (e.g. composition = { "Al I" = 0.9 }).
    std::map<std::string, double> number_table(const std::string& key, const std::map<std::string, double>& fallback);
    bool has(const std::string& key) const;
    /// True when `key` exists and holds a single number.
    bool has_number(const std::string& key) const;

    /// Records a value that did not come from the file (flag overrides).
    void record(const std::string& key, nlohmann::ordered_json value);

    /// Throws ValidationError naming every key that was never read.
    void finish() const;

    const nlohmann::ordered_json& resolved() const noexcept { return resolved_; }

private:
    const toml::node* find(const std::string& key);
    [[noreturn]] void type_error(const std::string& key, const char* expected) const;

    toml::table table_;
    std::string source_;
    std::set<std::string> used_;
    nlohmann::ordered_json resolved_ = nlohmann::ordered_json::object();
};

}  // namespace psfunmix::cli
