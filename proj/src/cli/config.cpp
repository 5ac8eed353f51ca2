#include "config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "psfunmix/errors.hpp"

namespace psfunmix::cli {

namespace {

void collect_keys(const toml::table& t, const std::string& prefix, std::vector<std::string>& out) {
    for (const auto& [k, v] : t) {
        const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
        const auto* sub = v.as_table();
        if (sub && key != "composition" && key != "widths") {
            collect_keys(*sub, key, out);
        } else {
            out.push_back(key);
        }
    }
}

std::optional<double> as_double(const toml::node& n) {
    if (const auto* f = n.as_floating_point()) return f->get();
    if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
    return std::nullopt;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
    Config c;
    c.source_ = source;
    try {
        c.table_ = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source << ": " << e.description();
        throw ParseError(os.str(), static_cast<std::size_t>(e.source().begin.line));
    }
    const auto* version = c.table_.get("schema_version");
    if (!version || !version->is_integer()) {
        throw ValidationError(source + ": missing integer schema_version (expected " + std::to_string(kSchemaVersion) +
                              ")");
    }
    if (version->as_integer()->get() != kSchemaVersion) {
        throw ValidationError(source + ": unsupported schema_version " + std::to_string(version->as_integer()->get()) +
                              " (expected " + std::to_string(kSchemaVersion) + ")");
    }
    c.used_.insert("schema_version");
    return c;
}

Config Config::load(const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) throw ValidationError("config file not found: " + path);
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

const toml::node* Config::find(const std::string& key) {
    used_.insert(key);
    return table_.at_path(key).node();
}

bool Config::has(const std::string& key) const { return table_.at_path(key).node() != nullptr; }

bool Config::has_number(const std::string& key) const {
    const auto* n = table_.at_path(key).node();
    return n && (n->is_integer() || n->is_floating_point());
}

void Config::type_error(const std::string& key, const char* expected) const {
    throw ValidationError(source_ + ": key '" + key + "' must be " + expected);
}

void Config::record(const std::string& key, nlohmann::ordered_json value) { resolved_[key] = std::move(value); }

double Config::number(const std::string& key, double fallback) {
    double v = fallback;
    if (const auto* n = find(key)) {
        const auto d = as_double(*n);
        if (!d || !std::isfinite(*d)) type_error(key, "a finite number");
        v = *d;
    }
    record(key, v);
    return v;
}

std::optional<double> Config::optional_number(const std::string& key) {
    std::optional<double> v;
    if (const auto* n = find(key)) {
        const auto d = as_double(*n);
        if (!d || !std::isfinite(*d)) type_error(key, "a finite number");
        v = *d;
    }
    record(key, v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
    return v;
}

std::int64_t Config::integer(const std::string& key, std::int64_t fallback) {
    std::int64_t v = fallback;
    if (const auto* n = find(key)) {
        if (!n->is_integer()) type_error(key, "an integer");
        v = n->as_integer()->get();
    }
    record(key, v);
    return v;
}

std::size_t Config::count(const std::string& key, std::size_t fallback, std::size_t minimum) {
    const std::int64_t v = integer(key, static_cast<std::int64_t>(fallback));
    if (v < static_cast<std::int64_t>(minimum)) {
        type_error(key, ("an integer >= " + std::to_string(minimum)).c_str());
    }
    return static_cast<std::size_t>(v);
}

bool Config::boolean(const std::string& key, bool fallback) {
    bool v = fallback;
    if (const auto* n = find(key)) {
        if (!n->is_boolean()) type_error(key, "a boolean");
        v = n->as_boolean()->get();
    }
    record(key, v);
    return v;
}

std::string Config::string(const std::string& key, const std::string& fallback) {
    std::string v = fallback;
    if (const auto* n = find(key)) {
        if (!n->is_string()) type_error(key, "a string");
        v = n->as_string()->get();
    }
    record(key, v);
    return v;
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) {
    std::vector<double> v = fallback;
    if (const auto* n = find(key)) {
        const auto* arr = n->as_array();
        if (!arr) type_error(key, "an array of numbers");
        v.clear();
        for (const auto& e : *arr) {
            const auto d = as_double(e);
            if (!d || !std::isfinite(*d)) type_error(key, "an array of finite numbers");
            v.push_back(*d);
        }
    }
    record(key, v);
    return v;
}

std::vector<std::string> Config::strings(const std::string& key, const std::vector<std::string>& fallback) {
    std::vector<std::string> v = fallback;
    if (const auto* n = find(key)) {
        const auto* arr = n->as_array();
        if (!arr) type_error(key, "an array of strings");
        v.clear();
        for (const auto& e : *arr) {
            if (!e.is_string()) type_error(key, "an array of strings");
            v.push_back(e.as_string()->get());
        }
    }
    record(key, v);
    return v;
}

std::vector<std::vector<double>> Config::nested_numbers(const std::string& key,
                                                        const std::vector<std::vector<double>>& fallback) {
    std::vector<std::vector<double>> v = fallback;
    if (const auto* n = find(key)) {
        const auto* arr = n->as_array();
        if (!arr) type_error(key, "an array of arrays of numbers");
        v.clear();
        for (const auto& row : *arr) {
            const auto* inner = row.as_array();
            if (!inner) type_error(key, "an array of arrays of numbers");
            std::vector<double> r;
            for (const auto& e : *inner) {
                const auto d = as_double(e);
                if (!d || !std::isfinite(*d)) type_error(key, "an array of arrays of finite numbers");
                r.push_back(*d);
            }
            v.push_back(std::move(r));
        }
    }
    record(key, v);
    return v;
}

std::map<std::string, double> Config::number_table(const std::string& key,
                                                   const std::map<std::string, double>& fallback) {
    std::map<std::string, double> v = fallback;
    if (const auto* n = find(key)) {
        const auto* t = n->as_table();
        if (!t) type_error(key, "a table of numbers");
        v.clear();
        for (const auto& [k, e] : *t) {
            const auto d = as_double(e);
            if (!d || !std::isfinite(*d)) type_error(key, "a table of finite numbers");
            v[std::string(k.str())] = *d;
        }
    }
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, d] : v) j[k] = d;
    record(key, j);
    return v;
}

void Config::finish() const {
    std::vector<std::string> keys;
    collect_keys(table_, "", keys);
    std::vector<std::string> unknown;
    for (const auto& k : keys) {
        if (!used_.count(k)) unknown.push_back(k);
    }
    if (unknown.empty()) return;
    std::string msg = source_ + ": unknown key(s):";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
}

}  // namespace psfunmix::cli
