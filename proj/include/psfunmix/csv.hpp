#pragma once

#include <cstdio>
#include <ostream>
#include <string>

namespace psfunmix {

/// Shortest-roundtrip-safe text for a double ("%.17g"); identical on every run.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes comma-separated fields followed by a newline. Doubles go through
/// format_double; strings are written as-is (callers keep them comma-free).
class CsvRow {
public:
    explicit CsvRow(std::ostream& out) : out_(out) {}
    ~CsvRow() { out_ << '\n'; }
    CsvRow(const CsvRow&) = delete;
    CsvRow& operator=(const CsvRow&) = delete;

    CsvRow& operator<<(double v) { return field(format_double(v)); }
    CsvRow& operator<<(std::size_t v) { return field(std::to_string(v)); }
    CsvRow& operator<<(int v) { return field(std::to_string(v)); }
    CsvRow& operator<<(bool v) { return field(v ? "1" : "0"); }
    CsvRow& operator<<(const std::string& v) { return field(v); }
    CsvRow& operator<<(const char* v) { return field(v); }

private:
    CsvRow& field(const std::string& text) {
        if (!first_) out_ << ',';
        first_ = false;
        out_ << text;
        return *this;
    }
    std::ostream& out_;
    bool first_ = true;
};

}  // namespace psfunmix
