#pragma once

// Flat key=value scenario files. Blank lines and lines starting with '#' are ignored.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cvdist {

class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_text(const std::string& text, const std::string& origin = "<text>");

    /// Parses "key=value"; later assignments win.
    void assign(const std::string& assignment);
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated list, or "start:stop:step" (inclusive, step > 0).
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

    /// Throws std::invalid_argument naming the first key not in `known`.
    void reject_unknown(const std::set<std::string>& known) const;

private:
    std::optional<std::string> raw(const std::string& key) const;
    std::map<std::string, std::string> values_;
};

}  // namespace cvdist
