#include "cvdist/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cvdist {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

double parse_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v))
        throw std::invalid_argument("config key '" + key + "': expected a number, got '" + text + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || v < -1000000000L || v > 1000000000L)
        throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + text + "'");
    return static_cast<int>(v);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str(), path);
}

KeyValueConfig KeyValueConfig::from_text(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.find('=') == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key=value");
        cfg.assign(t);
    }
    return cfg;
}

void KeyValueConfig::assign(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("empty key in '" + assignment + "'");
    values_[key] = trim(assignment.substr(eq + 1));
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    return v ? parse_double(key, *v) : fallback;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    const auto v = raw(key);
    return v ? parse_int(key, *v) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<double> out;
    if (v->find(':') != std::string::npos) {
        const auto parts = split(*v, ':');
        if (parts.size() != 3) throw std::invalid_argument("config key '" + key + "': range must be start:stop:step");
        const double start = parse_double(key, parts[0]);
        const double stop = parse_double(key, parts[1]);
        const double step = parse_double(key, parts[2]);
        if (!(step > 0.0) || stop < start)
            throw std::invalid_argument("config key '" + key + "': range needs step > 0 and stop >= start");
        const long count = std::lround(std::floor((stop - start) / step + 1e-9));
        for (long i = 0; i <= count; ++i) {
            // Snap to 1e-12 so accumulated steps such as 0.1 + 2 * 0.1 land on 0.3.
            out.push_back(std::round((start + i * step) * 1e12) / 1e12);
        }
        return out;
    }
    for (const auto& item : split(*v, ',')) out.push_back(parse_double(key, item));
    if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const auto& item : split(*v, ',')) out.push_back(parse_int(key, item));
    if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(const std::string& key,
                                                         const std::vector<std::string>& fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    auto out = split(*v, ',');
    if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_)
        if (!known.count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
}

}  // namespace cvdist
