#include "aniadapter/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace((unsigned char)s[a])) ++a;
    while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
    return s.substr(a, b - a);
}

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw DataError("config line " + std::to_string(lineno) + ": empty key");
        c.kv_[key] = val;
    }
    return c;
}

void Config::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write config file: " + path);
    f << dump();
}

std::string Config::dump() const {
    std::ostringstream out;
    for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
    return out.str();
}

void Config::set(const std::string& key, double value) {
    std::ostringstream s;
    s.precision(17);
    s << value;
    kv_[key] = s.str();
}

void Config::set(const std::string& key, int64_t value) {
    kv_[key] = std::to_string(value);
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw DataError("config key '" + key + "': not a number: " + it->second);
    }
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        return std::stoll(it->second);
    } catch (...) {
        throw DataError("config key '" + key + "': not an integer: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw DataError("config key '" + key + "': not a boolean: " + it->second);
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.kv_) kv_[k] = v;
}

}  // namespace aniadapter
