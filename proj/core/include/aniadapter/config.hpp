#pragma once

#include <map>
#include <optional>
#include <string>

namespace aniadapter {

// Plain-text key-value config ("key = value" lines, '#' comments).
// Every CLI run dumps the fully resolved table next to its outputs so a run
// can be reproduced from the log alone.
class Config {
public:
    Config() = default;

    static Config load(const std::string& path);
    static Config parse(const std::string& text);

    void save(const std::string& path) const;
    std::string dump() const;

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, int64_t value);

    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Merge: values from `other` override this.
    void merge(const Config& other);

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace aniadapter
