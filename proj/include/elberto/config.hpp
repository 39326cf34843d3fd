#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace elberto::config {

// Flat key=value configuration with [section] headers; keys are stored as
// "section.key". Parse errors carry line numbers.
class ConfigMap {
public:
    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    long long get_i64(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

ConfigMap parse_file(const std::string& path);
ConfigMap parse_string(const std::string& text, const std::string& origin);

}  // namespace elberto::config
