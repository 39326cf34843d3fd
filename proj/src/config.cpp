#include "elberto/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "elberto/text.hpp"

namespace elberto::config {

namespace {

[[noreturn]] void parse_error(const std::string& origin, int line, const std::string& msg) {
    throw std::runtime_error(origin + ": line " + std::to_string(line) + ": " + msg);
}

}  // namespace

ConfigMap parse_string(const std::string& content, const std::string& origin) {
    ConfigMap cfg;
    std::istringstream in(content);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = text::normalize_whitespace(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) parse_error(origin, lineno, "bad section header");
            section = text::normalize_whitespace(t.substr(1, t.size() - 2));
            if (section.empty()) parse_error(origin, lineno, "empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) parse_error(origin, lineno, "expected key = value");
        const std::string key = text::normalize_whitespace(t.substr(0, eq));
        const std::string value = text::normalize_whitespace(t.substr(eq + 1));
        if (key.empty()) parse_error(origin, lineno, "empty key");
        cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
}

ConfigMap parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

std::string ConfigMap::get_str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        const int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error("config key '" + key + "': not an integer: " + it->second);
    }
}

long long ConfigMap::get_i64(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error("config key '" + key + "': not an integer: " + it->second);
    }
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error("config key '" + key + "': not a number: " + it->second);
    }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key '" + key + "': not a boolean: " + v);
}

}  // namespace elberto::config
