#include "acfseg/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace acfseg {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& origin) {
    ConfigMap m;
    m.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected 'key = value', got: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
        if (m.values_.count(key))
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                                     key + "'");
        m.values_[key] = value;
    }
    return m;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int ConfigMap::get_int(const std::string& key, int fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error(origin_ + ": key '" + key + "' is not an integer: " + it->second);
    }
}

float ConfigMap::get_float(const std::string& key, float fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        float v = std::stof(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::runtime_error(origin_ + ": key '" + key + "' is not a number: " + it->second);
    }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error(origin_ + ": key '" + key + "' is not a boolean: " + it->second);
}

std::vector<int> ConfigMap::get_int_list(const std::string& key, std::vector<int> fallback) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            out.push_back(std::stoi(trim(part)));
        } catch (...) {
            throw std::runtime_error(origin_ + ": key '" + key + "' is not an integer list");
        }
    }
    if (out.empty())
        throw std::runtime_error(origin_ + ": key '" + key + "' is an empty list");
    return out;
}

void ConfigMap::finish() const {
    std::string unknown;
    for (const auto& [k, v] : values_)
        if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty())
        throw std::runtime_error(origin_ + ": unknown config keys: " + unknown);
}

}  // namespace acfseg
