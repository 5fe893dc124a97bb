#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace acfseg {

// "key = value" per line, '#' starts a comment. Every key must be consumed
// by a typed getter before finish() is called; leftovers are errors.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback);
    int get_int(const std::string& key, int fallback);
    float get_float(const std::string& key, float fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback);

    // Throws listing any keys never consumed.
    void finish() const;

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

}  // namespace acfseg
