// Flat key-value configuration files: one `key = value` per line, `#` starts
// a comment. Every key must be consumed by the reader; leftover keys are
// reported as errors with their line number.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cavitysim {

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_string(const std::string& text,
                                       const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    // Typed getters; consume the key. The _or variants fall back to a default
    // when the key is absent.
    double get_double(const std::string& key);
    double get_double_or(const std::string& key, double fallback);
    std::int64_t get_int(const std::string& key);
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback);
    std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback);
    bool get_bool_or(const std::string& key, bool fallback);
    std::string get_string(const std::string& key);
    std::string get_string_or(const std::string& key, const std::string& fallback);
    std::vector<double> get_double_list_or(const std::string& key,
                                           const std::vector<double>& fallback);

    // Throws ConfigError naming every unconsumed key and its line number.
    void reject_unknown_keys() const;

    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };

    const Entry& require(const std::string& key);
    std::string origin_;
    std::map<std::string, Entry> entries_;
};

}  // namespace cavitysim
