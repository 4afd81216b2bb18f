#include "cavitysim/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cavitysim/errors.hpp"

namespace cavitysim {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text,
                                            const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (cfg.entries_.count(key)) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": duplicate key '" + key + "'");
        }
        cfg.entries_[key] = Entry{value, lineno, false};
    }
    return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

const KeyValueConfig::Entry& KeyValueConfig::require(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    it->second.consumed = true;
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key) {
    const Entry& e = require(key);
    try {
        std::size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument(e.value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "': invalid number '" + e.value + "'");
    }
}

double KeyValueConfig::get_double_or(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key) {
    const Entry& e = require(key);
    std::int64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "': invalid integer '" + e.value + "'");
    }
    return v;
}

std::int64_t KeyValueConfig::get_int_or(const std::string& key, std::int64_t fallback) {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueConfig::get_u64_or(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const Entry& e = require(key);
    std::uint64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "': invalid unsigned integer '" + e.value + "'");
    }
    return v;
}

bool KeyValueConfig::get_bool_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Entry& e = require(key);
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                      "': expected true/false, got '" + e.value + "'");
}

std::string KeyValueConfig::get_string(const std::string& key) { return require(key).value; }

std::string KeyValueConfig::get_string_or(const std::string& key,
                                          const std::string& fallback) {
    return has(key) ? get_string(key) : fallback;
}

std::vector<double> KeyValueConfig::get_double_list_or(
    const std::string& key, const std::vector<double>& fallback) {
    if (!has(key)) return fallback;
    const Entry& e = require(key);
    std::vector<double> out;
    std::istringstream in(e.value);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                              "': invalid list element '" + tok + "'");
        }
    }
    if (out.empty()) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                          "': empty list");
    }
    return out;
}

void KeyValueConfig::reject_unknown_keys() const {
    std::string bad;
    for (const auto& [key, entry] : entries_) {
        if (!entry.consumed) {
            if (!bad.empty()) bad += ", ";
            bad += "'" + key + "' (line " + std::to_string(entry.line) + ")";
        }
    }
    if (!bad.empty()) throw ConfigError(origin_ + ": unknown keys: " + bad);
}

std::vector<std::string> KeyValueConfig::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [key, entry] : entries_) {
        if (key.rfind(prefix, 0) == 0) out.push_back(key);
    }
    return out;
}

}  // namespace cavitysim
