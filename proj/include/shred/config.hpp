#ifndef SHRED_CONFIG_HPP
#define SHRED_CONFIG_HPP

#include "shred/types.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace shred {

struct ConfigError : Error {
    using Error::Error;
};

// Sectioned key-value configuration: [section] headers, key = value lines,
// '#' comments, blank lines ignored.  Keys live in exactly one section.
class Config {
public:
    static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value, got '" + line + "'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": key '" + key + "' outside any [section]");
            cfg.values_[section + "." + key] = value;
        }
        return cfg;
    }

    static Config parse_file(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw IoError("cannot open config file: " + path.string());
        std::stringstream ss;
        ss << is.rdbuf();
        return parse_string(ss.str(), path.string());
    }

    // Apply a "section.key=value" override (the --set flag).
    void set_override(const std::string& spec) {
        const std::size_t eq = spec.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must be section.key=value, got '" + spec + "'");
        const std::string path = trim(spec.substr(0, eq));
        if (path.find('.') == std::string::npos)
            throw ConfigError("override key must be section.key, got '" + path + "'");
        values_[path] = trim(spec.substr(eq + 1));
    }

    bool has(const std::string& dotted) const { return values_.count(dotted) > 0; }

    std::string get_string(const std::string& dotted) const {
        const auto it = values_.find(dotted);
        if (it == values_.end()) throw ConfigError("missing config key: " + dotted);
        return it->second;
    }
    std::string get_string(const std::string& dotted, const std::string& fallback) const {
        const auto it = values_.find(dotted);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& dotted) const { return to_double(dotted, get_string(dotted)); }
    double get_double(const std::string& dotted, double fallback) const {
        return has(dotted) ? get_double(dotted) : fallback;
    }

    std::int64_t get_int(const std::string& dotted) const { return to_int(dotted, get_string(dotted)); }
    std::int64_t get_int(const std::string& dotted, std::int64_t fallback) const {
        return has(dotted) ? get_int(dotted) : fallback;
    }

    bool get_bool(const std::string& dotted) const {
        const std::string v = get_string(dotted);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key " + dotted + " is not a boolean: '" + v + "'");
    }
    bool get_bool(const std::string& dotted, bool fallback) const {
        return has(dotted) ? get_bool(dotted) : fallback;
    }

    // Comma-separated list of numbers.
    std::vector<double> get_double_list(const std::string& dotted) const {
        const std::string raw = get_string(dotted);
        std::vector<double> out;
        std::istringstream is(raw);
        std::string item;
        while (std::getline(is, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            out.push_back(to_double(dotted, item));
        }
        if (out.empty()) throw ConfigError("config key " + dotted + " has no values");
        return out;
    }
    std::vector<std::int64_t> get_int_list(const std::string& dotted) const {
        std::vector<std::int64_t> out;
        for (double v : get_double_list(dotted)) {
            const auto i = static_cast<std::int64_t>(std::llround(v));
            if (static_cast<double>(i) != v)
                throw ConfigError("config key " + dotted + " has a non-integer entry");
            out.push_back(i);
        }
        return out;
    }

    // FNV-1a 64-bit digest of the canonical (sorted key=value) rendering, so
    // logically equal configurations hash alike regardless of file layout.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
        };
        for (const auto& [k, v] : values_) {
            mix(k);
            mix("=");
            mix(v);
            mix("\n");
        }
        return h;
    }

    std::string hash_hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
        return buf;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static double to_double(const std::string& key, const std::string& v) {
        std::size_t pos = 0;
        double out = 0.0;
        try {
            out = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not a number: '" + v + "'");
        }
        if (pos != v.size())
            throw ConfigError("config key " + key + " has trailing characters: '" + v + "'");
        return out;
    }
    static std::int64_t to_int(const std::string& key, const std::string& v) {
        std::size_t pos = 0;
        std::int64_t out = 0;
        try {
            out = std::stoll(v, &pos);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + " is not an integer: '" + v + "'");
        }
        if (pos != v.size())
            throw ConfigError("config key " + key + " has trailing characters: '" + v + "'");
        return out;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace shred

#endif
