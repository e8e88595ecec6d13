#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <type_traits>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace goexplore {

// Plain-text configuration:
//
//   # comment
//   [section]
//   key = value
//
// Keys before the first section header belong to the "" section. Repeated
// keys are kept in order (list-valued settings such as env.connection).
// Every lookup marks the entry as used so unknown keys can be reported.
class KvConfig {
public:
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
        int line = 0;
        bool used = false;
    };

    static KvConfig parse(const std::string& text, const std::string& origin = "config")
    {
        KvConfig cfg;
        std::istringstream in(text);
        std::string raw, section;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            auto hash = raw.find('#');
            if (hash != std::string::npos)
                raw.erase(hash);
            auto s = trim(raw);
            if (s.empty())
                continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(line), "unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line), "expected 'key = value'");
            Entry e;
            e.section = section;
            e.key = trim(s.substr(0, eq));
            e.value = trim(s.substr(eq + 1));
            e.line = line;
            if (e.key.empty())
                throw ConfigError(origin + ":" + std::to_string(line), "empty key");
            cfg._entries.push_back(std::move(e));
        }
        return cfg;
    }

    static KvConfig load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError(path, "cannot open config file");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    // Replaces every value of section.key (or appends one).
    void set(const std::string& section, const std::string& key, const std::string& value)
    {
        std::erase_if(_entries, [&](const Entry& e) { return e.section == section && e.key == key; });
        _entries.push_back({section, key, value, 0, false});
    }

    // Overrides from environment variables PREFIX_SECTION_KEY (upper case,
    // dots and dashes as underscores) for every key in `known`.
    template <class Getenv>
    void apply_env_overrides(const std::string& prefix, const std::vector<std::string>& known, Getenv getenv_fn)
    {
        for (const auto& path : known) {
            std::string var = prefix + "_";
            for (char c : path)
                var += (c == '.' || c == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            if (const char* v = getenv_fn(var.c_str())) {
                auto dot = path.find('.');
                set(path.substr(0, dot), path.substr(dot + 1), v);
            }
        }
    }

    bool has(const std::string& section, const std::string& key) const
    {
        return std::any_of(_entries.begin(), _entries.end(),
                           [&](const Entry& e) { return e.section == section && e.key == key; });
    }

    std::optional<std::string> get(const std::string& section, const std::string& key)
    {
        std::optional<std::string> out;
        for (auto& e : _entries)
            if (e.section == section && e.key == key) {
                e.used = true;
                out = e.value;
            }
        return out;
    }

    std::vector<std::string> get_all(const std::string& section, const std::string& key)
    {
        std::vector<std::string> out;
        for (auto& e : _entries)
            if (e.section == section && e.key == key) {
                e.used = true;
                out.push_back(e.value);
            }
        return out;
    }

    template <class T>
    void read(const std::string& section, const std::string& key, T& target)
    {
        if (auto v = get(section, key))
            target = convert<T>(*v, path(section, key));
    }

    std::vector<std::string> unused() const
    {
        std::vector<std::string> out;
        for (const auto& e : _entries)
            if (!e.used)
                out.push_back(path(e.section, e.key));
        return out;
    }

    void reject_unused() const
    {
        auto u = unused();
        if (!u.empty())
            throw ConfigError(u.front(), "unknown configuration key");
    }

    const std::vector<Entry>& entries() const noexcept { return _entries; }

    static std::string path(const std::string& section, const std::string& key)
    {
        return section.empty() ? key : section + "." + key;
    }

    template <class T>
    static T convert(const std::string& s, const std::string& where)
    {
        if constexpr (std::is_same_v<T, std::string>) {
            return s;
        }
        else if constexpr (std::is_same_v<T, bool>) {
            std::string l = lower(s);
            if (l == "true" || l == "1" || l == "yes" || l == "on")
                return true;
            if (l == "false" || l == "0" || l == "no" || l == "off")
                return false;
            throw ConfigError(where, "expected a boolean, got '" + s + "'");
        }
        else if constexpr (std::is_integral_v<T>) {
            // Accept 5e6 / 4M style sizes for frame budgets.
            std::string t = s;
            std::erase(t, '_');
            std::int64_t mult = 1;
            if (!t.empty() && (t.back() == 'k' || t.back() == 'K'))
                mult = 1000, t.pop_back();
            else if (!t.empty() && (t.back() == 'M' || t.back() == 'm'))
                mult = 1000000, t.pop_back();
            else if (!t.empty() && (t.back() == 'G' || t.back() == 'g'))
                mult = 1000000000, t.pop_back();
            T value{};
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
            if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
                // Scientific notation ("5e6") for integers.
                char* end = nullptr;
                double d = std::strtod(t.c_str(), &end);
                if (t.empty() || end != t.c_str() + t.size() || d != static_cast<double>(static_cast<std::int64_t>(d)))
                    throw ConfigError(where, "expected an integer, got '" + s + "'");
                value = static_cast<T>(static_cast<std::int64_t>(d));
            }
            return static_cast<T>(value * static_cast<T>(mult));
        }
        else {
            char* end = nullptr;
            double d = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size())
                throw ConfigError(where, "expected a number, got '" + s + "'");
            return static_cast<T>(d);
        }
    }

    static std::vector<std::string> split(const std::string& s, char sep)
    {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream in(s);
        while (std::getline(in, cur, sep))
            out.push_back(trim(cur));
        return out;
    }

    static std::string trim(const std::string& s)
    {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos)
            return {};
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static std::string lower(std::string s)
    {
        for (auto& c : s)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    }

private:
    std::vector<Entry> _entries;
};

} // namespace goexplore
