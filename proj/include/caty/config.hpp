#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "caty/common.hpp"

namespace caty {

// Minimal TOML-like document: [table.subtable] headers, scalar and one-line
// array values, '#' comments. Keys are exposed flattened with dots.
class ConfigDoc {
  public:
    using Scalar = std::variant<bool, std::int64_t, double, std::string>;

    static ConfigDoc parse(const std::string& text) {
        ConfigDoc doc;
        std::string table;
        std::size_t line_no = 0, pos = 0;
        while (pos <= text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            std::string line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            strip_comment(line);
            std::string trimmed = trim(line);
            if (trimmed.empty()) {
                if (pos > text.size()) break;
                continue;
            }
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']')
                    throw ConfigError("config line " + std::to_string(line_no) + ": unterminated table header");
                table = trim(trimmed.substr(1, trimmed.size() - 2));
                if (table.empty())
                    throw ConfigError("config line " + std::to_string(line_no) + ": empty table name");
                continue;
            }
            std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
            std::string key = trim(trimmed.substr(0, eq));
            std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty() || value.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
            std::string full = table.empty() ? key : table + "." + key;
            if (value.front() == '[') {
                doc.arrays_[full] = parse_array(value, line_no);
            } else {
                doc.scalars_[full] = parse_scalar(value, line_no);
            }
            if (pos > text.size()) break;
        }
        return doc;
    }

    [[nodiscard]] bool has(const std::string& key) const {
        return scalars_.count(key) > 0 || arrays_.count(key) > 0;
    }

    [[nodiscard]] std::string get_string(const std::string& key) const {
        const Scalar& s = scalar(key);
        if (const auto* v = std::get_if<std::string>(&s)) return *v;
        throw ConfigError("config key '" + key + "' is not a string");
    }
    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
        return scalars_.count(key) ? get_string(key) : fallback;
    }

    [[nodiscard]] double get_double(const std::string& key) const {
        const Scalar& s = scalar(key);
        if (const auto* v = std::get_if<double>(&s)) return *v;
        if (const auto* v = std::get_if<std::int64_t>(&s)) return static_cast<double>(*v);
        throw ConfigError("config key '" + key + "' is not a number");
    }
    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        return scalars_.count(key) ? get_double(key) : fallback;
    }

    [[nodiscard]] std::int64_t get_int(const std::string& key) const {
        const Scalar& s = scalar(key);
        if (const auto* v = std::get_if<std::int64_t>(&s)) return *v;
        throw ConfigError("config key '" + key + "' is not an integer");
    }
    [[nodiscard]] std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        return scalars_.count(key) ? get_int(key) : fallback;
    }

    [[nodiscard]] bool get_bool(const std::string& key) const {
        const Scalar& s = scalar(key);
        if (const auto* v = std::get_if<bool>(&s)) return *v;
        throw ConfigError("config key '" + key + "' is not a boolean");
    }
    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const {
        return scalars_.count(key) ? get_bool(key) : fallback;
    }

    [[nodiscard]] std::vector<std::int64_t> get_int_array(const std::string& key) const {
        auto it = arrays_.find(key);
        if (it == arrays_.end()) throw ConfigError("missing config array '" + key + "'");
        std::vector<std::int64_t> out;
        for (const Scalar& s : it->second) {
            if (const auto* v = std::get_if<std::int64_t>(&s)) out.push_back(*v);
            else throw ConfigError("config array '" + key + "' holds a non-integer");
        }
        return out;
    }
    [[nodiscard]] std::vector<std::int64_t> get_int_array(const std::string& key,
                                                          std::vector<std::int64_t> fallback) const {
        return arrays_.count(key) ? get_int_array(key) : std::move(fallback);
    }

    [[nodiscard]] std::vector<double> get_double_array(const std::string& key) const {
        auto it = arrays_.find(key);
        if (it == arrays_.end()) throw ConfigError("missing config array '" + key + "'");
        std::vector<double> out;
        for (const Scalar& s : it->second) {
            if (const auto* v = std::get_if<double>(&s)) out.push_back(*v);
            else if (const auto* v2 = std::get_if<std::int64_t>(&s)) out.push_back(static_cast<double>(*v2));
            else throw ConfigError("config array '" + key + "' holds a non-number");
        }
        return out;
    }

    [[nodiscard]] const std::map<std::string, Scalar>& scalars() const { return scalars_; }

  private:
    [[nodiscard]] const Scalar& scalar(const std::string& key) const {
        auto it = scalars_.find(key);
        if (it == scalars_.end()) throw ConfigError("missing config key '" + key + "'");
        return it->second;
    }

    static void strip_comment(std::string& line) {
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_string = !in_string;
            if (line[i] == '#' && !in_string) {
                line.erase(i);
                return;
            }
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static Scalar parse_scalar(const std::string& value, std::size_t line_no) {
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            return value.substr(1, value.size() - 2);
        if (value == "true") return true;
        if (value == "false") return false;
        bool is_float = value.find_first_of(".eE") != std::string::npos;
        try {
            std::size_t used = 0;
            if (is_float) {
                double d = std::stod(value, &used);
                if (used == value.size()) return d;
            } else {
                std::int64_t i = std::stoll(value, &used, 10);
                if (used == value.size()) return i;
            }
        } catch (const std::exception&) {
        }
        throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" +
                          value + "'");
    }

    static std::vector<Scalar> parse_array(const std::string& value, std::size_t line_no) {
        if (value.back() != ']')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
        std::vector<Scalar> out;
        std::string body = value.substr(1, value.size() - 2);
        std::size_t pos = 0;
        while (pos < body.size()) {
            while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
            if (pos >= body.size()) break;
            std::size_t end = pos;
            bool in_string = false;
            while (end < body.size() && (in_string || body[end] != ',')) {
                if (body[end] == '"') in_string = !in_string;
                ++end;
            }
            std::string item = trim(body.substr(pos, end - pos));
            if (!item.empty()) out.push_back(parse_scalar(item, line_no));
            pos = end + 1;
        }
        return out;
    }

    std::map<std::string, Scalar> scalars_;
    std::map<std::string, std::vector<Scalar>> arrays_;
};

}  // namespace caty
