#pragma once

#include "mtc/errors.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

namespace mtc {

/// Strict reader over one JSON object: every key must be consumed before
/// finish(), and type mismatches name the full field path.
class JsonReader {
public:
    JsonReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const nlohmann::json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    JsonReader child(const std::string& key) { return JsonReader(raw(key), path(key)); }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        out = convert<T>(raw(key), path(key));
    }

    template <typename T>
    void get(const std::string& key, std::optional<T>& out) {
        if (!has(key)) return;
        const auto& v = raw(key);
        if (v.is_null()) {
            out.reset();
        } else {
            out = convert<T>(v, path(key));
        }
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(path(key) + ": unknown key");
        }
    }

    template <typename T>
    static T convert(const nlohmann::json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
                throw ConfigError(where + ": expected a non-negative integer");
            }
            return static_cast<T>(v.get<std::uint64_t>());
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
            return static_cast<T>(v.get<std::int64_t>());
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + ": expected a number");
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where + ": expected a string");
            return v.get<std::string>();
        } else {
            if (!v.is_array()) throw ConfigError(where + ": expected an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i) {
                out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
            }
            return out;
        }
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace mtc
