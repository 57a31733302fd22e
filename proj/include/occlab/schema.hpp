#pragma once

#include "occlab/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>

namespace occlab {

// Field access with typed errors; `path` is the dotted location for messages.
class Fields
{
public:
    Fields(const nlohmann::json &obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object())
            throw SchemaError(path_ + ": expected an object");
    }

    std::string where(const std::string &key) const { return path_ + "." + key; }
    bool has(const std::string &key) const
    {
        seen_.insert(key);
        return obj_.contains(key);
    }

    double number(const std::string &key, std::optional<double> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (fallback)
                return *fallback;
            throw SchemaError(where(key) + ": required number is missing");
        }
        const auto &v = obj_.at(key);
        if (!v.is_number())
            throw SchemaError(where(key) + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d))
            throw SchemaError(where(key) + ": must be finite");
        return d;
    }

    double unit(const std::string &key, std::optional<double> fallback = std::nullopt) const
    {
        const double d = number(key, fallback);
        if (d < 0.0 || d > 1.0)
            throw SchemaError(where(key) + ": must lie in [0,1]");
        return d;
    }

    std::size_t count(const std::string &key, std::optional<std::size_t> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (fallback)
                return *fallback;
            throw SchemaError(where(key) + ": required integer is missing");
        }
        const auto &v = obj_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw SchemaError(where(key) + ": expected a nonnegative integer");
        return v.get<std::size_t>();
    }

    bool flag(const std::string &key, bool fallback) const
    {
        if (!has(key))
            return fallback;
        if (!obj_.at(key).is_boolean())
            throw SchemaError(where(key) + ": expected true or false");
        return obj_.at(key).get<bool>();
    }

    std::string text(const std::string &key, std::optional<std::string> fallback = std::nullopt) const
    {
        if (!has(key)) {
            if (fallback)
                return *fallback;
            throw SchemaError(where(key) + ": required string is missing");
        }
        if (!obj_.at(key).is_string())
            throw SchemaError(where(key) + ": expected a string");
        return obj_.at(key).get<std::string>();
    }

    std::string choice(const std::string &key, std::initializer_list<const char *> allowed,
                       const std::string &fallback) const
    {
        const auto s = text(key, fallback);
        for (const char *a : allowed) {
            if (s == a)
                return s;
        }
        std::string list;
        for (const char *a : allowed)
            list += std::string(list.empty() ? "" : ", ") + a;
        throw SchemaError(where(key) + ": must be one of " + list);
    }

    const nlohmann::json &raw(const std::string &key) const
    {
        seen_.insert(key);
        return obj_.at(key);
    }

    // Anything not looked at is an unknown key.
    void finish() const
    {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key()))
                throw SchemaError(where(it.key()) + ": unknown key");
        }
    }

private:
    const nlohmann::json &obj_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

} // namespace occlab
