#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "groupnet/tensor.hpp"

namespace groupnet {

using Json = nlohmann::json;

/// Reject keys outside `allowed`; `where` names the object in the message.
inline void require_known_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                               const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

/// Read `obj[key]` into `out` when present, converting type errors to ConfigError.
template <class V>
void read_opt(const Json& obj, const char* key, V& out, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->template get<V>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline Json parse_json(std::string_view text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(what + ": invalid JSON (" + e.what() + ")");
    }
}

}  // namespace groupnet
