#pragma once

// JSON schema for search spaces and flat config records.
//
// Space file:
//   {"root": "flow",
//    "params": [
//      {"name": "flow", "type": "categorical", "values": ["rag", "react_rag_agent"]},
//      {"name": "top_k", "type": "integer", "lo": 2, "hi": 20, "step": 1},
//      {"name": "chunk_size", "type": "real", "lo": 256, "hi": 4096, "log": true, "grid": 64}],
//    "rules": [{"child": "embedding", "parent": "retriever", "values": ["dense", "fusion"]}]}
//
// Optional per-param keys: "description", "default".
//
// Config record: a flat JSON object with keys in sorted order, e.g.
//   {"flow":"rag","llm":"gpt-4o-mini","top_k":5}

#include <fstream>
#include <string>

#include <json.hpp>

#include "flowsearch/errors.hpp"
#include "flowsearch/space.hpp"

namespace flowsearch {

using json = nlohmann::json;

inline json value_to_json(const Value& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

/// Converts a JSON scalar to a Value of the kind the parameter expects.
inline Value value_from_json(const ParamSpec& p, const json& j) {
    if (p.is_categorical()) {
        if (!j.is_string()) throw ConfigError("parameter '" + p.name + "' expects a string value");
        return j.get<std::string>();
    }
    if (std::holds_alternative<Integer>(p.kind)) {
        if (j.is_number_integer()) return j.get<std::int64_t>();
        if (j.is_number_float()) {
            const double d = j.get<double>();
            if (std::floor(d) == d) return static_cast<std::int64_t>(d);
        }
        throw ConfigError("parameter '" + p.name + "' expects an integer value");
    }
    if (!j.is_number()) throw ConfigError("parameter '" + p.name + "' expects a numeric value");
    return j.get<double>();
}

/// Schema-free conversion used when no space is at hand.
inline Value value_from_json(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number()) return j.get<double>();
    throw ConfigError("config values must be strings or numbers");
}

inline json config_to_json(const FlowConfig& cfg) {
    json j = json::object();
    for (const auto& [k, v] : cfg.assignments()) j[k] = value_to_json(v);
    return j;
}

/// Canonical single-line record; byte-identical for equal configs.
inline std::string config_to_record(const FlowConfig& cfg) { return config_to_json(cfg).dump(); }

inline FlowConfig config_from_json(const SearchSpace& space, const json& j) {
    if (!j.is_object()) throw ConfigError("config record must be a JSON object");
    FlowConfig cfg;
    for (const auto& [k, v] : j.items()) cfg.set(k, value_from_json(space.param(k), v));
    return cfg;
}

inline FlowConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config record must be a JSON object");
    FlowConfig cfg;
    for (const auto& [k, v] : j.items()) cfg.set(k, value_from_json(v));
    return cfg;
}

inline json space_to_json(const SearchSpace& space) {
    json params = json::array();
    for (const auto& p : space.params()) {
        json jp;
        jp["name"] = p.name;
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Categorical>) {
                    jp["type"] = "categorical";
                    jp["values"] = k.values;
                } else if constexpr (std::is_same_v<K, Integer>) {
                    jp["type"] = "integer";
                    jp["lo"] = k.lo;
                    jp["hi"] = k.hi;
                    jp["step"] = k.step;
                } else {
                    jp["type"] = "real";
                    jp["lo"] = k.lo;
                    jp["hi"] = k.hi;
                    jp["log"] = k.log;
                    jp["grid"] = k.grid;
                }
            },
            p.kind);
        if (!p.description.empty()) jp["description"] = p.description;
        if (p.default_value) jp["default"] = value_to_json(*p.default_value);
        params.push_back(std::move(jp));
    }
    json rules = json::array();
    for (const auto& r : space.rules()) rules.push_back({{"child", r.child}, {"parent", r.parent}, {"values", r.triggers}});
    return {{"root", space.root()}, {"params", params}, {"rules", rules}};
}

inline SearchSpace space_from_json(const json& j) {
    try {
        std::vector<ParamSpec> params;
        for (const auto& jp : j.at("params")) {
            ParamSpec p;
            p.name = jp.at("name").get<std::string>();
            const auto type = jp.at("type").get<std::string>();
            if (type == "categorical") {
                p.kind = Categorical{jp.at("values").get<std::vector<std::string>>()};
            } else if (type == "integer") {
                p.kind = Integer{jp.at("lo").get<std::int64_t>(), jp.at("hi").get<std::int64_t>(),
                                 jp.value("step", std::int64_t{1})};
            } else if (type == "real") {
                p.kind = Real{jp.at("lo").get<double>(), jp.at("hi").get<double>(), jp.value("log", false),
                              jp.value("grid", 64)};
            } else {
                throw ConfigError("parameter '" + p.name + "' has unknown type '" + type + "'");
            }
            p.description = jp.value("description", std::string{});
            if (jp.contains("default")) p.default_value = value_from_json(p, jp.at("default"));
            params.push_back(std::move(p));
        }
        std::vector<ActivationRule> rules;
        if (j.contains("rules")) {
            for (const auto& jr : j.at("rules"))
                rules.push_back({jr.at("child").get<std::string>(), jr.at("parent").get<std::string>(),
                                 jr.at("values").get<std::vector<std::string>>()});
        }
        return SearchSpace(std::move(params), std::move(rules), j.at("root").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed search space: ") + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline SearchSpace load_space_file(const std::string& path) { return space_from_json(read_json_file(path)); }

} // namespace flowsearch
