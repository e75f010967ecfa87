#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "flowsearch/errors.hpp"

namespace flowsearch {

enum class ErrorTag { content_filter, rate_limit, tool_failure, protocol };

inline const char* to_string(ErrorTag e) {
    switch (e) {
    case ErrorTag::content_filter: return "content-filter";
    case ErrorTag::rate_limit: return "rate-limit";
    case ErrorTag::tool_failure: return "tool-failure";
    case ErrorTag::protocol: return "protocol";
    }
    return "protocol";
}

inline std::optional<ErrorTag> parse_error_tag(std::string_view s) {
    if (s == "content-filter") return ErrorTag::content_filter;
    if (s == "rate-limit") return ErrorTag::rate_limit;
    if (s == "tool-failure") return ErrorTag::tool_failure;
    if (s == "protocol") return ErrorTag::protocol;
    return std::nullopt;
}

/// Outcome of one question. Errored records never pass and carry no cost.
struct EvalRecord {
    std::string question_id;
    bool passed = false;
    double cost = 0.0;
    double latency = 0.0;
    std::optional<ErrorTag> error;

    bool ok() const { return !error.has_value(); }

    static EvalRecord success(std::string q, bool passed, double cost, double latency) {
        return {std::move(q), passed, cost, latency, std::nullopt};
    }
    static EvalRecord failure(std::string q, ErrorTag tag) { return {std::move(q), false, 0.0, 0.0, tag}; }

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

} // namespace flowsearch
