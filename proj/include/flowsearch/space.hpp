#pragma once

// Hierarchical, conditional configuration spaces.
//
// A SearchSpace is a set of typed parameters plus activation rules of the form
// "child is active when parent takes one of these values". A FlowConfig assigns
// exactly the parameters that are active under its own assignments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "flowsearch/errors.hpp"
#include "flowsearch/rng.hpp"

namespace flowsearch {

using Value = std::variant<std::int64_t, double, std::string>;

inline std::string to_string(const Value& v) {
    if (auto s = std::get_if<std::string>(&v)) return *s;
    if (auto i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    std::ostringstream os;
    os.precision(17);
    os << std::get<double>(v);
    return os.str();
}

struct Categorical {
    std::vector<std::string> values;
};

/// Grid lo, lo+step, ... up to and including hi when reachable.
struct Integer {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    std::int64_t step = 1;
};

/// Continuous range. Sampled continuously; counted on `grid` points.
struct Real {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;
    int grid = 64;
};

using ParamKind = std::variant<Categorical, Integer, Real>;

struct ParamSpec {
    std::string name;
    ParamKind kind;
    std::string description;
    std::optional<Value> default_value;

    bool is_categorical() const { return std::holds_alternative<Categorical>(kind); }
    bool is_numeric() const { return !is_categorical(); }

    const std::vector<std::string>& values() const { return std::get<Categorical>(kind).values; }

    /// Number of distinct values used for cardinality accounting.
    std::int64_t domain_size() const {
        return std::visit(
            [](const auto& k) -> std::int64_t {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Categorical>) {
                    return static_cast<std::int64_t>(k.values.size());
                } else if constexpr (std::is_same_v<K, Integer>) {
                    return k.step > 0 && k.hi >= k.lo ? (k.hi - k.lo) / k.step + 1 : 0;
                } else {
                    return k.grid;
                }
            },
            kind);
    }

    bool contains(const Value& v) const {
        return std::visit(
            [&](const auto& k) -> bool {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Categorical>) {
                    auto s = std::get_if<std::string>(&v);
                    return s && std::find(k.values.begin(), k.values.end(), *s) != k.values.end();
                } else if constexpr (std::is_same_v<K, Integer>) {
                    auto i = std::get_if<std::int64_t>(&v);
                    return i && *i >= k.lo && *i <= k.hi && (*i - k.lo) % k.step == 0;
                } else {
                    auto d = std::get_if<double>(&v);
                    return d && std::isfinite(*d) && *d >= k.lo && *d <= k.hi;
                }
            },
            kind);
    }

    /// Min-max position of a numeric value in [0, 1] (log domain when flagged).
    double normalize(const Value& v) const {
        if (auto i = std::get_if<Integer>(&kind)) {
            return static_cast<double>(std::get<std::int64_t>(v) - i->lo) / static_cast<double>(i->hi - i->lo);
        }
        const auto& r = std::get<Real>(kind);
        const double x = std::get<double>(v);
        if (r.log) return (std::log(x) - std::log(r.lo)) / (std::log(r.hi) - std::log(r.lo));
        return (x - r.lo) / (r.hi - r.lo);
    }

    /// Every value of a finite domain; reals are expanded on their grid.
    std::vector<Value> grid_values() const {
        std::vector<Value> out;
        if (auto c = std::get_if<Categorical>(&kind)) {
            for (const auto& s : c->values) out.emplace_back(s);
        } else if (auto i = std::get_if<Integer>(&kind)) {
            for (std::int64_t x = i->lo; x <= i->hi; x += i->step) out.emplace_back(x);
        } else {
            const auto& r = std::get<Real>(kind);
            for (int j = 0; j < r.grid; ++j) {
                const double t = r.grid == 1 ? 0.0 : static_cast<double>(j) / (r.grid - 1);
                out.emplace_back(r.log ? std::exp(std::log(r.lo) + t * (std::log(r.hi) - std::log(r.lo)))
                                       : r.lo + t * (r.hi - r.lo));
            }
        }
        return out;
    }

    /// Value used to fill this parameter when a caller leaves it unspecified.
    Value fallback_value() const {
        if (default_value && contains(*default_value)) return *default_value;
        if (auto c = std::get_if<Categorical>(&kind)) return c->values.front();
        if (auto i = std::get_if<Integer>(&kind)) {
            const std::int64_t n = (i->hi - i->lo) / i->step;
            return i->lo + (n / 2) * i->step;
        }
        const auto& r = std::get<Real>(kind);
        return r.log ? std::sqrt(r.lo * r.hi) : 0.5 * (r.lo + r.hi);
    }
};

struct ActivationRule {
    std::string child;
    std::string parent;
    std::vector<std::string> triggers;
};

struct Violation {
    std::string subject;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }

    bool mentions(std::string_view text) const {
        return std::any_of(violations.begin(), violations.end(),
                           [&](const Violation& v) { return v.message.find(text) != std::string::npos; });
    }

    std::string summary() const {
        std::string out;
        for (const auto& v : violations) out += v.subject + ": " + v.message + "\n";
        return out;
    }
};

/// One concrete assignment ("a flow"). Keys iterate in canonical (sorted) order.
class FlowConfig {
public:
    FlowConfig() = default;
    explicit FlowConfig(std::map<std::string, Value> a) : assignments_(std::move(a)) {}

    const std::map<std::string, Value>& assignments() const { return assignments_; }
    bool contains(const std::string& name) const { return assignments_.count(name) != 0; }
    const Value& at(const std::string& name) const { return assignments_.at(name); }
    const Value* find(const std::string& name) const {
        auto it = assignments_.find(name);
        return it == assignments_.end() ? nullptr : &it->second;
    }
    std::string get_string(const std::string& name, std::string fallback = {}) const {
        auto v = find(name);
        return v ? to_string(*v) : fallback;
    }
    void set(const std::string& name, Value v) { assignments_[name] = std::move(v); }
    void erase(const std::string& name) { assignments_.erase(name); }
    std::size_t size() const { return assignments_.size(); }

    friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
    friend auto operator<=>(const FlowConfig& a, const FlowConfig& b) { return a.assignments_ <=> b.assignments_; }

private:
    std::map<std::string, Value> assignments_;
};

class SearchSpace {
public:
    SearchSpace() = default;

    SearchSpace(std::vector<ParamSpec> params, std::vector<ActivationRule> rules, std::string root)
        : params_(std::move(params)), rules_(std::move(rules)), root_(std::move(root)) {
        for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i].name, i);
        build_order();
    }

    const std::vector<ParamSpec>& params() const { return params_; }
    const std::vector<ActivationRule>& rules() const { return rules_; }
    const std::string& root() const { return root_; }

    const ParamSpec* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : &params_[it->second];
    }
    const ParamSpec& param(const std::string& name) const {
        auto p = find(name);
        if (!p) throw ConfigError("unknown parameter '" + name + "'");
        return *p;
    }
    std::size_t index_of(const std::string& name) const { return index_.at(name); }

    /// Parameters the activation of which depends on some rule.
    bool is_conditional(const std::string& name) const {
        return std::any_of(rules_.begin(), rules_.end(), [&](const ActivationRule& r) { return r.child == name; });
    }
    bool is_controller(const std::string& name) const {
        return std::any_of(rules_.begin(), rules_.end(), [&](const ActivationRule& r) { return r.parent == name; });
    }

    /// Parents before children; ties broken by declaration order. Empty when cyclic.
    const std::vector<std::size_t>& topological_order() const { return order_; }
    bool acyclic() const { return order_.size() == params_.size(); }

private:
    void build_order() {
        const std::size_t n = params_.size();
        std::vector<std::vector<std::size_t>> out(n);
        std::vector<std::size_t> indeg(n, 0);
        std::set<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& r : rules_) {
            auto c = index_.find(r.child), p = index_.find(r.parent);
            if (c == index_.end() || p == index_.end()) continue;
            if (edges.emplace(p->second, c->second).second) {
                out[p->second].push_back(c->second);
                ++indeg[c->second];
            }
        }
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t i = 0; i < n; ++i)
            if (indeg[i] == 0) ready.push(i);
        while (!ready.empty()) {
            auto i = ready.top();
            ready.pop();
            order_.push_back(i);
            for (auto j : out[i])
                if (--indeg[j] == 0) ready.push(j);
        }
        if (order_.size() != n) order_.clear();
    }

    std::vector<ParamSpec> params_;
    std::vector<ActivationRule> rules_;
    std::string root_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> order_;
};

inline ValidationReport validate(const SearchSpace& space) {
    ValidationReport rep;
    auto add = [&](std::string subject, std::string msg) { rep.violations.push_back({std::move(subject), std::move(msg)}); };

    std::set<std::string> names;
    for (const auto& p : space.params()) {
        if (p.name.empty()) add("<unnamed>", "empty parameter name");
        if (!names.insert(p.name).second) add(p.name, "duplicate parameter name");
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Categorical>) {
                    if (k.values.empty()) add(p.name, "categorical value list is empty");
                    std::set<std::string> seen;
                    for (const auto& v : k.values)
                        if (!seen.insert(v).second) add(p.name, "duplicate categorical value '" + v + "'");
                } else if constexpr (std::is_same_v<K, Integer>) {
                    if (!(k.lo < k.hi)) add(p.name, "integer range requires lo < hi");
                    if (k.step <= 0) add(p.name, "integer step must be positive");
                } else {
                    if (!(std::isfinite(k.lo) && std::isfinite(k.hi) && k.lo < k.hi)) add(p.name, "real range requires lo < hi");
                    if (k.log && !(k.lo > 0.0)) add(p.name, "log-scale range requires lo > 0");
                    if (k.grid < 2) add(p.name, "real grid resolution must be at least 2");
                }
            },
            p.kind);
    }

    const ParamSpec* root = space.find(space.root());
    if (!root) {
        add(space.root(), "root is not a declared parameter");
    } else if (!root->is_categorical()) {
        add(space.root(), "root not categorical");
    }

    for (const auto& r : space.rules()) {
        const std::string subject = r.parent + "->" + r.child;
        const ParamSpec* parent = space.find(r.parent);
        const ParamSpec* child = space.find(r.child);
        if (!parent) add(subject, "rule references undeclared parent '" + r.parent + "'");
        if (!child) add(subject, "rule references undeclared child '" + r.child + "'");
        if (r.child == r.parent) add(subject, "child equals parent");
        if (r.child == space.root()) add(subject, "root cannot be conditional");
        if (parent && !parent->is_categorical()) {
            add(subject, "parent not categorical");
        } else if (parent) {
            if (r.triggers.empty()) add(subject, "rule has no trigger values");
            for (const auto& t : r.triggers)
                if (!parent->contains(Value{t})) add(subject, "trigger value '" + t + "' not in parent domain");
        }
    }

    if (!space.acyclic()) {
        // Only report cycles among declared params; dangling references are reported above.
        add(space.root(), "cyclic activation");
    }
    return rep;
}

namespace detail {

inline bool rule_fires(const SearchSpace& space, const ActivationRule& r, const FlowConfig& cfg,
                       const std::vector<char>& active) {
    const auto pi = space.index_of(r.parent);
    if (!active[pi]) return false;
    const Value* v = cfg.find(r.parent);
    if (!v) return false;
    auto s = std::get_if<std::string>(v);
    return s && std::find(r.triggers.begin(), r.triggers.end(), *s) != r.triggers.end();
}

/// Activity mask in declaration order, propagated in topological order.
inline std::vector<char> activity_mask(const SearchSpace& space, const FlowConfig& cfg) {
    const auto& params = space.params();
    std::vector<char> active(params.size(), 0);
    for (auto idx : space.topological_order()) {
        const auto& name = params[idx].name;
        bool conditional = false, fired = false;
        for (const auto& r : space.rules()) {
            if (r.child != name) continue;
            conditional = true;
            if (rule_fires(space, r, cfg, active)) {
                fired = true;
                break;
            }
        }
        active[idx] = !conditional || fired;
    }
    return active;
}

} // namespace detail

/// Names of parameters active under the (possibly partial) assignment.
inline std::set<std::string> active_params(const SearchSpace& space, const FlowConfig& partial) {
    for (const auto& [name, _] : partial.assignments())
        if (!space.find(name)) throw ConfigError("unknown parameter '" + name + "' in configuration");
    if (!space.acyclic()) throw ConfigError("space has cyclic activation rules");
    auto mask = detail::activity_mask(space, partial);
    std::set<std::string> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.insert(space.params()[i].name);
    return out;
}

/// Checks a complete config: exactly the active params assigned, all in domain.
inline ValidationReport check_config(const SearchSpace& space, const FlowConfig& cfg) {
    ValidationReport rep;
    for (const auto& [name, value] : cfg.assignments()) {
        const ParamSpec* p = space.find(name);
        if (!p) {
            rep.violations.push_back({name, "unknown parameter"});
        } else if (!p->contains(value)) {
            rep.violations.push_back({name, "value '" + to_string(value) + "' outside domain"});
        }
    }
    if (!rep.ok() || !space.acyclic()) return rep;
    auto mask = detail::activity_mask(space, cfg);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto& name = space.params()[i].name;
        if (mask[i] && !cfg.contains(name)) rep.violations.push_back({name, "active parameter not assigned"});
        if (!mask[i] && cfg.contains(name)) rep.violations.push_back({name, "inactive parameter assigned"});
    }
    return rep;
}

inline void require_valid(const SearchSpace& space, const FlowConfig& cfg) {
    auto rep = check_config(space, cfg);
    if (!rep.ok()) throw ConfigError("invalid configuration: " + rep.summary());
}

inline Value sample_value(const ParamSpec& p, Rng& rng) {
    return std::visit(
        [&](const auto& k) -> Value {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Categorical>) {
                return k.values[rng.below(k.values.size())];
            } else if constexpr (std::is_same_v<K, Integer>) {
                const auto n = static_cast<std::uint64_t>((k.hi - k.lo) / k.step + 1);
                return k.lo + static_cast<std::int64_t>(rng.below(n)) * k.step;
            } else {
                if (k.log) return std::exp(rng.uniform(std::log(k.lo), std::log(k.hi)));
                return rng.uniform(k.lo, k.hi);
            }
        },
        p.kind);
}

/// Ancestral sample: each active param drawn in topological order by `draw`,
/// called as draw(param, declaration index, partial config so far).
template <class Draw>
FlowConfig sample_with(const SearchSpace& space, Draw&& draw) {
    FlowConfig cfg;
    std::vector<char> active(space.params().size(), 0);
    for (auto idx : space.topological_order()) {
        const auto& p = space.params()[idx];
        bool conditional = false, fired = false;
        for (const auto& r : space.rules()) {
            if (r.child != p.name) continue;
            conditional = true;
            if (detail::rule_fires(space, r, cfg, active)) {
                fired = true;
                break;
            }
        }
        active[idx] = !conditional || fired;
        if (active[idx]) cfg.set(p.name, draw(p, idx, static_cast<const FlowConfig&>(cfg)));
    }
    return cfg;
}

/// Uniform ancestral sample.
inline FlowConfig sample_random(const SearchSpace& space, Rng& rng) {
    return sample_with(space, [&](const ParamSpec& p, std::size_t, const FlowConfig&) { return sample_value(p, rng); });
}

/// Completes a partial assignment: drops params that end up inactive and fills
/// missing active ones with their fallback values.
inline FlowConfig complete_config(const SearchSpace& space, const FlowConfig& partial) {
    return sample_with(space, [&](const ParamSpec& p, std::size_t, const FlowConfig&) {
        const Value* given = partial.find(p.name);
        return given ? *given : p.fallback_value();
    });
}

namespace detail {

inline double count_from(const SearchSpace& space, std::size_t pos, FlowConfig& controllers) {
    const auto& order = space.topological_order();
    if (pos == order.size()) return 1.0;
    const auto& p = space.params()[order[pos]];

    // Activity of p depends only on controllers placed earlier in topological order.
    auto mask = activity_mask(space, controllers);
    if (!mask[order[pos]]) return count_from(space, pos + 1, controllers);

    if (!space.is_controller(p.name)) {
        return static_cast<double>(p.domain_size()) * count_from(space, pos + 1, controllers);
    }

    // Group the controller's values by which rules they trigger.
    std::map<std::vector<std::size_t>, std::pair<std::string, double>> groups;
    for (const auto& v : p.values()) {
        std::vector<std::size_t> sig;
        for (std::size_t ri = 0; ri < space.rules().size(); ++ri) {
            const auto& r = space.rules()[ri];
            if (r.parent == p.name && std::find(r.triggers.begin(), r.triggers.end(), v) != r.triggers.end())
                sig.push_back(ri);
        }
        auto [it, inserted] = groups.try_emplace(sig, v, 0.0);
        it->second.second += 1.0;
    }
    double total = 0.0;
    for (const auto& [sig, rep] : groups) {
        controllers.set(p.name, rep.first);
        total += rep.second * count_from(space, pos + 1, controllers);
    }
    controllers.erase(p.name);
    return total;
}

} // namespace detail

/// log10 of the number of distinct complete configurations (reals on their grid).
inline double cardinality_log10(const SearchSpace& space) {
    if (!space.acyclic()) throw ConfigError("space has cyclic activation rules");
    FlowConfig controllers;
    return std::log10(detail::count_from(space, 0, controllers));
}

/// Position of each parameter's block inside the encoded feature vector.
struct EncodingLayout {
    struct Block {
        std::size_t offset = 0;
        std::size_t width = 0;          // value slots
        std::optional<std::size_t> activity; // slot of the activity bit, for conditional params
    };
    std::vector<Block> blocks; // declaration order
    std::size_t size = 0;
};

inline EncodingLayout encoding_layout(const SearchSpace& space) {
    EncodingLayout layout;
    std::size_t off = 0;
    for (const auto& p : space.params()) {
        EncodingLayout::Block b;
        b.offset = off;
        b.width = p.is_categorical() ? p.values().size() : 1;
        off += b.width;
        if (space.is_conditional(p.name)) b.activity = off++;
        layout.blocks.push_back(b);
    }
    layout.size = off;
    return layout;
}

/// Structural feature vector: one-hot categoricals, min-max numerics, activity bits.
inline std::vector<double> encode(const SearchSpace& space, const FlowConfig& cfg) {
    require_valid(space, cfg);
    const auto layout = encoding_layout(space);
    std::vector<double> x(layout.size, 0.0);
    for (std::size_t i = 0; i < space.params().size(); ++i) {
        const auto& p = space.params()[i];
        const auto& b = layout.blocks[i];
        const Value* v = cfg.find(p.name);
        if (!v) continue;
        if (p.is_categorical()) {
            const auto& vals = p.values();
            auto pos = std::find(vals.begin(), vals.end(), std::get<std::string>(*v)) - vals.begin();
            x[b.offset + static_cast<std::size_t>(pos)] = 1.0;
        } else {
            x[b.offset] = p.normalize(*v);
        }
        if (b.activity) x[*b.activity] = 1.0;
    }
    return x;
}

} // namespace flowsearch
