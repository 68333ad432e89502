// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "de/channel.hpp"
#include "de/datablock.hpp"
#include "de/expression.hpp"
#include "de/logic_engine.hpp"
#include "de/provisioning.hpp"

namespace oracle {

using de::Expression;
using de::Scalar;

// ---------------------------------------------------------------------------
// Expressions

/// Tree walk over the AST. nullopt means the expression fails to evaluate.
inline std::optional<Scalar> eval(const Expression& e, const de::DataBlockSnapshot& snap);

namespace detail {

inline std::optional<double> num(const std::optional<Scalar>& v) {
    if (v && v->index() == 0) return std::get<double>(*v);
    return std::nullopt;
}

inline std::optional<bool> flag(const std::optional<Scalar>& v) {
    if (v && v->index() == 2) return std::get<bool>(*v);
    return std::nullopt;
}

inline std::optional<Scalar> ok_number(double x) {
    if (std::isnan(x) || std::isinf(x)) return std::nullopt;
    return Scalar{x};
}

}  // namespace detail

inline std::optional<Scalar> eval(const Expression& e, const de::DataBlockSnapshot& snap) {
    using namespace detail;
    if (auto* lit = std::get_if<Expression::Literal>(&e.node)) {
        return lit->value;
    }
    if (auto* path = std::get_if<Expression::ProductPath>(&e.node)) {
        auto it = snap.entries().find(path->product);
        if (it == snap.entries().end() || it->second.payload->index() != 0) return std::nullopt;
        const auto& rec = std::get<de::Record>(*it->second.payload);
        auto f = rec.find(path->field);
        if (f == rec.end()) return std::nullopt;
        return f->second;
    }
    if (std::get_if<Expression::FactRef>(&e.node)) {
        return std::nullopt;
    }
    if (auto* agg = std::get_if<Expression::Aggregate>(&e.node)) {
        auto it = snap.entries().find(agg->path.product);
        if (it == snap.entries().end() || it->second.payload->index() != 1) return std::nullopt;
        const auto& rows = std::get<de::Table>(*it->second.payload);
        if (agg->fn == de::AggregateFn::Count) return Scalar{double(rows.size())};
        if (rows.empty()) return std::nullopt;
        std::vector<double> xs;
        for (const auto& row : rows) {
            auto f = row.find(agg->path.field);
            if (f == row.end() || f->second.index() != 0) return std::nullopt;
            xs.push_back(std::get<double>(f->second));
        }
        double r = 0;
        switch (agg->fn) {
            case de::AggregateFn::Min: r = *std::min_element(xs.begin(), xs.end()); break;
            case de::AggregateFn::Max: r = *std::max_element(xs.begin(), xs.end()); break;
            case de::AggregateFn::Sum:
                for (double x : xs) r += x;
                break;
            case de::AggregateFn::Avg:
                for (double x : xs) r += x;
                r /= double(xs.size());
                break;
            default: break;
        }
        return ok_number(r);
    }
    if (auto* un = std::get_if<Expression::Unary>(&e.node)) {
        auto v = eval(*un->operand, snap);
        if (un->op == de::UnaryOp::Not) {
            auto b = flag(v);
            if (!b) return std::nullopt;
            return Scalar{!*b};
        }
        auto x = num(v);
        if (!x) return std::nullopt;
        return Scalar{-*x};
    }
    const auto& bin = std::get<Expression::Binary>(e.node);
    using Op = de::BinaryOp;
    if (bin.op == Op::And || bin.op == Op::Or) {
        auto l = flag(eval(*bin.lhs, snap));
        if (!l) return std::nullopt;
        if (bin.op == Op::And && !*l) return Scalar{false};
        if (bin.op == Op::Or && *l) return Scalar{true};
        auto r = flag(eval(*bin.rhs, snap));
        if (!r) return std::nullopt;
        return Scalar{*r};
    }
    auto lv = eval(*bin.lhs, snap);
    auto rv = eval(*bin.rhs, snap);
    if (!lv || !rv) return std::nullopt;
    if (bin.op == Op::Eq || bin.op == Op::Ne) {
        if (lv->index() != rv->index()) return std::nullopt;
        bool same = *lv == *rv;
        return Scalar{bin.op == Op::Eq ? same : !same};
    }
    auto a = num(lv);
    auto b = num(rv);
    if (!a || !b) return std::nullopt;
    switch (bin.op) {
        case Op::Lt: return Scalar{*a < *b};
        case Op::Le: return Scalar{*a <= *b};
        case Op::Gt: return Scalar{*a > *b};
        case Op::Ge: return Scalar{*a >= *b};
        case Op::Add: return ok_number(*a + *b);
        case Op::Sub: return ok_number(*a - *b);
        case Op::Mul: return ok_number(*a * *b);
        case Op::Div:
            if (*b == 0.0) return std::nullopt;
            return ok_number(*a / *b);
        default: return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Forward chaining

struct ChainResult {
    std::set<std::string> fired;
    std::map<std::string, bool> derived;
    std::set<std::string> actions;
};

/// Truth of a rule condition under bindings; unknown names are false.
inline bool holds(const Expression& e, const std::map<std::string, bool>& b) {
    if (auto* ref = std::get_if<Expression::FactRef>(&e.node)) {
        auto it = b.find(ref->name);
        return it != b.end() && it->second;
    }
    if (auto* lit = std::get_if<Expression::Literal>(&e.node)) {
        return lit->value == Scalar{true};
    }
    if (auto* un = std::get_if<Expression::Unary>(&e.node)) {
        return !holds(*un->operand, b);
    }
    const auto& bin = std::get<Expression::Binary>(e.node);
    if (bin.op == de::BinaryOp::And) return holds(*bin.lhs, b) && holds(*bin.rhs, b);
    return holds(*bin.lhs, b) || holds(*bin.rhs, b);
}

inline void names_in(const Expression& e, std::set<std::string>& out) {
    if (auto* ref = std::get_if<Expression::FactRef>(&e.node)) {
        out.insert(ref->name);
    } else if (auto* un = std::get_if<Expression::Unary>(&e.node)) {
        names_in(*un->operand, out);
    } else if (auto* bin = std::get_if<Expression::Binary>(&e.node)) {
        names_in(*bin->lhs, out);
        names_in(*bin->rhs, out);
    }
}

/// Rules that may never fire: they read a failed fact, directly or through
/// a derived fact of a rule that may never fire.
inline std::set<std::size_t> blocked_rules(const std::vector<de::Rule>& rules,
                                           const std::map<std::string, de::FactValue>& facts) {
    std::set<std::string> tainted;
    for (const auto& [name, v] : facts) {
        if (v == de::FactValue::Failed) tainted.insert(name);
    }
    std::set<std::size_t> blocked;
    for (std::size_t round = 0; round <= rules.size(); ++round) {
        for (std::size_t i = 0; i < rules.size(); ++i) {
            std::set<std::string> refs;
            names_in(*rules[i].condition, refs);
            for (const auto& r : refs) {
                if (tainted.contains(r)) {
                    blocked.insert(i);
                    tainted.insert(rules[i].new_facts.begin(), rules[i].new_facts.end());
                }
            }
        }
    }
    return blocked;
}

/// Jacobi iteration: every round evaluates all rules against the bindings
/// of the previous round, until nothing changes. Order independent, so it
/// matches any fair chaining strategy when derived facts are only read
/// positively.
inline ChainResult fixpoint(const std::vector<de::Rule>& rules, const std::map<std::string, de::FactValue>& facts) {
    auto blocked = blocked_rules(rules, facts);
    std::map<std::string, bool> bindings;
    for (const auto& [name, v] : facts) bindings[name] = v == de::FactValue::True;
    ChainResult out;
    for (const auto& rule : rules) {
        for (const auto& nf : rule.new_facts) out.derived[nf] = false;
    }
    while (true) {
        std::set<std::size_t> now_fire;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (!blocked.contains(i) && !out.fired.contains(rules[i].name) && holds(*rules[i].condition, bindings)) {
                now_fire.insert(i);
            }
        }
        if (now_fire.empty()) break;
        for (auto i : now_fire) {
            out.fired.insert(rules[i].name);
            for (const auto& nf : rules[i].new_facts) {
                bindings[nf] = true;
                out.derived[nf] = true;
            }
            out.actions.insert(rules[i].actions.begin(), rules[i].actions.end());
        }
    }
    return out;
}

/// Firing order under declaration-order passes where a firing is visible to
/// later rules of the same pass.
inline std::vector<std::string> pass_order(const std::vector<de::Rule>& rules,
                                           const std::map<std::string, de::FactValue>& facts) {
    auto blocked = blocked_rules(rules, facts);
    std::map<std::string, bool> bindings;
    for (const auto& [name, v] : facts) bindings[name] = v == de::FactValue::True;
    std::vector<std::string> order;
    std::set<std::size_t> done;
    for (std::size_t pass = 0; pass <= rules.size(); ++pass) {
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (blocked.contains(i) || done.contains(i) || !holds(*rules[i].condition, bindings)) continue;
            done.insert(i);
            order.push_back(rules[i].name);
            for (const auto& nf : rules[i].new_facts) bindings[nf] = true;
        }
    }
    return order;
}

// ---------------------------------------------------------------------------
// Channel graphs

/// Transitive closure of "transform a feeds transform b".
inline std::vector<std::vector<bool>> reach(const de::ChannelSpec& spec) {
    auto n = spec.transforms.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            for (const auto& p : spec.transforms[a].produces) {
                const auto& c = spec.transforms[b].consumes;
                if (std::find(c.begin(), c.end(), p) != c.end()) r[a][b] = true;
            }
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (r[i][k] && r[k][j]) r[i][j] = true;
    return r;
}

/// Groups of mutually reachable transforms that lie on a cycle, each in
/// declaration order, groups ordered by their first member.
inline std::vector<std::vector<std::string>> cycles(const de::ChannelSpec& spec) {
    auto r = reach(spec);
    auto n = spec.transforms.size();
    std::vector<bool> used(n, false);
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (used[i] || !r[i][i]) continue;
        std::vector<std::string> group;
        for (std::size_t j = i; j < n; ++j) {
            if (!used[j] && r[i][j] && r[j][i]) {
                used[j] = true;
                group.push_back(spec.transforms[j].name);
            }
        }
        out.push_back(group);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Provisioning

inline double fom(const de::provisioning::ResourceEntry& e) {
    return e.price_per_core_hour / e.performance_score * (1.0 + e.occupancy);
}

/// a's figure of merit below b's, in exact arithmetic, by cross-multiplying
/// out the divisions.
inline bool fom_less(const de::provisioning::ResourceEntry& a, const de::provisioning::ResourceEntry& b) {
    using R = boost::multiprecision::cpp_rational;
    R lhs = R(a.price_per_core_hour) * (R(1) + R(a.occupancy)) * R(b.performance_score);
    R rhs = R(b.price_per_core_hour) * (R(1) + R(b.occupancy)) * R(a.performance_score);
    return lhs < rhs;
}

/// Exhaustive selection sort on (exact fom, entry_id).
inline std::vector<std::string> rank(std::vector<de::provisioning::ResourceEntry> entries) {
    std::vector<std::string> out;
    while (!entries.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < entries.size(); ++i) {
            const auto& a = entries[i];
            const auto& b = entries[best];
            if (fom_less(a, b) || (!fom_less(b, a) && a.entry_id < b.entry_id)) best = i;
        }
        out.push_back(entries[best].entry_id);
        entries.erase(entries.begin() + std::ptrdiff_t(best));
    }
    return out;
}

inline bool fits(const de::provisioning::Job& j, const de::provisioning::ResourceEntry& e) {
    if (e.state != de::provisioning::EntryState::Up) return false;
    if (j.cores > e.slot_cores) return false;
    if (j.memory_mb > e.slot_memory_mb) return false;
    if (!j.site_whitelist) return true;
    for (const auto& s : *j.site_whitelist) {
        if (s == e.provider) return true;
    }
    return false;
}

struct Ask {
    std::string entry_id;
    std::int64_t slots;
    double cost;
};

/// Slot-by-slot greedy fill in ranked order.
inline std::vector<Ask> greedy(const std::vector<std::string>& ranked,
                               const std::vector<de::provisioning::Job>& jobs,
                               const std::vector<de::provisioning::ResourceEntry>& entries, double limit,
                               double spent, std::int64_t per_entry_max, std::int64_t walltime) {
    using de::provisioning::JobState;
    auto entry_of = [&](const std::string& id) -> const de::provisioning::ResourceEntry* {
        for (const auto& e : entries)
            if (e.entry_id == id) return &e;
        return nullptr;
    };
    std::set<std::string> demand;
    for (const auto& id : ranked) {
        const auto* e = entry_of(id);
        for (const auto& j : jobs)
            if (e && j.state == JobState::Idle && fits(j, *e)) demand.insert(j.job_id);
    }
    std::int64_t unserved = std::int64_t(demand.size());
    std::vector<Ask> out;
    for (const auto& id : ranked) {
        if (unserved <= 0 || spent >= limit) break;
        const auto* e = entry_of(id);
        if (!e || e->state != de::provisioning::EntryState::Up) continue;
        std::int64_t eligible = 0;
        for (const auto& j : jobs)
            if (j.state == JobState::Idle && fits(j, *e)) ++eligible;
        std::int64_t alloc_cs = std::llround(e->allocation_core_hours_remaining * 3600.0);
        auto cost = [&](std::int64_t k) {
            return double(k) * double(e->slot_cores) * e->price_per_core_hour * double(walltime) / 3600.0;
        };
        std::int64_t k = 0;
        while (true) {
            std::int64_t next = k + 1;
            if (next > unserved || next > eligible || next > per_entry_max || next > e->max_slots - e->slots_in_use)
                break;
            if (e->provider_kind == de::provisioning::ProviderKind::Hpc && next * e->slot_cores * walltime > alloc_cs)
                break;
            if (!(spent + cost(next) <= limit)) break;
            k = next;
        }
        if (k == 0) continue;
        out.push_back({id, k, cost(k)});
        spent += cost(k);
        unserved -= k;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random instances

inline de::provisioning::ResourceEntry random_entry(std::mt19937_64& rng, int index) {
    using namespace de::provisioning;
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_int_distribution<int> cores(1, 16);
    std::uniform_int_distribution<int> slots(1, 40);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ResourceEntry e;
    e.entry_id = "e" + std::to_string(index);
    e.provider = "p" + std::to_string(index % 4);
    e.provider_kind = static_cast<ProviderKind>(kind(rng));
    e.slot_cores = cores(rng);
    e.slot_memory_mb = 2000 * cores(rng);
    // Coarse price grid so equal FOM values and ties actually occur.
    e.price_per_core_hour = e.provider_kind == ProviderKind::Grid ? 0.0 : 0.01 * double(cores(rng) % 5);
    e.performance_score = 0.5 * double(1 + cores(rng) % 4);
    e.occupancy = 0.25 * double(cores(rng) % 5);
    e.state = unit(rng) < 0.85 ? EntryState::Up : EntryState::Down;
    e.max_slots = slots(rng);
    e.slots_in_use = std::min<std::int64_t>(e.max_slots, slots(rng) / 3);
    e.allocation_core_hours_remaining = e.provider_kind == ProviderKind::Hpc ? 10.0 * double(cores(rng)) : 0.0;
    return e;
}

inline de::provisioning::Job random_job(std::mt19937_64& rng, int index) {
    using namespace de::provisioning;
    std::uniform_int_distribution<int> cores(1, 16);
    std::uniform_int_distribution<int> pick(0, 9);
    Job j;
    j.job_id = "j" + std::to_string(index);
    j.cores = cores(rng);
    j.memory_mb = 1000 * cores(rng);
    j.max_walltime_s = 600 * (1 + pick(rng));
    if (pick(rng) < 2) j.site_whitelist = std::vector<std::string>{"p" + std::to_string(pick(rng) % 4)};
    int s = pick(rng);
    j.state = s < 7 ? JobState::Idle : (s < 9 ? JobState::Running : JobState::Done);
    return j;
}

}  // namespace oracle
