#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "de/datablock.hpp"
#include "de/expression.hpp"

namespace de {

struct Fact {
    std::string name;
    ExprPtr expression;
    std::string text;
};

struct Rule {
    std::string name;
    ExprPtr condition;
    std::string text;
    std::vector<std::string> actions;
    std::vector<std::string> new_facts;
};

enum class FactValue { False, True, Failed };

[[nodiscard]] std::string_view to_string(FactValue value) noexcept;
[[nodiscard]] FactValue fact_value_from_string(std::string_view text);

/// Something went wrong but the cycle continued (failed fact, retried source).
struct Incident {
    std::string subject;
    std::string message;

    bool operator==(const Incident&) const = default;
};

struct FactEvaluation {
    std::map<std::string, FactValue> values;
    std::vector<Incident> incidents;
};

struct EvaluationResult {
    std::map<std::string, FactValue> fact_values;
    std::vector<std::string> fired_rules;
    std::vector<std::string> triggered_actions;
    /// Every rule's new_facts: true when derived, false otherwise.
    std::map<std::string, bool> derived_facts;
    /// Rules that could not fire because they depend on a failed fact.
    std::vector<std::string> suppressed_rules;

    bool operator==(const EvaluationResult&) const = default;
};

/// Raised for a single expression that cannot be evaluated against the data.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Value of a fact expression against a snapshot. Throws EvaluationError for
/// a missing product or field, a type mismatch, division by zero, a
/// non-finite result, or an empty-table min/max/sum/avg.
[[nodiscard]] Scalar evaluate(const Expression& expr, const DataBlockSnapshot& snapshot);

/// Per-fact evaluation; a failing fact is marked Failed and an incident is
/// recorded, the others are unaffected.
[[nodiscard]] FactEvaluation evaluate_facts(std::span<const Fact> facts, const DataBlockSnapshot& snapshot);

/// Rule conditions over fact bindings. Unknown names read as false.
[[nodiscard]] bool evaluate_condition(const Expression& condition, const std::map<std::string, bool>& bindings);

/// Forward chaining in declaration-order passes until a pass fires nothing.
/// A rule fires at most once; firing binds its new_facts to true and appends
/// its actions. A rule is suppressed when its condition references a failed
/// fact, or a derived fact whose only deriving rule is suppressed.
[[nodiscard]] EvaluationResult forward_chain(std::span<const Rule> rules,
                                             const std::map<std::string, FactValue>& fact_values);

}  // namespace de
