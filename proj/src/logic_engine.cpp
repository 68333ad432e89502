#include "de/logic_engine.hpp"

#include <algorithm>
#include <cmath>

namespace de {

std::string_view to_string(FactValue value) noexcept {
    switch (value) {
        case FactValue::True: return "true";
        case FactValue::False: return "false";
        case FactValue::Failed: return "failed";
    }
    return "failed";
}

FactValue fact_value_from_string(std::string_view text) {
    if (text == "true") return FactValue::True;
    if (text == "false") return FactValue::False;
    if (text == "failed") return FactValue::Failed;
    throw Error("invalid fact value '" + std::string(text) + "'");
}

namespace {

double as_number(const Scalar& value, std::string_view context) {
    if (const auto* number = std::get_if<double>(&value)) {
        return *number;
    }
    throw EvaluationError(std::string(context) + " needs a number, got a " + std::string(type_name(value)));
}

bool as_bool(const Scalar& value, std::string_view context) {
    if (const auto* flag = std::get_if<bool>(&value)) {
        return *flag;
    }
    throw EvaluationError(std::string(context) + " needs a boolean, got a " + std::string(type_name(value)));
}

double finite(double value, std::string_view context) {
    if (!std::isfinite(value)) {
        throw EvaluationError(std::string(context) + " overflowed");
    }
    return value;
}

const DataProduct& product_in(const DataBlockSnapshot& snapshot, const std::string& name) {
    const auto* product = snapshot.find(name);
    if (!product) {
        throw EvaluationError("missing product '" + name + "'");
    }
    return *product;
}

Scalar read_path(const Expression::ProductPath& path, const DataBlockSnapshot& snapshot) {
    const auto& product = product_in(snapshot, path.product);
    const auto* record = std::get_if<Record>(product.payload.get());
    if (!record) {
        throw EvaluationError("'" + path.product + "' is a table; use an aggregate");
    }
    auto it = record->find(path.field);
    if (it == record->end()) {
        throw EvaluationError("missing field '" + path.product + "." + path.field + "'");
    }
    return it->second;
}

Scalar aggregate(const Expression::Aggregate& agg, const DataBlockSnapshot& snapshot) {
    const auto& product = product_in(snapshot, agg.path.product);
    const auto* table = std::get_if<Table>(product.payload.get());
    auto label = std::string(to_string(agg.fn)) + "(" + agg.path.product + "." + agg.path.field + ")";
    if (!table) {
        throw EvaluationError(label + ": '" + agg.path.product + "' is not a table");
    }
    // count() tallies rows; the field only names the table.
    if (agg.fn == AggregateFn::Count) {
        return static_cast<double>(table->size());
    }
    if (table->empty()) {
        throw EvaluationError(label + " over an empty table");
    }
    double acc = 0.0;
    bool first = true;
    for (const auto& row : *table) {
        auto it = row.find(agg.path.field);
        if (it == row.end()) {
            throw EvaluationError(label + ": missing field '" + agg.path.field + "'");
        }
        double value = as_number(it->second, label);
        switch (agg.fn) {
            case AggregateFn::Min: acc = first ? value : std::min(acc, value); break;
            case AggregateFn::Max: acc = first ? value : std::max(acc, value); break;
            default: acc += value; break;
        }
        first = false;
    }
    if (agg.fn == AggregateFn::Avg) {
        acc /= static_cast<double>(table->size());
    }
    return finite(acc, label);
}

Scalar evaluate_binary(const Expression::Binary& n, const DataBlockSnapshot& snapshot) {
    auto label = "'" + std::string(to_string(n.op)) + "'";
    if (n.op == BinaryOp::And || n.op == BinaryOp::Or) {
        bool lhs = as_bool(evaluate(*n.lhs, snapshot), label);
        if (n.op == BinaryOp::And ? !lhs : lhs) {
            return lhs;
        }
        return as_bool(evaluate(*n.rhs, snapshot), label);
    }
    auto lhs = evaluate(*n.lhs, snapshot);
    auto rhs = evaluate(*n.rhs, snapshot);
    switch (n.op) {
        case BinaryOp::Eq:
        case BinaryOp::Ne: {
            if (lhs.index() != rhs.index()) {
                throw EvaluationError(label + " compares a " + std::string(type_name(lhs)) + " with a " +
                                      std::string(type_name(rhs)));
            }
            return (lhs == rhs) == (n.op == BinaryOp::Eq);
        }
        default:
            break;
    }
    double a = as_number(lhs, label);
    double b = as_number(rhs, label);
    switch (n.op) {
        case BinaryOp::Lt: return a < b;
        case BinaryOp::Le: return a <= b;
        case BinaryOp::Gt: return a > b;
        case BinaryOp::Ge: return a >= b;
        case BinaryOp::Add: return finite(a + b, label);
        case BinaryOp::Sub: return finite(a - b, label);
        case BinaryOp::Mul: return finite(a * b, label);
        case BinaryOp::Div:
            if (b == 0.0) {
                throw EvaluationError("division by zero");
            }
            return finite(a / b, label);
        default:
            throw EvaluationError("unsupported operator " + label);
    }
}

}  // namespace

Scalar evaluate(const Expression& expr, const DataBlockSnapshot& snapshot) {
    return std::visit(
        [&](const auto& n) -> Scalar {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::Literal>) {
                return n.value;
            } else if constexpr (std::is_same_v<T, Expression::ProductPath>) {
                return read_path(n, snapshot);
            } else if constexpr (std::is_same_v<T, Expression::FactRef>) {
                throw EvaluationError("fact reference '" + n.name + "' outside a rule condition");
            } else if constexpr (std::is_same_v<T, Expression::Aggregate>) {
                return aggregate(n, snapshot);
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                auto operand = evaluate(*n.operand, snapshot);
                if (n.op == UnaryOp::Not) {
                    return !as_bool(operand, "'not'");
                }
                return -as_number(operand, "unary '-'");
            } else {
                return evaluate_binary(n, snapshot);
            }
        },
        expr.node);
}

FactEvaluation evaluate_facts(std::span<const Fact> facts, const DataBlockSnapshot& snapshot) {
    FactEvaluation out;
    for (const auto& fact : facts) {
        try {
            auto value = evaluate(*fact.expression, snapshot);
            out.values[fact.name] = as_bool(value, "a fact") ? FactValue::True : FactValue::False;
        } catch (const EvaluationError& e) {
            out.values[fact.name] = FactValue::Failed;
            out.incidents.push_back(Incident{"fact " + fact.name, e.what()});
        }
    }
    return out;
}

bool evaluate_condition(const Expression& condition, const std::map<std::string, bool>& bindings) {
    return std::visit(
        [&](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::FactRef>) {
                auto it = bindings.find(n.name);
                return it != bindings.end() && it->second;
            } else if constexpr (std::is_same_v<T, Expression::Literal>) {
                const auto* flag = std::get_if<bool>(&n.value);
                return flag && *flag;
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                return n.op == UnaryOp::Not && !evaluate_condition(*n.operand, bindings);
            } else if constexpr (std::is_same_v<T, Expression::Binary>) {
                if (n.op == BinaryOp::And) {
                    return evaluate_condition(*n.lhs, bindings) && evaluate_condition(*n.rhs, bindings);
                }
                if (n.op == BinaryOp::Or) {
                    return evaluate_condition(*n.lhs, bindings) || evaluate_condition(*n.rhs, bindings);
                }
                return false;
            } else {
                return false;
            }
        },
        condition.node);
}

EvaluationResult forward_chain(std::span<const Rule> rules, const std::map<std::string, FactValue>& fact_values) {
    EvaluationResult result;
    result.fact_values = fact_values;

    std::map<std::string, std::size_t> deriving_rule;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        for (const auto& name : rules[i].new_facts) {
            deriving_rule.emplace(name, i);
            result.derived_facts[name] = false;
        }
    }

    std::vector<std::set<std::string>> references;
    references.reserve(rules.size());
    for (const auto& rule : rules) {
        references.push_back(fact_references(*rule.condition));
    }

    std::vector<bool> suppressed(rules.size(), false);
    for (std::size_t i = 0; i < rules.size(); ++i) {
        suppressed[i] = std::any_of(references[i].begin(), references[i].end(), [&](const auto& name) {
            auto it = fact_values.find(name);
            return it != fact_values.end() && it->second == FactValue::Failed;
        });
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (suppressed[i]) continue;
            for (const auto& name : references[i]) {
                auto it = deriving_rule.find(name);
                if (it != deriving_rule.end() && suppressed[it->second]) {
                    suppressed[i] = changed = true;
                    break;
                }
            }
        }
    }

    std::map<std::string, bool> bindings;
    for (const auto& [name, value] : fact_values) {
        bindings[name] = value == FactValue::True;
    }

    std::vector<bool> fired(rules.size(), false);
    for (bool fired_this_pass = true; fired_this_pass;) {
        fired_this_pass = false;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (fired[i] || suppressed[i] || !evaluate_condition(*rules[i].condition, bindings)) {
                continue;
            }
            fired[i] = fired_this_pass = true;
            result.fired_rules.push_back(rules[i].name);
            for (const auto& name : rules[i].new_facts) {
                bindings[name] = true;
                result.derived_facts[name] = true;
            }
            for (const auto& action : rules[i].actions) {
                if (std::find(result.triggered_actions.begin(), result.triggered_actions.end(), action) ==
                    result.triggered_actions.end()) {
                    result.triggered_actions.push_back(action);
                }
            }
        }
    }

    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (suppressed[i]) {
            result.suppressed_rules.push_back(rules[i].name);
        }
    }
    return result;
}

}  // namespace de
