#pragma once

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>

#include "de/errors.hpp"
#include "de/value.hpp"

namespace de {

enum class UnaryOp { Not, Negate };
enum class BinaryOp { Or, And, Lt, Le, Gt, Ge, Eq, Ne, Add, Sub, Mul, Div };
enum class AggregateFn { Count, Min, Max, Sum, Avg };

[[nodiscard]] std::string_view to_string(UnaryOp op) noexcept;
[[nodiscard]] std::string_view to_string(BinaryOp op) noexcept;
[[nodiscard]] std::string_view to_string(AggregateFn fn) noexcept;

struct Expression;
using ExprPtr = std::shared_ptr<const Expression>;

/// Expression tree node. `column` is the 1-based source column of the node's
/// leading token and does not take part in equality.
struct Expression {
    struct Literal {
        Scalar value;
    };
    /// `<product>.<field>`
    struct ProductPath {
        std::string product;
        std::string field;
    };
    /// Bare identifier; names a fact inside rule conditions.
    struct FactRef {
        std::string name;
    };
    struct Unary {
        UnaryOp op;
        ExprPtr operand;
    };
    struct Binary {
        BinaryOp op;
        ExprPtr lhs;
        ExprPtr rhs;
    };
    struct Aggregate {
        AggregateFn fn;
        ProductPath path;
    };

    std::variant<Literal, ProductPath, FactRef, Unary, Binary, Aggregate> node;
    int column = 1;

    friend bool operator==(const Expression& a, const Expression& b);
};

inline constexpr int kMaxExpressionDepth = 64;

/// Parse failure at a 1-based column.
class SyntaxError : public Error {
public:
    SyntaxError(int column, const std::string& message);
    [[nodiscard]] int column() const noexcept { return column_; }

private:
    int column_;
};

class DepthExceeded : public SyntaxError {
public:
    using SyntaxError::SyntaxError;
};

/// Static check failure (namespace, reference or type) at a 1-based column.
class ExpressionCheckError : public SyntaxError {
public:
    using SyntaxError::SyntaxError;
};

/// Grammar:
///   expr    := or
///   or      := and ("or" and)*
///   and     := not ("and" not)*
///   not     := "not" not | cmp
///   cmp     := sum (("<"|"<="|">"|">="|"=="|"!=") sum)?
///   sum     := prod (("+"|"-") prod)*
///   prod    := unary (("*"|"/") unary)*
///   unary   := "-" unary | primary
///   primary := NUMBER | STRING | "true" | "false" | IDENT ("." IDENT)?
///            | AGG "(" IDENT "." IDENT ")" | "(" expr ")"
/// AGG is one of count, min, max, sum, avg when followed by "(".
[[nodiscard]] ExprPtr parse_expression(std::string_view text);

/// Fully parenthesized rendering that reparses to an equal tree.
[[nodiscard]] std::string to_string(const Expression& expr);

[[nodiscard]] int depth(const Expression& expr) noexcept;

[[nodiscard]] std::set<std::string> fact_references(const Expression& expr);
[[nodiscard]] std::set<std::string> product_references(const Expression& expr);

enum class ValueType { Number, String, Boolean, Unknown };

/// Static type of the expression; product paths are Unknown. Throws
/// ExpressionCheckError where operand types are statically incompatible.
[[nodiscard]] ValueType infer_type(const Expression& expr);

/// Fact expressions read data: no bare identifiers, every path names one of
/// `products`, and the result must be boolean (or statically unknown).
void check_fact_expression(const Expression& expr, const std::set<std::string, std::less<>>& products);

/// Rule conditions read facts: only identifiers, boolean literals, not/and/or.
void check_rule_condition(const Expression& expr);

}  // namespace de
