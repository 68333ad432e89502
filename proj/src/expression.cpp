#include "de/expression.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <initializer_list>
#include <cstdlib>
#include <optional>
#include <vector>

namespace de {

std::string_view to_string(UnaryOp op) noexcept {
    return op == UnaryOp::Not ? "not" : "-";
}

std::string_view to_string(BinaryOp op) noexcept {
    switch (op) {
        case BinaryOp::Or: return "or";
        case BinaryOp::And: return "and";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
        case BinaryOp::Eq: return "==";
        case BinaryOp::Ne: return "!=";
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
    }
    return "?";
}

std::string_view to_string(AggregateFn fn) noexcept {
    switch (fn) {
        case AggregateFn::Count: return "count";
        case AggregateFn::Min: return "min";
        case AggregateFn::Max: return "max";
        case AggregateFn::Sum: return "sum";
        case AggregateFn::Avg: return "avg";
    }
    return "?";
}

SyntaxError::SyntaxError(int column, const std::string& message)
    : Error("column " + std::to_string(column) + ": " + message), column_(column) {}

bool operator==(const Expression& a, const Expression& b) {
    if (a.node.index() != b.node.index()) {
        return false;
    }
    return std::visit(
        [&](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const auto& rhs = std::get<T>(b.node);
            if constexpr (std::is_same_v<T, Expression::Literal>) {
                return lhs.value == rhs.value;
            } else if constexpr (std::is_same_v<T, Expression::ProductPath>) {
                return lhs.product == rhs.product && lhs.field == rhs.field;
            } else if constexpr (std::is_same_v<T, Expression::FactRef>) {
                return lhs.name == rhs.name;
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                return lhs.op == rhs.op && *lhs.operand == *rhs.operand;
            } else if constexpr (std::is_same_v<T, Expression::Binary>) {
                return lhs.op == rhs.op && *lhs.lhs == *rhs.lhs && *lhs.rhs == *rhs.rhs;
            } else {
                return lhs.fn == rhs.fn && lhs.path.product == rhs.path.product &&
                       lhs.path.field == rhs.path.field;
            }
        },
        a.node);
}

namespace {

enum class Tok { Number, String, Ident, Dot, LParen, RParen, Op, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int column = 1;
};

constexpr std::array kKeywords{"and", "or", "not", "true", "false"};

bool is_keyword(std::string_view word) {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::optional<AggregateFn> aggregate_named(std::string_view word) {
    if (word == "count") return AggregateFn::Count;
    if (word == "min") return AggregateFn::Min;
    if (word == "max") return AggregateFn::Max;
    if (word == "sum") return AggregateFn::Sum;
    if (word == "avg") return AggregateFn::Avg;
    return std::nullopt;
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    auto col = [&](std::size_t pos) { return static_cast<int>(pos) + 1; };
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Token token;
        token.column = col(i);
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            if (i < text.size() && text[i] == '.') {
                ++i;
                if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) {
                    throw SyntaxError(col(i), "expected digits after decimal point");
                }
                while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            }
            if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
                ++i;
                if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
                if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) {
                    throw SyntaxError(col(i), "expected exponent digits");
                }
                while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
            }
            token.kind = Tok::Number;
            token.text = std::string(text.substr(start, i - start));
            token.number = std::strtod(token.text.c_str(), nullptr);
            if (!std::isfinite(token.number)) {
                throw SyntaxError(token.column, "number literal out of range");
            }
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
                ++i;
            }
            token.kind = Tok::Ident;
            token.text = std::string(text.substr(start, i - start));
        } else if (c == '"') {
            ++i;
            bool closed = false;
            while (i < text.size()) {
                char s = text[i++];
                if (s == '"') {
                    closed = true;
                    break;
                }
                if (s == '\\') {
                    if (i >= text.size()) break;
                    char e = text[i++];
                    if (e == '"' || e == '\\') {
                        token.text.push_back(e);
                    } else if (e == 'n') {
                        token.text.push_back('\n');
                    } else if (e == 't') {
                        token.text.push_back('\t');
                    } else {
                        throw SyntaxError(col(i - 2), std::string("unknown escape '\\") + e + "'");
                    }
                    continue;
                }
                token.text.push_back(s);
            }
            if (!closed) {
                throw SyntaxError(token.column, "unterminated string literal");
            }
            token.kind = Tok::String;
        } else if (c == '.') {
            token.kind = Tok::Dot;
            token.text = ".";
            ++i;
        } else if (c == '(' || c == ')') {
            token.kind = c == '(' ? Tok::LParen : Tok::RParen;
            token.text = std::string(1, c);
            ++i;
        } else {
            static constexpr std::array kTwoChar{"<=", ">=", "==", "!="};
            std::string_view rest = text.substr(i);
            auto two = std::find_if(kTwoChar.begin(), kTwoChar.end(),
                                    [&](std::string_view op) { return rest.starts_with(op); });
            if (two != kTwoChar.end()) {
                token.text = *two;
                i += 2;
            } else if (std::string_view("<>+-*/").find(c) != std::string_view::npos) {
                token.text = std::string(1, c);
                ++i;
            } else {
                throw SyntaxError(token.column, std::string("unexpected character '") + c + "'");
            }
            token.kind = Tok::Op;
        }
        tokens.push_back(std::move(token));
    }
    Token end;
    end.kind = Tok::End;
    // A premature end of input is reported at the last token, which is the
    // one left dangling.
    end.column = tokens.empty() ? 1 : tokens.back().column;
    tokens.push_back(end);
    return tokens;
}

int node_depth(const Expression& expr) noexcept {
    return std::visit(
        [](const auto& n) -> int {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::Unary>) {
                return 1 + node_depth(*n.operand);
            } else if constexpr (std::is_same_v<T, Expression::Binary>) {
                return 1 + std::max(node_depth(*n.lhs), node_depth(*n.rhs));
            } else {
                return 1;
            }
        },
        expr.node);
}

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    ExprPtr parse() {
        auto expr = parse_or();
        if (peek().kind != Tok::End) {
            throw SyntaxError(peek().column, "unexpected '" + peek().text + "'");
        }
        return expr;
    }

private:
    // Guards the C++ stack against deeply parenthesized input; the tree depth
    // limit itself is enforced in make().
    static constexpr int kMaxNesting = 4 * kMaxExpressionDepth;

    struct NestingGuard {
        NestingGuard(int& level, int column) : level_(level) {
            if (++level_ > kMaxNesting) {
                --level_;
                throw DepthExceeded(column, "expression nesting exceeds limit");
            }
        }
        ~NestingGuard() { --level_; }
        int& level_;
    };

    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_++]; }

    bool accept_word(std::string_view word) {
        if (peek().kind == Tok::Ident && peek().text == word) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::optional<BinaryOp> peek_op(std::initializer_list<BinaryOp> ops) const {
        if (peek().kind != Tok::Op) {
            return std::nullopt;
        }
        for (auto op : ops) {
            if (peek().text == to_string(op)) {
                return op;
            }
        }
        return std::nullopt;
    }

    static ExprPtr make(Expression expr) {
        if (node_depth(expr) > kMaxExpressionDepth) {
            throw DepthExceeded(expr.column, "expression depth exceeds " +
                                                 std::to_string(kMaxExpressionDepth));
        }
        return std::make_shared<const Expression>(std::move(expr));
    }

    static ExprPtr binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
        int column = lhs->column;
        return make(Expression{Expression::Binary{op, std::move(lhs), std::move(rhs)}, column});
    }

    ExprPtr parse_or() {
        auto lhs = parse_and();
        while (accept_word("or")) {
            lhs = binary(BinaryOp::Or, lhs, parse_and());
        }
        return lhs;
    }

    ExprPtr parse_and() {
        auto lhs = parse_not();
        while (accept_word("and")) {
            lhs = binary(BinaryOp::And, lhs, parse_not());
        }
        return lhs;
    }

    ExprPtr parse_not() {
        if (peek().kind == Tok::Ident && peek().text == "not") {
            int column = next().column;
            NestingGuard guard(nesting_, column);
            auto operand = parse_not();
            return make(Expression{Expression::Unary{UnaryOp::Not, std::move(operand)}, column});
        }
        return parse_cmp();
    }

    ExprPtr parse_cmp() {
        auto lhs = parse_sum();
        using B = BinaryOp;
        if (auto op = peek_op({B::Le, B::Ge, B::Eq, B::Ne, B::Lt, B::Gt})) {
            ++pos_;
            lhs = binary(*op, lhs, parse_sum());
            if (peek_op({B::Le, B::Ge, B::Eq, B::Ne, B::Lt, B::Gt})) {
                throw SyntaxError(peek().column, "comparisons do not chain; add parentheses");
            }
        }
        return lhs;
    }

    ExprPtr parse_sum() {
        auto lhs = parse_prod();
        while (auto op = peek_op({BinaryOp::Add, BinaryOp::Sub})) {
            ++pos_;
            lhs = binary(*op, lhs, parse_prod());
        }
        return lhs;
    }

    ExprPtr parse_prod() {
        auto lhs = parse_unary();
        while (auto op = peek_op({BinaryOp::Mul, BinaryOp::Div})) {
            ++pos_;
            lhs = binary(*op, lhs, parse_unary());
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (peek().kind == Tok::Op && peek().text == "-") {
            int column = next().column;
            NestingGuard guard(nesting_, column);
            auto operand = parse_unary();
            return make(Expression{Expression::Unary{UnaryOp::Negate, std::move(operand)}, column});
        }
        return parse_primary();
    }

    std::string expect_identifier(std::string_view what) {
        const auto& token = peek();
        if (token.kind != Tok::Ident || is_keyword(token.text)) {
            throw SyntaxError(token.column, "expected " + std::string(what) + describe(token));
        }
        return next().text;
    }

    static std::string describe(const Token& token) {
        return token.kind == Tok::End ? " before end of input" : ", found '" + token.text + "'";
    }

    Expression::ProductPath parse_path_tail(std::string head) {
        Expression::ProductPath path{std::move(head), {}};
        if (peek().kind != Tok::Dot) {
            throw SyntaxError(peek().column, "expected '.' after product name" + describe(peek()));
        }
        ++pos_;
        path.field = expect_identifier("a field name");
        return path;
    }

    ExprPtr parse_primary() {
        const Token& token = peek();
        switch (token.kind) {
            case Tok::Number:
                next();
                return make(Expression{Expression::Literal{token.number}, token.column});
            case Tok::String:
                next();
                return make(Expression{Expression::Literal{token.text}, token.column});
            case Tok::LParen: {
                int column = next().column;
                NestingGuard guard(nesting_, column);
                auto inner = parse_or();
                if (peek().kind != Tok::RParen) {
                    throw SyntaxError(peek().column, "expected ')'" + describe(peek()));
                }
                next();
                return inner;
            }
            case Tok::Ident:
                return parse_identifier();
            default:
                throw SyntaxError(token.column, "expected an operand" + describe(token));
        }
    }

    ExprPtr parse_identifier() {
        const Token& token = next();
        int column = token.column;
        if (token.text == "true" || token.text == "false") {
            return make(Expression{Expression::Literal{token.text == "true"}, column});
        }
        if (is_keyword(token.text)) {
            throw SyntaxError(column, "unexpected keyword '" + token.text + "'");
        }
        if (auto fn = aggregate_named(token.text); fn && peek().kind == Tok::LParen) {
            next();
            auto head = expect_identifier("a product name");
            auto path = parse_path_tail(std::move(head));
            if (peek().kind != Tok::RParen) {
                throw SyntaxError(peek().column, "expected ')'" + describe(peek()));
            }
            next();
            return make(Expression{Expression::Aggregate{*fn, std::move(path)}, column});
        }
        if (peek().kind != Tok::Dot) {
            return make(Expression{Expression::FactRef{token.text}, column});
        }
        auto path = parse_path_tail(token.text);
        if (peek().kind == Tok::Dot) {
            throw SyntaxError(peek().column, "a path has exactly two parts: <product>.<field>");
        }
        return make(Expression{std::move(path), column});
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int nesting_ = 0;
};

std::string quote(const std::string& text) {
    std::string out = "\"";
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string number_text(double value) {
    std::array<char, 32> buffer{};
    auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    std::string text(buffer.data(), end);
    // The grammar has no leading-dot or bare-exponent forms to worry about;
    // to_chars never emits either.
    return text;
}

void collect(const Expression& expr, std::set<std::string>* facts, std::set<std::string>* products) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::FactRef>) {
                if (facts) facts->insert(n.name);
            } else if constexpr (std::is_same_v<T, Expression::ProductPath>) {
                if (products) products->insert(n.product);
            } else if constexpr (std::is_same_v<T, Expression::Aggregate>) {
                if (products) products->insert(n.path.product);
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                collect(*n.operand, facts, products);
            } else if constexpr (std::is_same_v<T, Expression::Binary>) {
                collect(*n.lhs, facts, products);
                collect(*n.rhs, facts, products);
            }
        },
        expr.node);
}

std::string_view type_label(ValueType type) {
    switch (type) {
        case ValueType::Number: return "number";
        case ValueType::String: return "string";
        case ValueType::Boolean: return "boolean";
        case ValueType::Unknown: return "value";
    }
    return "value";
}

void require(ValueType actual, ValueType wanted, const Expression& at, std::string_view context) {
    if (actual != ValueType::Unknown && actual != wanted) {
        throw ExpressionCheckError(at.column, std::string(context) + " needs a " +
                                                  std::string(type_label(wanted)) + ", got a " +
                                                  std::string(type_label(actual)));
    }
}

}  // namespace

ExprPtr parse_expression(std::string_view text) {
    return Parser(text).parse();
}

std::string to_string(const Expression& expr) {
    return std::visit(
        [](const auto& n) -> std::string {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::Literal>) {
                if (const auto* number = std::get_if<double>(&n.value)) {
                    return number_text(*number);
                }
                if (const auto* text = std::get_if<std::string>(&n.value)) {
                    return quote(*text);
                }
                return std::get<bool>(n.value) ? "true" : "false";
            } else if constexpr (std::is_same_v<T, Expression::ProductPath>) {
                return n.product + "." + n.field;
            } else if constexpr (std::is_same_v<T, Expression::FactRef>) {
                return n.name;
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                return n.op == UnaryOp::Not ? "(not " + to_string(*n.operand) + ")"
                                            : "(-" + to_string(*n.operand) + ")";
            } else if constexpr (std::is_same_v<T, Expression::Binary>) {
                return "(" + to_string(*n.lhs) + " " + std::string(to_string(n.op)) + " " +
                       to_string(*n.rhs) + ")";
            } else {
                return std::string(to_string(n.fn)) + "(" + n.path.product + "." + n.path.field + ")";
            }
        },
        expr.node);
}

int depth(const Expression& expr) noexcept {
    return node_depth(expr);
}

std::set<std::string> fact_references(const Expression& expr) {
    std::set<std::string> out;
    collect(expr, &out, nullptr);
    return out;
}

std::set<std::string> product_references(const Expression& expr) {
    std::set<std::string> out;
    collect(expr, nullptr, &out);
    return out;
}

ValueType infer_type(const Expression& expr) {
    return std::visit(
        [&](const auto& n) -> ValueType {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::Literal>) {
                switch (n.value.index()) {
                    case 0: return ValueType::Number;
                    case 1: return ValueType::String;
                    default: return ValueType::Boolean;
                }
            } else if constexpr (std::is_same_v<T, Expression::ProductPath>) {
                return ValueType::Unknown;
            } else if constexpr (std::is_same_v<T, Expression::FactRef>) {
                return ValueType::Boolean;
            } else if constexpr (std::is_same_v<T, Expression::Aggregate>) {
                return ValueType::Number;
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                auto operand = infer_type(*n.operand);
                if (n.op == UnaryOp::Not) {
                    require(operand, ValueType::Boolean, *n.operand, "'not'");
                    return ValueType::Boolean;
                }
                require(operand, ValueType::Number, *n.operand, "unary '-'");
                return ValueType::Number;
            } else {
                auto lhs = infer_type(*n.lhs);
                auto rhs = infer_type(*n.rhs);
                auto label = "'" + std::string(to_string(n.op)) + "'";
                switch (n.op) {
                    case BinaryOp::And:
                    case BinaryOp::Or:
                        require(lhs, ValueType::Boolean, *n.lhs, label);
                        require(rhs, ValueType::Boolean, *n.rhs, label);
                        return ValueType::Boolean;
                    case BinaryOp::Lt:
                    case BinaryOp::Le:
                    case BinaryOp::Gt:
                    case BinaryOp::Ge:
                        require(lhs, ValueType::Number, *n.lhs, label);
                        require(rhs, ValueType::Number, *n.rhs, label);
                        return ValueType::Boolean;
                    case BinaryOp::Eq:
                    case BinaryOp::Ne:
                        if (lhs != ValueType::Unknown && rhs != ValueType::Unknown && lhs != rhs) {
                            throw ExpressionCheckError(n.rhs->column,
                                                       label + " compares a " +
                                                           std::string(type_label(lhs)) + " with a " +
                                                           std::string(type_label(rhs)));
                        }
                        return ValueType::Boolean;
                    default:
                        require(lhs, ValueType::Number, *n.lhs, label);
                        require(rhs, ValueType::Number, *n.rhs, label);
                        return ValueType::Number;
                }
            }
        },
        expr.node);
}

namespace {

void check_fact_nodes(const Expression& expr, const std::set<std::string, std::less<>>& products) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            auto check_path = [&](const Expression::ProductPath& path) {
                if (!products.contains(path.product)) {
                    throw ExpressionCheckError(expr.column, "path '" + path.product + "." + path.field +
                                                                "' names undeclared product '" +
                                                                path.product + "'");
                }
            };
            if constexpr (std::is_same_v<T, Expression::FactRef>) {
                throw ExpressionCheckError(expr.column, "bare identifier '" + n.name +
                                                            "' in a fact; use <product>.<field>");
            } else if constexpr (std::is_same_v<T, Expression::ProductPath>) {
                check_path(n);
            } else if constexpr (std::is_same_v<T, Expression::Aggregate>) {
                check_path(n.path);
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                check_fact_nodes(*n.operand, products);
            } else if constexpr (std::is_same_v<T, Expression::Binary>) {
                check_fact_nodes(*n.lhs, products);
                check_fact_nodes(*n.rhs, products);
            }
        },
        expr.node);
}

}  // namespace

void check_fact_expression(const Expression& expr, const std::set<std::string, std::less<>>& products) {
    check_fact_nodes(expr, products);
    require(infer_type(expr), ValueType::Boolean, expr, "a fact");
}

void check_rule_condition(const Expression& expr) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::FactRef>) {
                return;
            } else if constexpr (std::is_same_v<T, Expression::Literal>) {
                if (!std::holds_alternative<bool>(n.value)) {
                    throw ExpressionCheckError(expr.column, "rule conditions take only boolean literals");
                }
            } else if constexpr (std::is_same_v<T, Expression::ProductPath>) {
                throw ExpressionCheckError(expr.column, "product path '" + n.product + "." + n.field +
                                                            "' in a rule condition; rules read facts");
            } else if constexpr (std::is_same_v<T, Expression::Aggregate>) {
                throw ExpressionCheckError(expr.column, "aggregate in a rule condition; rules read facts");
            } else if constexpr (std::is_same_v<T, Expression::Unary>) {
                if (n.op != UnaryOp::Not) {
                    throw ExpressionCheckError(expr.column, "arithmetic in a rule condition");
                }
                check_rule_condition(*n.operand);
            } else {
                if (n.op != BinaryOp::And && n.op != BinaryOp::Or) {
                    throw ExpressionCheckError(expr.column, "operator '" + std::string(to_string(n.op)) +
                                                                "' in a rule condition; only not/and/or");
                }
                check_rule_condition(*n.lhs);
                check_rule_condition(*n.rhs);
            }
        },
        expr.node);
}

}  // namespace de
