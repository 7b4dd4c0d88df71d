#pragma once

// Arithmetic expressions of a single age variable `a`, as written in
// scenario files for mortality, birth, sensor and initial-density profiles.
//
// Grammar (precedence high to low):
//   primary := number | 'a' | name '(' expr ')' | '(' expr ')'
//   power   := primary ['^' unary]          (right-associative)
//   unary   := '-' unary | power
//   term    := unary (('*' | '/') unary)*
//   expr    := term (('+' | '-') term)*
// Builtins: sin cos exp ln sqrt abs.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace chemostat::expr {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class DomainError : public std::runtime_error {
public:
    DomainError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (expression offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

enum class Builtin { Sin, Cos, Exp, Ln, Sqrt, Abs };

inline constexpr std::array<std::pair<std::string_view, Builtin>, 6> kBuiltins{{
    {"sin", Builtin::Sin},
    {"cos", Builtin::Cos},
    {"exp", Builtin::Exp},
    {"ln", Builtin::Ln},
    {"sqrt", Builtin::Sqrt},
    {"abs", Builtin::Abs},
}};

inline std::string_view builtin_name(Builtin fn) {
    for (const auto& [name, id] : kBuiltins)
        if (id == fn) return name;
    return "?";
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Number {
    double value;
};
struct Variable {};
struct Negate {
    NodePtr operand;
};
struct Binary {
    char op;  // one of + - * / ^
    NodePtr lhs;
    NodePtr rhs;
};
struct Call {
    Builtin fn;
    NodePtr arg;
};

struct Node {
    std::variant<Number, Variable, Negate, Binary, Call> data;
    std::size_t offset = 0;  // byte offset of the node's leading token
};

/// Structural equality; ignores source offsets.
inline bool same_structure(const Node& x, const Node& y) {
    if (x.data.index() != y.data.index()) return false;
    return std::visit(
        [&](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const auto& rhs = std::get<T>(y.data);
            if constexpr (std::is_same_v<T, Number>) {
                return lhs.value == rhs.value;
            } else if constexpr (std::is_same_v<T, Variable>) {
                return true;
            } else if constexpr (std::is_same_v<T, Negate>) {
                return same_structure(*lhs.operand, *rhs.operand);
            } else if constexpr (std::is_same_v<T, Binary>) {
                return lhs.op == rhs.op && same_structure(*lhs.lhs, *rhs.lhs) &&
                       same_structure(*lhs.rhs, *rhs.rhs);
            } else {
                return lhs.fn == rhs.fn && same_structure(*lhs.arg, *rhs.arg);
            }
        },
        x.data);
}

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr parse_all() {
        skip_ws();
        if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
        auto root = parse_expr();
        skip_ws();
        if (pos_ != src_.size())
            throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return root;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static NodePtr make(std::size_t offset, auto&& payload) {
        return std::make_shared<const Node>(Node{std::forward<decltype(payload)>(payload), offset});
    }

    NodePtr parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            skip_ws();
            std::size_t at = pos_;
            if (accept('+'))
                lhs = make(at, Binary{'+', lhs, parse_term()});
            else if (accept('-'))
                lhs = make(at, Binary{'-', lhs, parse_term()});
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        auto lhs = parse_unary();
        for (;;) {
            skip_ws();
            std::size_t at = pos_;
            if (accept('*'))
                lhs = make(at, Binary{'*', lhs, parse_unary()});
            else if (accept('/'))
                lhs = make(at, Binary{'/', lhs, parse_unary()});
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        skip_ws();
        std::size_t at = pos_;
        if (accept('-')) return make(at, Negate{parse_unary()});
        return parse_power();
    }

    NodePtr parse_power() {
        auto base = parse_primary();
        skip_ws();
        std::size_t at = pos_;
        if (accept('^')) return make(at, Binary{'^', base, parse_unary()});
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
        std::size_t at = pos_;
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            std::string_view name = src_.substr(at, pos_ - at);
            if (name == "a") return make(at, Variable{});
            for (const auto& [builtin, id] : kBuiltins) {
                if (builtin != name) continue;
                if (!accept('('))
                    throw ParseError("function '" + std::string(name) + "' expects '('", pos_);
                auto arg = parse_expr();
                if (accept(','))
                    throw ParseError(
                        "arity mismatch: '" + std::string(name) + "' takes exactly 1 argument",
                        pos_ - 1);
                if (!accept(')')) throw ParseError("expected ')'", pos_);
                return make(at, Call{id, arg});
            }
            throw ParseError("unknown identifier '" + std::string(name) + "'", at);
        }
        throw ParseError(std::string("unexpected '") + c + "'", at);
    }

    NodePtr parse_number() {
        std::size_t at = pos_;
        auto is_digit = [&](std::size_t i) {
            return i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]));
        };
        while (is_digit(pos_)) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (is_digit(pos_)) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_ + 1;
            if (mark < src_.size() && (src_[mark] == '+' || src_[mark] == '-')) ++mark;
            if (is_digit(mark)) {
                pos_ = mark;
                while (is_digit(pos_)) ++pos_;
            }
        }
        double value = 0.0;
        auto [end, ec] = std::from_chars(src_.data() + at, src_.data() + pos_, value);
        if (ec != std::errc() || end != src_.data() + pos_)
            throw ParseError("malformed number", at);
        return make(at, Number{value});
    }
};

inline double eval_node(const Node& node, double a) {
    auto checked = [&](double v, const char* what) {
        if (!std::isfinite(v)) throw DomainError(what, node.offset);
        return v;
    };
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Number>) {
                return n.value;
            } else if constexpr (std::is_same_v<T, Variable>) {
                return a;
            } else if constexpr (std::is_same_v<T, Negate>) {
                return -eval_node(*n.operand, a);
            } else if constexpr (std::is_same_v<T, Binary>) {
                double l = eval_node(*n.lhs, a);
                double r = eval_node(*n.rhs, a);
                switch (n.op) {
                    case '+': return checked(l + r, "overflow in '+'");
                    case '-': return checked(l - r, "overflow in '-'");
                    case '*': return checked(l * r, "overflow in '*'");
                    case '/':
                        if (r == 0.0) throw DomainError("division by zero", node.offset);
                        return checked(l / r, "overflow in '/'");
                    default: return checked(std::pow(l, r), "invalid power");
                }
            } else {
                double x = eval_node(*n.arg, a);
                switch (n.fn) {
                    case Builtin::Sin: return std::sin(x);
                    case Builtin::Cos: return std::cos(x);
                    case Builtin::Exp: return checked(std::exp(x), "exp overflow");
                    case Builtin::Ln:
                        if (x <= 0.0) throw DomainError("ln of non-positive value", node.offset);
                        return std::log(x);
                    case Builtin::Sqrt:
                        if (x < 0.0) throw DomainError("sqrt of negative value", node.offset);
                        return std::sqrt(x);
                    case Builtin::Abs: return std::fabs(x);
                }
                return 0.0;
            }
        },
        node.data);
}

inline void print_node(const Node& node, std::string& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Number>) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", n.value);
                out += buf;
            } else if constexpr (std::is_same_v<T, Variable>) {
                out += 'a';
            } else if constexpr (std::is_same_v<T, Negate>) {
                out += "(-";
                print_node(*n.operand, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, Binary>) {
                out += '(';
                print_node(*n.lhs, out);
                out += ' ';
                out += n.op;
                out += ' ';
                print_node(*n.rhs, out);
                out += ')';
            } else {
                out += builtin_name(n.fn);
                out += '(';
                print_node(*n.arg, out);
                out += ')';
            }
        },
        node.data);
}

}  // namespace detail

/// Immutable parsed expression. Cheap to copy (shared tree).
class Expr {
public:
    static Expr parse(std::string_view source) {
        Expr e;
        e.source_ = std::string(source);
        e.root_ = detail::Parser(e.source_).parse_all();
        return e;
    }

    /// Throws DomainError on ln/sqrt/division domain violations or non-finite results.
    double operator()(double a) const {
        if (!std::isfinite(a)) throw DomainError("non-finite argument", 0);
        double v = detail::eval_node(*root_, a);
        if (!std::isfinite(v)) throw DomainError("non-finite result", root_->offset);
        return v;
    }

    /// Fully parenthesized form; re-parses to the same tree.
    std::string to_string() const {
        std::string out;
        detail::print_node(*root_, out);
        return out;
    }

    const Node& root() const { return *root_; }
    const std::string& source() const { return source_; }

private:
    Expr() = default;
    std::string source_;
    NodePtr root_;
};

}  // namespace chemostat::expr
