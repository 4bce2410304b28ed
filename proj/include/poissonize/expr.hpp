#pragma once

// Small expression language for user-defined fields: parser, printer and an
// evaluator that returns exact first derivatives through forward-mode duals.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "dual.hpp"
#include "errors.hpp"
#include "field.hpp"

namespace poissonize::expr {

enum class Func { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Arcsin };
enum class BinOp { Add, Sub, Mul, Div, Pow };

inline const char* func_name(Func f) {
    switch (f) {
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Tan: return "tan";
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Sqrt: return "sqrt";
        case Func::Abs: return "abs";
        case Func::Arcsin: return "arcsin";
    }
    return "?";
}

inline char binop_symbol(BinOp op) {
    switch (op) {
        case BinOp::Add: return '+';
        case BinOp::Sub: return '-';
        case BinOp::Mul: return '*';
        case BinOp::Div: return '/';
        case BinOp::Pow: return '^';
    }
    return '?';
}

/// Variable slots 0..2 are the spatial coordinates; slot 3 is the extension
/// coordinate s, which carries no derivative.
inline constexpr int kSlotS = 3;

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind { Const, Var, Neg, Call, Binary };

    Kind kind = Kind::Const;
    double value = 0.0;  // Const
    int slot = 0;        // Var
    Func func = Func::Sin;
    BinOp op = BinOp::Add;
    NodePtr lhs;  // operand of Neg/Call, left of Binary
    NodePtr rhs;

    static NodePtr constant(double v) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Const;
        n->value = v;
        return n;
    }
    static NodePtr variable(int slot) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Var;
        n->slot = slot;
        return n;
    }
    static NodePtr negate(NodePtr a) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Neg;
        n->lhs = std::move(a);
        return n;
    }
    static NodePtr call(Func f, NodePtr a) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Call;
        n->func = f;
        n->lhs = std::move(a);
        return n;
    }
    static NodePtr binary(BinOp op, NodePtr a, NodePtr b) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Binary;
        n->op = op;
        n->lhs = std::move(a);
        n->rhs = std::move(b);
        return n;
    }
};

/// Names bound to the three derivative slots, plus the name of the s slot.
struct VariableNames {
    std::string names[3] = {"x", "y", "z"};
    std::string s_name = "s";

    static VariableNames cartesian() { return {}; }
    static VariableNames magnetic() { return {{"ell", "psi", "zeta"}, "s"}; }

    std::optional<int> slot_of(std::string_view id) const {
        for (int i = 0; i < 3; ++i)
            if (id == names[i]) return i;
        if (id == s_name) return kSlotS;
        return std::nullopt;
    }
    const std::string& name_of(int slot) const { return slot == kSlotS ? s_name : names[slot]; }
};

/// Parsed expression. Immutable; copies share the tree.
class Expr {
public:
    Expr() : root_(Node::constant(0.0)) {}
    Expr(NodePtr root, VariableNames vars) : root_(std::move(root)), vars_(std::move(vars)) {}

    const NodePtr& root() const noexcept { return root_; }
    const VariableNames& variables() const noexcept { return vars_; }

private:
    NodePtr root_;
    VariableNames vars_;
};

namespace detail {

class Parser {
public:
    Parser(std::string_view src, const VariableNames& vars) : src_(src), vars_(vars) {}

    NodePtr parse() {
        NodePtr n = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) throw SyntaxError(pos_, "operator or end of input");
        return n;
    }

private:
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

    NodePtr parse_sum() {
        NodePtr lhs = parse_product();
        for (;;) {
            if (accept('+')) lhs = Node::binary(BinOp::Add, lhs, parse_product());
            else if (accept('-')) lhs = Node::binary(BinOp::Sub, lhs, parse_product());
            else return lhs;
        }
    }

    NodePtr parse_product() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = Node::binary(BinOp::Mul, lhs, parse_unary());
            else if (accept('/')) lhs = Node::binary(BinOp::Div, lhs, parse_unary());
            else return lhs;
        }
    }

    // Unary minus binds looser than '^': -x^2 is -(x^2).
    NodePtr parse_unary() {
        if (accept('-')) return Node::negate(parse_unary());
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (accept('^')) return Node::binary(BinOp::Pow, base, parse_unary());
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError(pos_, "expression");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_sum();
            if (!accept(')')) throw SyntaxError(pos_, "')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw SyntaxError(pos_, "expression");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t nd = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            nd += digits();
        }
        if (nd == 0) throw SyntaxError(start, "number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) {
                // "2e" followed by a non-digit is a number then an identifier; let
                // the caller report it.
                pos_ = save;
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        return Node::constant(std::strtod(text.c_str(), nullptr));
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view id = src_.substr(start, pos_ - start);

        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '(') {
            const std::optional<Func> f = lookup_function(id);
            if (!f) throw UnknownIdentifier(start, std::string(id));
            ++pos_;
            NodePtr arg = parse_sum();
            if (!accept(')')) throw SyntaxError(pos_, "')'");
            return Node::call(*f, arg);
        }
        if (auto slot = vars_.slot_of(id)) return Node::variable(*slot);
        if (id == "pi") return Node::constant(std::numbers::pi);
        if (id == "e") return Node::constant(std::numbers::e);
        throw UnknownIdentifier(start, std::string(id));
    }

    static std::optional<Func> lookup_function(std::string_view id) {
        if (id == "sin") return Func::Sin;
        if (id == "cos") return Func::Cos;
        if (id == "tan") return Func::Tan;
        if (id == "exp") return Func::Exp;
        if (id == "log" || id == "ln") return Func::Log;
        if (id == "sqrt") return Func::Sqrt;
        if (id == "abs") return Func::Abs;
        if (id == "arcsin" || id == "asin") return Func::Arcsin;
        return std::nullopt;
    }

    std::string_view src_;
    const VariableNames& vars_;
    std::size_t pos_ = 0;
};

inline double apply(Func f, double a) {
    switch (f) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Tan: return std::tan(a);
        case Func::Exp: return std::exp(a);
        case Func::Log: return checked_log(a);
        case Func::Sqrt: return checked_sqrt(a);
        case Func::Abs: return std::abs(a);
        case Func::Arcsin: return checked_asin(a);
    }
    return 0.0;
}

inline Dual apply(Func f, const Dual& a) {
    switch (f) {
        case Func::Sin: return sin(a);
        case Func::Cos: return cos(a);
        case Func::Tan: return tan(a);
        case Func::Exp: return exp(a);
        case Func::Log: return log(a);
        case Func::Sqrt: return sqrt(a);
        case Func::Abs: return abs(a);
        case Func::Arcsin: return asin(a);
    }
    return {};
}

inline double apply(BinOp op, double a, double b) {
    switch (op) {
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Mul: return a * b;
        case BinOp::Div: return checked_div(a, b);
        case BinOp::Pow: return checked_pow(a, b);
    }
    return 0.0;
}

inline Dual apply(BinOp op, const Dual& a, const Dual& b) {
    switch (op) {
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Mul: return a * b;
        case BinOp::Div: return a / b;
        case BinOp::Pow: return pow(a, b);
    }
    return {};
}

template <class T>
T evaluate(const Node& n, const T (&vars)[4]) {
    switch (n.kind) {
        case Node::Kind::Const: return T(n.value);
        case Node::Kind::Var: return vars[n.slot];
        case Node::Kind::Neg: return -evaluate(*n.lhs, vars);
        case Node::Kind::Call: return apply(n.func, evaluate(*n.lhs, vars));
        case Node::Kind::Binary: return apply(n.op, evaluate(*n.lhs, vars), evaluate(*n.rhs, vars));
    }
    return T(0.0);
}

inline void print_node(const Node& n, const VariableNames& vars, std::string& out) {
    switch (n.kind) {
        case Node::Kind::Const: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", std::abs(n.value));
            if (std::signbit(n.value)) out += "(-" + std::string(buf) + ")";
            else out += buf;
            return;
        }
        case Node::Kind::Var: out += vars.name_of(n.slot); return;
        case Node::Kind::Neg:
            out += "(-";
            print_node(*n.lhs, vars, out);
            out += ")";
            return;
        case Node::Kind::Call:
            out += func_name(n.func);
            out += "(";
            print_node(*n.lhs, vars, out);
            out += ")";
            return;
        case Node::Kind::Binary:
            out += "(";
            print_node(*n.lhs, vars, out);
            out += ' ';
            out += binop_symbol(n.op);
            out += ' ';
            print_node(*n.rhs, vars, out);
            out += ")";
            return;
    }
}

}  // namespace detail

/// Parses `source`. Grammar, loosest to tightest: + - (left), * / (left),
/// unary -, ^ (right), then numbers, names, calls and parentheses.
inline Expr parse(std::string_view source, const VariableNames& vars = VariableNames::cartesian()) {
    return Expr(detail::Parser(source, vars).parse(), vars);
}

/// Fully parenthesized text that parses back to the same tree (for
/// non-negative constants, which is all the parser produces).
inline std::string print(const Expr& e) {
    std::string out;
    detail::print_node(*e.root(), e.variables(), out);
    return out;
}

inline bool structurally_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Node::Kind::Const: return a.value == b.value;
        case Node::Kind::Var: return a.slot == b.slot;
        case Node::Kind::Neg: return structurally_equal(*a.lhs, *b.lhs);
        case Node::Kind::Call: return a.func == b.func && structurally_equal(*a.lhs, *b.lhs);
        case Node::Kind::Binary:
            return a.op == b.op && structurally_equal(*a.lhs, *b.lhs) &&
                   structurally_equal(*a.rhs, *b.rhs);
    }
    return false;
}

inline bool structurally_equal(const Expr& a, const Expr& b) {
    return structurally_equal(*a.root(), *b.root());
}

inline bool depends_on_s(const Node& n) {
    switch (n.kind) {
        case Node::Kind::Const: return false;
        case Node::Kind::Var: return n.slot == kSlotS;
        case Node::Kind::Neg:
        case Node::Kind::Call: return depends_on_s(*n.lhs);
        case Node::Kind::Binary: return depends_on_s(*n.lhs) || depends_on_s(*n.rhs);
    }
    return false;
}

inline double eval(const Expr& e, const Point3& p, double s = 0.0) {
    const double vars[4] = {p.x, p.y, p.z, s};
    return detail::evaluate(*e.root(), vars);
}

/// Value and exact gradient with respect to the three spatial slots.
inline Dual eval_dual(const Expr& e, const Point3& p, double s = 0.0) {
    const Dual vars[4] = {Dual::variable(p.x, 0), Dual::variable(p.y, 1), Dual::variable(p.z, 2),
                          Dual(s)};
    return detail::evaluate(*e.root(), vars);
}

/// Wraps an expression as a ScalarField3. Fields never depend on s, so an
/// expression that references s is rejected.
inline ScalarField3 to_field(const Expr& e, std::string label = {}) {
    if (depends_on_s(*e.root()))
        throw ConfigError("field expressions may not depend on " + e.variables().s_name);
    if (label.empty()) label = print(e);
    return ScalarField3(
        [e](const Point3& p) { return require_finite(eval(e, p), "expression value"); },
        [e](const Point3& p) { return require_finite(eval_dual(e, p).gradient(), "expression gradient"); },
        std::move(label));
}

inline ScalarField3 parse_field(std::string_view source,
                                const VariableNames& vars = VariableNames::cartesian()) {
    return to_field(parse(source, vars), std::string(source));
}

inline VectorField3 parse_vector_field(std::string_view fx, std::string_view fy, std::string_view fz,
                                       const VariableNames& vars = VariableNames::cartesian()) {
    return VectorField3::from_components(parse_field(fx, vars), parse_field(fy, vars), parse_field(fz, vars),
                                         "(" + std::string(fx) + ", " + std::string(fy) + ", " +
                                             std::string(fz) + ")");
}

}  // namespace poissonize::expr
