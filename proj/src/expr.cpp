#include "artipg/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace artipg {

struct Expr::Node {
    enum class Kind { Literal, Ident, Add, Sub, Mul, Div, Neg } kind;
    Scalar value = 0.0;
    std::string name;
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

struct Parser {
    const std::string& text;
    size_t pos = 0;

    void skipWs() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char c) {
        skipWs();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void err(const std::string& what) {
        fail(Errc::SyntaxError, "expression \"" + text + "\" at offset " + std::to_string(pos) +
                                    ": " + what);
    }

    NodePtr make(Expr::Node::Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
        auto n = std::make_shared<Expr::Node>();
        n->kind = kind;
        n->lhs = std::move(lhs);
        n->rhs = std::move(rhs);
        return n;
    }

    NodePtr parseExpr() {
        NodePtr lhs = parseTerm();
        for (;;) {
            if (eat('+'))
                lhs = make(Expr::Node::Kind::Add, lhs, parseTerm());
            else if (eat('-'))
                lhs = make(Expr::Node::Kind::Sub, lhs, parseTerm());
            else
                return lhs;
        }
    }

    NodePtr parseTerm() {
        NodePtr lhs = parseFactor();
        for (;;) {
            if (eat('*'))
                lhs = make(Expr::Node::Kind::Mul, lhs, parseFactor());
            else if (eat('/'))
                lhs = make(Expr::Node::Kind::Div, lhs, parseFactor());
            else
                return lhs;
        }
    }

    NodePtr parseFactor() {
        skipWs();
        if (pos >= text.size()) err("unexpected end");
        const char c = text[pos];
        if (c == '-') {
            ++pos;
            return make(Expr::Node::Kind::Neg, parseFactor());
        }
        if (c == '(') {
            ++pos;
            NodePtr inner = parseExpr();
            if (!eat(')')) err("missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parseNumber();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parseIdent();
        err(std::string("unexpected character '") + c + "'");
    }

    NodePtr parseNumber() {
        size_t start = pos;
        while (pos < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.' ||
                text[pos] == 'e' || text[pos] == 'E' ||
                ((text[pos] == '+' || text[pos] == '-') && pos > start &&
                 (text[pos - 1] == 'e' || text[pos - 1] == 'E'))))
            ++pos;
        double value = 0.0;
        const auto res = std::from_chars(text.data() + start, text.data() + pos, value);
        if (res.ec != std::errc() || res.ptr != text.data() + pos) err("bad number");
        auto n = std::make_shared<Expr::Node>();
        n->kind = Expr::Node::Kind::Literal;
        n->value = value;
        return n;
    }

    NodePtr parseIdent() {
        size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_' ||
                text[pos] == '.'))
            ++pos;
        auto n = std::make_shared<Expr::Node>();
        n->kind = Expr::Node::Kind::Ident;
        n->name = text.substr(start, pos - start);
        return n;
    }
};

Scalar evalNode(const Expr::Node& n, const Expr::Resolver& resolver) {
    using K = Expr::Node::Kind;
    switch (n.kind) {
    case K::Literal: return n.value;
    case K::Ident: return resolver(n.name);
    case K::Add: return evalNode(*n.lhs, resolver) + evalNode(*n.rhs, resolver);
    case K::Sub: return evalNode(*n.lhs, resolver) - evalNode(*n.rhs, resolver);
    case K::Mul: return evalNode(*n.lhs, resolver) * evalNode(*n.rhs, resolver);
    case K::Div: return evalNode(*n.lhs, resolver) / evalNode(*n.rhs, resolver);
    case K::Neg: return -evalNode(*n.lhs, resolver);
    }
    return 0.0;
}

int precedence(Expr::Node::Kind k) {
    using K = Expr::Node::Kind;
    switch (k) {
    case K::Add:
    case K::Sub: return 1;
    case K::Mul:
    case K::Div: return 2;
    default: return 3;
    }
}

void printNode(const Expr::Node& n, std::string& out, int parent_prec) {
    using K = Expr::Node::Kind;
    const int prec = precedence(n.kind);
    const bool parens = prec < parent_prec;
    if (parens) out += '(';
    switch (n.kind) {
    case K::Literal: out += formatScalar(n.value); break;
    case K::Ident: out += n.name; break;
    case K::Neg:
        out += '-';
        printNode(*n.lhs, out, 3);
        break;
    case K::Add:
    case K::Sub:
    case K::Mul:
    case K::Div: {
        printNode(*n.lhs, out, prec);
        out += (n.kind == K::Add) ? " + " : (n.kind == K::Sub) ? " - "
                                        : (n.kind == K::Mul)   ? " * "
                                                               : " / ";
        // Right operand of - and / needs the stricter level to keep grouping.
        printNode(*n.rhs, out, (n.kind == K::Sub || n.kind == K::Div) ? prec + 1 : prec);
        break;
    }
    }
    if (parens) out += ')';
}

void collectRefs(const Expr::Node& n, std::vector<std::string>& out) {
    if (n.kind == Expr::Node::Kind::Ident) out.push_back(n.name);
    if (n.lhs) collectRefs(*n.lhs, out);
    if (n.rhs) collectRefs(*n.rhs, out);
}

} // namespace

Expr Expr::literal(Scalar value) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Literal;
    n->value = value;
    Expr e;
    e.node_ = std::move(n);
    return e;
}

Expr Expr::parse(const std::string& text) {
    Parser p{text};
    NodePtr root = p.parseExpr();
    p.skipWs();
    if (p.pos != text.size()) p.err("trailing characters");
    Expr e;
    e.node_ = std::move(root);
    return e;
}

bool Expr::isLiteral() const { return node_ && node_->kind == Node::Kind::Literal; }

Scalar Expr::literalValue() const { return node_ ? node_->value : 0.0; }

Scalar Expr::eval(const Resolver& resolver) const {
    if (!node_) fail(Errc::SyntaxError, "evaluating empty expression");
    return evalNode(*node_, resolver);
}

std::string Expr::toString() const {
    if (!node_) return "0";
    std::string out;
    printNode(*node_, out, 0);
    return out;
}

std::vector<std::string> Expr::references() const {
    std::vector<std::string> out;
    if (node_) collectRefs(*node_, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string formatScalar(Scalar value) {
    if (value == static_cast<long long>(value) && std::abs(value) < 1e15) {
        // Integral values print without exponent or trailing digits.
        char buf[32];
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(value));
        return buf;
    }
    // Shortest decimal that parses back to the same binary double.
    for (int digits = 1; digits <= 17; ++digits) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", digits, value);
        double parsed = 0.0;
        std::from_chars(buf, buf + std::strlen(buf), parsed);
        if (parsed == value) return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

} // namespace artipg
