#pragma once

#include "artipg/types.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace artipg {

// Arithmetic expression over named scalar parameters. Used for derived
// intrinsic values ("0.68 * body.depth") and for region bounds that depend on
// a primitive's own intrinsics ("1 - 0.002 / size_x").
//
// Grammar:  expr := term (('+'|'-') term)*
//           term := factor (('*'|'/') factor)*
//           factor := number | ident | '-' factor | '(' expr ')'
//           ident := [A-Za-z_][A-Za-z0-9_.]*
class Expr {
public:
    Expr() = default;
    static Expr literal(Scalar value);
    static Expr parse(const std::string& text); // throws Error(SyntaxError)

    bool isLiteral() const;
    Scalar literalValue() const; // valid only when isLiteral()

    // Resolver maps an identifier to its value; throws for unknown names.
    using Resolver = std::function<Scalar(const std::string&)>;
    Scalar eval(const Resolver& resolver) const;

    // Canonical text form; parse(toString()) evaluates identically.
    std::string toString() const;

    // All identifiers referenced by the expression.
    std::vector<std::string> references() const;

    bool empty() const { return node_ == nullptr; }

    struct Node; // opaque implementation node

private:
    std::shared_ptr<const Node> node_;
};

// Fixed-format decimal for canonical float output: shortest form that
// round-trips the exact binary value, capped at 17 significant digits.
std::string formatScalar(Scalar value);

} // namespace artipg
