#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "artipg/expr.hpp"
#include "artipg/rng.hpp"

#include <cmath>
#include <map>

using namespace artipg;

namespace {

Expr::Resolver mapResolver(const std::map<std::string, Scalar>& vars) {
    return [&vars](const std::string& name) -> Scalar {
        auto it = vars.find(name);
        if (it == vars.end()) fail(Errc::UnboundReference, name);
        return it->second;
    };
}

const Expr::Resolver kNoVars = [](const std::string& name) -> Scalar {
    fail(Errc::UnboundReference, name);
};

} // namespace

TEST_CASE("literal expressions") {
    const Expr e = Expr::literal(0.25);
    CHECK(e.isLiteral());
    CHECK(e.literalValue() == 0.25);
    CHECK(e.eval(kNoVars) == 0.25);
    CHECK(e.references().empty());
}

TEST_CASE("parsing and evaluation with precedence") {
    // Oracle: hand-computed values.
    CHECK(Expr::parse("1 + 2 * 3").eval(kNoVars) == 7.0);
    CHECK(Expr::parse("(1 + 2) * 3").eval(kNoVars) == 9.0);
    CHECK(Expr::parse("2 - 3 - 4").eval(kNoVars) == -5.0); // left associative
    CHECK(Expr::parse("16 / 4 / 2").eval(kNoVars) == 2.0);
    CHECK(Expr::parse("-3 + 5").eval(kNoVars) == 2.0);
    CHECK(Expr::parse("- (2 * 4)").eval(kNoVars) == -8.0);
    CHECK(Expr::parse("0.5e1").eval(kNoVars) == 5.0);
}

TEST_CASE("identifier resolution") {
    const std::map<std::string, Scalar> vars{{"body.depth", 0.05}, {"size_x", 0.2}};
    CHECK(Expr::parse("0.68 * body.depth").eval(mapResolver(vars)) == doctest::Approx(0.034));
    CHECK(Expr::parse("1 - 0.002 / size_x").eval(mapResolver(vars)) == doctest::Approx(0.99));

    const auto refs = Expr::parse("body.depth + size_x * body.depth").references();
    REQUIRE(refs.size() == 2);
    CHECK(refs[0] == "body.depth");
    CHECK(refs[1] == "size_x");

    CHECK_THROWS_WITH_AS(Expr::parse("missing + 1").eval(kNoVars), doctest::Contains("missing"),
                         Error);
}

TEST_CASE("syntax errors") {
    for (const char* bad : {"", "1 +", "(1", "1)", "2 ** 3", "4 $ 5", "1 2"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(Expr::parse(bad), Error);
        try {
            Expr::parse(bad);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SyntaxError);
        }
    }
}

TEST_CASE("canonical text round-trips") {
    const std::map<std::string, Scalar> vars{{"a", 1.75}, {"b", -0.3}, {"c.d", 12.0}};
    for (const char* text : {"1 + 2 * 3", "(1 + 2) * 3", "a - b - c.d", "a / (b + c.d)",
                             "-a * (b - 2)", "0.1 + 0.2"}) {
        CAPTURE(text);
        const Expr e = Expr::parse(text);
        const Expr re = Expr::parse(e.toString());
        CHECK(re.eval(mapResolver(vars)) == e.eval(mapResolver(vars)));
        // Canonical form is a fixed point.
        CHECK(re.toString() == e.toString());
    }
}

TEST_CASE("formatScalar round-trips exactly") {
    Rng rng(0xF0F0F0F0ull);
    for (int i = 0; i < 2000; ++i) {
        double value;
        switch (i % 4) {
        case 0: value = rng.uniform(-1e6, 1e6); break;
        case 1: value = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniformInt(-300, 300)); break;
        case 2: value = static_cast<double>(rng.uniformInt(-1000000, 1000000)); break;
        default: value = rng.uniform(); break;
        }
        const std::string text = formatScalar(value);
        CHECK(std::stod(text) == value);
    }
    CHECK(formatScalar(0.0) == "0");
    CHECK(formatScalar(1.0) == "1");
    CHECK(formatScalar(-42.0) == "-42");
    CHECK(formatScalar(0.5) == "0.5");
}

TEST_CASE("evaluation is exact over random trees") {
    // Oracle: build random expression text and an equivalent closure, compare.
    Rng rng(0xBEEF1234ull);
    const std::map<std::string, Scalar> vars{{"x", 2.5}, {"y", 0.125}};
    for (int trial = 0; trial < 200; ++trial) {
        const double a = rng.uniform(-10, 10), b = rng.uniform(1, 5), c = rng.uniform(-3, 3);
        const std::string text = formatScalar(a) + " + " + formatScalar(b) + " * (x - " +
                                 formatScalar(c) + ") / y";
        const double expect = a + b * (2.5 - c) / 0.125;
        CHECK(Expr::parse(text).eval(mapResolver(vars)) == expect);
    }
}
