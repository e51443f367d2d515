#include "artipg/json_io.hpp"

#include "artipg/expr.hpp"

#include <cmath>
#include <cstdio>

namespace artipg {
namespace {

using nlohmann::json;

[[noreturn]] void syntax(const std::string& msg) { fail(Errc::SyntaxError, msg); }

void writeEscaped(const std::string& s, std::string& out) {
    out += '"';
    for (const char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    out += '"';
}

void writeCanonical(const json& j, std::string& out, int depth) {
    const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(depth + 1) * 2, ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first) out += ",\n";
            first = false;
            out += inner;
            writeEscaped(key, out);
            out += ": ";
            writeCanonical(value, out, depth + 1);
        }
        out += "\n" + pad + "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += inner;
            writeCanonical(j[i], out, depth + 1);
        }
        out += "\n" + pad + "]";
        return;
    }
    case json::value_t::string: writeEscaped(j.get<std::string>(), out); return;
    case json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; return;
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: out += formatScalar(j.get<Scalar>()); return;
    default: out += "null"; return;
    }
}

const json& member(const json& obj, const char* key, const std::string& ctx) {
    const auto it = obj.find(key);
    if (it == obj.end()) syntax(ctx + ": missing field '" + key + "'");
    return *it;
}

std::string asString(const json& j, const std::string& ctx) {
    if (!j.is_string()) syntax(ctx + ": expected a string");
    return j.get<std::string>();
}

Scalar asNumber(const json& j, const std::string& ctx) {
    if (!j.is_number()) syntax(ctx + ": expected a number");
    const Scalar v = j.get<Scalar>();
    if (!std::isfinite(v)) syntax(ctx + ": non-finite number");
    return v;
}

bool asBool(const json& j, const std::string& ctx) {
    if (!j.is_boolean()) syntax(ctx + ": expected a boolean");
    return j.get<bool>();
}

void requireIntegral(Scalar v, const std::string& ctx) {
    if (std::abs(v - std::round(v)) > 1e-9)
        fail(Errc::OutOfRange, ctx + ": expected an integer value");
}

} // namespace

std::string canonicalDump(const json& j) {
    std::string out;
    writeCanonical(j, out, 0);
    return out;
}

json paramEntryToJson(const ParamEntry& e) {
    json j = json::object();
    if (e.derived()) {
        j["expr"] = e.expr.toString();
        return j;
    }
    j["value"] = e.value;
    if (e.has_bounds) {
        j["min"] = e.lo;
        j["max"] = e.hi;
    }
    if (e.integer) j["integer"] = true;
    return j;
}

ParamEntry paramEntryFromJson(const json& j, const std::string& ctx) {
    if (!j.is_object()) syntax(ctx + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "value" && key != "min" && key != "max" && key != "integer" && key != "expr")
            syntax(ctx + ": unexpected field '" + key + "'");
    }
    ParamEntry e;
    if (j.contains("expr")) {
        if (j.size() != 1) syntax(ctx + ": 'expr' excludes other fields");
        const std::string text = asString(j["expr"], ctx + ".expr");
        try {
            e.expr = Expr::parse(text);
        } catch (const Error& err) {
            syntax(ctx + ": " + err.what());
        }
        if (e.expr.empty()) syntax(ctx + ": empty expression");
        return e;
    }
    e.value = asNumber(member(j, "value", ctx), ctx + ".value");
    if (j.contains("min") != j.contains("max"))
        syntax(ctx + ": 'min' and 'max' must be given together");
    if (j.contains("min")) {
        e.has_bounds = true;
        e.lo = asNumber(j["min"], ctx + ".min");
        e.hi = asNumber(j["max"], ctx + ".max");
        if (!(e.lo <= e.hi)) fail(Errc::OutOfRange, ctx + ": min exceeds max");
        if (e.value < e.lo || e.value > e.hi)
            fail(Errc::OutOfRange, ctx + ": value outside [min, max]");
    }
    if (j.contains("integer")) e.integer = asBool(j["integer"], ctx + ".integer");
    if (e.integer && !j.contains("min")) syntax(ctx + ": integer parameters need bounds");
    if (e.integer) {
        requireIntegral(e.value, ctx);
        requireIntegral(e.lo, ctx);
        requireIntegral(e.hi, ctx);
    }
    return e;
}

} // namespace artipg
