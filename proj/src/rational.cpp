#include "iflow/rational.hpp"

namespace iflow {

Rational parse_fraction(const std::string& text) {
    auto parse_int = [&](const std::string& part) -> BigInt {
        if (part.empty()) throw ParseError("empty number in fraction: '" + text + "'");
        std::size_t start = (part[0] == '+' || part[0] == '-') ? 1 : 0;
        if (start == part.size()) throw ParseError("bad fraction: '" + text + "'");
        for (std::size_t i = start; i < part.size(); ++i) {
            if (part[i] < '0' || part[i] > '9') throw ParseError("bad fraction: '" + text + "'");
        }
        return BigInt(part);
    };

    auto slash = text.find('/');
    if (slash == std::string::npos) return Rational(parse_int(text));
    BigInt num = parse_int(text.substr(0, slash));
    BigInt den = parse_int(text.substr(slash + 1));
    if (den == 0) throw ParseError("zero denominator: '" + text + "'");
    return Rational(num, den);
}

std::string format_fraction(const Rational& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

}  // namespace iflow
