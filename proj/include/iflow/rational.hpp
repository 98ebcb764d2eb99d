#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

#include "iflow/errors.hpp"

namespace iflow {

// Exact arithmetic is the default for all model-checking paths; doubles only
// appear at the statistics/reporting boundary.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Parses "a/b" or "a" with optional sign. Throws ParseError on anything else.
Rational parse_fraction(const std::string& text);

// Renders "a/b", or just "a" when the denominator is 1.
std::string format_fraction(const Rational& r);

}  // namespace iflow
