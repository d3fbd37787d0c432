#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace modal {

// All metric arithmetic is exact; doubles appear only in display helpers.
using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

// Accepts "7", "-7", "3/4". Throws ParseError on anything else.
Rat parse_rational(std::string_view text);

std::string to_string(const Rat& r);
std::string to_string(const BigInt& n);

// 2^exp. exp is bounded by callers (budget checks) before it gets here.
BigInt pow2(unsigned long exp);

}  // namespace modal
