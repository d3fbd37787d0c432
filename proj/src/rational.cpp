#include "modal/rational.hpp"

#include "modal/error.hpp"

namespace modal {

Rat parse_rational(std::string_view text) {
  auto is_int = [](std::string_view s) {
    if (!s.empty() && s.front() == '-') s.remove_prefix(1);
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
    return true;
  };
  size_t slash = text.find('/');
  std::string_view num = text.substr(0, slash);
  if (!is_int(num)) throw ParseError("bad rational: '" + std::string(text) + "'");
  if (slash == std::string_view::npos) return Rat(BigInt(std::string(num)));
  std::string_view den = text.substr(slash + 1);
  if (!is_int(den) || den.front() == '-')
    throw ParseError("bad rational: '" + std::string(text) + "'");
  BigInt d{std::string(den)};
  if (d == 0) throw ParseError("zero denominator: '" + std::string(text) + "'");
  return Rat(BigInt(std::string(num)), d);
}

std::string to_string(const Rat& r) { return r.str(); }
std::string to_string(const BigInt& n) { return n.str(); }

BigInt pow2(unsigned long exp) { return BigInt(1) << exp; }

}  // namespace modal
