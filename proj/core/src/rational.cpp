#include "mprl/rational.hpp"

#include <numeric>

#include "mprl/error.hpp"

namespace mprl {

Rational::Rational(int64_t n, int64_t d) {
  require(d != 0, ErrorKind::Contract, "Rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  int64_t g = std::gcd(n < 0 ? -n : n, d);
  if (g == 0) g = 1;
  num = n / g;
  den = d / g;
}

std::optional<Rational> Rational::parse_decimal(std::string_view text) {
  size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  size_t digits_start = i;
  while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
  if (i == digits_start) return std::nullopt;
  int64_t whole = 0;
  for (size_t k = digits_start; k < i; ++k) whole = whole * 10 + (text[k] - '0');
  int64_t frac = 0, scale = 1;
  if (i < text.size() && text[i] == '.') {
    size_t frac_start = i + 1;
    size_t j = frac_start;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
    if (j > frac_start) {
      for (size_t k = frac_start; k < j; ++k) {
        frac = frac * 10 + (text[k] - '0');
        scale *= 10;
      }
      i = j;
    }
  }
  if (i != text.size()) return std::nullopt;
  int64_t n = whole * scale + frac;
  return Rational(negative ? -n : n, scale);
}

std::string Rational::to_string() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

}  // namespace mprl
