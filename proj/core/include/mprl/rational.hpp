#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mprl {

/// Exact rational with normalized sign and reduced terms, so equality is
/// plain member comparison. Answers in this project are small, parsed
/// from decimal strings like "7" or "-2.5".
struct Rational {
  int64_t num = 0;
  int64_t den = 1;

  Rational() = default;
  Rational(int64_t n, int64_t d);
  static Rational from_int(int64_t n) { return Rational(n, 1); }

  /// Parse a plain decimal: optional sign, digits, optional '.' followed
  /// by more digits. Anything else yields nullopt.
  static std::optional<Rational> parse_decimal(std::string_view text);

  bool operator==(const Rational&) const = default;

  std::string to_string() const;
  bool is_integer() const { return den == 1; }
};

}  // namespace mprl
