#include "treedyn/rational.hpp"

#include <algorithm>
#include <cctype>

namespace treedyn {

Rational parse_rational(const std::string& s) {
  std::string t;
  t.reserve(s.size());
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
  if (t.empty()) throw ConfigError("empty rational literal");

  auto dot = t.find('.');
  if (dot != std::string::npos) {
    // decimal literal: digits.digits
    std::string digits = t.substr(0, dot) + t.substr(dot + 1);
    std::size_t frac_len = t.size() - dot - 1;
    bool neg = false;
    if (!digits.empty() && (digits[0] == '-' || digits[0] == '+')) {
      neg = digits[0] == '-';
      digits = digits.substr(1);
    }
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) {
          return std::isdigit(static_cast<unsigned char>(c));
        }))
      throw ConfigError("bad rational literal: " + s);
    Int num(digits, 10);
    Int den = 1;
    for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
    Rational r(num, den);
    r.canonicalize();
    return neg ? Rational(-r) : r;
  }

  auto slash = t.find('/');
  Int num, den = 1;
  try {
    if (slash == std::string::npos) {
      num = Int(t, 10);
    } else {
      num = Int(t.substr(0, slash), 10);
      den = Int(t.substr(slash + 1), 10);
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad rational literal: " + s);
  }
  if (den == 0) throw ConfigError("zero denominator in rational literal: " + s);
  Rational r(num, den);
  r.canonicalize();
  return r;
}

std::string to_string(const Rational& r) {
  if (r.get_den() == 1) return r.get_num().get_str();
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

std::string to_string(const Int& n) { return n.get_str(); }

Rational rational_pow(const Rational& base, unsigned long e) {
  Rational acc = 1;
  Rational b = base;
  while (e) {
    if (e & 1) acc *= b;
    b *= b;
    e >>= 1;
  }
  return acc;
}

Int binomial(unsigned long n, unsigned long k) {
  if (k > n) return 0;
  Int out;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

Rational binomial_range_mass(unsigned long n, long lo, long hi, const Rational& p) {
  Rational q = Rational(1) - p;
  Rational sum = 0;
  long a = std::max<long>(lo, 0);
  long b = std::min<long>(hi, static_cast<long>(n));
  for (long j = a; j <= b; ++j) {
    sum += Rational(binomial(n, static_cast<unsigned long>(j))) *
           rational_pow(p, static_cast<unsigned long>(j)) *
           rational_pow(q, static_cast<unsigned long>(n - j));
  }
  return sum;
}

}  // namespace treedyn
