#ifndef TREEDYN_RATIONAL_HPP
#define TREEDYN_RATIONAL_HPP

#include <gmpxx.h>

#include <string>
#include <vector>

#include "treedyn/common.hpp"

namespace treedyn {

using Int = mpz_class;
using Rational = mpq_class;

// Parses "p", "p/q" or a plain decimal like "0.25". Rejects zero denominators.
Rational parse_rational(const std::string& s);

std::string to_string(const Rational& r);
std::string to_string(const Int& n);

inline double to_double(const Rational& r) { return r.get_d(); }

Rational rational_pow(const Rational& base, unsigned long e);

Int binomial(unsigned long n, unsigned long k);

// Sum_{j in [lo, hi]} C(n, j) p^j (1-p)^(n-j), exact.
Rational binomial_range_mass(unsigned long n, long lo, long hi, const Rational& p);

}  // namespace treedyn

#endif
