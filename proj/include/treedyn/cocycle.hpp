#ifndef TREEDYN_COCYCLE_HPP
#define TREEDYN_COCYCLE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "treedyn/automorphism.hpp"
#include "treedyn/measures.hpp"

namespace treedyn {

inline constexpr std::size_t kDefaultRnHorizon = 64;

struct RadonNikodymValue {
  Rational value;                      // exact ratio of cylinder masses
  std::size_t stabilization_depth = 0;  // least N with all deeper sections measure-preserving
};

// d(mu o g)/d mu at x: the finite product once the sections of g along x
// preserve the corresponding levels.  Stabilization is certified either by an
// exactly-identity section or by a phase cycle (section node, point phase,
// measure phase); throws NotStabilized when neither occurs within the horizon.
RadonNikodymValue rn_derivative(const Automorphism& g, const ProductMeasure& mu,
                                const BoundaryPoint& x,
                                std::size_t horizon = kDefaultRnHorizon);

// Same, but along the image stream w(x): d(mu o g)/d mu evaluated at w(x),
// with w(x) produced lazily.  rn_derivative(g, mu, x) == rn_along(g, mu, id, x).
RadonNikodymValue rn_along(const Automorphism& g, const ProductMeasure& mu,
                           const Automorphism& w, const BoundaryPoint& x,
                           std::size_t horizon = kDefaultRnHorizon);

enum class FVariant { plain, plus, bullet };

struct FinitarySets {
  std::size_t level = 0;
  FVariant variant = FVariant::plain;
  std::vector<Prefix> members;
  Int cardinality = 0;
  Rational measure = 0;
  bool exact = true;  // false when bullet needed bounded lookahead
};

// F_n(g), F_n^+(g), F_n^bullet(g) by exact enumeration.  plus needs mu;
// bullet uses exact activity bounds when possible, else `lookahead` levels
// (members then form a certified lower bound, exact=false).
FinitarySets f_sets(const Automorphism& g, std::size_t n, FVariant variant,
                    const ProductMeasure* mu = nullptr, std::size_t lookahead = 0,
                    std::uint64_t cap = kDefaultEnumerationCap);

struct FStats {
  Int count = 0;
  Rational mass = 0;
  bool exact = true;
};

// Count and mass of an F-set without materializing members: linear recursion
// over the section closure when available, else enumeration.
FStats f_stats(const Automorphism& g, std::size_t n, FVariant variant,
               const ProductMeasure& mu, std::uint64_t cap = kDefaultEnumerationCap);

struct Verdict {
  enum class State { holds, fails, unknown };
  State state = State::unknown;
  Evidence evidence = Evidence::inconclusive;
  std::string detail;
};

std::string to_string(Verdict::State s);

// Closed-form convergence claims a corpus construction carries about its own
// F-set schedule; the report verifies computed rows against the bound before
// citing it.
struct FinitaritySchedule {
  std::string name;
  // F_n is empty unless active(n)
  std::function<bool(std::size_t)> active;
  // mass bound for the k-th active level (1-based k), exact
  std::function<Rational(std::size_t)> mass_bound;
  bool bound_summable = false;
  std::string bound_description;
  // declared behavior of mu(F_n^bullet): e.g. constant one
  std::optional<bool> purely_finitary;
  std::optional<bool> w_subexponentially_bounded;
  std::string note;
};

struct FinitarityRow {
  std::size_t level = 0;
  bool computed = true;          // false when the level exceeded the cap
  Int f_count = 0;
  Rational f_mass = 0;
  Int fplus_count = 0;
  Rational fplus_mass = 0;
  Rational fbullet_mass = 0;     // -1 when not computable at this level
};

struct FinitarityReport {
  std::vector<FinitarityRow> rows;
  Rational sum_f_mass = 0;
  Rational sum_fplus_mass = 0;
  std::vector<double> delta_grid;
  std::vector<std::vector<double>> delta_terms;  // per delta, |F_n| delta^n over rows
  Verdict mu_finitary;
  Verdict eventually_preserving;
  Verdict purely_finitary;
  Verdict w_subexp;
};

std::vector<double> default_delta_grid(std::uint32_t arity);

FinitarityReport finitarity_report(const Automorphism& g, const ProductMeasure& mu,
                                   std::size_t horizon,
                                   const std::vector<double>& delta_grid = {},
                                   const FinitaritySchedule* schedule = nullptr,
                                   std::uint64_t cap = kDefaultEnumerationCap);

struct ChainCheckResult {
  bool ok = true;
  Rational worst_defect = 0;
  std::string witness;  // first failing sample, if any
};

// Verifies rn(gh, x) = rn(g, hx) rn(h, x) and rn(g, x) rn(g^{-1}, gx) = 1
// exactly on sampled points.
ChainCheckResult cocycle_chain_check(const Automorphism& g, const Automorphism& h,
                                     const ProductMeasure& mu, std::size_t samples,
                                     std::uint64_t seed,
                                     std::size_t horizon = kDefaultRnHorizon);

}  // namespace treedyn

#endif
