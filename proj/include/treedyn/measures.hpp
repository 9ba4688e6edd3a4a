#ifndef TREEDYN_MEASURES_HPP
#define TREEDYN_MEASURES_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "treedyn/perm.hpp"
#include "treedyn/rational.hpp"
#include "treedyn/rng.hpp"
#include "treedyn/tree.hpp"

namespace treedyn {

// Nondegenerate probability vector on one level: entries > 0, exact sum 1.
struct LevelDistribution {
  std::size_t level = 0;  // 1-based
  std::vector<Rational> p;

  LevelDistribution() = default;
  LevelDistribution(std::size_t lvl, std::vector<Rational> probs);

  Rational max_mass() const;
  bool preserved_by(const Perm& g) const;

  friend bool operator==(const LevelDistribution& a, const LevelDistribution& b) {
    return a.p == b.p;
  }
};

double entropy(const LevelDistribution& d);

struct HellingerValue {
  double distance;  // H
  double affinity;  // 1 - H^2
};
HellingerValue hellinger(const LevelDistribution& a, const LevelDistribution& b);

// Overrides applied along an arithmetic progression of levels, all carrying
// the same distribution; makes the override set infinite with a decidable
// eventually periodic normal form.
struct OverrideTail {
  std::size_t start = 0;
  std::size_t stride = 1;
  std::vector<Rational> dist;
};

// Infinite product measure with exact rational per-level distributions.
class ProductMeasure {
 public:
  enum class Kind { uniform, bernoulli, explicit_tail, overrides };

  static ProductMeasure uniform(ShapePtr shape);  // Haar
  static ProductMeasure bernoulli(ShapePtr shape, std::vector<Rational> p);
  static ProductMeasure explicit_with_tail(ShapePtr shape,
                                           std::vector<std::vector<Rational>> head,
                                           std::vector<std::vector<Rational>> cycle);
  static ProductMeasure with_overrides(const ProductMeasure& base,
                                       std::map<std::size_t, std::vector<Rational>> at,
                                       std::optional<OverrideTail> tail = std::nullopt);

  Kind kind() const { return kind_; }
  const ShapePtr& shape() const { return shape_; }

  const std::vector<Rational>& level_probs(std::size_t level) const;  // cached
  LevelDistribution level_distribution(std::size_t level) const;

  Rational cylinder_measure(const Prefix& y) const;
  // Mass of the cylinder given by letters at levels from+1..from+|letters|,
  // conditioned on nothing (plain product of those levels' factors).
  Rational letters_mass(std::size_t from, const std::vector<std::uint32_t>& letters) const;

  // Eventually periodic normal form: levels 1..head are explicit, beyond that
  // the cycle repeats. Decidable representation for classification.
  struct NormalForm {
    std::size_t head_len = 0;
    std::vector<std::vector<Rational>> head;
    std::vector<std::vector<Rational>> cycle;
  };
  const NormalForm& normal_form() const;

  // The set of levels where this measure's factor differs from `other`'s,
  // decided from normal forms: either a finite explicit set or "infinite".
  struct FactorDiff {
    bool infinite = false;
    std::size_t witness_class_level = 0;  // one differing level beyond heads
    std::vector<std::size_t> finite_levels;
  };
  FactorDiff factor_diff(const ProductMeasure& other) const;

  bool coincides_with(const ProductMeasure& other) const;

 private:
  ProductMeasure() = default;

  Kind kind_ = Kind::uniform;
  ShapePtr shape_;
  // bernoulli / uniform need no payload beyond shape
  std::vector<Rational> bern_;
  std::vector<std::vector<Rational>> head_, cycle_;          // explicit_tail
  std::shared_ptr<const ProductMeasure> base_;               // overrides
  std::map<std::size_t, std::vector<Rational>> override_at_;  // overrides
  std::optional<OverrideTail> override_tail_;

  struct Cache;
  std::shared_ptr<Cache> cache_;
};

// ---------------------------------------------------------------------------

enum class KakutaniVerdict { equivalent, orthogonal, undecided };
enum class Evidence { closed_form, partial_sums, threshold, inconclusive };

std::string to_string(KakutaniVerdict v);
std::string to_string(Evidence e);

struct KakutaniRow {
  std::size_t level;
  double affinity;
  double cumulative_log;
};

struct KakutaniReport {
  KakutaniVerdict verdict = KakutaniVerdict::undecided;
  Evidence evidence = Evidence::inconclusive;
  std::string detail;
  std::vector<KakutaniRow> trace;
};

KakutaniReport kakutani_classify(const ProductMeasure& mu, const ProductMeasure& nu,
                                 std::size_t horizon = 64, double log_threshold = -60.0);

struct NonatomicityCertificate {
  bool certified = false;
  Evidence evidence = Evidence::inconclusive;
  std::optional<std::size_t> witness_depth;  // partial max-product < threshold here
  std::string detail;
};

NonatomicityCertificate nonatomicity_certificate(const ProductMeasure& mu,
                                                 std::size_t horizon,
                                                 const Rational& threshold);

// Deterministic sampling with the pinned counter generator (see README):
// level i consumes counter i-1 of CounterRng(seed); letters are chosen by
// exact rational inversion of the level's CDF.
Prefix sample(const ProductMeasure& mu, std::size_t depth, std::uint64_t seed);

// Shannon-McMillan typical set by exact enumeration (Bernoulli measures).
std::vector<Prefix> sm_typical_set(const ProductMeasure& mu, std::size_t n, double delta,
                                   std::uint64_t cap = kDefaultEnumerationCap);

// Empirical-mean window set B_{lambda,n,eps} on a binary tree, exact.
std::vector<Prefix> wlln_set(ShapePtr shape, const Rational& lambda, std::size_t n,
                             const Rational& eps, std::uint64_t cap = kDefaultEnumerationCap);
// Integer count window [lo,hi] of coordinate sums realizing the same set.
std::pair<long, long> wlln_count_window(const Rational& lambda, std::size_t n,
                                        const Rational& eps);

// Finitely represented element of {0,1}^N: explicit bits then a constant tail.
struct OmegaWord {
  std::vector<int> bits;
  int tail = 0;

  int at(std::size_t i) const {  // 1-based
    return i <= bits.size() ? bits[i - 1] : tail;
  }
};

bool tail_equivalent(const OmegaWord& a, const OmegaWord& b);

}  // namespace treedyn

#endif
