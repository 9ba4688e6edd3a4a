#include "treedyn/measures.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

namespace treedyn {

LevelDistribution::LevelDistribution(std::size_t lvl, std::vector<Rational> probs)
    : level(lvl), p(std::move(probs)) {
  if (p.size() < 2) throw ConfigError("level distribution needs >= 2 letters");
  for (auto& x : p) x.canonicalize();
  Rational sum = 0;
  for (const auto& x : p) {
    if (x <= 0) throw ConfigError("level distribution must be nondegenerate (entries > 0)");
    sum += x;
  }
  if (sum != 1) throw ConfigError("level distribution entries must sum to 1");
}

Rational LevelDistribution::max_mass() const {
  return *std::max_element(p.begin(), p.end());
}

bool LevelDistribution::preserved_by(const Perm& g) const {
  if (g.degree() != p.size()) throw ConfigError("permutation degree vs distribution size");
  for (std::uint32_t i = 0; i < g.degree(); ++i)
    if (p[g(i)] != p[i]) return false;
  return true;
}

double entropy(const LevelDistribution& d) {
  double h = 0;
  for (const auto& x : d.p) {
    double v = to_double(x);
    h -= v * std::log(v);
  }
  return h;
}

HellingerValue hellinger(const LevelDistribution& a, const LevelDistribution& b) {
  if (a.p.size() != b.p.size()) throw ShapeMismatch("hellinger: support sizes differ");
  double aff = 0;
  for (std::size_t i = 0; i < a.p.size(); ++i)
    aff += std::sqrt(to_double(a.p[i]) * to_double(b.p[i]));
  double h2 = 1.0 - aff;
  return HellingerValue{std::sqrt(std::max(0.0, h2)), aff};
}

// ---------------------------------------------------------------------------

struct ProductMeasure::Cache {
  std::mutex mu;
  std::map<std::size_t, std::vector<Rational>> levels;
  std::optional<NormalForm> nf;
};

static void canonicalize_dist(std::vector<Rational>& p) {
  for (auto& x : p) x.canonicalize();
}

static void validate_dist(const ShapePtr& shape, std::size_t level,
                          const std::vector<Rational>& p) {
  if (p.size() != shape->arity(level))
    throw ConfigError("distribution size mismatch at level " + std::to_string(level));
  Rational sum = 0;
  for (const auto& x : p) {
    if (x <= 0) throw ConfigError("degenerate distribution at level " + std::to_string(level));
    sum += x;
  }
  if (sum != 1) throw ConfigError("distribution does not sum to 1 at level " +
                                  std::to_string(level));
}

ProductMeasure ProductMeasure::uniform(ShapePtr shape) {
  ProductMeasure m;
  m.kind_ = Kind::uniform;
  m.shape_ = std::move(shape);
  m.cache_ = std::make_shared<Cache>();
  return m;
}

ProductMeasure ProductMeasure::bernoulli(ShapePtr shape, std::vector<Rational> p) {
  if (!shape->constant_arity())
    throw ConfigError("bernoulli measures need a constant-arity shape");
  canonicalize_dist(p);
  validate_dist(shape, 1, p);
  ProductMeasure m;
  m.kind_ = Kind::bernoulli;
  m.shape_ = std::move(shape);
  m.bern_ = std::move(p);
  m.cache_ = std::make_shared<Cache>();
  return m;
}

ProductMeasure ProductMeasure::explicit_with_tail(ShapePtr shape,
                                                  std::vector<std::vector<Rational>> head,
                                                  std::vector<std::vector<Rational>> cycle) {
  if (cycle.empty()) throw ConfigError("explicit measure needs a periodic tail");
  for (auto& d : head) canonicalize_dist(d);
  for (auto& d : cycle) canonicalize_dist(d);
  for (std::size_t i = 0; i < head.size(); ++i) validate_dist(shape, i + 1, head[i]);
  // every level the cycle will serve must match arities; one lcm window suffices
  std::size_t window = head.size() + cycle.size() * shape->tail().size() +
                       shape->head().size();
  for (std::size_t lvl = head.size() + 1; lvl <= window; ++lvl)
    validate_dist(shape, lvl, cycle[(lvl - head.size() - 1) % cycle.size()]);
  ProductMeasure m;
  m.kind_ = Kind::explicit_tail;
  m.shape_ = std::move(shape);
  m.head_ = std::move(head);
  m.cycle_ = std::move(cycle);
  m.cache_ = std::make_shared<Cache>();
  return m;
}

ProductMeasure ProductMeasure::with_overrides(const ProductMeasure& base,
                                              std::map<std::size_t, std::vector<Rational>> at,
                                              std::optional<OverrideTail> tail) {
  for (auto& [lvl, p] : at) {
    if (lvl == 0) throw ConfigError("override levels are 1-based");
    canonicalize_dist(p);
    validate_dist(base.shape(), lvl, p);
  }
  if (tail) {
    canonicalize_dist(tail->dist);
    if (tail->stride == 0) throw ConfigError("override tail stride must be positive");
    if (!at.empty() && tail->start <= at.rbegin()->first)
      throw ConfigError("override tail must start beyond explicit overrides");
    std::size_t window = tail->start +
                         tail->stride * (base.shape()->tail().size() + 2) +
                         base.shape()->head().size();
    for (std::size_t lvl = tail->start; lvl <= window; lvl += tail->stride)
      validate_dist(base.shape(), lvl, tail->dist);
  }
  ProductMeasure m;
  m.kind_ = Kind::overrides;
  m.shape_ = base.shape();
  m.base_ = std::make_shared<ProductMeasure>(base);
  m.override_at_ = std::move(at);
  m.override_tail_ = std::move(tail);
  m.cache_ = std::make_shared<Cache>();
  return m;
}

const std::vector<Rational>& ProductMeasure::level_probs(std::size_t level) const {
  if (level == 0) throw ConfigError("levels are 1-based");
  std::lock_guard<std::mutex> lock(cache_->mu);
  auto it = cache_->levels.find(level);
  if (it != cache_->levels.end()) return it->second;
  std::vector<Rational> p;
  switch (kind_) {
    case Kind::uniform: {
      std::uint32_t q = shape_->arity(level);
      p.assign(q, Rational(1, q));
      break;
    }
    case Kind::bernoulli:
      p = bern_;
      break;
    case Kind::explicit_tail:
      p = level <= head_.size() ? head_[level - 1]
                                : cycle_[(level - head_.size() - 1) % cycle_.size()];
      break;
    case Kind::overrides: {
      auto o = override_at_.find(level);
      if (o != override_at_.end()) {
        p = o->second;
      } else if (override_tail_ && level >= override_tail_->start &&
                 (level - override_tail_->start) % override_tail_->stride == 0) {
        p = override_tail_->dist;
      } else {
        p = base_->level_probs(level);
      }
      break;
    }
  }
  return cache_->levels.emplace(level, std::move(p)).first->second;
}

LevelDistribution ProductMeasure::level_distribution(std::size_t level) const {
  return LevelDistribution(level, level_probs(level));
}

Rational ProductMeasure::cylinder_measure(const Prefix& y) const {
  require_same_shape(shape_, y.shape());
  Rational out = 1;
  for (std::size_t i = 0; i < y.size(); ++i) out *= level_probs(i + 1)[y.at(i)];
  return out;
}

Rational ProductMeasure::letters_mass(std::size_t from,
                                      const std::vector<std::uint32_t>& letters) const {
  Rational out = 1;
  for (std::size_t i = 0; i < letters.size(); ++i)
    out *= level_probs(from + i + 1)[letters[i]];
  return out;
}

const ProductMeasure::NormalForm& ProductMeasure::normal_form() const {
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    if (cache_->nf) return *cache_->nf;
  }
  NormalForm nf;
  std::size_t shape_head = shape_->head().size();
  std::size_t shape_period = shape_->tail().size();
  switch (kind_) {
    case Kind::uniform:
    case Kind::bernoulli: {
      nf.head_len = shape_head;
      for (std::size_t l = 1; l <= shape_head; ++l) nf.head.push_back(level_probs(l));
      for (std::size_t k = 0; k < shape_period; ++k)
        nf.cycle.push_back(level_probs(shape_head + k + 1));
      break;
    }
    case Kind::explicit_tail: {
      nf.head_len = std::max(head_.size(), shape_head);
      std::size_t period = std::lcm(cycle_.size(), shape_period);
      for (std::size_t l = 1; l <= nf.head_len; ++l) nf.head.push_back(level_probs(l));
      for (std::size_t k = 0; k < period; ++k)
        nf.cycle.push_back(level_probs(nf.head_len + k + 1));
      break;
    }
    case Kind::overrides: {
      const NormalForm& b = base_->normal_form();
      std::size_t h = std::max(b.head_len, shape_head);
      if (!override_at_.empty()) h = std::max(h, override_at_.rbegin()->first);
      std::size_t period = b.cycle.size();
      if (override_tail_) {
        h = std::max(h, override_tail_->start > 0 ? override_tail_->start - 1 : 0);
        period = std::lcm(period, override_tail_->stride);
      }
      nf.head_len = h;
      for (std::size_t l = 1; l <= h; ++l) nf.head.push_back(level_probs(l));
      for (std::size_t k = 0; k < period; ++k) nf.cycle.push_back(level_probs(h + k + 1));
      break;
    }
  }
  std::lock_guard<std::mutex> lock(cache_->mu);
  if (!cache_->nf) cache_->nf = std::move(nf);
  return *cache_->nf;
}

ProductMeasure::FactorDiff ProductMeasure::factor_diff(const ProductMeasure& other) const {
  require_same_shape(shape_, other.shape());
  const NormalForm& a = normal_form();
  const NormalForm& b = other.normal_form();
  std::size_t h = std::max(a.head_len, b.head_len);
  std::size_t period = std::lcm(a.cycle.size(), b.cycle.size());
  FactorDiff d;
  for (std::size_t l = 1; l <= h; ++l)
    if (level_probs(l) != other.level_probs(l)) d.finite_levels.push_back(l);
  for (std::size_t k = 0; k < period; ++k) {
    std::size_t l = h + k + 1;
    if (level_probs(l) != other.level_probs(l)) {
      d.infinite = true;
      d.witness_class_level = l;
      return d;
    }
  }
  return d;
}

bool ProductMeasure::coincides_with(const ProductMeasure& other) const {
  FactorDiff d = factor_diff(other);
  return !d.infinite && d.finite_levels.empty();
}

// ---------------------------------------------------------------------------

std::string to_string(KakutaniVerdict v) {
  switch (v) {
    case KakutaniVerdict::equivalent: return "equivalent";
    case KakutaniVerdict::orthogonal: return "orthogonal";
    case KakutaniVerdict::undecided: return "undecided";
  }
  return "?";
}

std::string to_string(Evidence e) {
  switch (e) {
    case Evidence::closed_form: return "closed-form";
    case Evidence::partial_sums: return "partial-sums";
    case Evidence::threshold: return "threshold";
    case Evidence::inconclusive: return "inconclusive";
  }
  return "?";
}

KakutaniReport kakutani_classify(const ProductMeasure& mu, const ProductMeasure& nu,
                                 std::size_t horizon, double log_threshold) {
  require_same_shape(mu.shape(), nu.shape());
  KakutaniReport rep;
  double cum = 0;
  for (std::size_t l = 1; l <= horizon; ++l) {
    auto hv = hellinger(mu.level_distribution(l), nu.level_distribution(l));
    cum += std::log(std::max(hv.affinity, 1e-300));
    rep.trace.push_back({l, hv.affinity, cum});
  }
  ProductMeasure::FactorDiff d = mu.factor_diff(nu);
  if (d.infinite) {
    auto hv = hellinger(mu.level_distribution(d.witness_class_level),
                        nu.level_distribution(d.witness_class_level));
    rep.verdict = KakutaniVerdict::orthogonal;
    rep.evidence = Evidence::closed_form;
    std::ostringstream os;
    os << "eventually periodic factor differs at level class " << d.witness_class_level
       << " (affinity " << hv.affinity << " < 1 recurs)";
    rep.detail = os.str();
    return rep;
  }
  rep.verdict = KakutaniVerdict::equivalent;
  rep.evidence = Evidence::closed_form;
  std::ostringstream os;
  os << "factors differ at " << d.finite_levels.size()
     << " level(s); finite Hellinger defect";
  rep.detail = os.str();
  if (!rep.trace.empty() && rep.trace.back().cumulative_log < log_threshold) {
    // a finite defect never drives the log-product this low; flag orthogonal by threshold
    rep.verdict = KakutaniVerdict::orthogonal;
    rep.evidence = Evidence::threshold;
    rep.detail = "partial log-product below threshold";
  }
  return rep;
}

NonatomicityCertificate nonatomicity_certificate(const ProductMeasure& mu,
                                                 std::size_t horizon,
                                                 const Rational& threshold) {
  NonatomicityCertificate cert;
  const auto& nf = mu.normal_form();
  Rational cycle_factor = 1;
  for (std::size_t k = 0; k < nf.cycle.size(); ++k)
    cycle_factor *= mu.level_distribution(nf.head_len + k + 1).max_mass();
  if (cycle_factor < 1) {
    cert.certified = true;
    cert.evidence = Evidence::closed_form;
    cert.detail = "per-period max-mass factor " + to_string(cycle_factor) + " < 1";
  }
  Rational partial = 1;
  for (std::size_t l = 1; l <= horizon; ++l) {
    partial *= mu.level_distribution(l).max_mass();
    if (partial < threshold) {
      cert.witness_depth = l;
      if (!cert.certified) {
        cert.certified = true;
        cert.evidence = Evidence::threshold;
        cert.detail = "partial max-product below threshold at depth " + std::to_string(l);
      }
      break;
    }
  }
  return cert;
}

Prefix sample(const ProductMeasure& mu, std::size_t depth, std::uint64_t seed) {
  if (depth == 0) throw ConfigError("sample depth must be >= 1");
  CounterRng rng(seed);
  std::vector<std::uint32_t> letters(depth);
  Int two64 = Int(1) << 64;
  for (std::size_t l = 1; l <= depth; ++l) {
    std::uint64_t r = rng.at(l - 1);
    Int r_int;
    mpz_import(r_int.get_mpz_t(), 1, 1, sizeof(r), 0, 0, &r);
    const auto& p = mu.level_probs(l);
    Rational cum = 0;
    std::uint32_t chosen = static_cast<std::uint32_t>(p.size() - 1);
    for (std::uint32_t a = 0; a < p.size(); ++a) {
      cum += p[a];
      // r/2^64 < cum  <=>  r * den < num * 2^64
      if (r_int * cum.get_den() < cum.get_num() * two64) {
        chosen = a;
        break;
      }
    }
    letters[l - 1] = chosen;
  }
  return Prefix(mu.shape(), std::move(letters));
}

std::vector<Prefix> sm_typical_set(const ProductMeasure& mu, std::size_t n, double delta,
                                   std::uint64_t cap) {
  if (mu.kind() != ProductMeasure::Kind::bernoulli)
    throw ConfigError("sm_typical_set needs a Bernoulli measure");
  level_size_checked(*mu.shape(), n, cap);
  double h = entropy(mu.level_distribution(1));
  const auto& p = mu.level_probs(1);
  std::vector<double> logs(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) logs[i] = std::log(to_double(p[i]));
  std::vector<Prefix> out;
  std::vector<std::uint32_t> cur(n, 0);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < n; ++i) count *= p.size();
  for (std::uint64_t i = 0; i < count; ++i) {
    double lp = 0;
    for (auto a : cur) lp += logs[a];
    if (std::abs(lp / static_cast<double>(n) + h) < delta)
      out.emplace_back(mu.shape(), cur);
    for (std::size_t pos = n; pos > 0; --pos) {
      if (++cur[pos - 1] < p.size()) break;
      cur[pos - 1] = 0;
    }
  }
  return out;
}

std::pair<long, long> wlln_count_window(const Rational& lambda, std::size_t n,
                                        const Rational& eps) {
  // |s/n - lambda| < eps  <=>  n*(lambda-eps) < s < n*(lambda+eps)
  Rational lo = Rational(static_cast<long>(n)) * (lambda - eps);
  Rational hi = Rational(static_cast<long>(n)) * (lambda + eps);
  // strict inequalities: smallest integer > lo is floor(lo)+1, largest
  // integer < hi is ceil(hi)-1 (both also right at integer boundaries)
  Int lo_floor, hi_ceil;
  mpz_fdiv_q(lo_floor.get_mpz_t(), lo.get_num().get_mpz_t(), lo.get_den().get_mpz_t());
  mpz_cdiv_q(hi_ceil.get_mpz_t(), hi.get_num().get_mpz_t(), hi.get_den().get_mpz_t());
  long lo_int = static_cast<long>(lo_floor.get_si()) + 1;
  long hi_int = static_cast<long>(hi_ceil.get_si()) - 1;
  return {lo_int, hi_int};
}

std::vector<Prefix> wlln_set(ShapePtr shape, const Rational& lambda, std::size_t n,
                             const Rational& eps, std::uint64_t cap) {
  for (std::size_t l = 1; l <= n; ++l)
    if (shape->arity(l) != 2) throw ConfigError("wlln_set needs binary letters");
  std::uint64_t count = level_size_checked(*shape, n, cap);
  auto [lo, hi] = wlln_count_window(lambda, n, eps);
  std::vector<Prefix> out;
  std::vector<std::uint32_t> cur(n, 0);
  for (std::uint64_t i = 0; i < count; ++i) {
    long s = static_cast<long>(std::accumulate(cur.begin(), cur.end(), 0u));
    if (s >= lo && s <= hi) out.emplace_back(shape, cur);
    for (std::size_t pos = n; pos > 0; --pos) {
      if (++cur[pos - 1] < 2) break;
      cur[pos - 1] = 0;
    }
  }
  return out;
}

bool tail_equivalent(const OmegaWord& a, const OmegaWord& b) { return a.tail == b.tail; }

}  // namespace treedyn
