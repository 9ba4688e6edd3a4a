#ifndef TREEDYN_PERM_HPP
#define TREEDYN_PERM_HPP

#include <cstdint>
#include <vector>

#include "treedyn/common.hpp"

namespace treedyn {

// Bijection of {0,...,q-1}.
class Perm {
 public:
  Perm() = default;
  explicit Perm(std::vector<std::uint32_t> map);

  static Perm identity(std::uint32_t q);
  static Perm transposition(std::uint32_t q, std::uint32_t a, std::uint32_t b);
  static Perm cycle(std::uint32_t q);  // i -> i+1 mod q

  std::uint32_t degree() const { return static_cast<std::uint32_t>(map_.size()); }
  std::uint32_t operator()(std::uint32_t i) const { return map_[i]; }
  const std::vector<std::uint32_t>& table() const { return map_; }

  // (after * this)(x) = after(this(x))
  Perm then(const Perm& after) const;
  Perm inverse() const;
  bool is_identity() const;

  friend bool operator==(const Perm& a, const Perm& b) { return a.map_ == b.map_; }

 private:
  std::vector<std::uint32_t> map_;
};

}  // namespace treedyn

#endif
