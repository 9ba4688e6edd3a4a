#include "treedyn/perm.hpp"

#include <numeric>

namespace treedyn {

Perm::Perm(std::vector<std::uint32_t> map) : map_(std::move(map)) {
  std::vector<bool> seen(map_.size(), false);
  for (auto v : map_) {
    if (v >= map_.size() || seen[v]) throw ConfigError("permutation table is not a bijection");
    seen[v] = true;
  }
}

Perm Perm::identity(std::uint32_t q) {
  std::vector<std::uint32_t> m(q);
  std::iota(m.begin(), m.end(), 0u);
  return Perm(std::move(m));
}

Perm Perm::transposition(std::uint32_t q, std::uint32_t a, std::uint32_t b) {
  Perm p = identity(q);
  std::swap(p.map_[a], p.map_[b]);
  return p;
}

Perm Perm::cycle(std::uint32_t q) {
  std::vector<std::uint32_t> m(q);
  for (std::uint32_t i = 0; i < q; ++i) m[i] = (i + 1) % q;
  return Perm(std::move(m));
}

Perm Perm::then(const Perm& after) const {
  if (after.degree() != degree()) throw ConfigError("permutation degree mismatch");
  std::vector<std::uint32_t> m(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) m[i] = after.map_[map_[i]];
  Perm out;
  out.map_ = std::move(m);
  return out;
}

Perm Perm::inverse() const {
  std::vector<std::uint32_t> m(map_.size());
  for (std::uint32_t i = 0; i < map_.size(); ++i) m[map_[i]] = i;
  Perm out;
  out.map_ = std::move(m);
  return out;
}

bool Perm::is_identity() const {
  for (std::uint32_t i = 0; i < map_.size(); ++i)
    if (map_[i] != i) return false;
  return true;
}

}  // namespace treedyn
