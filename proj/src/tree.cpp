#include "treedyn/tree.hpp"

#include <algorithm>
#include <sstream>

namespace treedyn {

TreeShape::TreeShape(std::vector<std::uint32_t> head, std::vector<std::uint32_t> tail)
    : head_(std::move(head)), tail_(std::move(tail)) {
  if (tail_.empty()) throw ConfigError("tree shape needs a periodic tail (period >= 1)");
  for (auto q : head_)
    if (q < 2) throw ConfigError("tree arities must be >= 2");
  for (auto q : tail_)
    if (q < 2) throw ConfigError("tree arities must be >= 2");
}

ShapePtr TreeShape::uniform(std::uint32_t q) {
  return std::make_shared<TreeShape>(std::vector<std::uint32_t>{},
                                     std::vector<std::uint32_t>{q});
}

std::uint32_t TreeShape::arity(std::size_t level) const {
  if (level == 0) throw ConfigError("levels are 1-based");
  if (level <= head_.size()) return head_[level - 1];
  return tail_[(level - head_.size() - 1) % tail_.size()];
}

bool TreeShape::constant_arity() const {
  std::uint32_t q = tail_[0];
  for (auto v : tail_)
    if (v != q) return false;
  for (auto v : head_)
    if (v != q) return false;
  return true;
}

std::size_t TreeShape::depth_class(std::size_t level) const {
  if (level == 0) throw ConfigError("levels are 1-based");
  if (level <= head_.size()) return level - 1;
  return head_.size() + (level - head_.size() - 1) % tail_.size();
}

Int TreeShape::level_size(std::size_t n) const {
  Int out = 1;
  for (std::size_t i = 1; i <= n; ++i) out *= arity(i);
  return out;
}

Int level_size(const TreeShape& shape, std::size_t n) { return shape.level_size(n); }

std::uint64_t level_size_checked(const TreeShape& shape, std::size_t n,
                                 std::uint64_t cap) {
  std::uint64_t out = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    out *= shape.arity(i);
    if (out > cap)
      throw CapExceeded("level " + std::to_string(n) + " exceeds enumeration cap " +
                        std::to_string(cap));
  }
  return out;
}

Prefix::Prefix(ShapePtr shape, std::vector<std::uint32_t> letters)
    : shape_(std::move(shape)), letters_(std::move(letters)) {
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (letters_[i] >= shape_->arity(i + 1))
      throw ConfigError("letter out of range at level " + std::to_string(i + 1));
  }
}

Prefix Prefix::child(std::uint32_t letter) const {
  auto ls = letters_;
  ls.push_back(letter);
  return Prefix(shape_, std::move(ls));
}

Prefix Prefix::first(std::size_t k) const {
  return Prefix(shape_, std::vector<std::uint32_t>(letters_.begin(),
                                                   letters_.begin() + std::min(k, size())));
}

std::uint64_t Prefix::rank() const {
  std::uint64_t r = 0;
  for (std::size_t i = 0; i < letters_.size(); ++i)
    r = r * shape_->arity(i + 1) + letters_[i];
  return r;
}

Prefix Prefix::from_rank(ShapePtr shape, std::size_t n, std::uint64_t rank) {
  std::vector<std::uint32_t> ls(n);
  for (std::size_t i = n; i > 0; --i) {
    std::uint32_t q = shape->arity(i);
    ls[i - 1] = static_cast<std::uint32_t>(rank % q);
    rank /= q;
  }
  return Prefix(std::move(shape), std::move(ls));
}

bool Prefix::is_prefix_of(const Prefix& longer) const {
  if (size() > longer.size()) return false;
  return std::equal(letters_.begin(), letters_.end(), longer.letters_.begin());
}

std::string Prefix::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (i) os << ',';
    os << letters_[i] + 1;
  }
  os << ')';
  return os.str();
}

BoundaryPoint::BoundaryPoint(ShapePtr shape, std::vector<std::uint32_t> head,
                             std::vector<std::uint32_t> cycle)
    : shape_(std::move(shape)), head_(std::move(head)), cycle_(std::move(cycle)) {
  if (cycle_.empty()) throw ConfigError("boundary point needs a periodic tail");
  for (std::size_t lvl = 1; lvl <= head_.size(); ++lvl)
    if (head_[lvl - 1] >= shape_->arity(lvl))
      throw ConfigError("point letter out of range at level " + std::to_string(lvl));
  // The periodic tail must be valid at every level; with an eventually
  // periodic shape it suffices to check one full lcm window.
  std::size_t window = head_.size() + cycle_.size() * shape_->tail().size() +
                       shape_->head().size() + 1;
  for (std::size_t lvl = head_.size() + 1; lvl <= window; ++lvl)
    if (letter(lvl) >= shape_->arity(lvl))
      throw ConfigError("point tail letter out of range at level " + std::to_string(lvl));
}

BoundaryPoint BoundaryPoint::constant(ShapePtr shape, std::uint32_t letter) {
  return BoundaryPoint(std::move(shape), {}, {letter});
}

std::uint32_t BoundaryPoint::letter(std::size_t level) const {
  if (level == 0) throw ConfigError("levels are 1-based");
  if (level <= head_.size()) return head_[level - 1];
  return cycle_[(level - head_.size() - 1) % cycle_.size()];
}

std::vector<Prefix> enumerate_level(ShapePtr shape, std::size_t n, std::uint64_t cap) {
  std::uint64_t count = level_size_checked(*shape, n, cap);
  std::vector<Prefix> out;
  out.reserve(count);
  std::vector<std::uint32_t> cur(n, 0);
  for (std::uint64_t i = 0; i < count; ++i) {
    out.emplace_back(shape, cur);
    // odometer increment, most significant letter first
    for (std::size_t pos = n; pos > 0; --pos) {
      if (++cur[pos - 1] < shape->arity(pos)) break;
      cur[pos - 1] = 0;
    }
  }
  return out;
}

Prefix project(const BoundaryPoint& x, std::size_t n) {
  std::vector<std::uint32_t> ls(n);
  for (std::size_t i = 1; i <= n; ++i) ls[i - 1] = x.letter(i);
  return Prefix(x.shape(), std::move(ls));
}

bool cylinder_contains(const Prefix& c, const BoundaryPoint& x) {
  require_same_shape(c.shape(), x.shape());
  for (std::size_t i = 1; i <= c.size(); ++i)
    if (x.letter(i) != c.at(i - 1)) return false;
  return true;
}

}  // namespace treedyn
