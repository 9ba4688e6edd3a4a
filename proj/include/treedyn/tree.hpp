#ifndef TREEDYN_TREE_HPP
#define TREEDYN_TREE_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "treedyn/common.hpp"
#include "treedyn/rational.hpp"

namespace treedyn {

// Arity sequence (q_n), n >= 1, as an explicit head plus an eventually
// periodic tail (period >= 1).  Every q_n >= 2.
class TreeShape {
 public:
  TreeShape(std::vector<std::uint32_t> head, std::vector<std::uint32_t> tail);

  static std::shared_ptr<const TreeShape> uniform(std::uint32_t q);
  static std::shared_ptr<const TreeShape> binary() { return uniform(2); }

  // 1-based level index.
  std::uint32_t arity(std::size_t level) const;
  bool constant_arity() const;

  const std::vector<std::uint32_t>& head() const { return head_; }
  const std::vector<std::uint32_t>& tail() const { return tail_; }

  // Levels fall into finitely many classes: head levels are singleton
  // classes, tail levels repeat with the tail period.
  std::size_t depth_class(std::size_t level) const;
  std::size_t num_depth_classes() const { return head_.size() + tail_.size(); }

  Int level_size(std::size_t n) const;

  bool operator==(const TreeShape& o) const {
    return head_ == o.head_ && tail_ == o.tail_;
  }

 private:
  std::vector<std::uint32_t> head_;
  std::vector<std::uint32_t> tail_;
};

using ShapePtr = std::shared_ptr<const TreeShape>;

inline void require_same_shape(const ShapePtr& a, const ShapePtr& b) {
  if (a.get() != b.get() && !(*a == *b)) throw ShapeMismatch("tree shapes differ");
}

// Finite word (x_1,...,x_n); letters stored 0-based, all external
// surfaces (printing, JSON) are 1-based.
class Prefix {
 public:
  Prefix() = default;
  Prefix(ShapePtr shape, std::vector<std::uint32_t> letters);

  const ShapePtr& shape() const { return shape_; }
  std::size_t size() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }
  std::uint32_t at(std::size_t i) const { return letters_[i]; }  // 0-based slot
  const std::vector<std::uint32_t>& letters() const { return letters_; }

  Prefix child(std::uint32_t letter) const;
  Prefix first(std::size_t k) const;  // first k letters

  // Lexicographic rank within the level; requires level_size to fit in 64 bits.
  std::uint64_t rank() const;
  static Prefix from_rank(ShapePtr shape, std::size_t n, std::uint64_t rank);

  bool is_prefix_of(const Prefix& longer) const;

  std::string str() const;  // "(1,2,1)", 1-based letters

  friend bool operator==(const Prefix& a, const Prefix& b) {
    return a.letters_ == b.letters_;
  }
  friend bool operator<(const Prefix& a, const Prefix& b) {
    return a.letters_ < b.letters_;
  }

 private:
  ShapePtr shape_;
  std::vector<std::uint32_t> letters_;
};

// A boundary point with finite description: explicit prefix followed by an
// eventually periodic letter cycle.
class BoundaryPoint {
 public:
  BoundaryPoint(ShapePtr shape, std::vector<std::uint32_t> head,
                std::vector<std::uint32_t> cycle);

  // The point (c, c, c, ...).
  static BoundaryPoint constant(ShapePtr shape, std::uint32_t letter);

  const ShapePtr& shape() const { return shape_; }
  // Letter at 1-based level.
  std::uint32_t letter(std::size_t level) const;

  std::size_t head_size() const { return head_.size(); }
  const std::vector<std::uint32_t>& cycle() const { return cycle_; }

 private:
  ShapePtr shape_;
  std::vector<std::uint32_t> head_;
  std::vector<std::uint32_t> cycle_;
};

Int level_size(const TreeShape& shape, std::size_t n);

std::uint64_t level_size_checked(const TreeShape& shape, std::size_t n,
                                 std::uint64_t cap);

std::vector<Prefix> enumerate_level(ShapePtr shape, std::size_t n,
                                    std::uint64_t cap = kDefaultEnumerationCap);

Prefix project(const BoundaryPoint& x, std::size_t n);

bool cylinder_contains(const Prefix& c, const BoundaryPoint& x);

}  // namespace treedyn

#endif
