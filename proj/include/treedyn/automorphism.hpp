#ifndef TREEDYN_AUTOMORPHISM_HPP
#define TREEDYN_AUTOMORPHISM_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "treedyn/perm.hpp"
#include "treedyn/tree.hpp"

namespace treedyn {

// Finite-state section machine over a constant alphabet: every state carries
// the permutation applied at the current level and the successor state per
// input letter.
class Machine : public std::enable_shared_from_this<Machine> {
 public:
  struct State {
    Perm perm;
    std::vector<std::uint32_t> next;  // indexed by input letter
  };

  explicit Machine(std::vector<State> states);

  std::uint32_t alphabet() const { return alphabet_; }
  std::size_t size() const { return states_.size(); }
  const State& state(std::uint32_t i) const { return states_[i]; }

  // No nontrivial permutation reachable from s (including s itself).
  bool silent(std::uint32_t s) const { return silent_[s]; }
  // Some nontrivial permutation reachable from s in >= 1 steps.
  bool live(std::uint32_t s) const;
  // Nontrivial permutations occur only on acyclic paths from s, so the
  // element is trivial beyond a bounded depth.
  bool finitary_from(std::uint32_t s) const { return finitary_[s]; }
  // No reachable cycle passes through a nontrivial permutation: every
  // infinite path eventually sees only trivial permutations.
  bool quasi_finitary_from(std::uint32_t s) const { return quasi_[s]; }

  std::shared_ptr<const Machine> inverse() const;

 private:
  std::vector<State> states_;
  std::uint32_t alphabet_ = 0;
  std::vector<bool> silent_, finitary_, quasi_;
  mutable std::shared_ptr<const Machine> inverse_;  // built once on demand
};

// Programmatic section oracle for elements whose permutations depend on the
// whole prefix.  trivial_at_and_below is the activity bound: implementations
// returning nullopt make F-bullet style queries refuse to run.
struct SectionRule {
  virtual ~SectionRule() = default;
  // Permutation acting on coordinate |base|+1 below the prefix `base`.
  virtual Perm root_perm(const Prefix& base) const = 0;
  // Whether root_perm is trivial at `base` and every extension of it.
  virtual std::optional<bool> trivial_at_and_below(const Prefix& base) const = 0;
  // Whether any prefix of length n can carry a nontrivial permutation.
  virtual std::optional<bool> sections_possible_at(std::size_t /*n*/) const {
    return std::nullopt;
  }
  virtual std::string name() const = 0;
};

namespace detail {
struct Node;
using NodePtr = std::shared_ptr<const Node>;
// low-level hooks for tight walks (sections of the node graph)
NodePtr node_section(const NodePtr& n, std::uint32_t letter);
std::uint32_t node_image(const NodePtr& n, std::uint32_t letter);
bool node_kind_is_identity(const Node* n);
bool node_kind_skips_identity_check(const Node* n);  // machine nodes are never trivial
}  // namespace detail

// Level-preserving tree automorphism as a lazy section machine.  Immutable
// value type; section caches are interned globally and append-only.
class Automorphism {
 public:
  Automorphism() = default;

  static Automorphism identity(ShapePtr shape);
  // Portrait: root permutation plus named children; absent children are identity.
  static Automorphism portrait(ShapePtr shape, const Perm& root,
                               const std::map<std::uint32_t, Automorphism>& children);
  static Automorphism machine(ShapePtr shape, std::shared_ptr<const Machine> m,
                              std::uint32_t start);
  static Automorphism rule(ShapePtr shape, std::shared_ptr<const SectionRule> r);
  // Flips the given 1-based coordinates on every point (involution).
  static Automorphism coordinate_flips(ShapePtr shape, const std::vector<std::size_t>& coords);

  bool valid() const { return static_cast<bool>(node_); }
  const ShapePtr& shape() const { return shape_; }
  std::size_t depth() const { return depth_; }
  std::uint32_t arity() const { return shape_->arity(depth_ + 1); }

  Perm root_perm() const;
  Automorphism section(std::uint32_t letter) const;
  Automorphism section(const Prefix& below) const;  // relative to depth()

  // Exact identity test; throws NoActivityBound when a rule kernel cannot
  // certify and CapExceeded when the section closure refuses to close.
  bool is_identity() const;
  // True when the kernel contains no rule parts, so bisimulation decides equality.
  bool finite_state() const;

  const detail::Node* raw() const { return node_.get(); }
  const detail::NodePtr& node_ptr() const { return node_; }

  friend Automorphism compose(const Automorphism& g, const Automorphism& h);
  friend Automorphism invert(const Automorphism& g);
  friend class AutomorphismInternals;

 private:
  Automorphism(ShapePtr shape, std::size_t depth, detail::NodePtr node);

  ShapePtr shape_;
  std::size_t depth_ = 0;
  detail::NodePtr node_;
};

// apply(compose(g,h), x) == apply(g, apply(h, x))
Automorphism compose(const Automorphism& g, const Automorphism& h);
Automorphism invert(const Automorphism& g);

// Image of the first n letters of x under g.
Prefix apply(const Automorphism& g, const BoundaryPoint& x, std::size_t n);
Prefix apply(const Automorphism& g, const Prefix& y);

// Bijection table of depth-n prefixes, indexed by lexicographic rank.
struct LevelPermutation {
  ShapePtr shape;
  std::size_t level = 0;
  std::vector<std::uint64_t> table;

  LevelPermutation then(const LevelPermutation& after) const;
  LevelPermutation inverse() const;
  bool is_identity() const;
  friend bool operator==(const LevelPermutation& a, const LevelPermutation& b) {
    return a.level == b.level && a.table == b.table;
  }
};

LevelPermutation level_projection(const Automorphism& g, std::size_t n,
                                  std::uint64_t cap = kDefaultEnumerationCap);

// decided equality (bisimulation); nullopt for rule kernels
std::optional<bool> equal_exact(const Automorphism& g, const Automorphism& h);
bool equal_to_depth(const Automorphism& g, const Automorphism& h, std::size_t depth);

inline constexpr std::size_t kDefaultEqualDepth = 12;

// Depth-n prefixes whose cylinders meet the support of g: the level image
// moves the prefix or a nontrivial section lives at/below it.
std::vector<Prefix> support_level(const Automorphism& g, std::size_t n,
                                  std::uint64_t cap = kDefaultEnumerationCap);

// Depth-n prefixes with section(g, z) != identity, i.e. where g still acts
// strictly inside the subtree.  This is the coordinate-change obstruction set.
std::vector<Prefix> active_prefixes(const Automorphism& g, std::size_t n,
                                    std::uint64_t cap = kDefaultEnumerationCap);

// Interned finite-state closure of g under sections, for exact level
// statistics without enumeration.  Constant-arity shapes only; nullopt when
// rule kernels occur or more than `cap` distinct nodes appear.
struct SectionClosure {
  std::uint32_t alphabet = 0;
  std::vector<Perm> root;                       // root[i]: permutation of node i
  std::vector<std::vector<std::uint32_t>> next;  // next[i][letter]
  std::vector<bool> live;                        // nontrivial reachable in >= 1 step
  std::vector<bool> identity;                    // node is the identity automorphism
};
std::optional<SectionClosure> section_closure(const Automorphism& g, std::size_t cap = 1 << 16);

// the finite-state machine behind g when its kernel is a plain machine state
std::optional<std::pair<std::shared_ptr<const Machine>, std::uint32_t>> machine_kernel(
    const Automorphism& g);

}  // namespace treedyn

#endif
