#ifndef TREEDYN_GROUP_HPP
#define TREEDYN_GROUP_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treedyn/automorphism.hpp"

namespace treedyn {

struct WordLetter {
  std::string gen;
  int exp = 1;  // +1 or -1
  friend bool operator==(const WordLetter& a, const WordLetter& b) {
    return a.gen == b.gen && a.exp == b.exp;
  }
};

// Freely reduced word in named generators.
class Word {
 public:
  Word() = default;
  explicit Word(std::vector<WordLetter> letters);

  static Word gen(std::string name, int exp = 1);

  const std::vector<WordLetter>& letters() const { return letters_; }
  std::size_t size() const { return letters_.size(); }
  bool empty() const { return letters_.empty(); }

  Word inverse() const;
  // (a * b) acts as a after b
  friend Word operator*(const Word& a, const Word& b);

  std::string str() const;

 private:
  std::vector<WordLetter> letters_;
};

// Finitely generated subgroup given by named generators on one shape.
class GeneratedGroup {
 public:
  GeneratedGroup(std::string name,
                 std::vector<std::pair<std::string, Automorphism>> generators);

  const std::string& name() const { return name_; }
  const ShapePtr& shape() const { return shape_; }
  // names in shortlex (sorted) order
  const std::vector<std::string>& names() const { return names_; }
  const Automorphism& generator(const std::string& n) const;
  bool has_generator(const std::string& n) const;
  std::size_t generator_count() const { return names_.size(); }

  Automorphism evaluate(const Word& w) const;

 private:
  std::string name_;
  ShapePtr shape_;
  std::vector<std::string> names_;
  std::map<std::string, Automorphism> gens_;
};

struct BallElement {
  Word word;
  Automorphism aut;
  bool dedup_exact = true;  // false when only depth-d projection equality was available
};

// All products of at most `radius` generators, deduplicated, in breadth-first
// shortlex order.
std::vector<BallElement> ball(const GeneratedGroup& G, std::size_t radius,
                              std::size_t dedup_depth = kDefaultEqualDepth,
                              std::uint64_t cap = 1 << 20);

struct MinimalityResult {
  bool transitive = false;
  // transitive: witness word per prefix rank, mapping the base prefix there
  std::vector<Word> witnesses;
  // not transitive: orbit partition of prefix ranks
  std::vector<std::vector<std::uint64_t>> orbits;
};

// Exact level transitivity by BFS over depth-n prefixes under the generators'
// level permutations.
MinimalityResult minimality_check(const GeneratedGroup& G, std::size_t n,
                                  std::uint64_t cap = kDefaultEnumerationCap);

std::optional<Word> find_transporter(const GeneratedGroup& G, const Prefix& from,
                                     const Prefix& to,
                                     std::uint64_t cap = kDefaultEnumerationCap);

// Nonidentity ball elements (plus verified extra candidates) supported inside
// the cylinder O, certified exactly: the level-|O| table fixes everything and
// all sections outside O are identity.
std::vector<Word> rigid_stabilizer_elements(const GeneratedGroup& G, const Prefix& O,
                                            std::size_t radius, std::size_t verify_depth,
                                            const std::vector<Word>& extra_candidates = {},
                                            std::uint64_t cap = 1 << 20);

bool supported_inside(const Automorphism& g, const Prefix& O);

// Orbits of depth-n prefixes under exactly the filtered generators; an empty
// filter leaves every prefix in its own singleton block.
std::vector<std::vector<std::uint64_t>> level_orbit_partition(
    const GeneratedGroup& G, std::size_t n, const std::vector<std::string>& filter,
    std::uint64_t cap = kDefaultEnumerationCap);

// Dimension of the space of G_n-invariant signed distributions on depth-n
// prefixes (SVD null space, singular-value cutoff `tol`).
int invariant_distribution_dimension(const GeneratedGroup& G, std::size_t n,
                                     double tol = 1e-10,
                                     std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace treedyn

#endif
