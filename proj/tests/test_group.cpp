#include <doctest.h>

#include <set>

#include "treedyn/constructions.hpp"
#include "treedyn/group.hpp"

using namespace treedyn;

namespace {
const GeneratedGroup& grig() {
  static GeneratedGroup g = grigorchuk();
  return g;
}
}  // namespace

TEST_CASE("words reduce freely and invert") {
  Word w({{"a", 1}, {"b", 1}, {"b", -1}, {"c", 1}});
  CHECK(w.size() == 2);
  CHECK(w.str() == "a*c");
  CHECK(w.inverse().str() == "c^-1*a^-1");
  CHECK((Word::gen("a") * Word::gen("a", -1)).empty());
}

TEST_CASE("balls collect distinct elements in shortlex order") {
  const auto& G = grig();
  auto b1 = ball(G, 1);
  REQUIRE(b1.size() == 5);  // 1, a, b, c, d after involution dedup
  CHECK(b1[0].word.empty());
  CHECK(b1[1].word.str() == "a");
  auto b2 = ball(G, 2);
  CHECK(b2.size() == 11);  // Klein relations collapse bc, bd, cd
  for (const auto& el : b2) CHECK(el.dedup_exact);
  // closed under inverses up to equality
  for (const auto& el : b2) {
    Automorphism inv_el = invert(el.aut);
    bool found = false;
    for (const auto& other : b2)
      if (*equal_exact(other.aut, inv_el)) {
        found = true;
        break;
      }
    CHECK(found);
  }
}

TEST_CASE("parity ball counts match the level-6 table census") {
  GeneratedGroup P3 = parity_group(3);  // generators s12, s13, s23
  auto b2 = ball(P3, 2);
  std::set<std::vector<std::uint64_t>> tables;
  std::vector<Automorphism> gens{Automorphism::identity(P3.shape())};
  for (const auto& n : P3.names()) gens.push_back(P3.generator(n));
  for (const auto& g : gens)
    for (const auto& h : gens)
      tables.insert(level_projection(compose(g, h), 6).table);
  CHECK(b2.size() == tables.size());
}

TEST_CASE("level transitivity with verified witnesses") {
  const auto& G = grig();
  for (std::size_t n = 1; n <= 5; ++n) {
    auto res = minimality_check(G, n);
    REQUIRE(res.transitive);
    // every witness maps the base prefix to its rank
    std::vector<LevelPermutation> tabs;
    for (std::uint64_t r = 0; r < res.witnesses.size(); ++r) {
      Automorphism w = G.evaluate(res.witnesses[r]);
      CHECK(apply(w, Prefix::from_rank(G.shape(), n, 0)).rank() == r);
    }
  }
  GeneratedGroup P = parity_group(6);
  CHECK(minimality_check(P, 4).transitive);
  CHECK(minimality_check(P, 5).transitive);

  GeneratedGroup trivial("trivial", {{"e", Automorphism::identity(G.shape())}});
  auto res = minimality_check(trivial, 1);
  CHECK_FALSE(res.transitive);
  CHECK(res.orbits.size() == 2);
}

TEST_CASE("transitive levels pin the uniform distribution uniquely") {
  const auto& G = grig();
  for (std::size_t n = 1; n <= 4; ++n) CHECK(invariant_distribution_dimension(G, n) == 1);
  GeneratedGroup trivial("trivial", {{"e", Automorphism::identity(G.shape())}});
  CHECK(invariant_distribution_dimension(trivial, 2) == 4);
}

TEST_CASE("transporters are BFS words that really transport") {
  const auto& G = grig();
  auto self = find_transporter(G, Prefix(G.shape(), {0}), Prefix(G.shape(), {0}));
  REQUIRE(self.has_value());
  CHECK(self->empty());
  auto flip = find_transporter(G, Prefix(G.shape(), {0}), Prefix(G.shape(), {1}));
  REQUIRE(flip.has_value());
  CHECK(flip->str() == "a");
  Prefix from(G.shape(), {1, 0, 1});
  Prefix to(G.shape(), {0, 1, 1});
  auto w = find_transporter(G, from, to);
  REQUIRE(w.has_value());
  CHECK(apply(G.evaluate(*w), from) == to);

  GeneratedGroup trivial("trivial", {{"e", Automorphism::identity(G.shape())}});
  CHECK_FALSE(find_transporter(trivial, Prefix(G.shape(), {0}), Prefix(G.shape(), {1}))
                  .has_value());
}

TEST_CASE("rigid stabilizer search certifies supports exactly") {
  const auto& G = grig();
  auto inside_one = rigid_stabilizer_elements(G, Prefix(G.shape(), {1}), 1, 6);
  REQUIRE(!inside_one.empty());
  CHECK(inside_one[0].str() == "b");
  auto inside_zero = rigid_stabilizer_elements(G, Prefix(G.shape(), {0}), 1, 6);
  CHECK(inside_zero.empty());

  GeneratedGroup P = parity_group(3);
  CHECK(rigid_stabilizer_elements(P, Prefix(P.shape(), {1}), 1, 6).empty());

  // ladder words as extra candidates reach deeper cylinders
  Prefix ray2(G.shape(), {1, 1});
  auto deep = rigid_stabilizer_elements(G, ray2, 1, 6, {grigorchuk_rist_word(G, 2)});
  CHECK(!deep.empty());
}

TEST_CASE("orbit partitions split by the window parity") {
  GeneratedGroup P = parity_group(6);
  // generators supported in the first four coordinates
  std::vector<std::string> window;
  for (const auto& n : P.names()) {
    bool ok = true;
    for (char c : n.substr(1))
      if (c > '4') ok = false;
    if (ok) window.push_back(n);
  }
  auto orbits = level_orbit_partition(P, 4, window);
  REQUIRE(orbits.size() == 2);
  CHECK(orbits[0].size() == 8);
  CHECK(orbits[1].size() == 8);
  // blocks are the even/odd weight classes
  for (const auto& orbit : orbits) {
    int parity = -1;
    for (auto r : orbit) {
      int ones = __builtin_popcountll(r);
      if (parity < 0) parity = ones % 2;
      CHECK(ones % 2 == parity);
    }
  }
  auto all = level_orbit_partition(P, 4, P.names());
  CHECK(all.size() == 1);
  auto none = level_orbit_partition(P, 4, {});
  CHECK(none.size() == 16);
}
