#include <doctest.h>

#include "treedyn/cocycle.hpp"
#include "treedyn/constructions.hpp"

using namespace treedyn;

namespace {
Rational rat(long n, long d) { return Rational(n, d); }

const GeneratedGroup& grig() {
  static GeneratedGroup g = grigorchuk();
  return g;
}
}  // namespace

TEST_CASE("radon-nikodym values match the first-level ratio") {
  const auto& G = grig();
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  BoundaryPoint x(G.shape(), {0, 1, 0}, {0});
  auto v = rn_derivative(G.generator("a"), bern, x);
  CHECK(v.value == rat(1, 2));

  // cross-check: ratio of cylinder masses at depth 6
  Prefix src = project(x, 6);
  Prefix img = apply(G.generator("a"), x, 6);
  CHECK(v.value == bern.cylinder_measure(img) / bern.cylinder_measure(src));

  CHECK(rn_derivative(Automorphism::identity(G.shape()), bern, x).value == 1);
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  CHECK(rn_derivative(G.generator("a"), haar, x).value == 1);
}

TEST_CASE("haar invariance makes every corpus cocycle vanish") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  for (const auto& name : G.names()) {
    BoundaryPoint x(G.shape(), {1, 1, 0, 1}, {0});
    CHECK(rn_derivative(G.generator(name), haar, x).value == 1);
  }
}

TEST_CASE("inverse cocycle identity holds exactly") {
  const auto& G = grig();
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  Automorphism g = compose(G.generator("b"), G.generator("a"));
  BoundaryPoint x(G.shape(), {1, 0, 1, 1}, {0});
  auto fwd = rn_derivative(g, bern, x);
  auto bwd = rn_along(invert(g), bern, g, x);
  CHECK(fwd.value * bwd.value == 1);
}

TEST_CASE("the all-ones ray stabilizes trivially for the torsion generators") {
  // along the fixed ray the section roots are all trivial, so the product is 1
  const auto& G = grig();
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  BoundaryPoint ones = BoundaryPoint::constant(G.shape(), 1);
  auto v = rn_derivative(G.generator("b"), bern, ones, 64);
  CHECK(v.value == 1);
}

TEST_CASE("recurring violations refuse to stabilize") {
  FactorialElement fe = factorial_element(TreeShape::binary());
  ProductMeasure bern =
      ProductMeasure::bernoulli(TreeShape::binary(), {rat(2, 3), rat(1, 3)});
  BoundaryPoint zeros = BoundaryPoint::constant(TreeShape::binary(), 0);
  CHECK_THROWS_AS(rn_derivative(fe.g, bern, zeros, 64), NotStabilized);
}

TEST_CASE("chain rule on sampled points, exactly") {
  const auto& G = grig();
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  auto res = cocycle_chain_check(G.generator("a"), G.generator("b"), bern, 100, 99);
  CHECK(res.ok);
  CHECK(res.worst_defect == 0);
  auto res2 =
      cocycle_chain_check(Automorphism::identity(G.shape()),
                          Automorphism::identity(G.shape()), bern, 3, 1);
  CHECK(res2.ok);
  CHECK(res2.worst_defect == 0);
}

TEST_CASE("factorial element F-sets match their closed forms") {
  FactorialElement fe = factorial_element(TreeShape::binary());
  ProductMeasure haar = ProductMeasure::uniform(TreeShape::binary());

  auto f2 = f_sets(fe.g, 2, FVariant::plain, &haar);
  REQUIRE(f2.cardinality == 2);
  CHECK(f2.members[0] == Prefix(haar.shape(), {0, 0}));
  CHECK(f2.members[1] == Prefix(haar.shape(), {1, 0}));
  CHECK(f2.measure == rat(1, 2));

  auto f6 = f_sets(fe.g, 6, FVariant::plain, &haar);
  CHECK(f6.cardinality == 4);  // 2^{(3-1)!}
  CHECK(f6.measure == rat(1, 16));

  for (std::size_t n : {3, 4, 5, 7, 8, 12}) {
    auto fn = f_sets(fe.g, n, FVariant::plain, &haar);
    CHECK(fn.cardinality == 0);
  }

  // every prefix keeps acting somewhere below
  auto fb = f_sets(fe.g, 3, FVariant::bullet, &haar);
  CHECK(fb.cardinality == 8);
  CHECK(fb.measure == 1);
}

TEST_CASE("identity F-sets are empty in every variant") {
  auto shape = TreeShape::binary();
  ProductMeasure haar = ProductMeasure::uniform(shape);
  Automorphism id = Automorphism::identity(shape);
  for (auto variant : {FVariant::plain, FVariant::plus, FVariant::bullet})
    CHECK(f_sets(id, 3, variant, &haar).cardinality == 0);
}

TEST_CASE("grigorchuk F-sets follow the residue schedule") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  // F_n(b) = {1^{n-1}0} unless n-1 is divisible by 3
  for (std::size_t n = 2; n <= 7; ++n) {
    auto fn = f_sets(G.generator("b"), n, FVariant::plain, &haar);
    if ((n - 1) % 3 == 0) {
      CHECK(fn.cardinality == 0);
    } else {
      REQUIRE(fn.cardinality == 1);
      std::vector<std::uint32_t> want(n, 1);
      want[n - 1] = 0;
      CHECK(fn.members[0] == Prefix(G.shape(), want));
    }
  }
  // brute force the same sets from section root perms at depth 4
  auto f4 = f_sets(G.generator("b"), 4, FVariant::plain, &haar);
  std::vector<Prefix> brute;
  for (const auto& y : enumerate_level(G.shape(), 4))
    if (!G.generator("b").section(y).root_perm().is_identity()) brute.push_back(y);
  CHECK(f4.members == brute);
  // the bullet set is the ray vertex alone
  auto fb = f_sets(G.generator("b"), 5, FVariant::bullet, &haar);
  REQUIRE(fb.cardinality == 1);
  CHECK(fb.members[0] == Prefix(G.shape(), {1, 1, 1, 1, 1}));
}

TEST_CASE("plus variant sees only measure-breaking permutations") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  auto plus_haar = f_sets(G.generator("b"), 3, FVariant::plus, &haar);
  CHECK(plus_haar.cardinality == 0);  // uniform levels are preserved by any flip
  auto plain = f_sets(G.generator("b"), 3, FVariant::plain, &bern);
  auto plus_bern = f_sets(G.generator("b"), 3, FVariant::plus, &bern);
  CHECK(plus_bern.members == plain.members);
}

TEST_CASE("finitarity report issues closed-form verdicts for machines") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  auto rep = finitarity_report(G.generator("b"), haar, 16);
  CHECK(rep.mu_finitary.state == Verdict::State::holds);
  CHECK(rep.mu_finitary.evidence == Evidence::closed_form);
  CHECK(rep.eventually_preserving.state == Verdict::State::holds);
  CHECK(rep.purely_finitary.state == Verdict::State::holds);
  CHECK(rep.w_subexp.state == Verdict::State::holds);
  // rows carry exact masses: mu(F_n) = 2^-n off the vanishing residues
  for (const auto& row : rep.rows) {
    if (row.level < 2) continue;
    if ((row.level - 1) % 3 == 0)
      CHECK(row.f_mass == 0);
    else
      CHECK(row.f_mass == Rational(1, Int(1) << row.level));
  }
  // partial sums are monotone, trivially, but pin the exact horizon value
  Rational total = 0;
  for (const auto& row : rep.rows) total += row.f_mass;
  CHECK(total == rep.sum_f_mass);
}

TEST_CASE("finitarity report verifies declared schedules") {
  FactorialElement fe = factorial_element(TreeShape::binary());
  ProductMeasure haar = ProductMeasure::uniform(TreeShape::binary());
  auto rep = finitarity_report(fe.g, haar, 12, {}, &fe.schedule);
  CHECK(rep.mu_finitary.state == Verdict::State::holds);
  CHECK(rep.mu_finitary.evidence == Evidence::closed_form);
  CHECK(rep.purely_finitary.state == Verdict::State::fails);
  CHECK(rep.w_subexp.state == Verdict::State::holds);
  for (const auto& row : rep.rows) {
    if (!row.computed) continue;
    if (row.level == 2) CHECK(row.f_mass == rat(1, 2));
    if (row.level == 6) CHECK(row.f_mass == rat(1, 16));
    if (!FactorialElement::level_active(row.level)) CHECK(row.f_mass == 0);
  }
}

TEST_CASE("identity report vanishes with a closed form") {
  auto shape = TreeShape::binary();
  ProductMeasure haar = ProductMeasure::uniform(shape);
  auto rep = finitarity_report(Automorphism::identity(shape), haar, 8);
  CHECK(rep.sum_f_mass == 0);
  CHECK(rep.mu_finitary.state == Verdict::State::holds);
}
