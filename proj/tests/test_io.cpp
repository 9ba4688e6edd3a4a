#include <doctest.h>

#include "treedyn/constructions.hpp"
#include "treedyn/io.hpp"

using namespace treedyn;

TEST_CASE("shapes and measures round-trip through json") {
  auto mixed = std::make_shared<TreeShape>(std::vector<std::uint32_t>{2, 3},
                                           std::vector<std::uint32_t>{2});
  ShapePtr back = shape_from_json(shape_to_json(*mixed));
  CHECK(*back == *mixed);

  auto bin = TreeShape::binary();
  ProductMeasure bern = ProductMeasure::bernoulli(bin, {Rational(2, 3), Rational(1, 3)});
  ProductMeasure again = measure_from_json(measure_to_json(bern), bin);
  CHECK(again.coincides_with(bern));

  ProductMeasure over = ProductMeasure::with_overrides(
      ProductMeasure::uniform(bin), {{3, {Rational(1, 4), Rational(3, 4)}}});
  ProductMeasure over2 = measure_from_json(measure_to_json(over), bin);
  CHECK(over2.coincides_with(over));

  CHECK_THROWS_AS(measure_from_json(json{{"kind", "nope"}}, bin), ConfigError);
  CHECK_THROWS_AS(rational_from_json(json("1/0")), ConfigError);
}

TEST_CASE("automorphisms round-trip as portraits and machines") {
  auto bin = TreeShape::binary();
  GeneratedGroup G = grigorchuk();
  // portrait serialization reconstructs behavior to any finite depth
  json jb = automorphism_to_json(G.generator("c"), 16);
  Automorphism back = automorphism_from_json(jb, bin);
  CHECK(equal_to_depth(back, G.generator("c"), 12));

  json machine = {{"kind", "machine"},
                  {"states", json::array({json{{"perm", {2, 1}}, {"next", {1, 1}}},
                                          json{{"perm", {1, 2}}, {"next", {1, 1}}}})},
                  {"start", 0}};
  Automorphism a = automorphism_from_json(machine, bin);
  CHECK(*equal_exact(a, G.generator("a")));
}

TEST_CASE("words and groups round-trip") {
  Word w = Word::gen("a") * Word::gen("b", -1);
  Word back = word_from_json(word_to_json(w));
  CHECK(back.str() == w.str());

  GeneratedGroup P = parity_group(3);
  GeneratedGroup back_p = group_from_json(group_to_json(P), P.shape());
  CHECK(back_p.names() == P.names());
  for (const auto& n : P.names())
    CHECK(equal_to_depth(back_p.generator(n), P.generator(n), 10));
}

TEST_CASE("measure families round-trip with all stage data") {
  GeneratedGroup G = grigorchuk();
  BetaPairs betas{{Rational(1, 3), Rational(2, 3)}, {Rational(2, 3), Rational(1, 3)}};
  FamilyBuildParams params;
  params.stages = 2;
  MeasureFamily fam = build_measure_family(G, betas, params);
  MeasureFamily back = family_from_json(family_to_json(fam));
  CHECK(back.levels == fam.levels);
  CHECK(back.tail_stride == fam.tail_stride);
  REQUIRE(back.stages.size() == fam.stages.size());
  for (std::size_t l = 0; l < fam.stages.size(); ++l) {
    CHECK(back.stages[l].cnt_fwd == fam.stages[l].cnt_fwd);
    CHECK(back.stages[l].worst_fraction == fam.stages[l].worst_fraction);
    CHECK(back.transporter(l, 0, 1).str() == fam.transporter(l, 0, 1).str());
  }
  OmegaWord w0{{}, 0};
  CHECK(verify_compatibility(G, back, w0, 1, 4).pass);
}

TEST_CASE("content hashes are stable across dumps") {
  json a = {{"x", 1}, {"y", json::array({1, 2, 3})}};
  json b = {{"y", json::array({1, 2, 3})}, {"x", 1}};
  CHECK(canonical_hash(a) == canonical_hash(b));  // nlohmann orders keys
}

TEST_CASE("group generators resolve corpus references") {
  json g = {{"name", "mixed"},
            {"generators",
             {{"x", {{"corpus", "grigorchuk.a"}}},
              {"y", {{"corpus", "grigorchuk.b"}}}}}};
  GeneratedGroup back = group_from_json(g, TreeShape::binary());
  GeneratedGroup G = grigorchuk();
  CHECK(*equal_exact(back.generator("x"), G.generator("a")));
  CHECK(*equal_exact(back.generator("y"), G.generator("b")));
}
