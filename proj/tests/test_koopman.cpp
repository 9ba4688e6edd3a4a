#include <doctest.h>

#include "treedyn/constructions.hpp"
#include "treedyn/koopman.hpp"

using namespace treedyn;

namespace {
Rational rat(long n, long d) { return Rational(n, d); }
const GeneratedGroup& grig() {
  static GeneratedGroup g = grigorchuk();
  return g;
}
}  // namespace

TEST_CASE("koopman matrices are level permutations in the normalized basis") {
  const auto& G = grig();
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  KoopmanMatrix m = koopman_matrix(G.generator("a"), bern, 1);
  CHECK(m.mat(0, 0) == 0.0);
  CHECK(m.mat(1, 0) == 1.0);
  CHECK(m.mat(0, 1) == 1.0);
  CHECK(m.entry_ratio_squared(bern, 0) == rat(2, 1));  // mu[0]/mu[1]

  KoopmanMatrix id = koopman_matrix(Automorphism::identity(G.shape()), bern, 3);
  CHECK(id.mat.isIdentity(0.0));

  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  KoopmanMatrix b4 = koopman_matrix(G.generator("b"), haar, 4);
  LevelPermutation t = level_projection(G.generator("b"), 4);
  for (std::uint64_t y = 0; y < 16; ++y) CHECK(b4.permutation[y] == t.table[y]);
}

TEST_CASE("depth compatibility is a hard precondition with a witness") {
  const auto& G = grig();
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  auto witness = depth_compatibility_witness(G.generator("b"), bern, 1);
  REQUIRE(witness.has_value());
  CHECK_THROWS_AS(koopman_matrix(G.generator("b"), bern, 1), NotDepthCompatible);
  // under Haar everything is compatible
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  CHECK_FALSE(depth_compatibility_witness(G.generator("b"), haar, 1).has_value());
}

TEST_CASE("unitarity and homomorphism defects vanish at machine precision") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  std::vector<std::string> names(G.names());
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const auto& a : names) {
      KoopmanMatrix ma = koopman_matrix(G.generator(a), haar, n);
      CHECK(unitarity_defect(ma.mat) <= 1e-12);
      for (const auto& b : names) {
        KoopmanMatrix mb = koopman_matrix(G.generator(b), haar, n);
        KoopmanMatrix mab = koopman_matrix(compose(G.generator(a), G.generator(b)), haar, n);
        CHECK((ma.mat * mb.mat - mab.mat).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
  }
  // corrupted entry is caught
  KoopmanMatrix m = koopman_matrix(G.generator("a"), haar, 2);
  m.mat(0, 0) += 1e-3;
  CHECK(unitarity_defect(m.mat) > 1e-6);
}

TEST_CASE("fixed spaces recover invariant vectors") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  KoopmanMatrix id = koopman_matrix(Automorphism::identity(G.shape()), haar, 3);
  FixedSpace whole = fixed_space({id});
  CHECK(whole.dimension == 8);

  KoopmanMatrix a1 = koopman_matrix(G.generator("a"), haar, 1);
  FixedSpace diag = fixed_space({a1});
  CHECK(diag.dimension == 1);

  // rigid stabilizer supported inside [1]: everything outside stays fixed
  KoopmanMatrix b5 = koopman_matrix(G.generator("b"), haar, 5);
  FixedSpace fs = fixed_space({b5});
  CHECK(fs.dimension >= 16);  // the 16 depth-5 cylinders outside [1]
  // constants are always fixed for measure-preserving elements
  Eigen::VectorXd ones = Eigen::VectorXd::Constant(32, 1.0 / std::sqrt(32.0));
  CHECK((b5.mat * ones - ones).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("level filtration commutes under the invariant measure") {
  const auto& G = grig();
  FiltrationReport rep = level_filtration_check(G, 5);
  CHECK(rep.pass);
  CHECK(rep.worst_commutator <= 1e-12);
}

TEST_CASE("a non-level-preserving permutation breaks the filtration") {
  // swap (0,0) with the identity elsewhere: this permutation of depth-2
  // cylinders does not arise from a tree automorphism level map
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(4, 4);
  m(0, 0) = 0;
  m(3, 3) = 0;
  m(0, 3) = 1;
  m(3, 0) = 1;
  // P_1 projector at depth 2 under Haar
  Eigen::MatrixXd q0 = Eigen::MatrixXd::Constant(4, 4, 0.25);
  Eigen::MatrixXd q1 = Eigen::MatrixXd::Zero(4, 4);
  for (int blk = 0; blk < 2; ++blk)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) q1(2 * blk + i, 2 * blk + j) = 0.5;
  Eigen::MatrixXd p1 = q1 - q0;
  CHECK((m * p1 - p1 * m).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("sqrt-cocycle integrals enclose the exact values") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  Prefix y(G.shape(), {1});
  Enclosure e = integral_sqrt_rn(G.generator("b"), haar, y);
  CHECK(e.lo == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e.hi == doctest::Approx(0.5).epsilon(1e-12));

  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(2, 3), rat(1, 3)});
  Enclosure eb = integral_sqrt_rn(G.generator("b"), bern, y, 30);
  CHECK(eb.lo <= eb.hi);
  CHECK(eb.hi - eb.lo < 1e-6);
  // Cauchy-Schwarz: the integral never exceeds sqrt(mu(g[y]) mu([y]))
  CHECK(eb.hi <= 1.0 / 3 + 1e-9);
}

TEST_CASE("rigidity trace satisfies the operator bound along the ray") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  BoundaryPoint ray = BoundaryPoint::constant(G.shape(), 1);
  std::vector<std::pair<std::size_t, Word>> chain;
  chain.emplace_back(1, Word::gen("b"));
  chain.emplace_back(2, grigorchuk_rist_word(G, 2));
  chain.emplace_back(3, grigorchuk_rist_word(G, 3));
  // f = r = the constant function, written at depth 1
  std::vector<double> f{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  auto steps = rigidity_trace(G, haar, chain, ray, f, f, 1);
  REQUIRE(steps.size() == 3);
  double prev_bound = 1e300;
  for (const auto& st : steps) {
    CHECK(st.ok);
    CHECK(st.value_hi <= 2.0 * std::sqrt(st.mu_O) + 1e-12);
    CHECK(st.bound < prev_bound);
    prev_bound = st.bound;
  }
  // mu(O_m) = 2^-m: the bound shrinks by sqrt(2) per step
  CHECK(steps[1].bound / steps[0].bound == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("weak containment transfers coefficients between equal measures") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  std::vector<double> f{0.0, 1.0};  // indicator of [1] at depth 1
  auto rep = weak_containment_experiment(G, {"a", "b"}, haar, haar, f, 1, 0.01);
  CHECK(rep.pass);
  CHECK(rep.k_eps > 1);
  CHECK(rep.y_mass > 0.99);
  for (const auto& row : rep.rows) {
    CHECK(row.diff_hi < rep.bound);
    CHECK(std::abs(row.coef_nu_matrix - row.coef_nu_direct) <= 1e-12);
  }
}

TEST_CASE("dropping the density correction breaks separated transfers") {
  const auto& G = grig();
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  ProductMeasure bern = ProductMeasure::bernoulli(G.shape(), {rat(1, 4), rat(3, 4)});
  std::vector<double> f{0.0, 1.0};
  auto good = weak_containment_experiment(G, {"b"}, haar, bern, f, 1, 0.01);
  CHECK(good.pass);
  auto bad = weak_containment_experiment(G, {"b"}, haar, bern, f, 1, 0.01, 14, true);
  CHECK_FALSE(bad.pass);
}
