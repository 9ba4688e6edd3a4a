#ifndef TREEDYN_KOOPMAN_HPP
#define TREEDYN_KOOPMAN_HPP

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "treedyn/cocycle.hpp"
#include "treedyn/group.hpp"
#include "treedyn/measures.hpp"

namespace treedyn {

struct KEpsNotFound : std::runtime_error {
  explicit KEpsNotFound(const std::string& what) : std::runtime_error(what) {}
};

// kappa_mu(g) restricted to depth-n cylinder functions, in the normalized
// cylinder-indicator basis.  Under the depth-compatibility precondition the
// RN derivative is constant on every depth-n cylinder, so the matrix is
// exactly the permutation matrix of the level action.
struct KoopmanMatrix {
  ShapePtr shape;
  std::size_t level = 0;
  std::vector<std::uint64_t> permutation;  // g_n as a rank table
  Eigen::MatrixXd mat;

  // squared unnormalized entry mu[y]/mu[g_n y] on the support, exact
  Rational entry_ratio_squared(const ProductMeasure& mu, std::uint64_t from) const;
};

// Certifies that all sections of g at depth >= n preserve the corresponding
// levels of mu; returns the witness prefix of the first failure.
std::optional<Prefix> depth_compatibility_witness(const Automorphism& g,
                                                  const ProductMeasure& mu, std::size_t n,
                                                  std::uint64_t cap = kDefaultEnumerationCap);

KoopmanMatrix koopman_matrix(const Automorphism& g, const ProductMeasure& mu, std::size_t n,
                             std::uint64_t cap = kDefaultEnumerationCap);

double unitarity_defect(const Eigen::MatrixXd& m);

struct FixedSpace {
  int dimension = 0;
  Eigen::MatrixXd basis;  // columns span the joint fixed space
};

FixedSpace fixed_space(const std::vector<KoopmanMatrix>& mats, double sv_cutoff = 1e-10);

// ---------------------------------------------------------------------------

// interval value for integrals truncated at a refinement depth
struct Enclosure {
  double lo = 0, hi = 0;
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

// integral over [y] of sqrt(d(mu o g)/d mu), certified enclosure
Enclosure integral_sqrt_rn(const Automorphism& g, const ProductMeasure& mu, const Prefix& y,
                           std::size_t refine_depth = 40);

struct RigidityStep {
  std::size_t depth = 0;  // O_m
  Word witness;
  double value_lo = 0, value_hi = 0;  // | <k(g)f,r> - <f,r> |
  double bound = 0;                   // ||f|| ||1_O|| ||r|| + |<f 1_O, r>|
  double mu_O = 0;
  bool ok = false;
};

// Per-step weak-convergence trace along a shrinking cylinder chain on `ray`:
// witnesses[i] is a nontrivial element supported inside the depth chain[i]
// cylinder.  f and r are depth-`vector_depth` coefficient vectors in the
// normalized cylinder basis.
std::vector<RigidityStep> rigidity_trace(const GeneratedGroup& G, const ProductMeasure& mu,
                                         const std::vector<std::pair<std::size_t, Word>>& chain,
                                         const BoundaryPoint& ray,
                                         const std::vector<double>& f,
                                         const std::vector<double>& r,
                                         std::size_t vector_depth,
                                         std::size_t refine_depth = 40);

struct FiltrationReport {
  std::size_t depth = 0;
  double tolerance = 1e-12;
  double worst_commutator = 0;
  bool pass = false;
};

// Finite filtration invariance under Haar: the Koopman matrices commute with
// the projectors onto (depth-k functions) minus (depth-(k-1) functions).
FiltrationReport level_filtration_check(const GeneratedGroup& G, std::size_t n,
                                        double tol = 1e-12);

// ---------------------------------------------------------------------------

struct WeakContainmentRow {
  std::string element;
  double coef_mu_lo = 0, coef_mu_hi = 0;
  double coef_nu_matrix = 0, coef_nu_direct = 0;
  double diff_hi = 0;  // certified upper bound on |coef_mu - coef_nu|
};

struct WeakContainmentReport {
  std::size_t k_eps = 0;
  double y_mass = 0;          // mu(Y_{k_eps})
  double worst_pullback = 0;  // min over g of mu(g^-1 Y)
  double bound = 0;           // 2 C^2 eps
  std::vector<WeakContainmentRow> rows;
  bool pass = false;
};

// Matrix-coefficient transfer experiment: builds Y_{k_eps}, the density
// correction Phi = sqrt(d mu^k / d nu^k) and the transported vector, and
// certifies the 2 C^2 eps bound.  f is a depth-n coefficient vector in the
// unnormalized indicator basis (values of the function on depth-n cylinders).
WeakContainmentReport weak_containment_experiment(
    const GeneratedGroup& G, const std::vector<std::string>& elements,
    const ProductMeasure& mu, const ProductMeasure& nu, const std::vector<double>& f,
    std::size_t n, double eps, std::size_t k_cap = 14, bool drop_phi = false);

}  // namespace treedyn

#endif
