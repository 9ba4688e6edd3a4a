#ifndef TREEDYN_CONSTRUCTIONS_HPP
#define TREEDYN_CONSTRUCTIONS_HPP

#include <optional>
#include <string>
#include <vector>

#include "treedyn/cocycle.hpp"
#include "treedyn/group.hpp"
#include "treedyn/measures.hpp"

namespace treedyn {

// ---------------------------------------------------------------------------
// Core corpus groups

// The four-generator torsion group on the binary tree, with the residue
// conventions b: flip iff k != 0 (mod 3), c: k != 1, d: k != 2, where k counts
// the leading ones before the first zero.  Wreath recursions close as
// a, b=(1,d), c=(a,b), d=(a,c); all fix the all-ones ray.
GeneratedGroup grigorchuk();

// Even-weight subgroup of the elementary abelian translation group: one
// generator per coordinate pair i<j <= span, each flipping exactly those two
// coordinates.
GeneratedGroup parity_group(std::size_t span = 6);

// Word over {a,b,c,d} supported inside [1^m] and nontrivial there, from the
// substitution ladder a->aca, b->c, c->d, d->b applied to (ad)^2.  Each call
// verifies support and nontriviality exactly and throws if either fails.
Word grigorchuk_rist_word(const GeneratedGroup& grig, std::size_t m);

// ---------------------------------------------------------------------------
// Rule-element constructions

struct FactorialElement {
  Automorphism g;
  FinitaritySchedule schedule;
  // closed forms: |F_{k!}| = 2^{(k-1)!} and F_n empty off factorials
  static bool level_active(std::size_t n);              // n in {2, 6, 24, ...}
  static std::optional<std::size_t> factorial_index(std::size_t n);  // k with k! == n
};
FactorialElement factorial_element(ShapePtr shape);

struct OrthogonalPairStage {
  std::size_t level = 0;   // n_k (sections flip coordinate level+1)
  long threshold = 0;      // D_k = {words with <= threshold ones}
  Rational mu_mass;        // mu(U_k) > 1 - 2^-k
  Rational nu_mass;        // nu(U_k) < 2^-k
};

struct OrthogonalPairElement {
  Automorphism g;
  std::vector<OrthogonalPairStage> stages;
  FinitaritySchedule nu_schedule;
};
// Example element that is nu-finitary but not mu-finitary, built by exact
// likelihood-ratio separation of the two measures.
OrthogonalPairElement orthogonal_pair_element(const ProductMeasure& mu,
                                              const ProductMeasure& nu,
                                              std::size_t stages,
                                              std::size_t max_depth = 64);

struct SeparatingStage {
  std::size_t level = 0;  // n_k
  Rational eps;
  long count_lo = 0, count_hi = 0;  // B_{theta,n_k,eps_k} as a count window
  Rational theta_mass;              // > 1 - k^-2
  std::vector<Rational> net;        // finite net of Lambda_k
  Rational worst_net_mass;          // min over net of B_{lambda,...} mass
};

struct SeparatingElement {
  Rational theta;
  Automorphism g;
  std::vector<SeparatingStage> stages;
  FinitaritySchedule theta_schedule;
};
// mu_theta-finitary element whose F-sets exhaust other Bernoulli parameters,
// with every WLLN step replaced by exact binomial tail searches.
SeparatingElement separating_element(const Rational& theta, std::size_t stages,
                                     std::size_t level_cap = 4096);

struct SmStage {
  std::size_t level = 0;     // m
  unsigned long ones = 0;    // count class j*
  Int class_size;            // C(m, j*)
  Int taken;                 // |B_m|: first `taken` class members in lex order
  Rational mass;             // mu(B_m) >= m^-2
  double log_pinch = 0;      // |log(mu word)/m + h|
};

struct SmElements {
  double h = 0;
  std::size_t start = 0;               // the emitted generator g_start
  Automorphism g;
  std::vector<SmStage> stages;         // levels start..window_hi
  FinitaritySchedule schedule;
};
// Typical-set driven generator whose F-counts bifurcate at e^{-h}.
SmElements sm_elements(const ProductMeasure& mu, std::size_t start, std::size_t window_hi);

// combinadic rank of a binary word inside its fixed-weight class (lex order)
Int weight_class_rank(const std::vector<std::uint32_t>& word);

// ---------------------------------------------------------------------------
// Block families (dissipative / conservative non-ergodic)

struct BlockStage {
  std::size_t lo = 0, hi = 0;  // block = coordinates (lo, hi], even length
  Rational eps;
  Rational y_mass;  // mass of the constrained block set, > 1 - eps
};

struct DissipativeFamily {
  GeneratedGroup group;                // gamma_k, k = 1..K
  ProductMeasure mu;
  std::vector<std::size_t> schedule;   // n_0=1 < n_1 < ... < n_K
  std::vector<BlockStage> blocks;      // block k = (n_k, n_{k+1}]
  Rational y_mass_lower;               // prod of built block masses
};
DissipativeFamily dissipative_group(const ProductMeasure& mu, std::size_t stages);

// Exact wandering check: g Y and Y differ in block max(S) by count windows.
bool wandering_block_check(const DissipativeFamily& fam, const Word& w, std::string* why);

struct NonErgodicFamily {
  bool weakly_branch = false;
  ProductMeasure mu;
  std::vector<std::size_t> schedule;
  std::vector<BlockStage> blocks;      // constrained parts exclude the free coordinate
  GeneratedGroup G;                    // gamma-tilde generators
  GeneratedGroup H;                    // free-coordinate flips (restricted in the branch variant)
  GeneratedGroup M;                    // everything together
  Rational ytilde_mass_lower;
  // invariant split of Ytilde on the first constrained coordinate
  std::size_t split_coordinate = 0;
  Rational a_mass, b_mass;
};
NonErgodicFamily conservative_nonergodic_group(const ProductMeasure& mu, std::size_t stages);
NonErgodicFamily weakly_branch_nonergodic_group(const ProductMeasure& mu, std::size_t stages);

bool ytilde_disjoint_check(const NonErgodicFamily& fam, const Word& w, std::string* why);
// exact coordinate bookkeeping; words evaluate over the combined group
bool ytilde_invariant_under(const NonErgodicFamily& fam, const Word& h_word);

// ---------------------------------------------------------------------------
// Measure family (uncountably many compatible measures)

struct BetaPairs {
  std::vector<Rational> b0, b1;  // the two level distributions; constant over levels
};

struct FamilyStage {
  std::size_t level = 0;       // n_l
  std::size_t pair_depth = 0;  // n_{l-1}
  // BFS transversal of the level action, stored as parent links: base rank 0,
  // edge index -1 there; words t_y materialize on demand
  std::vector<std::string> edge_names;
  std::vector<int> edge_exps;
  std::vector<std::int32_t> parent_edge;
  std::vector<std::uint64_t> parent_rank;
  // per-prefix exclusion counts at level n_l - 1
  std::vector<std::uint64_t> cnt_inv;  // |bad(t_y^{-1}) inside [y]|
  std::vector<std::uint64_t> cnt_fwd;  // |bad(t_y)| (global)
  std::vector<std::uint64_t> cnt_gen;  // |union_j bad(g^(j)) inside [y]|
  Rational worst_fraction;             // certified bound over all pairs
  Rational bound;                      // 10^{-l}

  Word base_word(std::uint64_t rank) const;
  // generator factors of t_y (outermost first), without Word overhead
  std::vector<Automorphism> base_factors(const GeneratedGroup& G, std::uint64_t rank,
                                         bool inverse) const;
};

struct MeasureFamily {
  ShapePtr shape;
  BetaPairs betas;
  std::vector<std::size_t> levels;  // built prefix of the override set
  std::size_t tail_stride = 0;      // declared continuation beyond the build
  std::vector<FamilyStage> stages;
  std::vector<Word> controlled;  // g^(1)..g^(L) in enumeration order

  // lambda^omega: overrides at built levels by omega's bits, continued along
  // the declared arithmetic tail with the tail bit's distribution.
  ProductMeasure lambda_omega(const OmegaWord& w) const;
  // stage measure lambda^eta for eta in {0,1}^(l-1)
  ProductMeasure lambda_eta(const std::vector<int>& eta) const;

  Word transporter(std::size_t stage, std::uint64_t from_rank, std::uint64_t to_rank) const;
};

struct FamilyBuildParams {
  std::size_t stages = 3;
  std::size_t pair_cap = 4096;     // max prefixes at a pair depth
  std::size_t level_window = 40;   // search width for each n_l
  std::size_t ball_radius = 2;     // enumeration of controlled elements
};

MeasureFamily build_measure_family(const GeneratedGroup& G, const BetaPairs& betas,
                                   const FamilyBuildParams& params = {});

struct CompatibilityRow {
  std::size_t stage = 0;
  std::size_t level = 0;
  std::size_t pair_depth = 0;
  Rational worst_fraction;
  Rational bound;
  std::size_t pairs_checked = 0;      // fraction bound evaluations
  std::size_t rn_cylinders_checked = 0;  // exact RN equalities verified
  bool pass = false;
};

struct CompatibilityReport {
  bool pass = false;
  std::vector<CompatibilityRow> rows;
  std::string ergodicity_note;  // stated consequence when all rows pass
};

// Re-checks the Definition-style conditions for lambda^omega on every built
// stage: mass bounds from recomputed exclusion data, transporter containment,
// and exact RN constancy on member cylinders (all cylinders while the stage
// is small, a pinned deterministic sample beyond that).
CompatibilityReport verify_compatibility(const GeneratedGroup& G, const MeasureFamily& fam,
                                         const OmegaWord& omega,
                                         std::size_t rn_sample_per_pair = 2,
                                         std::size_t pair_sample = 64);

}  // namespace treedyn

#endif
