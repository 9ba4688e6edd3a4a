#include "treedyn/koopman.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace treedyn {

namespace {

// certifies that every section reachable from (g at depth `level`) preserves
// its level distribution; classes of (node, level) collapse through the
// measure's normal form and the shape period
bool preserves_levels_from(const Automorphism& g, const ProductMeasure& mu,
                           std::size_t level, std::size_t cap) {
  const auto& nf = mu.normal_form();
  std::size_t period = nf.cycle.size();
  auto cls = [&](std::size_t lvl) {
    return lvl <= nf.head_len ? lvl : nf.head_len + 1 + (lvl - nf.head_len - 1) % period;
  };
  std::set<std::pair<const detail::Node*, std::size_t>> seen;
  std::vector<std::pair<Automorphism, std::size_t>> work{{g, level}};
  while (!work.empty()) {
    auto [a, lvl] = std::move(work.back());
    work.pop_back();
    if (a.raw() == nullptr) continue;
    if (!seen.emplace(a.raw(), cls(lvl)).second) continue;
    if (seen.size() > cap) throw CapExceeded("level-preservation closure exceeded cap");
    try {
      if (a.is_identity()) continue;
    } catch (const NoActivityBound&) {
      // fall through and check the visible permutation layer by layer
    }
    if (!mu.level_distribution(lvl).preserved_by(a.root_perm())) return false;
    for (std::uint32_t x = 0; x < a.arity(); ++x) work.push_back({a.section(x), lvl + 1});
  }
  return true;
}

}  // namespace

std::optional<Prefix> depth_compatibility_witness(const Automorphism& g,
                                                  const ProductMeasure& mu, std::size_t n,
                                                  std::uint64_t cap) {
  require_same_shape(g.shape(), mu.shape());
  std::vector<Prefix> level = enumerate_level(g.shape(), n, cap);
  for (const auto& y : level) {
    if (!preserves_levels_from(g.section(y), mu, n + 1, 1 << 20)) return y;
  }
  return std::nullopt;
}

KoopmanMatrix koopman_matrix(const Automorphism& g, const ProductMeasure& mu, std::size_t n,
                             std::uint64_t cap) {
  auto witness = depth_compatibility_witness(g, mu, n, cap);
  if (witness)
    throw NotDepthCompatible("sections below depth " + std::to_string(n) +
                                 " do not preserve the measure",
                             witness->str());
  LevelPermutation table = level_projection(g, n, cap);
  KoopmanMatrix out;
  out.shape = g.shape();
  out.level = n;
  out.permutation = table.table;
  const auto N = static_cast<Eigen::Index>(table.table.size());
  out.mat = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index y = 0; y < N; ++y)
    out.mat(static_cast<Eigen::Index>(table.table[static_cast<std::size_t>(y)]), y) = 1.0;
  return out;
}

Rational KoopmanMatrix::entry_ratio_squared(const ProductMeasure& mu,
                                            std::uint64_t from) const {
  Prefix y = Prefix::from_rank(shape, level, from);
  Prefix img = Prefix::from_rank(shape, level, permutation[from]);
  return mu.cylinder_measure(y) / mu.cylinder_measure(img);
}

double unitarity_defect(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd d = m.transpose() * m - Eigen::MatrixXd::Identity(m.rows(), m.cols());
  return d.cwiseAbs().maxCoeff();
}

FixedSpace fixed_space(const std::vector<KoopmanMatrix>& mats, double sv_cutoff) {
  if (mats.empty()) throw ConfigError("fixed_space needs at least one matrix");
  const Eigen::Index N = mats.front().mat.rows();
  for (const auto& m : mats)
    if (m.mat.rows() != N) throw ConfigError("fixed_space: dimension mismatch");
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(mats.size()) * N, N);
  for (std::size_t i = 0; i < mats.size(); ++i)
    stacked.middleRows(static_cast<Eigen::Index>(i) * N, N) =
        mats[i].mat - Eigen::MatrixXd::Identity(N, N);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > sv_cutoff) ++rank;
  FixedSpace out;
  out.dimension = static_cast<int>(N) - rank;
  out.basis = svd.matrixV().rightCols(out.dimension);
  return out;
}

// ---------------------------------------------------------------------------

Enclosure integral_sqrt_rn(const Automorphism& g, const ProductMeasure& mu, const Prefix& y,
                           std::size_t refine_depth) {
  require_same_shape(g.shape(), mu.shape());
  Enclosure acc{0, 0};
  struct Frame {
    Automorphism sec;
    std::vector<std::uint32_t> in, img;
  };
  Prefix img0 = apply(g, y);
  std::vector<Frame> stack{{g.section(y), y.letters(), img0.letters()}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    Prefix cyl(g.shape(), f.in);
    Prefix img(g.shape(), f.img);
    bool constant = false;
    try {
      constant = f.sec.is_identity() ||
                 preserves_levels_from(f.sec, mu, f.in.size() + 1, 1 << 16);
    } catch (const NoActivityBound&) {
      constant = false;
    }
    Rational mc = mu.cylinder_measure(cyl);
    Rational mi = mu.cylinder_measure(img);
    if (constant) {
      // rn == mu(img)/mu(cyl) on the whole cylinder
      double term = std::sqrt(to_double(mi) * to_double(mc));
      acc.lo += term;
      acc.hi += term;
      continue;
    }
    if (f.in.size() >= refine_depth) {
      // Cauchy-Schwarz remainder: 0 <= integral <= sqrt(mu(g cyl) mu(cyl))
      acc.hi += std::sqrt(to_double(mi) * to_double(mc));
      continue;
    }
    Perm root = f.sec.root_perm();
    for (std::uint32_t a = 0; a < f.sec.arity(); ++a) {
      Frame child{f.sec.section(a), f.in, f.img};
      child.in.push_back(a);
      child.img.push_back(root(a));
      stack.push_back(std::move(child));
    }
  }
  return acc;
}

namespace {

std::vector<double> refine_vector(const std::vector<double>& v, std::size_t from_depth,
                                  std::size_t to_depth, const ProductMeasure& mu) {
  // normalized-basis coefficients push down with sqrt of conditional masses
  std::vector<double> cur = v;
  ShapePtr shape = mu.shape();
  std::size_t d = from_depth;
  while (d < to_depth) {
    std::uint32_t q = shape->arity(d + 1);
    const auto& p = mu.level_probs(d + 1);
    std::vector<double> next(cur.size() * q);
    for (std::size_t i = 0; i < cur.size(); ++i)
      for (std::uint32_t a = 0; a < q; ++a)
        next[i * q + a] = cur[i] * std::sqrt(to_double(p[a]));
    cur = std::move(next);
    ++d;
  }
  return cur;
}

}  // namespace

std::vector<RigidityStep> rigidity_trace(const GeneratedGroup& G, const ProductMeasure& mu,
                                         const std::vector<std::pair<std::size_t, Word>>& chain,
                                         const BoundaryPoint& ray,
                                         const std::vector<double>& f,
                                         const std::vector<double>& r,
                                         std::size_t vector_depth,
                                         std::size_t refine_depth) {
  std::vector<RigidityStep> out;
  for (const auto& [m, word] : chain) {
    RigidityStep step;
    step.depth = m;
    step.witness = word;
    Automorphism g = G.evaluate(word);
    Prefix O = project(ray, m);
    if (!supported_inside(g, O))
      throw ConfigError("rigidity witness at depth " + std::to_string(m) +
                        " is not supported inside the chain cylinder");
    if (g.is_identity())
      throw ConfigError("rigidity witness at depth " + std::to_string(m) + " is trivial");

    std::size_t depth = std::max(vector_depth, m);
    std::vector<double> fv = refine_vector(f, vector_depth, depth, mu);
    std::vector<double> rv = refine_vector(r, vector_depth, depth, mu);
    LevelPermutation table = level_projection(g, depth);

    // <kappa(g) f, r> with per-cylinder enclosures
    double lo = 0, hi = 0;
    for (std::size_t z = 0; z < fv.size(); ++z) {
      double c = fv[z] * rv[table.table[z]];
      if (c == 0) continue;
      Prefix cyl = Prefix::from_rank(mu.shape(), depth, z);
      Prefix img = Prefix::from_rank(mu.shape(), depth, table.table[z]);
      Enclosure w = integral_sqrt_rn(g, mu, cyl, refine_depth);
      double scale = 1.0 / std::sqrt(to_double(mu.cylinder_measure(cyl)) *
                                     to_double(mu.cylinder_measure(img)));
      double a = c * w.lo * scale, b = c * w.hi * scale;
      lo += std::min(a, b);
      hi += std::max(a, b);
    }
    double ip = 0, ip_inside = 0, norm_f = 0, norm_r = 0;
    std::uint64_t o_rank = O.rank();
    std::uint64_t span = 1;
    for (std::size_t j = m + 1; j <= depth; ++j) span *= mu.shape()->arity(j);
    for (std::size_t z = 0; z < fv.size(); ++z) {
      ip += fv[z] * rv[z];
      norm_f += fv[z] * fv[z];
      norm_r += rv[z] * rv[z];
      if (z / span == o_rank) ip_inside += fv[z] * rv[z];
    }
    step.mu_O = to_double(mu.cylinder_measure(O));
    step.value_lo = std::max(0.0, std::min(std::abs(lo - ip), std::abs(hi - ip)));
    if ((lo - ip) * (hi - ip) <= 0) step.value_lo = 0;
    step.value_hi = std::max(std::abs(lo - ip), std::abs(hi - ip));
    step.bound = std::sqrt(norm_f) * std::sqrt(step.mu_O) * std::sqrt(norm_r) +
                 std::abs(ip_inside);
    step.ok = step.value_hi <= step.bound + 1e-12;
    out.push_back(std::move(step));
  }
  return out;
}

FiltrationReport level_filtration_check(const GeneratedGroup& G, std::size_t n, double tol) {
  ProductMeasure haar = ProductMeasure::uniform(G.shape());
  FiltrationReport rep;
  rep.depth = n;
  rep.tolerance = tol;
  std::vector<KoopmanMatrix> mats;
  for (const auto& name : G.names())
    mats.push_back(koopman_matrix(G.generator(name), haar, n));
  const Eigen::Index N = mats.front().mat.rows();

  // Q_k: projector onto depth-k cylinder functions inside the depth-n space
  auto q_projector = [&](std::size_t k) {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N, N);
    std::uint64_t span = 1;
    for (std::size_t j = k + 1; j <= n; ++j) span *= G.shape()->arity(j);
    double w = 1.0 / static_cast<double>(span);
    for (Eigen::Index z = 0; z < N; ++z) {
      std::uint64_t blk = static_cast<std::uint64_t>(z) / span;
      for (std::uint64_t z2 = blk * span; z2 < (blk + 1) * span; ++z2)
        Q(z, static_cast<Eigen::Index>(z2)) = w;
    }
    return Q;
  };

  Eigen::MatrixXd prev = q_projector(0);
  double worst = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    Eigen::MatrixXd Pk;
    if (k == 0) {
      Pk = prev;
    } else {
      Eigen::MatrixXd cur = q_projector(k);
      Pk = cur - prev;
      prev = cur;
    }
    for (const auto& m : mats) {
      Eigen::MatrixXd comm = m.mat * Pk - Pk * m.mat;
      worst = std::max(worst, comm.cwiseAbs().maxCoeff());
    }
  }
  rep.worst_commutator = worst;
  rep.pass = worst <= tol;
  return rep;
}

// ---------------------------------------------------------------------------

WeakContainmentReport weak_containment_experiment(
    const GeneratedGroup& G, const std::vector<std::string>& elements,
    const ProductMeasure& mu, const ProductMeasure& nu, const std::vector<double>& f,
    std::size_t n, double eps, std::size_t k_cap, bool drop_phi) {
  require_same_shape(mu.shape(), nu.shape());
  WeakContainmentReport rep;
  double big_c = 0;
  for (double v : f) big_c = std::max(big_c, std::abs(v));
  rep.bound = 2.0 * big_c * big_c * eps;

  std::vector<Automorphism> gs;
  for (const auto& name : elements) gs.push_back(G.generator(name));

  // find k_eps: mu(Y_k) > 1-eps and mu(g^-1 Y_k) > 1-eps
  std::size_t k_eps = 0;
  std::vector<char> in_y;
  std::vector<LevelPermutation> tables;
  for (std::size_t k = n + 1; k <= k_cap; ++k) {
    std::vector<Prefix> level = enumerate_level(mu.shape(), k);
    in_y.assign(level.size(), 1);
    for (std::size_t zi = 0; zi < level.size(); ++zi) {
      for (const auto& g : gs) {
        Automorphism s = g.section(level[zi]);
        bool below_trivial = true;
        for (std::uint32_t a = 0; a < s.arity() && below_trivial; ++a)
          below_trivial = s.section(a).is_identity();
        if (!below_trivial) {
          in_y[zi] = 0;
          break;
        }
      }
    }
    Rational y_mass = 0;
    for (std::size_t zi = 0; zi < level.size(); ++zi)
      if (in_y[zi]) y_mass += mu.cylinder_measure(level[zi]);
    if (!(to_double(y_mass) > 1.0 - eps)) continue;
    tables.clear();
    bool ok = true;
    Rational worst_pull = 1;
    for (const auto& g : gs) {
      LevelPermutation t = level_projection(g, k);
      Rational pull = 0;
      for (std::size_t zi = 0; zi < level.size(); ++zi)
        if (in_y[t.table[zi]]) pull += mu.cylinder_measure(level[zi]);
      if (!(to_double(pull) > 1.0 - eps)) {
        ok = false;
        break;
      }
      worst_pull = std::min(worst_pull, pull);
      tables.push_back(std::move(t));
    }
    if (!ok) continue;
    k_eps = k;
    rep.y_mass = to_double(y_mass);
    rep.worst_pullback = to_double(worst_pull);
    break;
  }
  if (k_eps == 0) throw KEpsNotFound("no admissible depth within the cap");
  rep.k_eps = k_eps;

  std::vector<Prefix> level = enumerate_level(mu.shape(), k_eps);
  std::uint64_t span = 1;
  for (std::size_t j = n + 1; j <= k_eps; ++j) span *= mu.shape()->arity(j);

  // transported vector: f(pi_n z) * Phi(z) * 1_Y(z)
  std::vector<double> ft(level.size());
  for (std::size_t zi = 0; zi < level.size(); ++zi) {
    if (!in_y[zi]) continue;
    double phi = drop_phi ? 1.0
                          : std::sqrt(to_double(mu.cylinder_measure(level[zi]) /
                                                nu.cylinder_measure(level[zi])));
    ft[zi] = f[zi / span] * phi;
  }

  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
    WeakContainmentRow row;
    row.element = elements[gi];
    const LevelPermutation& t = tables[gi];
    LevelPermutation tinv = t.inverse();

    // mu-side coefficient with enclosures
    double lo = 0, hi = 0;
    for (std::size_t zi = 0; zi < level.size(); ++zi) {
      double c = f[tinv.table[zi] / span] * f[zi / span];
      if (c == 0) continue;
      // integral over [z] of sqrt(d(mu o g^{-1})/d mu) equals the integral
      // over [g^{-1} z] of sqrt(d(mu o g)/d mu)
      Prefix src = level[tinv.table[zi]];
      Enclosure w = integral_sqrt_rn(gs[gi], mu, src);
      double a = c * w.lo, b = c * w.hi;
      lo += std::min(a, b);
      hi += std::max(a, b);
    }
    row.coef_mu_lo = lo;
    row.coef_mu_hi = hi;

    // nu-side: on Y the sections are trivial below k_eps, so the RN factor is
    // the exact cylinder ratio
    double direct = 0;
    for (std::size_t zi = 0; zi < level.size(); ++zi) {
      std::uint64_t pre = tinv.table[zi];
      if (!in_y[zi] || !in_y[pre]) continue;
      double term = ft[pre] * ft[zi] *
                    std::sqrt(to_double(nu.cylinder_measure(level[pre]) *
                                        nu.cylinder_measure(level[zi])));
      direct += term;
    }
    row.coef_nu_direct = direct;

    // matrix route on the Y-restricted isometry in the normalized basis
    double viamat = 0;
    {
      std::vector<double> fn(level.size(), 0.0);
      for (std::size_t zi = 0; zi < level.size(); ++zi)
        if (in_y[zi])
          fn[zi] = ft[zi] * std::sqrt(to_double(nu.cylinder_measure(level[zi])));
      for (std::size_t zi = 0; zi < level.size(); ++zi) {
        std::uint64_t img = t.table[zi];
        if (!in_y[zi]) continue;
        viamat += fn[zi] * fn[img];
      }
    }
    row.coef_nu_matrix = viamat;

    row.diff_hi = std::max(std::abs(row.coef_mu_lo - direct), std::abs(row.coef_mu_hi - direct));
    rep.rows.push_back(std::move(row));
  }
  rep.pass = true;
  for (const auto& row : rep.rows) {
    if (row.diff_hi >= rep.bound) rep.pass = false;
    if (std::abs(row.coef_nu_matrix - row.coef_nu_direct) > 1e-12) rep.pass = false;
  }
  return rep;
}

}  // namespace treedyn
