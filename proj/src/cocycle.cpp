#include "treedyn/cocycle.hpp"

#include <cmath>

#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace treedyn {

RadonNikodymValue rn_along(const Automorphism& g, const ProductMeasure& mu,
                           const Automorphism& w, const BoundaryPoint& x,
                           std::size_t horizon) {
  require_same_shape(g.shape(), mu.shape());
  require_same_shape(g.shape(), x.shape());
  const auto& nf = mu.normal_form();
  const std::size_t mu_head = nf.head_len;
  const std::size_t mu_period = nf.cycle.size();
  const std::size_t x_head = x.head_size();
  const std::size_t x_period = x.cycle().size();
  const std::size_t phase_floor = std::max(mu_head, x_head);

  Automorphism cur_g = g;
  Automorphism cur_w = w;
  Rational product = 1;
  std::size_t last_violation = 0;

  using Phase = std::tuple<const void*, const void*, std::size_t, std::size_t>;
  std::map<Phase, std::pair<std::size_t, std::size_t>> seen;  // phase -> (step, last_violation)

  for (std::size_t i = 1; i <= horizon; ++i) {
    // certified: the remaining section acts trivially, so all later factors
    // preserve every level
    bool ident;
    try {
      ident = cur_g.is_identity();
    } catch (const NoActivityBound&) {
      ident = false;
    }
    if (ident) return RadonNikodymValue{product, last_violation};
    if (i > phase_floor) {
      Phase ph{cur_g.raw(), cur_w.raw(),
               (i - x_head - 1) % x_period,
               (i - mu_head - 1) % mu_period};
      auto it = seen.find(ph);
      if (it != seen.end()) {
        // the walk from step it->second.first repeats forever
        if (last_violation < it->second.first)
          return RadonNikodymValue{product, last_violation};
        throw NotStabilized(horizon);
      }
      seen.emplace(ph, std::make_pair(i, last_violation));
    }
    std::uint32_t xi = x.letter(i);
    std::uint32_t yi = cur_w.root_perm()(xi);  // letter of w(x) at level i
    const auto& p = mu.level_probs(i);
    Perm root = cur_g.root_perm();
    if (!mu.level_distribution(i).preserved_by(root)) last_violation = i;
    product *= p[root(yi)] / p[yi];
    cur_g = cur_g.section(yi);
    cur_w = cur_w.section(xi);
  }
  throw NotStabilized(horizon);
}

RadonNikodymValue rn_derivative(const Automorphism& g, const ProductMeasure& mu,
                                const BoundaryPoint& x, std::size_t horizon) {
  return rn_along(g, mu, Automorphism::identity(g.shape()), x, horizon);
}

// ---------------------------------------------------------------------------

namespace {

bool section_nontrivial_strictly_below(const Automorphism& s, std::size_t lookahead,
                                       bool& exact) {
  // exact route first: some child subtree acts nontrivially
  try {
    for (std::uint32_t a = 0; a < s.arity(); ++a)
      if (!s.section(a).is_identity()) return true;
    return false;
  } catch (const NoActivityBound&) {
    if (lookahead == 0) throw;  // refuse rather than silently truncate
    exact = false;
  }
  // bounded lookahead: scan root perms of proper extensions
  struct Frame {
    Automorphism a;
    std::size_t d;
  };
  std::vector<Frame> stack;
  for (std::uint32_t a = 0; a < s.arity(); ++a) stack.push_back({s.section(a), 1});
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (!f.a.root_perm().is_identity()) return true;
    if (f.d >= lookahead) continue;
    for (std::uint32_t a = 0; a < f.a.arity(); ++a)
      stack.push_back({f.a.section(a), f.d + 1});
  }
  return false;
}

}  // namespace

FinitarySets f_sets(const Automorphism& g, std::size_t n, FVariant variant,
                    const ProductMeasure* mu, std::size_t lookahead, std::uint64_t cap) {
  if (variant == FVariant::plus && mu == nullptr)
    throw ConfigError("plus variant needs a measure");
  FinitarySets out;
  out.level = n;
  out.variant = variant;

  // constructions narrow the scan to their active levels
  // (plain/plus only; bullet looks below)
  // DFS over all depth-n prefixes, walking sections once per node.
  level_size_checked(*g.shape(), n, cap);
  struct Frame {
    Automorphism a;
    std::vector<std::uint32_t> in;
  };
  std::vector<Frame> stack{{g, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.in.size() == n) {
      bool member = false;
      switch (variant) {
        case FVariant::plain:
          member = !f.a.root_perm().is_identity();
          break;
        case FVariant::plus:
          member = !mu->level_distribution(n + 1).preserved_by(f.a.root_perm());
          break;
        case FVariant::bullet:
          member = section_nontrivial_strictly_below(f.a, lookahead, out.exact);
          break;
      }
      if (member) {
        out.members.emplace_back(g.shape(), f.in);
        out.cardinality += 1;
        if (mu) out.measure += mu->letters_mass(0, f.in);
      }
      continue;
    }
    std::uint32_t q = g.shape()->arity(f.in.size() + 1);
    for (std::uint32_t a = q; a > 0; --a) {
      Frame child{f.a.section(a - 1), f.in};
      child.in.push_back(a - 1);
      stack.push_back(std::move(child));
    }
  }
  std::sort(out.members.begin(), out.members.end());
  return out;
}

namespace {

// Mass/count vectors over the section closure, one step per level.
struct ClosureDp {
  const SectionClosure* sc;
  std::vector<Rational> mass;  // per node
  std::vector<Int> count;

  explicit ClosureDp(const SectionClosure& c) : sc(&c) {
    mass.assign(c.root.size(), Rational(0));
    count.assign(c.root.size(), Int(0));
    mass[0] = 1;
    count[0] = 1;
  }

  void step(const std::vector<Rational>& p) {
    std::vector<Rational> m2(mass.size(), Rational(0));
    std::vector<Int> c2(count.size(), Int(0));
    for (std::size_t s = 0; s < mass.size(); ++s) {
      if (mass[s] == 0 && count[s] == 0) continue;
      for (std::uint32_t a = 0; a < sc->alphabet; ++a) {
        auto t = sc->next[s][a];
        m2[t] += mass[s] * p[a];
        c2[t] += count[s];
      }
    }
    mass = std::move(m2);
    count = std::move(c2);
  }
};

bool is_member_state(const SectionClosure& sc, std::size_t s, FVariant variant,
                     const LevelDistribution& next_level) {
  switch (variant) {
    case FVariant::plain:
      return !sc.root[s].is_identity();
    case FVariant::plus:
      return !next_level.preserved_by(sc.root[s]);
    case FVariant::bullet:
      return sc.live[s];
  }
  return false;
}

}  // namespace

FStats f_stats(const Automorphism& g, std::size_t n, FVariant variant,
               const ProductMeasure& mu, std::uint64_t cap) {
  auto sc = section_closure(g);
  if (sc) {
    ClosureDp dp(*sc);
    for (std::size_t l = 1; l <= n; ++l) dp.step(mu.level_probs(l));
    FStats st;
    LevelDistribution next = mu.level_distribution(n + 1);
    for (std::size_t s = 0; s < sc->root.size(); ++s) {
      if (!is_member_state(*sc, s, variant, next)) continue;
      st.count += dp.count[s];
      st.mass += dp.mass[s];
    }
    return st;
  }
  FinitarySets fs = f_sets(g, n, variant, &mu, 0, cap);
  return FStats{fs.cardinality, fs.measure, fs.exact};
}

std::string to_string(Verdict::State s) {
  switch (s) {
    case Verdict::State::holds: return "holds";
    case Verdict::State::fails: return "fails";
    case Verdict::State::unknown: return "unknown";
  }
  return "?";
}

std::vector<double> default_delta_grid(std::uint32_t arity) {
  // informative regime: delta must exceed 1/arity
  double lo = 1.0 / arity;
  return {lo + 0.01, lo + 0.1, lo + 0.25, lo + 0.4};
}

namespace {

// Exact geometric certification: with the closure transition matrices
// periodic in the level (measure normal form), a proportional pair of state
// vectors v_{n0+p} = r v_{n0} forces v_{n+p} = r v_n for all n >= n0.
struct GeometricTail {
  bool found = false;
  std::size_t n0 = 0, period = 0;
  Rational ratio;
};

GeometricTail detect_geometric(const std::vector<std::vector<Rational>>& vectors,
                               std::size_t mu_head, std::size_t mu_period) {
  GeometricTail gt;
  // any multiple of the measure period keeps the transition matrices aligned
  for (std::size_t mult = 1; mult * mu_period <= 12; ++mult) {
    std::size_t p = mult * mu_period;
    for (std::size_t n0 = mu_head; n0 + p < vectors.size(); ++n0) {
      const auto& v = vectors[n0];
      const auto& w = vectors[n0 + p];
      Rational r;
      bool have_r = false, ok = true;
      for (std::size_t s = 0; s < v.size() && ok; ++s) {
        if (v[s] == 0) {
          if (w[s] != 0) ok = false;
          continue;
        }
        Rational cand = w[s] / v[s];
        if (!have_r) {
          r = cand;
          have_r = true;
        } else if (cand != r) {
          ok = false;
        }
      }
      if (!ok) continue;
      if (!have_r) r = 0;  // zero vector stays zero
      gt.found = true;
      gt.n0 = n0;
      gt.period = p;
      gt.ratio = r;
      return gt;
    }
  }
  return gt;
}

}  // namespace

FinitarityReport finitarity_report(const Automorphism& g, const ProductMeasure& mu,
                                   std::size_t horizon,
                                   const std::vector<double>& delta_grid,
                                   const FinitaritySchedule* schedule, std::uint64_t cap) {
  FinitarityReport rep;
  rep.delta_grid = delta_grid.empty() ? default_delta_grid(g.shape()->arity(1)) : delta_grid;
  rep.delta_terms.assign(rep.delta_grid.size(), {});

  auto sc = section_closure(g);
  std::vector<std::vector<Rational>> mass_vectors;  // per level, per closure node

  // the identity node is absorbing, so the non-identity coordinates evolve
  // autonomously; geometric detection runs on that sub-vector
  auto restrict_vec = [&](const std::vector<Rational>& v) {
    std::vector<Rational> out;
    for (std::size_t s = 0; s < v.size(); ++s)
      if (!(*sc).identity[s]) out.push_back(v[s]);
    return out;
  };
  if (sc) {
    ClosureDp dp(*sc);
    for (std::size_t n = 1; n <= horizon; ++n) {
      dp.step(mu.level_probs(n));
      mass_vectors.push_back(restrict_vec(dp.mass));
      FinitarityRow row;
      row.level = n;
      LevelDistribution next = mu.level_distribution(n + 1);
      for (std::size_t s = 0; s < sc->root.size(); ++s) {
        if (dp.count[s] == 0) continue;
        if (!sc->root[s].is_identity()) {
          row.f_count += dp.count[s];
          row.f_mass += dp.mass[s];
        }
        if (!next.preserved_by(sc->root[s])) {
          row.fplus_count += dp.count[s];
          row.fplus_mass += dp.mass[s];
        }
        if (sc->live[s]) row.fbullet_mass += dp.mass[s];
      }
      rep.rows.push_back(std::move(row));
    }
  } else {
    // the bullet scan costs a child identity check per prefix; keep it shallow
    const std::uint64_t bullet_cap = std::uint64_t{1} << 12;
    for (std::size_t n = 1; n <= horizon; ++n) {
      FinitarityRow row;
      row.level = n;
      bool known_empty = schedule && schedule->active && !schedule->active(n);
      if (!known_empty) {
        try {
          FinitarySets f = f_sets(g, n, FVariant::plain, &mu, 0, cap);
          FinitarySets fp = f_sets(g, n, FVariant::plus, &mu, 0, cap);
          row.f_count = f.cardinality;
          row.f_mass = f.measure;
          row.fplus_count = fp.cardinality;
          row.fplus_mass = fp.measure;
        } catch (const CapExceeded&) {
          row.computed = false;
        }
      }
      try {
        FinitarySets b = f_sets(g, n, FVariant::bullet, &mu, 0, bullet_cap);
        row.fbullet_mass = b.measure;
      } catch (const CapExceeded&) {
        row.fbullet_mass = -1;
      } catch (const NoActivityBound&) {
        row.fbullet_mass = -1;
      }
      rep.rows.push_back(std::move(row));
    }
  }

  for (const auto& row : rep.rows) {
    if (!row.computed) continue;
    rep.sum_f_mass += row.f_mass;
    rep.sum_fplus_mass += row.fplus_mass;
    for (std::size_t d = 0; d < rep.delta_grid.size(); ++d) {
      double term = mpz_get_d(row.f_count.get_mpz_t()) *
                    std::pow(rep.delta_grid[d], static_cast<double>(row.level));
      rep.delta_terms[d].push_back(term);
    }
  }

  const auto& nf = mu.normal_form();

  auto series_verdict = [&](auto mass_of_row, const char* label) -> Verdict {
    Verdict v;
    if (sc) {
      GeometricTail gt = detect_geometric(mass_vectors, nf.head_len, nf.cycle.size());
      if (gt.found) {
        // mass rows inherit the state-vector recurrence
        bool tail_zero = true;
        Rational block = 0;
        for (std::size_t n = gt.n0; n < gt.n0 + gt.period && n < rep.rows.size(); ++n) {
          block += mass_of_row(rep.rows[n]);
          if (mass_of_row(rep.rows[n]) != 0) tail_zero = false;
        }
        if (tail_zero || gt.ratio == 0) {
          v.state = Verdict::State::holds;
          v.evidence = Evidence::closed_form;
          v.detail = std::string(label) + " vanishes beyond level " + std::to_string(gt.n0);
        } else if (gt.ratio < 1) {
          v.state = Verdict::State::holds;
          v.evidence = Evidence::closed_form;
          v.detail = std::string(label) + " tail geometric with ratio " +
                     to_string(gt.ratio) + " per period " + std::to_string(gt.period);
        } else {
          v.state = Verdict::State::fails;
          v.evidence = Evidence::closed_form;
          v.detail = std::string(label) + " tail ratio " + to_string(gt.ratio) + " >= 1";
        }
        return v;
      }
    }
    v.state = Verdict::State::unknown;
    v.evidence = Evidence::partial_sums;
    v.detail = std::string(label) + ": partial sums only";
    return v;
  };

  rep.mu_finitary = series_verdict([](const FinitarityRow& r) { return r.f_mass; }, "sum mu(F_n)");
  rep.eventually_preserving =
      series_verdict([](const FinitarityRow& r) { return r.fplus_mass; }, "sum mu(F_n^+)");

  if (schedule) {
    // verify computed rows against the declared bound, then cite it
    bool rows_ok = true;
    std::size_t k = 0;
    for (const auto& row : rep.rows) {
      if (schedule->active && schedule->active(row.level)) {
        ++k;
        if (schedule->mass_bound && row.computed && row.f_mass > schedule->mass_bound(k)) {
          rows_ok = false;
          break;
        }
      } else if (schedule->active && row.computed && row.f_mass != 0) {
        rows_ok = false;
        break;
      }
    }
    if (rows_ok && schedule->bound_summable) {
      rep.mu_finitary.state = Verdict::State::holds;
      rep.mu_finitary.evidence = Evidence::closed_form;
      rep.mu_finitary.detail = "schedule '" + schedule->name + "': " + schedule->bound_description;
    }
    if (schedule->purely_finitary) {
      rep.purely_finitary.state = *schedule->purely_finitary ? Verdict::State::holds
                                                             : Verdict::State::fails;
      rep.purely_finitary.evidence = Evidence::closed_form;
      rep.purely_finitary.detail = "schedule '" + schedule->name + "': " + schedule->note;
    }
    if (schedule->w_subexponentially_bounded) {
      rep.w_subexp.state = *schedule->w_subexponentially_bounded ? Verdict::State::holds
                                                                 : Verdict::State::fails;
      rep.w_subexp.evidence = Evidence::closed_form;
      rep.w_subexp.detail = "schedule '" + schedule->name + "': " + schedule->bound_description;
    }
  }

  if (rep.purely_finitary.state == Verdict::State::unknown && sc) {
    GeometricTail gt = detect_geometric(mass_vectors, nf.head_len, nf.cycle.size());
    if (gt.found) {
      bool bullet_positive = false;
      for (std::size_t n = gt.n0; n < gt.n0 + gt.period && n < rep.rows.size(); ++n)
        if (rep.rows[n].fbullet_mass > 0) bullet_positive = true;
      if (!bullet_positive || gt.ratio < 1) {
        rep.purely_finitary.state = Verdict::State::holds;
        rep.purely_finitary.evidence = Evidence::closed_form;
        rep.purely_finitary.detail = "mu(F_n^bullet) tail geometric, ratio " + to_string(gt.ratio);
      } else if (gt.ratio >= 1 && bullet_positive) {
        rep.purely_finitary.state = Verdict::State::fails;
        rep.purely_finitary.evidence = Evidence::closed_form;
        rep.purely_finitary.detail = "mu(F_n^bullet) does not decay (ratio >= 1)";
      }
    }
  }

  if (rep.w_subexp.state == Verdict::State::unknown && sc) {
    // counts obey the same recurrence with the uniform-count transition
    std::vector<std::vector<Rational>> count_vectors;
    ClosureDp dp(*sc);
    std::vector<Rational> ones(sc->alphabet, Rational(1));
    for (std::size_t n = 1; n <= horizon; ++n) {
      dp.step(ones);  // mass with weight 1 per letter = counts
      count_vectors.push_back(restrict_vec(dp.mass));
    }
    GeometricTail gt = detect_geometric(count_vectors, 0, 1);
    if (gt.found) {
      // the count tail multiplies by gt.ratio every gt.period levels, so the
      // series against delta^n converges exactly when ratio * delta^period < 1
      double rho = to_double(gt.ratio);
      bool all = true;
      for (double d : rep.delta_grid)
        if (rho * std::pow(d, static_cast<double>(gt.period)) >= 1.0) all = false;
      rep.w_subexp.state = all ? Verdict::State::holds : Verdict::State::fails;
      rep.w_subexp.evidence = Evidence::closed_form;
      std::ostringstream os;
      os << "count tail ratio " << to_string(gt.ratio) << " per period " << gt.period;
      rep.w_subexp.detail = os.str();
    } else {
      rep.w_subexp.evidence = Evidence::partial_sums;
      rep.w_subexp.detail = "per-term trend over the horizon only";
    }
  }

  return rep;
}

ChainCheckResult cocycle_chain_check(const Automorphism& g, const Automorphism& h,
                                     const ProductMeasure& mu, std::size_t samples,
                                     std::uint64_t seed, std::size_t horizon) {
  ChainCheckResult res;
  CounterRng rng(seed);
  Automorphism gh = compose(g, h);
  Automorphism gi = invert(g);
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng sub = rng.substream(i);
    Prefix head = sample(mu, horizon / 2, sub.key());
    std::uint32_t tail_letter =
        static_cast<std::uint32_t>(sub.at(1 << 20) % mu.shape()->arity(horizon + 1));
    BoundaryPoint x(mu.shape(), head.letters(), {tail_letter});

    RadonNikodymValue lhs = rn_derivative(gh, mu, x, horizon);
    RadonNikodymValue rh = rn_derivative(h, mu, x, horizon);
    RadonNikodymValue rg = rn_along(g, mu, h, x, horizon);
    Rational defect = lhs.value - rg.value * rh.value;
    if (defect < 0) defect = -defect;
    if (defect > res.worst_defect) res.worst_defect = defect;
    if (defect != 0 && res.ok) {
      res.ok = false;
      res.witness = "chain defect at sample " + std::to_string(i);
    }

    RadonNikodymValue fwd = rn_derivative(g, mu, x, horizon);
    RadonNikodymValue bwd = rn_along(gi, mu, g, x, horizon);
    Rational prod = fwd.value * bwd.value;
    Rational d2 = prod - 1;
    if (d2 < 0) d2 = -d2;
    if (d2 > res.worst_defect) res.worst_defect = d2;
    if (d2 != 0 && res.ok) {
      res.ok = false;
      res.witness = "inverse defect at sample " + std::to_string(i);
    }
  }
  return res;
}

}  // namespace treedyn
