#include "treedyn/group.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_map>

namespace treedyn {

Word::Word(std::vector<WordLetter> letters) {
  for (auto& l : letters) {
    if (l.exp != 1 && l.exp != -1) throw ConfigError("word exponents must be +-1");
    if (!letters_.empty() && letters_.back().gen == l.gen &&
        letters_.back().exp == -l.exp) {
      letters_.pop_back();  // free reduction
    } else {
      letters_.push_back(std::move(l));
    }
  }
}

Word Word::gen(std::string name, int exp) { return Word({WordLetter{std::move(name), exp}}); }

Word Word::inverse() const {
  std::vector<WordLetter> out;
  out.reserve(letters_.size());
  for (auto it = letters_.rbegin(); it != letters_.rend(); ++it)
    out.push_back(WordLetter{it->gen, -it->exp});
  return Word(std::move(out));
}

Word operator*(const Word& a, const Word& b) {
  std::vector<WordLetter> out = a.letters_;
  out.insert(out.end(), b.letters_.begin(), b.letters_.end());
  return Word(std::move(out));
}

std::string Word::str() const {
  if (letters_.empty()) return "1";
  std::ostringstream os;
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (i) os << "*";
    os << letters_[i].gen;
    if (letters_[i].exp < 0) os << "^-1";
  }
  return os.str();
}

GeneratedGroup::GeneratedGroup(std::string name,
                               std::vector<std::pair<std::string, Automorphism>> generators)
    : name_(std::move(name)) {
  if (generators.empty()) throw ConfigError("group needs at least one generator");
  shape_ = generators.front().second.shape();
  for (auto& [n, g] : generators) {
    require_same_shape(shape_, g.shape());
    if (!gens_.emplace(n, g).second) throw ConfigError("duplicate generator name " + n);
  }
  for (const auto& [n, g] : gens_) names_.push_back(n);  // map iterates sorted
}

const Automorphism& GeneratedGroup::generator(const std::string& n) const {
  auto it = gens_.find(n);
  if (it == gens_.end()) throw ConfigError("unknown generator " + n);
  return it->second;
}

bool GeneratedGroup::has_generator(const std::string& n) const { return gens_.count(n) > 0; }

Automorphism GeneratedGroup::evaluate(const Word& w) const {
  Automorphism out = Automorphism::identity(shape_);
  // word letters act left-to-right as functions applied right-to-left
  for (auto it = w.letters().rbegin(); it != w.letters().rend(); ++it) {
    const Automorphism& g = generator(it->gen);
    out = compose(it->exp > 0 ? g : invert(g), out);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t table_hash(const LevelPermutation& t) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto v : t.table) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

}  // namespace

std::vector<BallElement> ball(const GeneratedGroup& G, std::size_t radius,
                              std::size_t dedup_depth, std::uint64_t cap) {
  // keep tables affordable on wide shapes
  std::size_t d = dedup_depth;
  while (d > 1) {
    try {
      level_size_checked(*G.shape(), d, 1 << 16);
      break;
    } catch (const CapExceeded&) {
      --d;
    }
  }
  std::vector<BallElement> out;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  auto signature = [&](const Automorphism& a) { return table_hash(level_projection(a, d)); };

  auto try_add = [&](Word w, Automorphism a) -> bool {
    std::uint64_t sig = signature(a);
    auto& bucket = buckets[sig];
    for (auto idx : bucket) {
      auto eq = equal_exact(out[idx].aut, a);
      if (eq.has_value()) {
        if (*eq) return false;
      } else {
        if (equal_to_depth(out[idx].aut, a, std::max(d, kDefaultEqualDepth))) {
          out[idx].dedup_exact = false;
          return false;
        }
      }
    }
    bucket.push_back(out.size());
    out.push_back(BallElement{std::move(w), std::move(a)});
    if (out.size() > cap) throw CapExceeded("ball cap exceeded");
    return true;
  };

  try_add(Word(), Automorphism::identity(G.shape()));
  std::size_t frontier_begin = 0;
  for (std::size_t r = 0; r < radius; ++r) {
    std::size_t frontier_end = out.size();
    for (std::size_t i = frontier_begin; i < frontier_end; ++i) {
      for (const auto& name : G.names()) {
        for (int exp : {1, -1}) {
          Word w = Word::gen(name, exp) * out[i].word;
          if (w.size() <= out[i].word.size()) continue;  // cancelled, seen earlier
          const Automorphism& gen = G.generator(name);
          Automorphism a = compose(exp > 0 ? gen : invert(gen), out[i].aut);
          try_add(std::move(w), std::move(a));
        }
      }
    }
    frontier_begin = frontier_end;
  }
  return out;
}

MinimalityResult minimality_check(const GeneratedGroup& G, std::size_t n, std::uint64_t cap) {
  std::uint64_t count = level_size_checked(*G.shape(), n, cap);
  std::vector<LevelPermutation> tables;
  std::vector<Word> table_words;
  for (const auto& name : G.names()) {
    tables.push_back(level_projection(G.generator(name), n, cap));
    table_words.push_back(Word::gen(name));
    tables.push_back(level_projection(invert(G.generator(name)), n, cap));
    table_words.push_back(Word::gen(name, -1));
  }
  std::vector<std::int64_t> parent(count, -1);   // BFS tree: table index used
  std::vector<std::uint64_t> parent_vertex(count, 0);
  std::vector<char> seen(count, 0);
  std::deque<std::uint64_t> work{0};
  seen[0] = 1;
  std::uint64_t reached = 1;
  while (!work.empty()) {
    std::uint64_t v = work.front();
    work.pop_front();
    for (std::size_t t = 0; t < tables.size(); ++t) {
      std::uint64_t u = tables[t].table[v];
      if (!seen[u]) {
        seen[u] = 1;
        parent[u] = static_cast<std::int64_t>(t);
        parent_vertex[u] = v;
        work.push_back(u);
        ++reached;
      }
    }
  }
  MinimalityResult res;
  if (reached == count) {
    res.transitive = true;
    res.witnesses.resize(count);
    for (std::uint64_t v = 0; v < count; ++v) {
      Word w;
      std::uint64_t cur = v;
      while (parent[cur] >= 0) {
        w = w * table_words[static_cast<std::size_t>(parent[cur])];
        cur = parent_vertex[cur];
      }
      res.witnesses[v] = std::move(w);
    }
    return res;
  }
  // orbit partition via repeated BFS
  std::vector<char> assigned(count, 0);
  for (std::uint64_t v = 0; v < count; ++v) {
    if (assigned[v]) continue;
    std::vector<std::uint64_t> orbit{v};
    assigned[v] = 1;
    std::deque<std::uint64_t> q{v};
    while (!q.empty()) {
      std::uint64_t u = q.front();
      q.pop_front();
      for (const auto& t : tables) {
        std::uint64_t w = t.table[u];
        if (!assigned[w]) {
          assigned[w] = 1;
          orbit.push_back(w);
          q.push_back(w);
        }
      }
    }
    std::sort(orbit.begin(), orbit.end());
    res.orbits.push_back(std::move(orbit));
  }
  return res;
}

std::optional<Word> find_transporter(const GeneratedGroup& G, const Prefix& from,
                                     const Prefix& to, std::uint64_t cap) {
  if (from.size() != to.size()) throw ConfigError("transporter endpoints must share depth");
  if (from == to) return Word();
  std::size_t n = from.size();
  std::uint64_t count = level_size_checked(*G.shape(), n, cap);
  std::vector<LevelPermutation> tables;
  std::vector<Word> table_words;
  for (const auto& name : G.names()) {
    tables.push_back(level_projection(G.generator(name), n, cap));
    table_words.push_back(Word::gen(name));
    tables.push_back(level_projection(invert(G.generator(name)), n, cap));
    table_words.push_back(Word::gen(name, -1));
  }
  std::vector<std::int64_t> parent(count, -1);
  std::vector<std::uint64_t> parent_vertex(count, 0);
  std::vector<char> seen(count, 0);
  std::uint64_t src = from.rank(), dst = to.rank();
  std::deque<std::uint64_t> work{src};
  seen[src] = 1;
  while (!work.empty()) {
    std::uint64_t v = work.front();
    work.pop_front();
    if (v == dst) {
      Word w;
      std::uint64_t cur = v;
      while (parent[cur] >= 0) {
        w = w * table_words[static_cast<std::size_t>(parent[cur])];
        cur = parent_vertex[cur];
      }
      return w;
    }
    for (std::size_t t = 0; t < tables.size(); ++t) {
      std::uint64_t u = tables[t].table[v];
      if (!seen[u]) {
        seen[u] = 1;
        parent[u] = static_cast<std::int64_t>(t);
        parent_vertex[u] = v;
        work.push_back(u);
      }
    }
  }
  return std::nullopt;
}

bool supported_inside(const Automorphism& g, const Prefix& O) {
  // walk the path to O: every vertex along the way must be fixed and every
  // off-path section must be exactly the identity
  Automorphism cur = g;
  for (std::size_t i = 0; i < O.size(); ++i) {
    Perm root = cur.root_perm();
    for (std::uint32_t a = 0; a < cur.arity(); ++a) {
      if (root(a) != a) return false;
      if (a != O.at(i) && !cur.section(a).is_identity()) return false;
    }
    cur = cur.section(O.at(i));
  }
  return true;
}

std::vector<Word> rigid_stabilizer_elements(const GeneratedGroup& G, const Prefix& O,
                                            std::size_t radius, std::size_t verify_depth,
                                            const std::vector<Word>& extra_candidates,
                                            std::uint64_t cap) {
  (void)verify_depth;  // certification is exact; kept for interface stability
  std::vector<Word> found;
  auto consider = [&](const Word& w, const Automorphism& a) {
    if (a.is_identity()) return;
    if (supported_inside(a, O)) found.push_back(w);
  };
  for (const auto& el : ball(G, radius, kDefaultEqualDepth, cap)) consider(el.word, el.aut);
  for (const auto& w : extra_candidates) consider(w, G.evaluate(w));
  return found;
}

std::vector<std::vector<std::uint64_t>> level_orbit_partition(
    const GeneratedGroup& G, std::size_t n, const std::vector<std::string>& filter,
    std::uint64_t cap) {
  std::uint64_t count = level_size_checked(*G.shape(), n, cap);
  std::vector<LevelPermutation> tables;
  for (const auto& name : filter) {
    tables.push_back(level_projection(G.generator(name), n, cap));
    tables.push_back(level_projection(invert(G.generator(name)), n, cap));
  }
  std::vector<std::vector<std::uint64_t>> orbits;
  std::vector<char> assigned(count, 0);
  for (std::uint64_t v = 0; v < count; ++v) {
    if (assigned[v]) continue;
    std::vector<std::uint64_t> orbit{v};
    assigned[v] = 1;
    std::deque<std::uint64_t> q{v};
    while (!q.empty()) {
      std::uint64_t u = q.front();
      q.pop_front();
      for (const auto& t : tables) {
        std::uint64_t w = t.table[u];
        if (!assigned[w]) {
          assigned[w] = 1;
          orbit.push_back(w);
          q.push_back(w);
        }
      }
    }
    std::sort(orbit.begin(), orbit.end());
    orbits.push_back(std::move(orbit));
  }
  return orbits;
}

int invariant_distribution_dimension(const GeneratedGroup& G, std::size_t n, double tol,
                                     std::uint64_t cap) {
  std::uint64_t count = level_size_checked(*G.shape(), n, cap);
  const std::size_t m = static_cast<std::size_t>(count);
  const std::size_t k = G.names().size();
  // rows: for each generator, the constraints pi(P x) - pi(x) = 0
  Eigen::MatrixXd A(k * m, m);
  A.setZero();
  std::size_t row0 = 0;
  for (const auto& name : G.names()) {
    LevelPermutation t = level_projection(G.generator(name), n, cap);
    for (std::size_t x = 0; x < m; ++x) {
      // (pi P)(y) = pi(P^{-1} y): constraint pi(t(x)) - ... use pi P = pi:
      // sum_x pi(x) [t(x) = y] = pi(y)
      A(row0 + t.table[x], x) += 1.0;
      A(row0 + x, x) -= 1.0;
    }
    row0 += m;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return static_cast<int>(m) - rank;
}

}  // namespace treedyn
