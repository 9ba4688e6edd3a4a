#include "treedyn/automorphism.hpp"

#include <deque>
#include <mutex>
#include <unordered_map>
#include <unordered_set>

namespace treedyn {

// ---------------------------------------------------------------------------
// Machine

Machine::Machine(std::vector<State> states) : states_(std::move(states)) {
  if (states_.empty()) throw ConfigError("machine needs at least one state");
  alphabet_ = states_[0].perm.degree();
  for (const auto& s : states_) {
    if (s.perm.degree() != alphabet_ || s.next.size() != alphabet_)
      throw ConfigError("machine states must share one alphabet");
    for (auto t : s.next)
      if (t >= states_.size()) throw ConfigError("machine transition out of range");
  }
  const std::size_t n = states_.size();
  // silent: greatest fixpoint of "trivial perm here and in all successors"
  silent_.assign(n, true);
  for (std::size_t i = 0; i < n; ++i)
    if (!states_[i].perm.is_identity()) silent_[i] = false;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!silent_[i]) continue;
      for (auto t : states_[i].next)
        if (!silent_[t]) {
          silent_[i] = false;
          changed = true;
          break;
        }
    }
  }
  // on_cycle[i]: state i lies on a directed cycle
  // finitary_from(s): no state on or after a cycle reachable from s has a
  // nontrivial perm; quasi_finitary_from(s): no reachable cycle contains a
  // nontrivial perm.
  std::vector<bool> on_cycle(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    // reachable set from i in >= 1 step
    std::vector<bool> seen(n, false);
    std::deque<std::uint32_t> work(states_[i].next.begin(), states_[i].next.end());
    while (!work.empty()) {
      auto s = work.front();
      work.pop_front();
      if (seen[s]) continue;
      seen[s] = true;
      for (auto t : states_[s].next) work.push_back(t);
    }
    if (seen[i]) on_cycle[i] = true;
  }
  finitary_.assign(n, true);
  quasi_.assign(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> seen(n, false);
    std::deque<std::uint32_t> work{static_cast<std::uint32_t>(i)};
    bool after_cycle_nontrivial = false;
    bool cycle_nontrivial = false;
    while (!work.empty()) {
      auto s = work.front();
      work.pop_front();
      if (seen[s]) continue;
      seen[s] = true;
      if (on_cycle[s]) {
        if (!states_[s].perm.is_identity()) cycle_nontrivial = true;
        // anything reachable from a cycle state counts as "after a cycle"
        std::vector<bool> seen2(n, false);
        std::deque<std::uint32_t> w2{s};
        while (!w2.empty()) {
          auto u = w2.front();
          w2.pop_front();
          if (seen2[u]) continue;
          seen2[u] = true;
          if (!states_[u].perm.is_identity()) after_cycle_nontrivial = true;
          for (auto t : states_[u].next) w2.push_back(t);
        }
      }
      for (auto t : states_[s].next) work.push_back(t);
    }
    finitary_[i] = !after_cycle_nontrivial;
    quasi_[i] = !cycle_nontrivial;
  }
}

bool Machine::live(std::uint32_t s) const {
  for (auto t : states_[s].next)
    if (!silent_[t]) return true;
  return false;
}

std::shared_ptr<const Machine> Machine::inverse() const {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (inverse_) return inverse_;
  std::vector<State> inv(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    Perm pinv = states_[i].perm.inverse();
    std::vector<std::uint32_t> next(alphabet_);
    for (std::uint32_t y = 0; y < alphabet_; ++y) next[y] = states_[i].next[pinv(y)];
    inv[i] = State{std::move(pinv), std::move(next)};
  }
  auto m = std::make_shared<Machine>(std::move(inv));
  m->inverse_ = shared_from_this();
  inverse_ = m;
  return inverse_;
}

// ---------------------------------------------------------------------------
// Nodes

namespace detail {

struct Node {
  enum class Kind { identity, portrait, machine, rule, compose, inverse };
  Kind kind = Kind::identity;
  bool any_rule = false;
  Perm root;  // materialized for all non-identity nodes

  std::vector<NodePtr> children;  // portrait

  std::shared_ptr<const Machine> machine;  // machine
  std::uint32_t state = 0;

  std::shared_ptr<const SectionRule> rule;  // rule / inverse(rule)
  Prefix base;

  NodePtr left, right;  // compose: left after right; inverse: left

  mutable std::vector<NodePtr> secs;  // per-letter section cache
};

namespace {

struct PtrPairHash {
  std::size_t operator()(const std::pair<const void*, const void*>& p) const {
    auto a = reinterpret_cast<std::uintptr_t>(p.first);
    auto b = reinterpret_cast<std::uintptr_t>(p.second);
    return std::hash<std::uintptr_t>()(a * 0x9e3779b97f4a7c15ULL ^ b);
  }
};

struct Ctx {
  std::mutex mu;
  NodePtr identity;
  std::unordered_map<std::pair<const void*, const void*>, NodePtr, PtrPairHash> machines;
  std::unordered_map<std::pair<const void*, const void*>, NodePtr, PtrPairHash> composes;
  std::unordered_map<const void*, NodePtr> inverses;
  // memo keys must stay alive: a freed node's address could be reused
  std::unordered_map<const Node*, bool> identity_memo;
  std::vector<NodePtr> memo_keepalive;

  Ctx() {
    auto id = std::make_shared<Node>();
    id->kind = Node::Kind::identity;
    identity = id;
  }
};

Ctx& ctx() {
  static Ctx c;
  return c;
}

}  // namespace

NodePtr identity_node() { return ctx().identity; }

NodePtr machine_node(const std::shared_ptr<const Machine>& m, std::uint32_t state) {
  if (m->silent(state)) return identity_node();
  auto key = std::make_pair<const void*, const void*>(
      m.get(), reinterpret_cast<const void*>(static_cast<std::uintptr_t>(state) + 1));
  auto& c = ctx();
  std::lock_guard<std::mutex> lock(c.mu);
  auto it = c.machines.find(key);
  if (it != c.machines.end()) return it->second;
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::machine;
  n->machine = m;
  n->state = state;
  n->root = m->state(state).perm;
  c.machines.emplace(key, n);
  return n;
}

NodePtr rule_node(const std::shared_ptr<const SectionRule>& r, Prefix base) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::rule;
  n->any_rule = true;
  n->rule = r;
  n->root = r->root_perm(base);
  n->base = std::move(base);
  return n;
}

NodePtr compose_node(const NodePtr& l, const NodePtr& r) {
  if (l->kind == Node::Kind::identity) return r;
  if (r->kind == Node::Kind::identity) return l;
  auto key = std::make_pair<const void*, const void*>(l.get(), r.get());
  auto& c = ctx();
  {
    std::lock_guard<std::mutex> lock(c.mu);
    auto it = c.composes.find(key);
    if (it != c.composes.end()) return it->second;
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::compose;
  n->any_rule = l->any_rule || r->any_rule;
  n->root = r->root.then(l->root);
  n->left = l;
  n->right = r;
  std::lock_guard<std::mutex> lock(c.mu);
  auto [it, inserted] = c.composes.emplace(key, n);
  return it->second;
}

NodePtr inverse_node(const NodePtr& g);

NodePtr portrait_inverse(const NodePtr& g) {
  Perm rinv = g->root.inverse();
  std::vector<NodePtr> children(g->children.size());
  for (std::uint32_t y = 0; y < g->children.size(); ++y)
    children[y] = inverse_node(g->children[rinv(y)]);
  bool trivial = rinv.is_identity();
  for (const auto& ch : children) trivial = trivial && ch->kind == Node::Kind::identity;
  if (trivial) return identity_node();
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::portrait;
  for (const auto& ch : children) n->any_rule = n->any_rule || ch->any_rule;
  n->root = std::move(rinv);
  n->children = std::move(children);
  return n;
}

NodePtr inverse_node(const NodePtr& g) {
  switch (g->kind) {
    case Node::Kind::identity:
      return g;
    case Node::Kind::machine:
      return machine_node(g->machine->inverse(), g->state);
    case Node::Kind::portrait:
      return portrait_inverse(g);
    case Node::Kind::compose:
      return compose_node(inverse_node(g->right), inverse_node(g->left));
    case Node::Kind::inverse:
      return g->left;
    case Node::Kind::rule: {
      auto& c = ctx();
      {
        std::lock_guard<std::mutex> lock(c.mu);
        auto it = c.inverses.find(g.get());
        if (it != c.inverses.end()) return it->second;
      }
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::inverse;
      n->any_rule = true;
      n->root = g->root.inverse();
      n->left = g;
      std::lock_guard<std::mutex> lock(c.mu);
      auto [it, inserted] = c.inverses.emplace(g.get(), n);
      return it->second;
    }
  }
  return identity_node();
}

std::uint32_t node_image(const NodePtr& n, std::uint32_t letter) {
  return n->kind == Node::Kind::identity ? letter : n->root(letter);
}

NodePtr node_section(const NodePtr& n, std::uint32_t letter) {
  if (n->kind == Node::Kind::identity) return n;
  {
    std::lock_guard<std::mutex> lock(ctx().mu);
    if (n->secs.size() > letter && n->secs[letter]) return n->secs[letter];
  }
  NodePtr out;
  switch (n->kind) {
    case Node::Kind::portrait:
      out = n->children[letter];
      break;
    case Node::Kind::machine:
      out = machine_node(n->machine, n->machine->state(n->state).next[letter]);
      break;
    case Node::Kind::rule:
      out = rule_node(n->rule, n->base.child(letter));
      break;
    case Node::Kind::compose:
      out = compose_node(node_section(n->left, node_image(n->right, letter)),
                         node_section(n->right, letter));
      break;
    case Node::Kind::inverse:
      out = inverse_node(node_section(n->left, n->left->root.inverse()(letter)));
      break;
    case Node::Kind::identity:
      out = n;
      break;
  }
  std::lock_guard<std::mutex> lock(ctx().mu);
  if (n->secs.size() <= letter) n->secs.resize(letter + 1);
  if (!n->secs[letter]) n->secs[letter] = out;
  return n->secs[letter];
}

// Exact identity decision by exploring the section closure.  Rule nodes are
// decided by their activity bound and never expanded.
bool node_is_identity(const NodePtr& start, std::size_t cap) {
  auto& c = ctx();
  {
    std::lock_guard<std::mutex> lock(c.mu);
    auto it = c.identity_memo.find(start.get());
    if (it != c.identity_memo.end()) return it->second;
  }
  std::unordered_set<const Node*> seen;
  std::vector<NodePtr> visited;
  std::vector<NodePtr> work{start};
  bool verdict = true;
  while (!work.empty() && verdict) {
    NodePtr n = work.back();
    work.pop_back();
    if (n->kind == Node::Kind::identity) continue;
    if (!seen.insert(n.get()).second) continue;
    visited.push_back(n);
    if (visited.size() > cap)
      throw CapExceeded("identity check: section closure exceeded cap");
    {
      std::lock_guard<std::mutex> lock(c.mu);
      auto it = c.identity_memo.find(n.get());
      if (it != c.identity_memo.end()) {
        if (!it->second) verdict = false;
        continue;
      }
    }
    if (!n->root.is_identity()) {
      verdict = false;
      break;
    }
    if (n->kind == Node::Kind::rule || n->kind == Node::Kind::inverse) {
      const Node* rn = n->kind == Node::Kind::rule ? n.get() : n->left.get();
      auto t = rn->rule->trivial_at_and_below(rn->base);
      if (!t.has_value())
        throw NoActivityBound("rule element '" + rn->rule->name() +
                              "' has no activity bound at " + rn->base.str());
      if (!*t) verdict = false;
      continue;  // bound decided the whole subtree
    }
    std::uint32_t q = n->root.degree();
    for (std::uint32_t a = 0; a < q; ++a) work.push_back(node_section(n, a));
  }
  std::lock_guard<std::mutex> lock(c.mu);
  if (verdict) {
    for (const auto& p : visited) {
      if (c.identity_memo.emplace(p.get(), true).second) c.memo_keepalive.push_back(p);
    }
  } else {
    if (c.identity_memo.emplace(start.get(), false).second)
      c.memo_keepalive.push_back(start);
  }
  return verdict;
}

bool node_kind_is_identity(const Node* n) { return n->kind == Node::Kind::identity; }

bool node_kind_skips_identity_check(const Node* n) {
  // silent machine states intern to the identity node, so surviving machine
  // nodes always act nontrivially somewhere
  return n->kind == Node::Kind::machine;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Automorphism

Automorphism::Automorphism(ShapePtr shape, std::size_t depth, detail::NodePtr node)
    : shape_(std::move(shape)), depth_(depth), node_(std::move(node)) {}

Automorphism Automorphism::identity(ShapePtr shape) {
  return Automorphism(std::move(shape), 0, detail::identity_node());
}

Automorphism Automorphism::portrait(ShapePtr shape, const Perm& root,
                                    const std::map<std::uint32_t, Automorphism>& children) {
  std::uint32_t q = shape->arity(1);
  if (root.degree() != q) throw ConfigError("portrait root degree does not match arity");
  std::vector<detail::NodePtr> ch(q, detail::identity_node());
  bool trivial = root.is_identity();
  bool any_rule = false;
  for (const auto& [letter, sub] : children) {
    if (letter >= q) throw ConfigError("portrait child letter out of range");
    ch[letter] = sub.node_;
    trivial = trivial && sub.node_->kind == detail::Node::Kind::identity;
    any_rule = any_rule || sub.node_->any_rule;
  }
  if (trivial) return Automorphism::identity(std::move(shape));
  auto n = std::make_shared<detail::Node>();
  n->kind = detail::Node::Kind::portrait;
  n->any_rule = any_rule;
  n->root = root;
  n->children = std::move(ch);
  return Automorphism(std::move(shape), 0, std::move(n));
}

Automorphism Automorphism::machine(ShapePtr shape, std::shared_ptr<const Machine> m,
                                   std::uint32_t start) {
  // machines run at every depth below their root: all arities must match
  for (std::size_t level = 1; level <= shape->num_depth_classes(); ++level) {
    if (shape->arity(level) != m->alphabet())
      throw ConfigError("machine alphabet does not match tree arity at level " +
                        std::to_string(level));
  }
  if (start >= m->size()) throw ConfigError("machine start state out of range");
  return Automorphism(std::move(shape), 0, detail::machine_node(m, start));
}

Automorphism Automorphism::rule(ShapePtr shape, std::shared_ptr<const SectionRule> r) {
  Prefix empty(shape, {});
  return Automorphism(std::move(shape), 0, detail::rule_node(r, std::move(empty)));
}

Automorphism Automorphism::coordinate_flips(ShapePtr shape,
                                            const std::vector<std::size_t>& coords) {
  if (coords.empty()) return identity(std::move(shape));
  std::size_t maxc = 0;
  for (auto c : coords) {
    if (c == 0) throw ConfigError("coordinates are 1-based");
    if (shape->arity(c) != 2) throw ConfigError("coordinate flips need arity 2");
    maxc = std::max(maxc, c);
  }
  std::vector<bool> is_flip(maxc + 1, false);
  for (auto c : coords) is_flip[c] = true;
  // state i handles coordinate i+1; state maxc is the identity sink
  std::vector<Machine::State> states(maxc + 1);
  for (std::size_t i = 0; i < maxc; ++i) {
    std::uint32_t nx = static_cast<std::uint32_t>(i + 1);
    states[i] = Machine::State{
        is_flip[i + 1] ? Perm::transposition(2, 0, 1) : Perm::identity(2), {nx, nx}};
  }
  std::uint32_t sink = static_cast<std::uint32_t>(maxc);
  states[maxc] = Machine::State{Perm::identity(2), {sink, sink}};
  return machine(std::move(shape), std::make_shared<Machine>(std::move(states)), 0);
}

Perm Automorphism::root_perm() const {
  if (node_->kind == detail::Node::Kind::identity) return Perm::identity(arity());
  return node_->root;
}

Automorphism Automorphism::section(std::uint32_t letter) const {
  if (letter >= arity()) throw ConfigError("section letter out of range");
  return Automorphism(shape_, depth_ + 1, detail::node_section(node_, letter));
}

Automorphism Automorphism::section(const Prefix& below) const {
  Automorphism cur = *this;
  for (std::size_t i = 0; i < below.size(); ++i) cur = cur.section(below.at(i));
  return cur;
}

bool Automorphism::is_identity() const {
  if (node_->kind == detail::Node::Kind::identity) return true;
  if (node_->kind == detail::Node::Kind::machine) return false;
  return detail::node_is_identity(node_, 1 << 22);
}

bool Automorphism::finite_state() const { return !node_->any_rule; }

Automorphism compose(const Automorphism& g, const Automorphism& h) {
  require_same_shape(g.shape(), h.shape());
  // on constant-arity shapes subtrees are interchangeable, so depths may differ
  if (g.depth() != h.depth() && !g.shape()->constant_arity())
    throw ConfigError("compose: depth mismatch");
  return Automorphism(g.shape_, std::min(g.depth_, h.depth_),
                      detail::compose_node(g.node_, h.node_));
}

Automorphism invert(const Automorphism& g) {
  return Automorphism(g.shape_, g.depth_, detail::inverse_node(g.node_));
}

Prefix apply(const Automorphism& g, const BoundaryPoint& x, std::size_t n) {
  require_same_shape(g.shape(), x.shape());
  if (g.depth() != 0 && !g.shape()->constant_arity())
    throw ConfigError("apply needs a root automorphism");
  std::vector<std::uint32_t> out(n);
  Automorphism c = g;
  for (std::size_t i = 1; i <= n; ++i) {
    std::uint32_t letter = x.letter(i);
    out[i - 1] = c.root_perm()(letter);
    c = c.section(letter);
  }
  return Prefix(g.shape(), std::move(out));
}

Prefix apply(const Automorphism& g, const Prefix& y) {
  require_same_shape(g.shape(), y.shape());
  if (g.depth() != 0 && !g.shape()->constant_arity())
    throw ConfigError("apply needs a root automorphism");
  std::vector<std::uint32_t> out(y.size());
  Automorphism c = g;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = c.root_perm()(y.at(i));
    c = c.section(y.at(i));
  }
  return Prefix(g.shape(), std::move(out));
}

LevelPermutation LevelPermutation::then(const LevelPermutation& after) const {
  if (level != after.level) throw ConfigError("level permutation depth mismatch");
  LevelPermutation out{shape, level, std::vector<std::uint64_t>(table.size())};
  for (std::size_t i = 0; i < table.size(); ++i) out.table[i] = after.table[table[i]];
  return out;
}

LevelPermutation LevelPermutation::inverse() const {
  LevelPermutation out{shape, level, std::vector<std::uint64_t>(table.size())};
  for (std::size_t i = 0; i < table.size(); ++i) out.table[table[i]] = i;
  return out;
}

bool LevelPermutation::is_identity() const {
  for (std::size_t i = 0; i < table.size(); ++i)
    if (table[i] != i) return false;
  return true;
}

LevelPermutation level_projection(const Automorphism& g, std::size_t n, std::uint64_t cap) {
  std::uint64_t count = level_size_checked(*g.shape(), n, cap);
  LevelPermutation out{g.shape(), n, std::vector<std::uint64_t>(count)};
  struct Frame {
    Automorphism a;
    std::uint64_t in, img;
    std::size_t lvl;
  };
  std::vector<Frame> stack{{g, 0, 0, 0}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.lvl == n) {
      out.table[f.in] = f.img;
      continue;
    }
    std::uint32_t q = g.shape()->arity(f.lvl + 1);
    Perm root = f.a.root_perm();
    for (std::uint32_t a = 0; a < q; ++a) {
      stack.push_back({f.a.section(a), f.in * q + a, f.img * q + root(a), f.lvl + 1});
    }
  }
  return out;
}

std::optional<bool> equal_exact(const Automorphism& g, const Automorphism& h) {
  require_same_shape(g.shape(), h.shape());
  if (g.raw() == h.raw()) return true;
  if (!g.finite_state() || !h.finite_state()) return std::nullopt;
  return compose(g, invert(h)).is_identity();
}

bool equal_to_depth(const Automorphism& g, const Automorphism& h, std::size_t depth) {
  require_same_shape(g.shape(), h.shape());
  struct Frame {
    Automorphism a, b;
    std::size_t lvl;
  };
  std::vector<Frame> stack{{g, h, 0}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.a.raw() == f.b.raw()) continue;
    if (!(f.a.root_perm() == f.b.root_perm())) return false;
    if (f.lvl + 1 >= depth) continue;
    for (std::uint32_t a = 0; a < f.a.arity(); ++a)
      stack.push_back({f.a.section(a), f.b.section(a), f.lvl + 1});
  }
  return true;
}

std::vector<Prefix> support_level(const Automorphism& g, std::size_t n, std::uint64_t cap) {
  if (g.depth() != 0 && !g.shape()->constant_arity())
    throw ConfigError("support_level needs a root automorphism");
  std::vector<Prefix> out;
  struct Frame {
    Automorphism a;
    std::vector<std::uint32_t> in, img;
  };
  std::vector<Frame> stack{{g, {}, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.in == f.img && f.a.is_identity()) continue;
    if (f.in.size() == n) {
      out.emplace_back(g.shape(), f.in);
      if (out.size() > cap) throw CapExceeded("support_level cap exceeded");
      continue;
    }
    std::uint32_t q = g.shape()->arity(f.in.size() + 1);
    Perm root = f.a.root_perm();
    for (std::uint32_t a = q; a > 0; --a) {
      std::uint32_t letter = a - 1;
      Frame child{f.a.section(letter), f.in, f.img};
      child.in.push_back(letter);
      child.img.push_back(root(letter));
      stack.push_back(std::move(child));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Prefix> active_prefixes(const Automorphism& g, std::size_t n, std::uint64_t cap) {
  if (g.depth() != 0 && !g.shape()->constant_arity())
    throw ConfigError("active_prefixes needs a root automorphism");
  std::vector<Prefix> out;
  struct Frame {
    Automorphism a;
    std::vector<std::uint32_t> in;
  };
  std::vector<Frame> stack{{g, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.a.is_identity()) continue;
    if (f.in.size() == n) {
      out.emplace_back(g.shape(), f.in);
      if (out.size() > cap) throw CapExceeded("active_prefixes cap exceeded");
      continue;
    }
    std::uint32_t q = g.shape()->arity(f.in.size() + 1);
    for (std::uint32_t a = q; a > 0; --a) {
      std::uint32_t letter = a - 1;
      Frame child{f.a.section(letter), f.in};
      child.in.push_back(letter);
      stack.push_back(std::move(child));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::pair<std::shared_ptr<const Machine>, std::uint32_t>> machine_kernel(
    const Automorphism& g) {
  if (g.raw()->kind != detail::Node::Kind::machine) return std::nullopt;
  return std::make_pair(g.raw()->machine, g.raw()->state);
}

std::optional<SectionClosure> section_closure(const Automorphism& g, std::size_t cap) {
  if (!g.finite_state()) return std::nullopt;
  if (!g.shape()->constant_arity()) return std::nullopt;
  std::uint32_t q = g.shape()->arity(1);
  SectionClosure sc;
  sc.alphabet = q;
  std::unordered_map<const detail::Node*, std::uint32_t> index;
  std::vector<Automorphism> nodes{g};
  index.emplace(g.raw(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    sc.root.push_back(nodes[i].root_perm());
    sc.next.emplace_back();
    for (std::uint32_t a = 0; a < q; ++a) {
      Automorphism child = nodes[i].section(a);
      auto [it, inserted] = index.emplace(child.raw(), static_cast<std::uint32_t>(nodes.size()));
      if (inserted) {
        nodes.push_back(child);
        if (nodes.size() > cap) return std::nullopt;
      }
      sc.next.back().push_back(it->second);
    }
  }
  const std::size_t n = nodes.size();
  sc.identity.assign(n, true);
  for (std::size_t i = 0; i < n; ++i)
    if (!sc.root[i].is_identity()) sc.identity[i] = false;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!sc.identity[i]) continue;
      for (auto t : sc.next[i])
        if (!sc.identity[t]) {
          sc.identity[i] = false;
          changed = true;
          break;
        }
    }
  }
  sc.live.assign(n, false);
  for (std::size_t i = 0; i < n; ++i)
    for (auto t : sc.next[i])
      if (!sc.identity[t]) sc.live[i] = true;
  return sc;
}

}  // namespace treedyn
