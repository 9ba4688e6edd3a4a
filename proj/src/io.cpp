#include "treedyn/io.hpp"

#include <fstream>
#include <sstream>

namespace treedyn {

json shape_to_json(const TreeShape& shape) {
  return json{{"arities", json{{"head", shape.head()}, {"tail_period", shape.tail()}}}};
}

ShapePtr shape_from_json(const json& j) {
  if (!j.contains("arities")) throw ConfigError("shape needs /arities", "/arities");
  const json& a = j.at("arities");
  std::vector<std::uint32_t> head = a.value("head", std::vector<std::uint32_t>{});
  if (!a.contains("tail_period"))
    throw ConfigError("shape needs /arities/tail_period", "/arities/tail_period");
  std::vector<std::uint32_t> tail = a.at("tail_period").get<std::vector<std::uint32_t>>();
  return std::make_shared<TreeShape>(std::move(head), std::move(tail));
}

std::string rational_str(const Rational& r) { return to_string(r); }

Rational rational_from_json(const json& j) {
  if (j.is_number_integer()) return Rational(j.get<long>());
  if (j.is_string()) return parse_rational(j.get<std::string>());
  throw ConfigError("expected a rational as \"p/q\"");
}

namespace {

json dist_to_json(const std::vector<Rational>& p) {
  json out = json::array();
  for (const auto& x : p) out.push_back(rational_str(x));
  return out;
}

std::vector<Rational> dist_from_json(const json& j, const std::string& where = "") {
  std::vector<Rational> out;
  std::size_t i = 0;
  for (const auto& x : j) {
    try {
      out.push_back(rational_from_json(x));
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), where + "/" + std::to_string(i));
    }
    ++i;
  }
  return out;
}

}  // namespace

json measure_to_json(const ProductMeasure& m) {
  json out;
  switch (m.kind()) {
    case ProductMeasure::Kind::uniform:
      out["kind"] = "uniform";
      break;
    case ProductMeasure::Kind::bernoulli:
      out["kind"] = "bernoulli";
      out["p"] = dist_to_json(m.level_probs(1));
      break;
    default: {
      // serialize through the normal form
      const auto& nf = m.normal_form();
      out["kind"] = "explicit";
      json head = json::array(), cycle = json::array();
      for (const auto& d : nf.head) head.push_back(dist_to_json(d));
      for (const auto& d : nf.cycle) cycle.push_back(dist_to_json(d));
      out["head"] = head;
      out["tail"] = cycle;
      break;
    }
  }
  return out;
}

ProductMeasure measure_from_json(const json& j, ShapePtr shape) {
  std::string kind = j.value("kind", "");
  if (kind == "uniform") return ProductMeasure::uniform(std::move(shape));
  if (kind == "bernoulli")
    return ProductMeasure::bernoulli(std::move(shape), dist_from_json(j.at("p"), "/p"));
  if (kind == "explicit") {
    std::vector<std::vector<Rational>> head, cycle;
    for (const auto& d : j.value("head", json::array())) head.push_back(dist_from_json(d));
    for (const auto& d : j.at("tail")) cycle.push_back(dist_from_json(d));
    return ProductMeasure::explicit_with_tail(std::move(shape), std::move(head),
                                              std::move(cycle));
  }
  if (kind == "overrides") {
    ProductMeasure base = measure_from_json(j.at("base"), shape);
    std::map<std::size_t, std::vector<Rational>> at;
    for (auto it = j.at("at").begin(); it != j.at("at").end(); ++it)
      at[std::stoul(it.key())] = dist_from_json(it.value());
    std::optional<OverrideTail> tail;
    if (j.contains("tail_rule")) {
      const json& t = j.at("tail_rule");
      tail = OverrideTail{t.at("start").get<std::size_t>(),
                          t.at("stride").get<std::size_t>(),
                          dist_from_json(t.at("dist"))};
    }
    return ProductMeasure::with_overrides(base, std::move(at), std::move(tail));
  }
  throw ConfigError("unknown measure kind '" + kind + "'", "/kind");
}

namespace {

json portrait_json(const Automorphism& g, std::size_t depth_left) {
  json out;
  Perm root = g.root_perm();
  std::vector<std::uint32_t> perm1;
  for (std::uint32_t i = 0; i < root.degree(); ++i) perm1.push_back(root(i) + 1);
  out["perm"] = perm1;
  json children = json::object();
  for (std::uint32_t a = 0; a < g.arity(); ++a) {
    Automorphism s = g.section(a);
    bool trivial = false;
    try {
      trivial = s.is_identity();
    } catch (const NoActivityBound&) {
      trivial = false;
    }
    if (trivial) continue;
    if (depth_left == 0)
      throw CapExceeded("portrait serialization exceeded the depth budget");
    children[std::to_string(a + 1)] = portrait_json(s, depth_left - 1);
  }
  if (!children.empty()) out["children"] = std::move(children);
  return out;
}

}  // namespace

json automorphism_to_json(const Automorphism& g, std::size_t portrait_depth) {
  json out;
  if (auto mk = machine_kernel(g)) {
    const auto& [machine, start] = *mk;
    json states = json::array();
    for (std::uint32_t i = 0; i < machine->size(); ++i) {
      const auto& st = machine->state(i);
      std::vector<std::uint32_t> perm1;
      for (std::uint32_t a = 0; a < st.perm.degree(); ++a) perm1.push_back(st.perm(a) + 1);
      states.push_back(json{{"perm", perm1}, {"next", st.next}});
    }
    out["kind"] = "machine";
    out["states"] = std::move(states);
    out["start"] = start;
    return out;
  }
  out["kind"] = "portrait";
  out["portrait"] = portrait_json(g, portrait_depth);
  return out;
}

namespace {

Automorphism portrait_from_json(const json& j, const ShapePtr& shape) {
  std::vector<std::uint32_t> perm1 = j.at("perm").get<std::vector<std::uint32_t>>();
  std::vector<std::uint32_t> perm0(perm1.size());
  for (std::size_t i = 0; i < perm1.size(); ++i) {
    if (perm1[i] == 0) throw ConfigError("portrait perms are 1-based", "/perm");
    perm0[i] = perm1[i] - 1;
  }
  std::map<std::uint32_t, Automorphism> children;
  if (j.contains("children")) {
    for (auto it = j.at("children").begin(); it != j.at("children").end(); ++it) {
      std::uint32_t letter = static_cast<std::uint32_t>(std::stoul(it.key()));
      if (letter == 0) throw ConfigError("portrait children are 1-based", "/children");
      children.emplace(letter - 1, portrait_from_json(it.value(), shape));
    }
  }
  return Automorphism::portrait(shape, Perm(std::move(perm0)), children);
}

}  // namespace

Automorphism automorphism_from_json(const json& j, ShapePtr shape) {
  std::string kind = j.value("kind", "portrait");
  if (kind == "portrait") {
    const json& p = j.contains("portrait") ? j.at("portrait") : j;
    return portrait_from_json(p, shape);
  }
  if (kind == "machine") {
    std::vector<Machine::State> states;
    for (const auto& s : j.at("states")) {
      std::vector<std::uint32_t> perm1 = s.at("perm").get<std::vector<std::uint32_t>>();
      std::vector<std::uint32_t> perm0(perm1.size());
      for (std::size_t i = 0; i < perm1.size(); ++i) perm0[i] = perm1[i] - 1;
      states.push_back(Machine::State{
          Perm(std::move(perm0)), s.at("next").get<std::vector<std::uint32_t>>()});
    }
    std::uint32_t start = j.value("start", 0u);
    return Automorphism::machine(std::move(shape), std::make_shared<Machine>(std::move(states)),
                                 start);
  }
  throw ConfigError("unknown automorphism kind '" + kind + "'", "/kind");
}

json word_to_json(const Word& w) {
  json out = json::array();
  for (const auto& l : w.letters()) out.push_back(json{{"gen", l.gen}, {"exp", l.exp}});
  return out;
}

Word word_from_json(const json& j) {
  std::vector<WordLetter> letters;
  for (const auto& l : j)
    letters.push_back(WordLetter{l.at("gen").get<std::string>(), l.value("exp", 1)});
  return Word(std::move(letters));
}

json group_to_json(const GeneratedGroup& g, std::size_t portrait_depth) {
  json gens = json::object();
  for (const auto& name : g.names())
    gens[name] = automorphism_to_json(g.generator(name), portrait_depth);
  return json{{"name", g.name()},
              {"shape", shape_to_json(*g.shape())},
              {"generators", std::move(gens)}};
}

GeneratedGroup group_from_json(const json& j, ShapePtr shape) {
  if (j.contains("shape")) shape = shape_from_json(j.at("shape"));
  std::vector<std::pair<std::string, Automorphism>> gens;
  for (auto it = j.at("generators").begin(); it != j.at("generators").end(); ++it) {
    const json& v = it.value();
    if (v.is_object() && v.contains("file")) {
      json nested = json::parse(read_text_file(v.at("file").get<std::string>()));
      gens.emplace_back(it.key(), automorphism_from_json(nested, shape));
    } else if (v.is_object() && v.contains("corpus")) {
      // "corpus": "grigorchuk.a" picks a named generator of a corpus group
      std::string ref = v.at("corpus").get<std::string>();
      auto dot = ref.find('.');
      if (dot == std::string::npos)
        throw ConfigError("corpus reference needs group.generator", "/generators");
      std::string gname = ref.substr(0, dot), el = ref.substr(dot + 1);
      GeneratedGroup src = gname == "grigorchuk" ? grigorchuk() : parity_group(6);
      if (gname != "grigorchuk" && gname.rfind("parity", 0) != 0)
        throw ConfigError("unknown corpus group '" + gname + "'", "/generators");
      gens.emplace_back(it.key(), src.generator(el));
    } else {
      gens.emplace_back(it.key(), automorphism_from_json(v, shape));
    }
  }
  return GeneratedGroup(j.value("name", "group"), std::move(gens));
}

json family_to_json(const MeasureFamily& fam) {
  json stages = json::array();
  for (const auto& st : fam.stages) {
    stages.push_back(json{{"level", st.level},
                          {"pair_depth", st.pair_depth},
                          {"edge_names", st.edge_names},
                          {"edge_exps", st.edge_exps},
                          {"parent_edge", st.parent_edge},
                          {"parent_rank", st.parent_rank},
                          {"cnt_inv", st.cnt_inv},
                          {"cnt_fwd", st.cnt_fwd},
                          {"cnt_gen", st.cnt_gen},
                          {"worst_fraction", rational_str(st.worst_fraction)},
                          {"bound", rational_str(st.bound)}});
  }
  json controlled = json::array();
  for (const auto& w : fam.controlled) controlled.push_back(word_to_json(w));
  return json{{"format_version", kFormatVersion},
              {"shape", shape_to_json(*fam.shape)},
              {"beta0", [&] {
                 json a = json::array();
                 for (const auto& x : fam.betas.b0) a.push_back(rational_str(x));
                 return a;
               }()},
              {"beta1", [&] {
                 json a = json::array();
                 for (const auto& x : fam.betas.b1) a.push_back(rational_str(x));
                 return a;
               }()},
              {"levels", fam.levels},
              {"tail_stride", fam.tail_stride},
              {"controlled", std::move(controlled)},
              {"stages", std::move(stages)}};
}

MeasureFamily family_from_json(const json& j) {
  MeasureFamily fam;
  fam.shape = shape_from_json(j.at("shape"));
  for (const auto& x : j.at("beta0")) fam.betas.b0.push_back(rational_from_json(x));
  for (const auto& x : j.at("beta1")) fam.betas.b1.push_back(rational_from_json(x));
  fam.levels = j.at("levels").get<std::vector<std::size_t>>();
  fam.tail_stride = j.at("tail_stride").get<std::size_t>();
  for (const auto& w : j.at("controlled")) fam.controlled.push_back(word_from_json(w));
  for (const auto& s : j.at("stages")) {
    FamilyStage st;
    st.level = s.at("level").get<std::size_t>();
    st.pair_depth = s.at("pair_depth").get<std::size_t>();
    st.edge_names = s.at("edge_names").get<std::vector<std::string>>();
    st.edge_exps = s.at("edge_exps").get<std::vector<int>>();
    st.parent_edge = s.at("parent_edge").get<std::vector<std::int32_t>>();
    st.parent_rank = s.at("parent_rank").get<std::vector<std::uint64_t>>();
    st.cnt_inv = s.at("cnt_inv").get<std::vector<std::uint64_t>>();
    st.cnt_fwd = s.at("cnt_fwd").get<std::vector<std::uint64_t>>();
    st.cnt_gen = s.at("cnt_gen").get<std::vector<std::uint64_t>>();
    st.worst_fraction = rational_from_json(s.at("worst_fraction"));
    st.bound = rational_from_json(s.at("bound"));
    fam.stages.push_back(std::move(st));
  }
  return fam;
}

std::uint64_t canonical_hash(const json& j) {
  std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ",";
    out += cells[i];
  }
  out += "\n";
  return out;
}

std::string svg_polyline_plot(const std::vector<std::pair<double, double>>& points,
                              const std::string& title) {
  const double W = 640, H = 360, pad = 40;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (auto [x, y] : points) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (points.empty()) xmin = xmax = ymin = ymax = 0;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  os << "<text x='" << pad << "' y='20' font-size='14'>" << title << "</text>\n";
  os << "<rect x='" << pad << "' y='" << pad << "' width='" << W - 2 * pad << "' height='"
     << H - 2 * pad << "' fill='none' stroke='black'/>\n";
  os << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
  for (auto [x, y] : points) {
    double px = pad + (x - xmin) / (xmax - xmin) * (W - 2 * pad);
    double py = H - pad - (y - ymin) / (ymax - ymin) * (H - 2 * pad);
    os << px << "," << py << " ";
  }
  os << "'/>\n</svg>\n";
  return os.str();
}

}  // namespace treedyn
