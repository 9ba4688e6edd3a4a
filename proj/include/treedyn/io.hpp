#ifndef TREEDYN_IO_HPP
#define TREEDYN_IO_HPP

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "treedyn/constructions.hpp"
#include "treedyn/group.hpp"
#include "treedyn/measures.hpp"

namespace treedyn {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// tree shape: {"arities": {"head": [..], "tail_period": [..]}}
json shape_to_json(const TreeShape& shape);
ShapePtr shape_from_json(const json& j);

// measures: {"kind": "uniform"|"bernoulli"|"explicit"|"overrides", ...} with
// rationals as "p/q" strings
json measure_to_json(const ProductMeasure& m);
ProductMeasure measure_from_json(const json& j, ShapePtr shape);

// portraits: {"perm": [..1-based..], "children": {"1": {...}}}; machines:
// {"states": [{"perm": [..], "next": [..]}], "start": i}
json automorphism_to_json(const Automorphism& g, std::size_t portrait_depth = 16);
Automorphism automorphism_from_json(const json& j, ShapePtr shape);

json word_to_json(const Word& w);
Word word_from_json(const json& j);

// groups: named generators referencing machines, portraits or corpus names
json group_to_json(const GeneratedGroup& g, std::size_t portrait_depth = 16);
GeneratedGroup group_from_json(const json& j, ShapePtr shape);

json family_to_json(const MeasureFamily& fam);
MeasureFamily family_from_json(const json& j);

std::string rational_str(const Rational& r);
Rational rational_from_json(const json& j);

// FNV-1a over the canonical dump; used for report content hashes
std::uint64_t canonical_hash(const json& j);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// CSV trace: header row then data rows
std::string csv_join(const std::vector<std::string>& cells);

// minimal polyline plot
std::string svg_polyline_plot(const std::vector<std::pair<double, double>>& points,
                              const std::string& title);

}  // namespace treedyn

#endif
