#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "aiaudit/errors.hpp"
#include "aiaudit/io.hpp"

namespace aiaudit {

/// Risk levels in ascending order of risk.
enum class AsilLevel { A = 0, B = 1, C = 2, D = 3 };

inline constexpr std::array<AsilLevel, 4> kAllAsilLevels{AsilLevel::A, AsilLevel::B, AsilLevel::C,
                                                         AsilLevel::D};

/// Ordered so that NotRecommended < Recommended < HighlyRecommended.
enum class RecommendationGrade { NotRecommended = 0, Recommended = 1, HighlyRecommended = 2 };

enum class Scope { EntireSystem, AiSubsystem };
enum class Applicability { Simple, Complex };
enum class Concretization { Minor, Major };
enum class Testability { Low, Medium, High };
enum class ProcedureKind { MetricBased, EvidenceBased };

namespace detail {

template <class E, std::size_t N>
struct EnumNames {
  std::array<std::pair<E, std::string_view>, N> entries;

  std::string_view name(E e) const {
    for (const auto& [value, text] : entries)
      if (value == e) return text;
    return "?";
  }
  std::optional<E> parse(std::string_view s) const {
    for (const auto& [value, text] : entries)
      if (text == s) return value;
    return std::nullopt;
  }
};

inline constexpr EnumNames<AsilLevel, 4> kAsilNames{
    {{{AsilLevel::A, "A"}, {AsilLevel::B, "B"}, {AsilLevel::C, "C"}, {AsilLevel::D, "D"}}}};
inline constexpr EnumNames<RecommendationGrade, 3> kGradeNames{
    {{{RecommendationGrade::HighlyRecommended, "++"},
      {RecommendationGrade::Recommended, "+"},
      {RecommendationGrade::NotRecommended, "o"}}}};
inline constexpr EnumNames<Scope, 2> kScopeNames{
    {{{Scope::EntireSystem, "entire_system"}, {Scope::AiSubsystem, "ai_subsystem"}}}};
inline constexpr EnumNames<Applicability, 2> kApplicabilityNames{
    {{{Applicability::Simple, "simple"}, {Applicability::Complex, "complex"}}}};
inline constexpr EnumNames<Concretization, 2> kConcretizationNames{
    {{{Concretization::Minor, "minor"}, {Concretization::Major, "major"}}}};
inline constexpr EnumNames<Testability, 3> kTestabilityNames{
    {{{Testability::Low, "low"}, {Testability::Medium, "medium"}, {Testability::High, "high"}}}};
inline constexpr EnumNames<ProcedureKind, 2> kProcedureNames{
    {{{ProcedureKind::MetricBased, "metric_based"}, {ProcedureKind::EvidenceBased, "evidence_based"}}}};

}  // namespace detail

inline std::string_view to_string(AsilLevel v) { return detail::kAsilNames.name(v); }
inline std::string_view to_string(RecommendationGrade v) { return detail::kGradeNames.name(v); }
inline std::string_view to_string(Scope v) { return detail::kScopeNames.name(v); }
inline std::string_view to_string(Applicability v) { return detail::kApplicabilityNames.name(v); }
inline std::string_view to_string(Concretization v) { return detail::kConcretizationNames.name(v); }
inline std::string_view to_string(Testability v) { return detail::kTestabilityNames.name(v); }
inline std::string_view to_string(ProcedureKind v) { return detail::kProcedureNames.name(v); }

inline AsilLevel parse_asil(std::string_view s) {
  auto v = detail::kAsilNames.parse(s);
  require(v.has_value(), ErrorKind::Validation, "unknown ASIL level '" + std::string(s) + "'");
  return *v;
}

inline RecommendationGrade parse_grade(std::string_view s) {
  auto v = detail::kGradeNames.parse(s);
  require(v.has_value(), ErrorKind::Validation, "unknown recommendation grade '" + std::string(s) + "'");
  return *v;
}

struct Requirement {
  int id = 0;
  std::string text;
  Scope scope = Scope::EntireSystem;
  std::array<RecommendationGrade, 4> grades{};  // indexed by AsilLevel
  Applicability applicability = Applicability::Simple;
  Concretization concretization = Concretization::Minor;
  Testability testability = Testability::Medium;
  std::set<ProcedureKind> procedure_kind;

  RecommendationGrade grade(AsilLevel level) const { return grades[static_cast<std::size_t>(level)]; }

  friend bool operator==(const Requirement&, const Requirement&) = default;
};

struct Catalogue {
  std::string version;
  std::vector<Requirement> requirements;

  friend bool operator==(const Catalogue&, const Catalogue&) = default;
};

namespace detail {

template <class Names>
auto parse_enum_field(const Json& obj, const char* field, const Names& names, const std::string& where) {
  require(obj.contains(field), ErrorKind::Format, where + ": missing field '" + field + "'");
  const auto& v = obj.at(field);
  require(v.is_string(), ErrorKind::Format, where + ": field '" + field + "' must be a string");
  auto parsed = names.parse(v.get<std::string>());
  require(parsed.has_value(), ErrorKind::Format,
          where + ": field '" + field + "' has unknown value '" + v.get<std::string>() + "'");
  return *parsed;
}

}  // namespace detail

/// Validates the catalogue invariants; throws a validation error naming the offender.
inline void validate(const Catalogue& catalogue) {
  require(!catalogue.version.empty(), ErrorKind::Validation, "catalogue version must be non-empty");
  std::set<int> seen;
  for (const auto& r : catalogue.requirements) {
    const std::string who = "requirement " + std::to_string(r.id);
    require(r.id > 0, ErrorKind::Validation, who + ": id must be positive");
    require(seen.insert(r.id).second, ErrorKind::Validation, who + ": duplicate id");
    require(!r.procedure_kind.empty(), ErrorKind::Validation, who + ": procedure_kind must be non-empty");
  }
}

inline Requirement requirement_from_json(const Json& j, std::size_t index) {
  std::string where = "requirements[" + std::to_string(index) + "]";
  require(j.is_object(), ErrorKind::Format, where + ": expected an object");
  require(j.contains("id") && j.at("id").is_number_integer(), ErrorKind::Format,
          where + ": field 'id' must be an integer");
  Requirement r;
  r.id = j.at("id").get<int>();
  where = "requirement " + std::to_string(r.id);
  require(j.contains("text") && j.at("text").is_string(), ErrorKind::Format,
          where + ": field 'text' must be a string");
  r.text = j.at("text").get<std::string>();
  r.scope = detail::parse_enum_field(j, "scope", detail::kScopeNames, where);
  r.applicability = detail::parse_enum_field(j, "applicability", detail::kApplicabilityNames, where);
  r.concretization = detail::parse_enum_field(j, "concretization", detail::kConcretizationNames, where);
  r.testability = detail::parse_enum_field(j, "testability", detail::kTestabilityNames, where);

  require(j.contains("grades") && j.at("grades").is_object(), ErrorKind::Format,
          where + ": field 'grades' must be an object");
  const auto& grades = j.at("grades");
  for (AsilLevel level : kAllAsilLevels) {
    const std::string key(to_string(level));
    require(grades.contains(key), ErrorKind::Validation, where + ": missing grade for ASIL " + key);
    r.grades[static_cast<std::size_t>(level)] =
        detail::parse_enum_field(grades, key.c_str(), detail::kGradeNames, where + " grades");
  }
  for (const auto& [key, _] : grades.items()) {
    require(detail::kAsilNames.parse(key).has_value(), ErrorKind::Format,
            where + ": unknown ASIL key '" + key + "' in grades");
  }

  require(j.contains("procedure_kind") && j.at("procedure_kind").is_array(), ErrorKind::Format,
          where + ": field 'procedure_kind' must be an array");
  for (const auto& p : j.at("procedure_kind")) {
    require(p.is_string(), ErrorKind::Format, where + ": procedure_kind entries must be strings");
    auto kind = detail::kProcedureNames.parse(p.get<std::string>());
    require(kind.has_value(), ErrorKind::Format,
            where + ": unknown procedure kind '" + p.get<std::string>() + "'");
    r.procedure_kind.insert(*kind);
  }
  return r;
}

inline Json to_json(const Requirement& r) {
  Json grades = Json::object();
  for (AsilLevel level : kAllAsilLevels) grades[std::string(to_string(level))] = to_string(r.grade(level));
  Json kinds = Json::array();
  for (auto k : r.procedure_kind) kinds.push_back(to_string(k));
  return Json{{"id", r.id},
              {"text", r.text},
              {"scope", to_string(r.scope)},
              {"grades", grades},
              {"applicability", to_string(r.applicability)},
              {"concretization", to_string(r.concretization)},
              {"testability", to_string(r.testability)},
              {"procedure_kind", kinds}};
}

inline Json to_json(const Catalogue& c) {
  Json reqs = Json::array();
  for (const auto& r : c.requirements) reqs.push_back(to_json(r));
  return Json{{"version", c.version}, {"requirements", reqs}};
}

inline Catalogue catalogue_from_json(const Json& j) {
  require(j.is_object(), ErrorKind::Format, "catalogue: top level must be an object");
  require(j.contains("version") && j.at("version").is_string(), ErrorKind::Format,
          "catalogue: field 'version' must be a string");
  require(j.contains("requirements") && j.at("requirements").is_array(), ErrorKind::Format,
          "catalogue: field 'requirements' must be an array");
  Catalogue c;
  c.version = j.at("version").get<std::string>();
  const auto& reqs = j.at("requirements");
  for (std::size_t i = 0; i < reqs.size(); ++i) c.requirements.push_back(requirement_from_json(reqs[i], i));
  validate(c);
  return c;
}

inline Catalogue parse_catalogue(const std::string& text, const std::string& origin = "catalogue") {
  return catalogue_from_json(parse_json(text, origin));
}

inline Catalogue load_catalogue(const fs::path& path) {
  return catalogue_from_json(read_json_file(path));
}

inline std::string serialize(const Catalogue& c) { return dump_json(to_json(c)); }

/// Requirements whose grade at `risk` is at least `min_grade`, input order kept.
inline std::vector<Requirement> select_requirements(const Catalogue& catalogue, AsilLevel risk,
                                                    RecommendationGrade min_grade) {
  std::vector<Requirement> out;
  std::copy_if(catalogue.requirements.begin(), catalogue.requirements.end(), std::back_inserter(out),
               [&](const Requirement& r) { return r.grade(risk) >= min_grade; });
  return out;
}

inline const Requirement& requirement_by_id(const Catalogue& catalogue, int id) {
  auto it = std::find_if(catalogue.requirements.begin(), catalogue.requirements.end(),
                         [id](const Requirement& r) { return r.id == id; });
  require(it != catalogue.requirements.end(), ErrorKind::NotFound,
          "requirement " + std::to_string(id) + " not in catalogue");
  return *it;
}

/// The three requirements with executable procedures, graded as published.
inline Catalogue exemplar_catalogue() {
  using G = RecommendationGrade;
  constexpr std::array<G, 4> all_high{G::HighlyRecommended, G::HighlyRecommended, G::HighlyRecommended,
                                      G::HighlyRecommended};
  Catalogue c;
  c.version = "exemplar-1.0";
  c.requirements.push_back({7, "The performance shall be compliant to the allowed worst-case error.",
                            Scope::EntireSystem, all_high, Applicability::Complex, Concretization::Major,
                            Testability::High, {ProcedureKind::MetricBased}});
  c.requirements.push_back({30, "The training, test and evaluation datasets shall be independent from each other.",
                            Scope::AiSubsystem, all_high, Applicability::Simple, Concretization::Minor,
                            Testability::High, {ProcedureKind::EvidenceBased}});
  c.requirements.push_back(
      {33,
       "The model's decisions shall be explained to aid the comparison between the modelling of the system "
       "and the trained model.",
       Scope::AiSubsystem, all_high, Applicability::Complex, Concretization::Minor, Testability::Medium,
       {ProcedureKind::MetricBased, ProcedureKind::EvidenceBased}});
  return c;
}

}  // namespace aiaudit
