#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aiaudit/attacks.hpp"
#include "aiaudit/catalogue.hpp"
#include "aiaudit/dataset.hpp"
#include "aiaudit/digest.hpp"
#include "aiaudit/errors.hpp"
#include "aiaudit/explain.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/model.hpp"
#include "aiaudit/perturb.hpp"

#ifndef AIAUDIT_VERSION
#define AIAUDIT_VERSION "0.0.0"
#endif

namespace aiaudit {

inline constexpr std::string_view kToolboxVersion = AIAUDIT_VERSION;
inline constexpr std::string_view kBuiltinExemplar = "builtin:exemplar";

// ---------------------------------------------------------------------------
// Verdicts

enum class Outcome { Pass, Fail, NotExecutable, Error };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "pass";
    case Outcome::Fail: return "fail";
    case Outcome::NotExecutable: return "not_executable";
    case Outcome::Error: return "error";
  }
  return "?";
}

inline Outcome parse_outcome(std::string_view s) {
  for (Outcome o : {Outcome::Pass, Outcome::Fail, Outcome::NotExecutable, Outcome::Error})
    if (to_string(o) == s) return o;
  fail(ErrorKind::Format, "unknown outcome '" + std::string(s) + "'");
}

struct Finding {
  std::string kind;
  std::string message;
  Json details = Json::object();

  friend bool operator==(const Finding&, const Finding&) = default;
};

struct Verdict {
  int requirement_id = 0;
  std::string specification = "default";
  Outcome outcome = Outcome::NotExecutable;
  Json measured = Json::object();
  std::vector<Finding> evidence;
  std::string procedure_description;
  std::optional<double> headline;  // metric shown in summaries

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Parameters bound to one specification of a requirement, with defaults filled in.
struct AuditParameters {
  int requirement_id = 0;
  std::string specification = "default";
  Json parameter_values = Json::object();
  std::string rationale;

  friend bool operator==(const AuditParameters&, const AuditParameters&) = default;
};

inline Json to_json(const Finding& f) { return {{"kind", f.kind}, {"message", f.message}, {"details", f.details}}; }

inline Finding finding_from_json(const Json& j) {
  return {j.at("kind").get<std::string>(), j.at("message").get<std::string>(), j.value("details", Json::object())};
}

inline Json to_json(const Verdict& v) {
  Json evidence = Json::array();
  for (const auto& f : v.evidence) evidence.push_back(to_json(f));
  Json j = {{"requirement_id", v.requirement_id},
            {"specification", v.specification},
            {"outcome", to_string(v.outcome)},
            {"measured", v.measured},
            {"evidence", evidence},
            {"procedure_description", v.procedure_description}};
  j["headline"] = v.headline ? Json(*v.headline) : Json(nullptr);
  return j;
}

inline Verdict verdict_from_json(const Json& j) {
  Verdict v;
  v.requirement_id = j.at("requirement_id").get<int>();
  v.specification = j.at("specification").get<std::string>();
  v.outcome = parse_outcome(j.at("outcome").get<std::string>());
  v.measured = j.at("measured");
  for (const auto& f : j.at("evidence")) v.evidence.push_back(finding_from_json(f));
  v.procedure_description = j.at("procedure_description").get<std::string>();
  if (j.contains("headline") && !j.at("headline").is_null()) v.headline = j.at("headline").get<double>();
  return v;
}

inline Json to_json(const AuditParameters& p) {
  return {{"requirement_id", p.requirement_id},
          {"specification", p.specification},
          {"parameter_values", p.parameter_values},
          {"rationale", p.rationale}};
}

inline AuditParameters audit_parameters_from_json(const Json& j) {
  return {j.at("requirement_id").get<int>(), j.at("specification").get<std::string>(), j.at("parameter_values"),
          j.at("rationale").get<std::string>()};
}

namespace detail {

inline Verdict error_verdict(int id, std::string spec, std::string description, const std::exception& e) {
  Verdict v;
  v.requirement_id = id;
  v.specification = std::move(spec);
  v.outcome = Outcome::Error;
  v.procedure_description = std::move(description);
  const auto* ae = dynamic_cast<const AuditError*>(&e);
  v.evidence.push_back({ae ? std::string(to_string(ae->kind())) : "runtime_error", e.what(), Json::object()});
  return v;
}

/// Evenly strided subset of at most `limit` items (0 = all), order kept.
inline DatasetSplit strided_subset(const DatasetSplit& split, std::size_t limit) {
  if (limit == 0 || limit >= split.size()) return split;
  DatasetSplit out{split.name, {}};
  out.items.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) out.items.push_back(split.items[i * split.size() / limit]);
  return out;
}

inline Json take_object(const Json& j, const std::string& what) {
  require(j.is_object(), ErrorKind::Validation, what + " must be an object");
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// REQ 7: worst-case performance

struct WorstCaseParams {
  std::string stressor;  // "rain" or "pgd"
  RainParams rain;
  PgdParams pgd;
  double accuracy_threshold = 0.0;
  std::size_t max_samples = 0;  // 0 = every evaluation sample

  Json to_json() const {
    Json j = stressor == "rain" ? aiaudit::to_json(rain) : aiaudit::to_json(pgd);
    j["accuracy_threshold"] = accuracy_threshold;
    j["max_samples"] = max_samples;
    return j;
  }
};

/// `accuracy_threshold` is mandatory; the remaining keys overlay the stressor defaults.
inline WorstCaseParams worst_case_params_from_json(const std::string& stressor, const Json& j) {
  require(stressor == "rain" || stressor == "pgd", ErrorKind::Validation,
          "requirement 7 has no specification '" + stressor + "' (expected rain or pgd)");
  Json rest = detail::take_object(j, "requirement 7 parameters");
  WorstCaseParams p;
  p.stressor = stressor;
  require(rest.contains("accuracy_threshold"), ErrorKind::Validation,
          "requirement 7/" + stressor + ": accuracy_threshold is required");
  try {
    p.accuracy_threshold = rest.at("accuracy_threshold").get<double>();
    if (rest.contains("max_samples")) p.max_samples = rest.at("max_samples").get<std::size_t>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("requirement 7 parameters: ") + e.what());
  }
  require(p.accuracy_threshold >= 0 && p.accuracy_threshold <= 1, ErrorKind::Validation,
          "accuracy_threshold must be in [0, 1]");
  rest.erase("accuracy_threshold");
  rest.erase("max_samples");
  if (stressor == "rain") p.rain = rain_params_from_json(rest);
  else p.pgd = pgd_params_from_json(rest);
  return p;
}

/// Accuracy under the stressor; Pass iff strictly above the threshold.
inline Verdict run_req7_worst_case(ClassifierAdapter& model, const DatasetSplit& split, const WorstCaseParams& p) {
  const std::string description =
      p.stressor == "rain"
          ? "accuracy under the heavy-rain transform (per-sample streak seeds) must exceed the threshold"
          : "accuracy under an L-inf PGD attack must exceed the threshold";
  try {
    require(!split.empty(), ErrorKind::Evidence, "evaluation split is empty");
    const DatasetSplit eval = detail::strided_subset(split, p.max_samples);
    const double clean = evaluate_accuracy(model, eval);
    double stressed = 0.0;
    if (p.stressor == "rain") stressed = evaluate_accuracy(model, eval, rain_transform(p.rain, true));
    else stressed = robust_accuracy(model, eval, p.pgd);

    Verdict v;
    v.requirement_id = 7;
    v.specification = p.stressor;
    v.procedure_description = description;
    v.outcome = stressed > p.accuracy_threshold ? Outcome::Pass : Outcome::Fail;
    v.headline = stressed;
    v.measured = {{"clean_accuracy", clean},
                  {"stressed_accuracy", stressed},
                  {"accuracy_threshold", p.accuracy_threshold},
                  {"samples", eval.size()},
                  {"stressor", p.to_json()}};
    if (v.outcome == Outcome::Fail) {
      v.evidence.push_back({"below_threshold",
                            "stressed accuracy " + std::to_string(stressed) + " is not greater than " +
                                std::to_string(p.accuracy_threshold),
                            {{"stressed_accuracy", stressed}, {"accuracy_threshold", p.accuracy_threshold}}});
    }
    return v;
  } catch (const std::exception& e) {
    return detail::error_verdict(7, p.stressor, description, e);
  }
}

// ---------------------------------------------------------------------------
// REQ 30: dataset independence

struct IndependenceParams {
  int phash_hamming_max = kDefaultPhashHammingMax;
  double tv_max = kDefaultTvMax;
  std::optional<double> confirm_min_correlation;  // unset = hash distance alone decides

  Json to_json() const {
    return {{"phash_hamming_max", phash_hamming_max},
            {"tv_max", tv_max},
            {"confirm_min_correlation", confirm_min_correlation ? Json(*confirm_min_correlation) : Json(nullptr)}};
  }
};

inline IndependenceParams independence_params_from_json(const Json& j) {
  detail::take_object(j, "requirement 30 parameters");
  IndependenceParams p;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "phash_hamming_max") p.phash_hamming_max = v.get<int>();
      else if (key == "tv_max") p.tv_max = v.get<double>();
      else if (key == "confirm_min_correlation") {
        if (!v.is_null()) p.confirm_min_correlation = v.get<double>();
      } else fail(ErrorKind::Validation, "unknown requirement 30 parameter '" + key + "'");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("requirement 30 parameters: ") + e.what());
  }
  require(p.phash_hamming_max >= 0 && p.phash_hamming_max <= 64, ErrorKind::Validation,
          "phash_hamming_max must be in [0, 64]");
  require(p.tv_max >= 0 && p.tv_max <= 1, ErrorKind::Validation, "tv_max must be in [0, 1]");
  require(!p.confirm_min_correlation || (*p.confirm_min_correlation >= -1 && *p.confirm_min_correlation <= 1),
          ErrorKind::Validation, "confirm_min_correlation must be in [-1, 1]");
  return p;
}

/// Pass iff the splits are pairwise disjoint and follow the same class distribution.
inline Verdict run_req30_independence(const DatasetSplit& train, const DatasetSplit& val, const DatasetSplit& test,
                                      const IndependenceParams& p) {
  const std::string description =
      "splits must share no exact, near-duplicate or same-track images, and class distributions must agree";
  try {
    const IndependenceReport r = independence_check(train, val, test, p.phash_hamming_max, p.tv_max,
                                                       p.confirm_min_correlation);
    Verdict v;
    v.requirement_id = 30;
    v.procedure_description = description;
    v.outcome = r.disjoint && r.same_distribution ? Outcome::Pass : Outcome::Fail;
    std::size_t exact = 0, near = 0, tracks = 0;
    for (const auto& pc : r.pairs) {
      const std::string pair = std::string(to_string(pc.first)) + "/" + std::string(to_string(pc.second));
      exact += pc.exact_overlap;
      near += pc.near_duplicate;
      tracks += pc.track_overlap;
      if (pc.exact_overlap)
        v.evidence.push_back({"exact_overlap", std::to_string(pc.exact_overlap) + " identical images in " + pair,
                              {{"splits", pair}, {"count", pc.exact_overlap}}});
      if (pc.near_duplicate)
        v.evidence.push_back({"near_duplicate", std::to_string(pc.near_duplicate) + " near-duplicate pairs in " + pair,
                              {{"splits", pair}, {"count", pc.near_duplicate}}});
      if (pc.track_overlap)
        v.evidence.push_back({"track_leakage", std::to_string(pc.track_overlap) + " tracks shared by " + pair,
                              {{"splits", pair}, {"count", pc.track_overlap}, {"tracks", pc.shared_tracks}}});
    }
    if (!r.same_distribution)
      v.evidence.push_back({"distribution_shift",
                            "max pairwise TV distance " + std::to_string(r.max_pairwise_tv_distance) + " exceeds " +
                                std::to_string(p.tv_max),
                            {{"max_tv_distance", r.max_pairwise_tv_distance}}});
    std::size_t untracked = 0;
    for (const auto& [name, n] : r.items_without_track) untracked += n;
    if (untracked)
      v.evidence.push_back({"missing_provenance",
                            std::to_string(untracked) + " images carry no track id; track leakage among them is undetectable",
                            {{"count", untracked}}});
    v.evidence.push_back({"independence_report", "full independence analysis", to_json(r)});
    v.measured = {{"exact_overlap_count", exact},
                  {"near_duplicate_count", near},
                  {"track_overlap_count", tracks},
                  {"max_tv_distance", r.max_pairwise_tv_distance},
                  {"disjoint", r.disjoint},
                  {"same_distribution", r.same_distribution},
                  {"parameters", p.to_json()}};
    return v;
  } catch (const std::exception& e) {
    return detail::error_verdict(30, "default", description, e);
  }
}

// ---------------------------------------------------------------------------
// REQ 33: explainability

struct ExplainabilityParams {
  CenterCheckParams check;
  std::string layer;  // empty = deepest declared conv layer

  Json to_json() const {
    Json j = aiaudit::to_json(check);
    j["layer"] = layer;
    return j;
  }
};

inline ExplainabilityParams explainability_params_from_json(const Json& j) {
  Json rest = detail::take_object(j, "requirement 33 parameters");
  ExplainabilityParams p;
  if (rest.contains("layer")) {
    require(rest.at("layer").is_string(), ErrorKind::Validation, "layer must be a string");
    p.layer = rest.at("layer").get<std::string>();
    rest.erase("layer");
  }
  p.check = center_check_params_from_json(rest);
  return p;
}

/// Wraps the center-focus check; evidence carries the per-class table and sampled images.
inline Verdict run_req33_explainability(ClassifierAdapter& model, const DatasetSplit& split,
                                        ExplainabilityParams p) {
  const std::string description =
      "Grad-CAM saliency of the predicted class must concentrate in the image center for every class";
  try {
    require(model.capabilities().activations, ErrorKind::Capability, "model exposes no layer activations");
    const auto layers = model.layer_names();
    require(!layers.empty(), ErrorKind::Capability, "model declares no conv layers");
    if (p.layer.empty()) p.layer = layers.back();
    const ExplanationAudit audit = explanation_audit(model, split, p.check, p.layer);

    Verdict v;
    v.requirement_id = 33;
    v.procedure_description = description;
    v.outcome = audit.pass ? Outcome::Pass : Outcome::Fail;
    Json table = Json::array();
    std::size_t classes_passed = 0, samples = 0, degenerate = 0;
    double mass_sum = 0.0, min_rate = 1.0;
    for (const auto& c : audit.classes) {
      Json sampled = Json::array();
      for (const auto& s : c.samples) {
        sampled.push_back({{"source", s.source_name},
                           {"predicted", s.predicted},
                           {"center_mass", s.center_mass},
                           {"degenerate", s.degenerate},
                           {"passed", s.passed}});
        mass_sum += s.center_mass;
        degenerate += s.degenerate ? 1 : 0;
        ++samples;
      }
      table.push_back({{"class_id", c.class_id},
                       {"available", c.available},
                       {"resampled", c.resampled},
                       {"passed", c.passed},
                       {"pass_rate", c.pass_rate},
                       {"pass", c.pass},
                       {"samples", sampled}});
      classes_passed += c.pass ? 1 : 0;
      min_rate = std::min(min_rate, c.pass_rate);
      if (c.resampled)
        v.evidence.push_back({"resampled",
                              "class " + std::to_string(c.class_id) + " has " + std::to_string(c.available) +
                                  " images; sampled with replacement",
                              {{"class_id", c.class_id}, {"available", c.available}}});
      if (!c.pass)
        v.evidence.push_back({"class_failed",
                              "class " + std::to_string(c.class_id) + " pass rate " + std::to_string(c.pass_rate),
                              {{"class_id", c.class_id}, {"pass_rate", c.pass_rate}}});
    }
    v.evidence.push_back({"class_table", "per-class center-focus results", {{"layer", p.layer}, {"classes", table}}});
    v.measured = {{"classes_passed", classes_passed},
                  {"classes_total", audit.classes.size()},
                  {"min_class_pass_rate", audit.classes.empty() ? 0.0 : min_rate},
                  {"mean_center_mass", samples ? mass_sum / samples : 0.0},
                  {"degenerate_maps", degenerate},
                  {"parameters", p.to_json()}};
    return v;
  } catch (const std::exception& e) {
    return detail::error_verdict(33, "default", description, e);
  }
}

// ---------------------------------------------------------------------------
// Configuration

/// Requirement ids with an implemented procedure and their specifications.
inline const std::map<int, std::set<std::string>>& executable_requirements() {
  static const std::map<int, std::set<std::string>> table{{7, {"rain", "pgd"}}, {30, {"default"}}, {33, {"default"}}};
  return table;
}

struct SplitConfig {
  bool use_manifests = false;
  SplitFractions fractions;
  std::uint64_t seed = 0;
  fs::path train_manifest, validation_manifest, test_manifest;
};

struct RequirementConfig {
  int id = 0;
  std::string specification = "default";
  Json parameters = Json::object();
  std::string rationale;
};

struct AuditConfig {
  std::string catalogue;  // path or builtin:exemplar
  AsilLevel risk_level = AsilLevel::A;
  RecommendationGrade min_grade = RecommendationGrade::HighlyRecommended;
  std::string model_checkpoint;
  std::string dataset_root;
  SplitConfig split;
  std::optional<std::vector<int>> select_ids;
  std::vector<RequirementConfig> requirements;
  fs::path base_dir;  // relative paths resolve against this

  fs::path resolve(const fs::path& p) const { return p.is_absolute() || base_dir.empty() ? p : base_dir / p; }
};

inline Json to_json(const SplitConfig& s) {
  if (s.use_manifests)
    return {{"manifests",
             {{"train", s.train_manifest.generic_string()},
              {"validation", s.validation_manifest.generic_string()},
              {"test", s.test_manifest.generic_string()}}}};
  return {{"fractions", {s.fractions.train, s.fractions.validation, s.fractions.test}}, {"seed", s.seed}};
}

inline SplitConfig split_config_from_json(const Json& j) {
  require(j.is_object(), ErrorKind::Validation, "split must be an object");
  SplitConfig s;
  try {
    if (j.contains("manifests")) {
      require(!j.contains("fractions"), ErrorKind::Validation, "split: give either manifests or fractions");
      const auto& m = j.at("manifests");
      s.use_manifests = true;
      s.train_manifest = m.at("train").get<std::string>();
      s.validation_manifest = m.at("validation").get<std::string>();
      s.test_manifest = m.at("test").get<std::string>();
    } else {
      const auto& f = j.at("fractions");
      require(f.is_array() && f.size() == 3, ErrorKind::Validation, "split fractions must be [train, val, test]");
      s.fractions = {f[0].get<double>(), f[1].get<double>(), f[2].get<double>()};
      const std::array<double, 3> arr{s.fractions.train, s.fractions.validation, s.fractions.test};
      require(std::all_of(arr.begin(), arr.end(), [](double v) { return v > 0; }) &&
                  std::abs(arr[0] + arr[1] + arr[2] - 1.0) <= 1e-9,
              ErrorKind::Validation, "split fractions must be positive and sum to 1");
      s.seed = j.value("seed", std::uint64_t{0});
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("split: ") + e.what());
  }
  return s;
}

inline Json to_json(const AuditConfig& c) {
  Json reqs = Json::array();
  for (const auto& r : c.requirements)
    reqs.push_back(
        {{"id", r.id}, {"specification", r.specification}, {"parameters", r.parameters}, {"rationale", r.rationale}});
  Json j = {{"catalogue", c.catalogue},
            {"risk_level", to_string(c.risk_level)},
            {"min_grade", to_string(c.min_grade)},
            {"model_checkpoint", c.model_checkpoint},
            {"dataset_root", c.dataset_root},
            {"split", to_json(c.split)},
            {"requirements", reqs}};
  if (c.select_ids) j["select_ids"] = *c.select_ids;
  return j;
}

/// Parses and validates an audit configuration; `base_dir` anchors relative paths.
inline AuditConfig audit_config_from_json(const Json& j, const fs::path& base_dir = {}) {
  require(j.is_object(), ErrorKind::Validation, "audit configuration must be an object");
  static const std::set<std::string> known{"catalogue",    "risk_level", "min_grade",  "model_checkpoint",
                                           "dataset_root", "split",      "select_ids", "requirements"};
  for (const auto& [key, v] : j.items())
    require(known.contains(key), ErrorKind::Validation, "unknown configuration field '" + key + "'");
  for (const char* field : {"catalogue", "risk_level", "model_checkpoint", "dataset_root", "split", "requirements"})
    require(j.contains(field), ErrorKind::Validation, std::string("configuration is missing '") + field + "'");

  AuditConfig c;
  c.base_dir = base_dir;
  try {
    c.catalogue = j.at("catalogue").get<std::string>();
    c.risk_level = parse_asil(j.at("risk_level").get<std::string>());
    if (j.contains("min_grade")) c.min_grade = parse_grade(j.at("min_grade").get<std::string>());
    c.model_checkpoint = j.at("model_checkpoint").get<std::string>();
    c.dataset_root = j.at("dataset_root").get<std::string>();
    c.split = split_config_from_json(j.at("split"));
    if (j.contains("select_ids")) c.select_ids = j.at("select_ids").get<std::vector<int>>();
    require(j.at("requirements").is_array(), ErrorKind::Validation, "requirements must be an array");
    for (const auto& r : j.at("requirements")) {
      require(r.is_object(), ErrorKind::Validation, "requirement entries must be objects");
      for (const auto& [key, v] : r.items())
        require(key == "id" || key == "specification" || key == "parameters" || key == "rationale",
                ErrorKind::Validation, "unknown requirement entry field '" + key + "'");
      RequirementConfig rc;
      rc.id = r.at("id").get<int>();
      rc.specification = r.value("specification", std::string("default"));
      rc.parameters = r.value("parameters", Json::object());
      rc.rationale = r.value("rationale", std::string());
      c.requirements.push_back(std::move(rc));
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("configuration: ") + e.what());
  } catch (const AuditError& e) {
    if (e.kind() == ErrorKind::Validation) throw;
    fail(ErrorKind::Validation, e.what());
  }
  return c;
}

inline AuditConfig load_audit_config(const fs::path& path) {
  return audit_config_from_json(read_json_file(path), path.parent_path());
}

inline Catalogue load_configured_catalogue(const AuditConfig& c) {
  if (c.catalogue == kBuiltinExemplar) return exemplar_catalogue();
  return load_catalogue(c.resolve(c.catalogue));
}

/// A planned procedure run: the requirement, its specification and bound parameters.
struct PlannedRun {
  Requirement requirement;
  bool executable = false;
  std::vector<AuditParameters> specifications;
};

/// Selects requirements and binds parameters. Throws a validation error when a
/// selected executable requirement lacks parameters or a rationale, before any
/// procedure runs.
inline std::vector<PlannedRun> plan_audit(const AuditConfig& config, const Catalogue& catalogue) {
  std::vector<Requirement> selected = select_requirements(catalogue, config.risk_level, config.min_grade);
  if (config.select_ids) {
    const std::set<int> keep(config.select_ids->begin(), config.select_ids->end());
    for (int id : keep) requirement_by_id(catalogue, id);
    std::erase_if(selected, [&](const Requirement& r) { return !keep.contains(r.id); });
  }
  std::vector<PlannedRun> plan;
  for (const auto& r : selected) {
    PlannedRun run{r, executable_requirements().contains(r.id), {}};
    std::set<std::string> seen;
    for (const auto& rc : config.requirements) {
      if (rc.id != r.id) continue;
      const std::string where = "requirement " + std::to_string(r.id) + "/" + rc.specification;
      require(run.executable, ErrorKind::Validation, where + " has no implemented procedure to parameterize");
      require(executable_requirements().at(r.id).contains(rc.specification), ErrorKind::Validation,
              where + ": unknown specification");
      require(seen.insert(rc.specification).second, ErrorKind::Validation, where + " is configured twice");
      require(!rc.rationale.empty(), ErrorKind::Validation, where + ": rationale is required");
      Json effective;
      if (r.id == 7) effective = worst_case_params_from_json(rc.specification, rc.parameters).to_json();
      else if (r.id == 30) effective = independence_params_from_json(rc.parameters).to_json();
      else effective = explainability_params_from_json(rc.parameters).to_json();
      run.specifications.push_back({r.id, rc.specification, effective, rc.rationale});
    }
    require(!run.executable || !run.specifications.empty(), ErrorKind::Validation,
            "selected requirement " + std::to_string(r.id) + " has no audit parameters");
    plan.push_back(std::move(run));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Report

struct SpecificationResult {
  AuditParameters parameters;
  Verdict verdict;

  friend bool operator==(const SpecificationResult&, const SpecificationResult&) = default;
};

struct RequirementResult {
  int id = 0;
  std::string text;
  std::vector<SpecificationResult> specifications;

  friend bool operator==(const RequirementResult&, const RequirementResult&) = default;
};

struct AuditReport {
  std::string catalogue_version;
  AsilLevel risk_level = AsilLevel::A;
  RecommendationGrade min_grade = RecommendationGrade::HighlyRecommended;
  std::vector<int> selected_ids;
  std::vector<RequirementResult> requirements;
  Json environment = Json::object();
  Json effective_config = Json::object();
  Json defaults = Json::object();
  std::string timestamp;

  friend bool operator==(const AuditReport&, const AuditReport&) = default;
};

/// Module defaults for every parameter a procedure may read.
inline Json module_defaults() {
  return {{"rain", to_json(RainParams{})},
          {"pgd", to_json(PgdParams{})},
          {"independence", IndependenceParams{}.to_json()},
          {"center_check", ExplainabilityParams{}.to_json()},
          {"worst_case", {{"max_samples", 0}}}};
}

inline Json to_json(const AuditReport& r) {
  Json reqs = Json::array();
  for (const auto& rr : r.requirements) {
    Json specs = Json::array();
    for (const auto& s : rr.specifications)
      specs.push_back({{"parameters", to_json(s.parameters)}, {"verdict", to_json(s.verdict)}});
    reqs.push_back({{"id", rr.id}, {"text", rr.text}, {"specifications", specs}});
  }
  return {{"catalogue_version", r.catalogue_version},
          {"risk_level", to_string(r.risk_level)},
          {"min_grade", to_string(r.min_grade)},
          {"selected_ids", r.selected_ids},
          {"requirements", reqs},
          {"environment", r.environment},
          {"effective_config", r.effective_config},
          {"defaults", r.defaults},
          {"timestamp", r.timestamp}};
}

inline AuditReport audit_report_from_json(const Json& j) {
  AuditReport r;
  try {
    r.catalogue_version = j.at("catalogue_version").get<std::string>();
    r.risk_level = parse_asil(j.at("risk_level").get<std::string>());
    r.min_grade = parse_grade(j.at("min_grade").get<std::string>());
    r.selected_ids = j.at("selected_ids").get<std::vector<int>>();
    for (const auto& jr : j.at("requirements")) {
      RequirementResult rr;
      rr.id = jr.at("id").get<int>();
      rr.text = jr.at("text").get<std::string>();
      for (const auto& js : jr.at("specifications"))
        rr.specifications.push_back(
            {audit_parameters_from_json(js.at("parameters")), verdict_from_json(js.at("verdict"))});
      r.requirements.push_back(std::move(rr));
    }
    r.environment = j.at("environment");
    r.effective_config = j.value("effective_config", Json::object());
    r.defaults = j.value("defaults", Json::object());
    r.timestamp = j.at("timestamp").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, std::string("audit report: ") + e.what());
  }
  std::vector<int> ids;
  for (const auto& rr : r.requirements) ids.push_back(rr.id);
  require(ids == r.selected_ids, ErrorKind::Format, "audit report rows do not match the selected requirements");
  return r;
}

inline AuditReport parse_audit_report(const std::string& text) {
  return audit_report_from_json(parse_json(text, "audit report"));
}

inline std::string serialize(const AuditReport& r) { return dump_json(to_json(r)); }

/// Every verdict of the report, in row order.
inline std::vector<const Verdict*> all_verdicts(const AuditReport& r) {
  std::vector<const Verdict*> out;
  for (const auto& rr : r.requirements)
    for (const auto& s : rr.specifications) out.push_back(&s.verdict);
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Audit execution

/// Model plus the three splits an audit runs against.
struct AuditInputs {
  std::unique_ptr<ClassifierAdapter> model;
  DatasetSplits splits;
  Json environment = Json::object();
};

inline DatasetSplits load_configured_splits(const AuditConfig& c, int num_classes, const LoadOptions& opts) {
  const fs::path root = c.resolve(c.dataset_root);
  DatasetSplits s;
  if (c.split.use_manifests) {
    s.train.items = load_manifest(root, c.resolve(c.split.train_manifest), num_classes, opts);
    s.validation.items = load_manifest(root, c.resolve(c.split.validation_manifest), num_classes, opts);
    s.test.items = load_manifest(root, c.resolve(c.split.test_manifest), num_classes, opts);
  } else {
    s = split_dataset(load_image_folder(root, num_classes, opts), c.split.fractions, c.split.seed);
  }
  return s;
}

inline AuditInputs load_audit_inputs(const AuditConfig& c) {
  const fs::path ckpt = c.resolve(c.model_checkpoint);
  Checkpoint checkpoint = load_checkpoint(ckpt);
  AuditInputs in;
  const ImageShape shape = checkpoint.model.input_shape();
  require(shape.height == shape.width, ErrorKind::Validation, "only square model inputs are supported");
  in.splits = load_configured_splits(c, checkpoint.model.num_classes(), {shape.height});
  in.environment["checkpoint_digest"] = checkpoint_digest(ckpt);
  in.environment["checkpoint_training_split_digest"] =
      checkpoint.metadata.contains("split_digests") ? checkpoint.metadata["split_digests"].value("train", Json(nullptr))
                                                    : Json(nullptr);
  in.model = checkpoint.model.clone();
  return in;
}

/// Runs a planned audit against already-loaded inputs. Procedures never abort
/// each other; failures become Error verdicts.
inline AuditReport execute_audit(const AuditConfig& config, const Catalogue& catalogue,
                                 const std::vector<PlannedRun>& plan, AuditInputs& in) {
  AuditReport report;
  report.catalogue_version = catalogue.version;
  report.risk_level = config.risk_level;
  report.min_grade = config.min_grade;
  report.effective_config = to_json(config);
  report.defaults = module_defaults();

  Json env = in.environment;
  env["toolbox_version"] = kToolboxVersion;
  env["split_seed"] = config.split.use_manifests ? Json(nullptr) : Json(config.split.seed);
  env["split_digests"] = {{"train", split_digest(in.splits.train)},
                          {"validation", split_digest(in.splits.validation)},
                          {"test", split_digest(in.splits.test)}};
  env["split_sizes"] = {{"train", in.splits.train.size()},
                        {"validation", in.splits.validation.size()},
                        {"test", in.splits.test.size()}};
  const Json trained_on = env.value("checkpoint_training_split_digest", Json(nullptr));
  const bool test_used_for_training = trained_on.is_string() && trained_on == env["split_digests"]["test"];
  env["test_split_withheld"] = trained_on.is_string() ? Json(!test_used_for_training) : Json(nullptr);
  Json seeds = {{"split", env["split_seed"]}};

  for (const auto& run : plan) {
    RequirementResult rr{run.requirement.id, run.requirement.text, {}};
    report.selected_ids.push_back(run.requirement.id);
    if (!run.executable) {
      Verdict v;
      v.requirement_id = run.requirement.id;
      v.outcome = Outcome::NotExecutable;
      v.procedure_description = "no automated procedure is implemented for this requirement";
      rr.specifications.push_back({{run.requirement.id, "default", Json::object(), ""}, v});
      report.requirements.push_back(std::move(rr));
      continue;
    }
    for (const auto& params : run.specifications) {
      Verdict v;
      const std::string label = std::to_string(params.requirement_id) + "/" + params.specification;
      if ((run.requirement.id == 7 || run.requirement.id == 33) && test_used_for_training) {
        v = detail::error_verdict(run.requirement.id, params.specification, "evaluation split check",
                                  AuditError(ErrorKind::Evidence, "test split digest equals the training split digest"));
      } else if (run.requirement.id == 7) {
        const auto p = worst_case_params_from_json(params.specification, params.parameter_values);
        v = run_req7_worst_case(*in.model, in.splits.test, p);
        seeds[label] = params.specification == "rain" ? p.rain.seed : p.pgd.seed;
      } else if (run.requirement.id == 30) {
        v = run_req30_independence(in.splits.train, in.splits.validation, in.splits.test,
                                   independence_params_from_json(params.parameter_values));
      } else {
        const auto p = explainability_params_from_json(params.parameter_values);
        v = run_req33_explainability(*in.model, in.splits.test, p);
        seeds[label] = p.check.seed;
      }
      rr.specifications.push_back({params, std::move(v)});
    }
    report.requirements.push_back(std::move(rr));
  }
  env["seeds"] = seeds;
  report.environment = env;
  report.timestamp = utc_timestamp();
  return report;
}

/// Full audit: validate and plan first, then load inputs and run.
inline AuditReport run_audit(const AuditConfig& config) {
  const Catalogue catalogue = load_configured_catalogue(config);
  const auto plan = plan_audit(config, catalogue);
  AuditInputs inputs = load_audit_inputs(config);
  return execute_audit(config, catalogue, plan, inputs);
}

// ---------------------------------------------------------------------------
// Exit status

enum class ExitStatus { AllPass = 0, AnyFail = 1, ConfigError = 2, RuntimeError = 3 };

/// 1 if any Fail, else 3 if any Error, else 0.
inline ExitStatus exit_status(const AuditReport& r) {
  bool any_fail = false, any_error = false;
  for (const Verdict* v : all_verdicts(r)) {
    any_fail = any_fail || v->outcome == Outcome::Fail;
    any_error = any_error || v->outcome == Outcome::Error;
  }
  if (any_fail) return ExitStatus::AnyFail;
  if (any_error) return ExitStatus::RuntimeError;
  return ExitStatus::AllPass;
}

}  // namespace aiaudit
