#pragma once

#include <cctype>
#include <string>

#include <fmt/format.h>

#include "aiaudit/engine.hpp"

namespace aiaudit {

inline std::string outcome_label(Outcome o) {
  std::string s(to_string(o));
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

/// "7/rain" for named specifications, "30" for the default one.
inline std::string row_label(const Verdict& v) {
  return v.specification == "default" ? std::to_string(v.requirement_id)
                                      : fmt::format("{}/{}", v.requirement_id, v.specification);
}

inline std::string report_header(const AuditReport& r) {
  return fmt::format("audit report: catalogue {}, risk {}, min grade {}\n", r.catalogue_version,
                     to_string(r.risk_level), to_string(r.min_grade));
}

/// One line per verdict: label, outcome and the headline metric when there is one.
inline std::string render_summary(const AuditReport& r) {
  std::string out = report_header(r);
  for (const Verdict* v : all_verdicts(r)) {
    out += row_label(*v) + " " + outcome_label(v->outcome);
    if (v->headline) out += fmt::format(" {:.2f}", *v->headline);
    out += "\n";
  }
  return out;
}

inline std::string render_text(const AuditReport& r) {
  std::string out = report_header(r);
  out += fmt::format("timestamp {}\n", r.timestamp);
  out += fmt::format("environment {}\n", r.environment.dump());
  for (const auto& rr : r.requirements) {
    out += fmt::format("\nREQ {}: {}\n", rr.id, rr.text);
    for (const auto& s : rr.specifications) {
      const Verdict& v = s.verdict;
      out += fmt::format("  [{}] {}\n", row_label(v), outcome_label(v.outcome));
      out += fmt::format("    procedure: {}\n", v.procedure_description);
      if (!s.parameters.rationale.empty()) out += fmt::format("    rationale: {}\n", s.parameters.rationale);
      if (!s.parameters.parameter_values.empty())
        out += fmt::format("    parameters: {}\n", s.parameters.parameter_values.dump());
      for (const auto& [key, value] : v.measured.items())
        if (!value.is_object()) out += fmt::format("    {} = {}\n", key, value.dump());
      for (const auto& f : v.evidence) {
        if (f.kind == "independence_report" || f.kind == "class_table") continue;
        out += fmt::format("    finding {}: {}\n", f.kind, f.message);
      }
    }
  }
  return out;
}

}  // namespace aiaudit
