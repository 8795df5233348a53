#pragma once

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "aiaudit/catalogue.hpp"
#include "aiaudit/engine.hpp"
#include "aiaudit/model.hpp"
#include "aiaudit/report.hpp"
#include "aiaudit/synthetic_signs.hpp"

namespace aiaudit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// ---------------------------------------------------------------------------
// catalogue

struct CatalogueOptions {
  std::string action = "list";  // list | select
  std::string catalogue = std::string(kBuiltinExemplar);
  std::string risk = "A";
  std::string min_grade = "++";
};

inline std::string grade_cell(RecommendationGrade g) { return std::string(to_string(g)); }

inline std::string format_catalogue_table(const std::vector<Requirement>& rows) {
  std::string out = fmt::format("{:>4}  {:<13}  {:<3}{:<3}{:<3}{:<3} {:<8} {:<6} {:<7} {}\n", "id", "scope", "A", "B",
                                "C", "D", "applic.", "concr.", "test.", "text");
  for (const auto& r : rows) {
    out += fmt::format("{:>4}  {:<13}  {:<3}{:<3}{:<3}{:<3} {:<8} {:<6} {:<7} {}\n", r.id, to_string(r.scope),
                       grade_cell(r.grades[0]), grade_cell(r.grades[1]), grade_cell(r.grades[2]),
                       grade_cell(r.grades[3]), to_string(r.applicability), to_string(r.concretization),
                       to_string(r.testability), r.text);
  }
  return out;
}

inline int cmd_catalogue(const CatalogueOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const Catalogue c = o.catalogue == kBuiltinExemplar ? exemplar_catalogue() : load_catalogue(o.catalogue);
    if (o.action == "list") {
      out << "catalogue " << c.version << "\n" << format_catalogue_table(c.requirements);
    } else {
      const auto sel = select_requirements(c, parse_asil(o.risk), parse_grade(o.min_grade));
      out << "catalogue " << c.version << ", risk " << o.risk << ", min grade " << o.min_grade << "\n"
          << format_catalogue_table(sel);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::optional<std::string> config;  // JSON: dataset_root, num_classes, split, train
  std::optional<std::string> dataset_root;
  std::string output;
  std::optional<int> num_classes;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  std::optional<std::string> architecture;
  std::optional<std::vector<double>> fractions;
  std::optional<std::uint64_t> split_seed;
  std::optional<int> resolution;
  std::optional<std::string> manifests_out;  // write train/validation/test manifests here
};

inline int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  try {
    Json file = Json::object();
    fs::path base;
    if (o.config) {
      file = read_json_file(*o.config);
      base = fs::path(*o.config).parent_path();
      for (const auto& [key, v] : file.items())
        require(key == "dataset_root" || key == "num_classes" || key == "split" || key == "train" ||
                    key == "resolution",
                ErrorKind::Validation, "unknown train configuration field '" + key + "'");
    }
    TrainConfig cfg = train_config_from_json(file.value("train", Json::object()));
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.seed) cfg.seed = *o.seed;
    if (o.learning_rate) cfg.learning_rate = *o.learning_rate;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.architecture) cfg.architecture.kind = *o.architecture;
    cfg.validate();

    SplitConfig split = split_config_from_json(file.value("split", Json{{"fractions", {0.8, 0.1, 0.1}}, {"seed", 0}}));
    if (o.fractions) {
      require(o.fractions->size() == 3, ErrorKind::Validation, "--fractions needs three values");
      split = split_config_from_json(Json{{"fractions", *o.fractions}, {"seed", split.seed}});
    }
    if (o.split_seed) split.seed = *o.split_seed;

    AuditConfig paths;
    paths.base_dir = base;
    std::string root = o.dataset_root ? *o.dataset_root : file.value("dataset_root", std::string());
    require(!root.empty(), ErrorKind::Validation, "no dataset root given");
    if (o.dataset_root) paths.base_dir.clear();
    paths.dataset_root = root;
    paths.split = split;
    const int classes = o.num_classes ? *o.num_classes : file.value("num_classes", synth::kNumClasses);
    const int resolution = o.resolution ? *o.resolution : file.value("resolution", kDefaultAuditResolution);
    require(classes > 0, ErrorKind::Validation, "num_classes must be positive");
    require(resolution > 0 && resolution % 4 == 0, ErrorKind::Validation, "resolution must be a positive multiple of 4");
    require(!o.output.empty(), ErrorKind::Validation, "no output checkpoint given");

    Json effective = {{"dataset_root", root},
                      {"num_classes", classes},
                      {"resolution", resolution},
                      {"split", to_json(split)},
                      {"train", to_json(cfg)}};
    out << "effective configuration " << effective.dump() << "\n";

    DatasetSplits splits = load_configured_splits(paths, classes, {resolution});
    out << "splits train " << splits.train.size() << " validation " << splits.validation.size() << " test "
        << splits.test.size() << "\n";
    TrainResult result = train_reference(splits.train, splits.validation, classes, cfg, &out);

    Json history = Json::array();
    for (const auto& h : result.history)
      history.push_back({{"epoch", h.epoch},
                         {"train_loss", h.train_loss},
                         {"train_accuracy", h.train_accuracy},
                         {"validation_accuracy", h.validation_accuracy}});
    Json meta = effective;
    meta["history"] = history;
    meta["split_digests"] = {{"train", split_digest(splits.train)},
                             {"validation", split_digest(splits.validation)},
                             {"test", split_digest(splits.test)}};
    meta["toolbox_version"] = kToolboxVersion;
    save_checkpoint(o.output, result.model, meta);

    if (o.manifests_out) {
      auto write = [&](const DatasetSplit& s, const char* name) {
        std::vector<ManifestEntry> rows;
        for (const auto& item : s.items) rows.push_back({item.source_name, item.label, item.track_id});
        write_file_atomic(fs::path(*o.manifests_out) / (std::string(name) + ".csv"), format_manifest(rows));
      };
      write(splits.train, "train");
      write(splits.validation, "validation");
      write(splits.test, "test");
    }
    out << "checkpoint written to " << o.output << "\n";
    return kExitOk;
  } catch (const AuditError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// ---------------------------------------------------------------------------
// audit

struct AuditOptions {
  std::string config;
  std::string output;
  std::optional<std::string> catalogue;
  std::optional<std::string> risk;
  std::optional<std::string> min_grade;
  std::optional<std::string> checkpoint;
  std::optional<std::string> dataset_root;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::vector<int>> select_ids;
};

/// Loads the configuration and applies flag overrides. Overridden paths are
/// taken relative to the working directory.
inline AuditConfig effective_audit_config(const AuditOptions& o) {
  AuditConfig c = load_audit_config(o.config);
  auto absolute = [](const std::string& p) { return fs::absolute(p).lexically_normal().generic_string(); };
  if (o.catalogue) c.catalogue = *o.catalogue == kBuiltinExemplar ? *o.catalogue : absolute(*o.catalogue);
  if (o.risk) c.risk_level = parse_asil(*o.risk);
  if (o.min_grade) c.min_grade = parse_grade(*o.min_grade);
  if (o.checkpoint) c.model_checkpoint = absolute(*o.checkpoint);
  if (o.dataset_root) c.dataset_root = absolute(*o.dataset_root);
  if (o.split_seed) {
    require(!c.split.use_manifests, ErrorKind::Validation, "--split-seed conflicts with manifest splits");
    c.split.seed = *o.split_seed;
  }
  if (o.select_ids) c.select_ids = *o.select_ids;
  return c;
}

inline int cmd_audit(const AuditOptions& o, std::ostream& out, std::ostream& err) {
  AuditReport report;
  try {
    require(!o.output.empty(), ErrorKind::Validation, "no output report path given");
    const AuditConfig config = effective_audit_config(o);
    const Catalogue catalogue = load_configured_catalogue(config);
    const auto plan = plan_audit(config, catalogue);
    out << "effective configuration " << to_json(config).dump() << "\n";
    AuditInputs inputs = load_audit_inputs(config);
    report = execute_audit(config, catalogue, plan, inputs);
  } catch (const AuditError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    write_file_atomic(o.output, serialize(report));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  out << render_summary(report);
  return static_cast<int>(exit_status(report));
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  std::string input;
  std::string format = "summary";  // summary | text | json
};

inline int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const AuditReport r = parse_audit_report(read_file(o.input));
    if (o.format == "summary") out << render_summary(r);
    else if (o.format == "text") out << render_text(r);
    else if (o.format == "json") out << serialize(r);
    else fail(ErrorKind::Validation, "unknown format '" + o.format + "'");
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

// ---------------------------------------------------------------------------
// synth

struct SynthCommandOptions {
  std::string output;
  synth::SynthOptions options;
  int classes = synth::kNumClasses;
};

inline int cmd_synth(const SynthCommandOptions& o, std::ostream& out, std::ostream& err) {
  try {
    require(!o.output.empty(), ErrorKind::Validation, "no output directory given");
    const auto items = synth::generate(o.options, o.classes);
    synth::write_dataset(o.output, items);
    out << "wrote " << items.size() << " images to " << o.output << "\n";
    return kExitOk;
  } catch (const AuditError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// ---------------------------------------------------------------------------
// entry point

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Audit toolbox for image classifiers", "aiaudit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolboxVersion));

  CatalogueOptions cat;
  auto* cat_cmd = app.add_subcommand("catalogue", "Inspect the requirement catalogue");
  cat_cmd->add_option("action", cat.action, "list or select")->check(CLI::IsMember({"list", "select"}));
  cat_cmd->add_option("--catalogue", cat.catalogue, "Catalogue JSON (default: built-in exemplar)");
  cat_cmd->add_option("--risk", cat.risk, "ASIL level A-D");
  cat_cmd->add_option("--min-grade", cat.min_grade, "Minimum grade: ++, + or o");

  TrainOptions tr;
  auto* tr_cmd = app.add_subcommand("train", "Train the reference classifier");
  tr_cmd->add_option("--config", tr.config, "Training configuration JSON");
  tr_cmd->add_option("--data", tr.dataset_root, "Dataset root (<root>/<class_id>/<image>)");
  tr_cmd->add_option("--out", tr.output, "Output checkpoint path")->required();
  tr_cmd->add_option("--classes", tr.num_classes, "Number of classes");
  tr_cmd->add_option("--epochs", tr.epochs, "Training epochs");
  tr_cmd->add_option("--seed", tr.seed, "Training seed");
  tr_cmd->add_option("--lr", tr.learning_rate, "Learning rate");
  tr_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
  tr_cmd->add_option("--arch", tr.architecture, "small_cnn or residual_cnn");
  tr_cmd->add_option("--fractions", tr.fractions, "train,validation,test fractions")->delimiter(',')->expected(3);
  tr_cmd->add_option("--split-seed", tr.split_seed, "Split seed");
  tr_cmd->add_option("--resolution", tr.resolution, "Input resolution");
  tr_cmd->add_option("--manifests-out", tr.manifests_out, "Write split manifests to this directory");

  AuditOptions au;
  auto* au_cmd = app.add_subcommand("audit", "Run an audit");
  au_cmd->add_option("--config", au.config, "Audit configuration JSON")->required();
  au_cmd->add_option("--out", au.output, "Output report path")->required();
  au_cmd->add_option("--catalogue", au.catalogue, "Override the catalogue");
  au_cmd->add_option("--risk", au.risk, "Override the risk level");
  au_cmd->add_option("--min-grade", au.min_grade, "Override the minimum grade");
  au_cmd->add_option("--checkpoint", au.checkpoint, "Override the model checkpoint");
  au_cmd->add_option("--data", au.dataset_root, "Override the dataset root");
  au_cmd->add_option("--split-seed", au.split_seed, "Override the split seed");
  au_cmd->add_option("--select", au.select_ids, "Restrict to these requirement ids")->delimiter(',');

  ReportOptions rp;
  auto* rp_cmd = app.add_subcommand("report", "Render an audit report");
  rp_cmd->add_option("report", rp.input, "Report JSON")->required();
  rp_cmd->add_option("--format", rp.format, "summary, text or json")->check(CLI::IsMember({"summary", "text", "json"}));

  SynthCommandOptions sy;
  auto* sy_cmd = app.add_subcommand("synth", "Generate the synthetic 43-class sign dataset");
  sy_cmd->add_option("--out", sy.output, "Output directory")->required();
  sy_cmd->add_option("--classes", sy.classes, "Number of classes (1-43)");
  sy_cmd->add_option("--tracks-per-class", sy.options.tracks_per_class, "Tracks per class");
  sy_cmd->add_option("--frames", sy.options.frames_per_track, "Frames per track");
  sy_cmd->add_option("--resolution", sy.options.resolution, "Image side in pixels");
  sy_cmd->add_option("--seed", sy.options.seed, "Generator seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolboxVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    app.exit(e, o, er);
    err << er.str() << o.str();
    return kExitConfig;
  }

  if (*cat_cmd) return cmd_catalogue(cat, out, err);
  if (*tr_cmd) return cmd_train(tr, out, err);
  if (*au_cmd) return cmd_audit(au, out, err);
  if (*rp_cmd) return cmd_report(rp, out, err);
  return cmd_synth(sy, out, err);
}

}  // namespace aiaudit::cli
