#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace aiaudit;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("catalogue list and select") {
  const Run list = invoke({"catalogue", "list"});
  CHECK(list.code == 0);
  CHECK_THAT(list.out, Catch::Matchers::ContainsSubstring("33"));
  const Run sel = invoke({"catalogue", "select", "--risk", "B", "--min-grade", "+"});
  CHECK(sel.code == 0);
  CHECK_THAT(sel.out, Catch::Matchers::ContainsSubstring("30"));
  CHECK(invoke({"catalogue", "select", "--risk", "Z"}).code == cli::kExitConfig);
  CHECK(invoke({"catalogue", "list", "--catalogue", "/nonexistent.json"}).code == cli::kExitConfig);
}

TEST_CASE("argument errors exit with the configuration code") {
  CHECK(invoke({}).code == cli::kExitConfig);
  CHECK(invoke({"frobnicate"}).code == cli::kExitConfig);
  CHECK(invoke({"audit", "--out", "x.json"}).code == cli::kExitConfig);
  CHECK(invoke({"report", "r.json", "--format", "xml"}).code == cli::kExitConfig);
  const Run v = invoke({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out == std::string(kToolboxVersion) + "\n");
}

TEST_CASE("synth writes a class-folder dataset") {
  testing::TempDir dir("synth");
  const std::string root = (dir / "d").string();
  const Run r = invoke({"synth", "--out", root, "--classes", "3", "--tracks-per-class", "2", "--frames", "2",
                        "--resolution", "12"});
  REQUIRE(r.code == 0);
  const auto items = load_image_folder(root, 3, {12});
  CHECK(items.size() == 12);
  CHECK(invoke({"synth", "--out", root, "--classes", "99"}).code == cli::kExitConfig);
}

TEST_CASE("train, audit and report through the command line") {
  testing::TempDir dir("cli");
  const std::string data = (dir / "data").string();
  REQUIRE(invoke({"synth", "--out", data, "--classes", "3", "--tracks-per-class", "6", "--frames", "2",
                  "--resolution", "12"})
              .code == 0);
  const std::string ckpt = (dir / "model.bin").string();
  const Run tr = invoke({"train", "--data", data, "--out", ckpt, "--classes", "3", "--epochs", "1", "--resolution",
                         "12", "--fractions", "0.6,0.2,0.2", "--split-seed", "0", "--manifests-out",
                         (dir / "manifests").string()});
  REQUIRE(tr.code == 0);
  CHECK(fs::exists(dir / "manifests" / "test.csv"));
  const auto ck = load_checkpoint(ckpt);
  CHECK(ck.metadata.contains("split_digests"));

  Json cfg = {{"catalogue", "builtin:exemplar"},
              {"risk_level", "A"},
              {"model_checkpoint", ckpt},
              {"dataset_root", data},
              {"split", {{"fractions", {0.6, 0.2, 0.2}}, {"seed", 0}}},
              {"requirements",
               {{{"id", 7}, {"specification", "rain"}, {"parameters", {{"accuracy_threshold", 0.99}}}, {"rationale", "r"}},
                {{"id", 30},
                 {"parameters", {{"confirm_min_correlation", 0.99}, {"tv_max", 0.5}}},
                 {"rationale", "r"}}}}};
  const fs::path cfg_path = dir / "audit.json";
  write_file_atomic(cfg_path, dump_json(cfg));
  const std::string report = (dir / "report.json").string();

  const Run au = invoke({"audit", "--config", cfg_path.string(), "--out", report, "--select", "7,30"});
  CHECK(au.code == cli::kExitFail);
  REQUIRE(fs::exists(report));
  CHECK_THAT(au.out, Catch::Matchers::ContainsSubstring("7/rain FAIL"));

  const Run only30 = invoke({"audit", "--config", cfg_path.string(), "--out", report, "--select", "30"});
  CHECK(only30.code == cli::kExitOk);
  const Run sum = invoke({"report", report});
  CHECK(sum.code == 0);
  CHECK(sum.out == "audit report: catalogue exemplar-1.0, risk A, min grade ++\n30 PASS\n");
  const Run js = invoke({"report", report, "--format", "json"});
  CHECK(parse_audit_report(js.out) == parse_audit_report(read_file(report)));
  CHECK_THAT(invoke({"report", report, "--format", "text"}).out, Catch::Matchers::ContainsSubstring("REQ 30"));

  cfg["requirements"][0].erase("rationale");
  write_file_atomic(cfg_path, dump_json(cfg));
  CHECK(invoke({"audit", "--config", cfg_path.string(), "--out", report}).code == cli::kExitConfig);
  CHECK(invoke({"report", (dir / "missing.json").string()}).code == cli::kExitConfig);
}
