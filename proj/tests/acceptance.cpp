// Acceptance run: one PASS/FAIL line per criterion.
//
// Criterion 1 trains on a synthetic 43-class sign set unless AIAUDIT_GTSRB_ROOT
// names a <root>/<class_id>/<image> folder. AIAUDIT_SKIP_TRAINING=1 skips it
// (reported as FAIL).

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <fmt/core.h>

#include "support.hpp"

using namespace aiaudit;
using testing::random_image;

namespace {

struct Outcome1 {
  bool pass = true;
  std::vector<std::string> notes;
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

void report(int n, const std::string& title, const Outcome1& o) {
  for (const auto& line : o.notes) std::cout << "    " << line << "\n";
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << title << std::endl;
}

template <class F>
Outcome1 guarded(F&& f) {
  Outcome1 o;
  try {
    f(o);
  } catch (const std::exception& e) {
    o.check(false, std::string("exception: ") + e.what());
  }
  return o;
}

const Verdict* find_row(const AuditReport& r, const std::string& label) {
  for (const Verdict* v : all_verdicts(r))
    if (row_label(*v) == label) return v;
  return nullptr;
}

int cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  std::cout << out.str();
  if (!err.str().empty()) std::cout << err.str();
  return code;
}

// ---------------------------------------------------------------------------

Outcome1 criterion1() {
  return guarded([](Outcome1& o) {
    if (const char* skip = std::getenv("AIAUDIT_SKIP_TRAINING"); skip && std::string(skip) == "1") {
      o.check(false, "skipped by AIAUDIT_SKIP_TRAINING");
      return;
    }
    testing::TempDir dir("acceptance1");
    std::string data;
    if (const char* root = std::getenv("AIAUDIT_GTSRB_ROOT")) {
      data = root;
    } else {
      data = (dir / "data").string();
      const int code = cli_run({"synth", "--out", data, "--classes", "43", "--tracks-per-class", "150", "--frames",
                                "5", "--resolution", "32", "--seed", "0"});
      o.check(code == 0, "synthetic dataset generated");
    }
    const std::string ckpt = (dir / "model.bin").string();
    const auto t0 = std::chrono::steady_clock::now();
    const int train_code = cli_run({"train", "--data", data, "--out", ckpt, "--classes", "43", "--resolution", "32",
                                    "--arch", "residual_cnn", "--epochs", "10", "--fractions", "0.75,0.05,0.2",
                                    "--split-seed", "0"});
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60;
    o.check(train_code == 0, fmt::format("training finished in {:.1f} min", minutes));

    const Json cfg = {
        {"catalogue", "builtin:exemplar"},
        {"risk_level", "A"},
        {"min_grade", "++"},
        {"model_checkpoint", ckpt},
        {"dataset_root", data},
        {"split", {{"fractions", {0.75, 0.05, 0.2}}, {"seed", 0}}},
        {"requirements",
         {{{"id", 7},
           {"specification", "rain"},
           {"parameters", {{"accuracy_threshold", 0.9}}},
           {"rationale", "heavy rain must not degrade accuracy below 0.90"}},
          {{"id", 7},
           {"specification", "pgd"},
           {"parameters", {{"accuracy_threshold", 0.9}, {"epsilon", 0.3}, {"max_samples", 1000}}},
           {"rationale", "L-inf attacks with budget 0.3 must not degrade accuracy below 0.90"}},
          {{"id", 30},
           {"parameters", {{"confirm_min_correlation", 0.99}}},
           {"rationale", "splits must be track-disjoint"}},
          {{"id", 33},
           {"parameters", {{"region_fraction", 0.7}, {"samples_per_class", 60}}},
           {"rationale", "saliency must concentrate on the sign"}}}}};
    const fs::path cfg_path = dir / "audit.json";
    write_file_atomic(cfg_path, dump_json(cfg));
    const fs::path report_path = dir / "report.json";
    const int code = cli_run({"audit", "--config", cfg_path.string(), "--out", report_path.string()});
    const AuditReport r = parse_audit_report(read_file(report_path));

    const Verdict* rain = find_row(r, "7/rain");
    const Verdict* pgd = find_row(r, "7/pgd");
    const Verdict* indep = find_row(r, "30");
    const Verdict* expl = find_row(r, "33");
    o.check(rain && pgd && indep && expl, "all four rows present");
    if (!(rain && pgd && indep && expl)) return;

    const double clean = rain->measured.value("clean_accuracy", 0.0);
    const double rained = rain->measured.value("stressed_accuracy", -1.0);
    const int rain_samples = rain->measured.value("samples", 0);
    const double robust = pgd->measured.value("stressed_accuracy", 1.0);
    o.check(clean >= 0.95, fmt::format("clean test accuracy {:.4f} >= 0.95", clean));
    o.check(rain_samples >= 2000, fmt::format("rain evaluated on {} held-out samples", rain_samples));
    o.check(rained >= 0.60 && rained < 0.90, fmt::format("rain accuracy {:.4f} in [0.60, 0.90)", rained));
    o.check(rain->outcome == Outcome::Fail, "7/rain verdict FAIL");
    o.check(robust <= 0.40, fmt::format("PGD eps 0.3 robust accuracy {:.4f} <= 0.40", robust));
    o.check(pgd->outcome == Outcome::Fail, "7/pgd verdict FAIL");
    o.check(indep->outcome == Outcome::Pass, "30 verdict PASS");
    o.check(expl->outcome == Outcome::Pass,
            fmt::format("33 verdict PASS at region fraction 0.7 ({} of {} classes)",
                        expl->measured.value("classes_passed", 0), expl->measured.value("classes_total", 0)));
    for (const Finding& f : expl->evidence)
      if (f.kind == "class_failed") o.notes.push_back("     " + f.message);
    o.check(code == 1, "audit exit code 1");
  });
}

// ---------------------------------------------------------------------------

Outcome1 criterion2() {
  return guarded([](Outcome1& o) {
    Rng rng(2);
    const ImageShape shape{4, 4, 3};
    double linear_err = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const int d = 48;
      std::vector<float> w0(d), w1(d), dir(d);
      for (int i = 0; i < d; ++i) {
        w0[i] = static_cast<float>(uniform(rng, -1, 1));
        const double gap = uniform(rng, 0.1, 1.0) * (uniform_index(rng, 2) ? 1 : -1);
        w1[i] = static_cast<float>(w0[i] + gap);
        dir[i] = gap > 0 ? 1.0f : -1.0f;
      }
      auto m = testing::linear_two_class(shape, w0, w1);
      const Image x = random_image(rng, 4, 4);
      const int y = static_cast<int>(uniform_index(rng, 2));
      const auto eps = static_cast<float>(uniform(rng, 0.01, 0.5));
      Image oracle = x;
      for (int i = 0; i < d; ++i) {
        const float s = y == 0 ? dir[i] : -dir[i];
        oracle.data[i] = std::clamp(x.data[i] + s * eps, 0.0f, 1.0f);
      }
      PgdParams p;
      p.epsilon = eps;
      p.iterations = 1 + static_cast<int>(uniform_index(rng, 10));
      p.step_size = default_step_size(eps, p.iterations);
      p.random_start = false;
      linear_err = std::max<double>(linear_err, max_abs_diff(fgsm(m, x, y, eps), oracle));
      linear_err = std::max<double>(linear_err, max_abs_diff(pgd(m, x, y, p), oracle));
    }
    o.check(linear_err <= 1e-6, fmt::format("linear closed form max deviation {:.2e}", linear_err));

    std::vector<NetworkClassifier> models;
    for (int k = 0; k < 4; ++k)
      models.push_back(testing::small_cnn(shape, 5, 300 + k, k % 2 ? "residual_cnn" : "small_cnn"));
    std::size_t cases = 0, violations = 0;
    for (int round = 0; round < 1000; ++round) {
      PgdParams p;
      p.epsilon = uniform(rng, 0.0, 0.6);
      p.iterations = 1 + static_cast<int>(uniform_index(rng, 4));
      p.step_size = uniform(rng, 0.001, 0.5);
      p.random_start = uniform_index(rng, 2) == 1;
      p.seed = rng();
      std::vector<Image> xs;
      std::vector<int> ys;
      for (int i = 0; i < 10; ++i) {
        xs.push_back(random_image(rng, 4, 4));
        ys.push_back(static_cast<int>(uniform_index(rng, 5)));
      }
      const auto res = pgd_batch(models[round % 4], xs, ys, p);
      for (std::size_t i = 0; i < xs.size(); ++i, ++cases)
        if (max_abs_diff(res[i].adversarial, xs[i]) > p.epsilon + 1e-6 || !in_unit_range(res[i].adversarial.span()))
          ++violations;
    }
    o.check(cases >= 10000 && violations == 0, fmt::format("budget invariant: {} cases, {} violations", cases, violations));

    bool identical = true;
    for (int i = 0; i < 100; ++i) {
      const Image x = random_image(rng, 4, 4);
      PgdParams p;
      p.epsilon = 0;
      p.random_start = i % 2 == 0;
      identical = identical && pgd(models[i % 4], x, 1, p) == x && fgsm(models[i % 4], x, 1, 0.0) == x;
    }
    o.check(identical, "epsilon 0 returns inputs bit-identically");
  });
}

// ---------------------------------------------------------------------------

double loss_at(ClassifierAdapter& m, const Image& x, int y) {
  return loss_and_input_gradients(m, std::span(&x, 1), std::span(&y, 1)).losses.front();
}

Outcome1 criterion3() {
  return guarded([](Outcome1& o) {
    // Inputs whose +-h stencil straddles a ReLU or max-pool switch are redrawn; the
    // switch test uses only the loss (forward vs backward difference), not the gradient.
    Rng rng(3);
    double worst = 0;
    int inputs = 0, redrawn = 0;
    for (const char* kind : {"small_cnn", "residual_cnn"})
      for (int net = 0; net < 4; ++net) {
        auto m = testing::small_cnn({4, 4, 3}, 5, 100 + net, kind);
        for (int k = 0; k < 15 && redrawn < 500;) {
          const Image x = random_image(rng, 4, 4, 3, 0.01, 0.99);
          const int y = static_cast<int>(uniform_index(rng, 5));
          const Image g = input_gradient(m, x, y);
          const double f0 = loss_at(m, x, y);
          double err = 0, kink = 0;
          for (std::size_t i = 0; i < x.size(); ++i) {
            Image plus = x, minus = x;
            plus.data[i] += 1e-3f;
            minus.data[i] -= 1e-3f;
            const double fp = loss_at(m, plus, y), fm = loss_at(m, minus, y);
            const double fd = (fp - fm) / (static_cast<double>(plus.data[i]) - minus.data[i]);
            const double fwd = (fp - f0) / (static_cast<double>(plus.data[i]) - x.data[i]);
            const double bwd = (f0 - fm) / (static_cast<double>(x.data[i]) - minus.data[i]);
            err = std::max(err, std::abs(fd - g.data[i]));
            kink = std::max(kink, std::abs(fwd - bwd));
          }
          if (kink > 5e-3) {
            ++redrawn;
            continue;
          }
          worst = std::max(worst, err);
          ++inputs;
          ++k;
        }
      }
    o.check(inputs >= 100 && worst < 1e-2,
            fmt::format("{} inputs ({} redrawn at activation switches), max |analytic - central difference| {:.2e}",
                        inputs, redrawn, worst));
  });
}

// ---------------------------------------------------------------------------

NetworkClassifier single_conv_toy() {
  auto conv = std::make_unique<nn::Conv2d>("conv", 1, 1, 1, false);
  conv->weight()[0] = 2.0f;
  auto fc = std::make_unique<nn::Dense>("fc", 16, 2, false);
  for (int i = 0; i < 16; ++i) fc->weight()[static_cast<std::size_t>(i) * 2 + 1] = 1.0f;
  std::vector<std::unique_ptr<nn::Layer>> layers;
  layers.push_back(std::move(conv));
  layers.push_back(std::move(fc));
  return NetworkClassifier(nn::Network({4, 4, 1}, std::move(layers)));
}

Outcome1 criterion4() {
  return guarded([](Outcome1& o) {
    auto m = single_conv_toy();
    bool exact = true;
    for (int p = 0; p < 16; ++p) {
      Image x(4, 4, 1);
      x.data[static_cast<std::size_t>(p)] = 0.8f;
      const SaliencyMap map = grad_cam(m, x, 1, "conv");
      exact = exact && !map.degenerate;
      for (int k = 0; k < 16; ++k)
        exact = exact && map.values.data[static_cast<std::size_t>(k)] == (k == p ? 1.0f : 0.0f);
    }
    o.check(exact, "single-conv toy map equals the one-hot input exactly");

    Image x(4, 4, 1);
    x.data[5] = 0.8f;
    const SaliencyMap zero = grad_cam(m, x, 0, "conv");
    o.check(zero.degenerate, "zero gradient sets the degenerate flag");

    testing::FixedProbeClassifier uniform(2, {32, 32, 3}, Tensor3(4, 4, 2, 1.0f), Tensor3(4, 4, 2, 1.0f));
    const SaliencyMap flat = grad_cam(uniform, Image(32, 32, 3, 0.5f), 0, "conv");
    bool areas = true;
    for (double rf : {0.5, 0.7}) {
      const CenterBox b = center_box(32, 32, rf);
      const double area = static_cast<double>(b.height * b.width) / 1024.0;
      const double mass = center_mass_fraction(flat, rf);
      areas = areas && std::abs(mass - area) < 1e-9;
      o.notes.push_back(fmt::format("     uniform map, region {:.1f}: mass {:.6f}, box area {:.6f}", rf, mass, area));
    }
    o.check(areas, "uniform map mass equals the box area fraction");
  });
}

// ---------------------------------------------------------------------------

Outcome1 criterion5() {
  return guarded([](Outcome1& o) {
    Rng rng(5);
    const auto base = split_dataset(testing::random_items(rng, 4, 10, 3, 16), {0.8, 0.1, 0.1}, 0);
    const IndependenceParams params;
    auto verdict = [&](const DatasetSplits& s) { return run_req30_independence(s.train, s.validation, s.test, params); };
    auto has = [](const Verdict& v, const std::string& kind) {
      return std::any_of(v.evidence.begin(), v.evidence.end(), [&](const Finding& f) { return f.kind == kind; });
    };

    o.check(verdict(base).outcome == Outcome::Pass, "unmodified track-disjoint splits PASS");

    auto exact = base;
    LabeledImage copy = exact.train.items.front();
    copy.track_id = "injected_exact";
    exact.test.items.push_back(copy);
    const Verdict ve = verdict(exact);
    o.check(ve.outcome == Outcome::Fail && has(ve, "exact_overlap"), "exact duplicate -> FAIL exact_overlap");

    auto near = base;
    const LabeledImage& src = near.train.items.front();
    Image bright = src.pixels;
    for (auto& v : bright.data) v = std::min(1.0f, v * 1.1f + 0.02f);
    const LabeledImage nd = make_labeled(bright, src.label, "injected_near", "bright.png");
    const int h = hamming(src.phash, nd.phash);
    near.test.items.push_back(nd);
    const Verdict vn = verdict(near);
    o.check(h <= 4 && vn.outcome == Outcome::Fail && has(vn, "near_duplicate") && !has(vn, "exact_overlap"),
            fmt::format("brightened copy at Hamming {} -> FAIL near_duplicate", h));

    auto shared = base;
    const LabeledImage& t = shared.train.items.front();
    shared.test.items.push_back(make_labeled(random_image(rng, 16, 16), t.label, t.track_id, "shared.png"));
    const Verdict vs = verdict(shared);
    o.check(vs.outcome == Outcome::Fail && has(vs, "track_leakage"), "shared track -> FAIL track_leakage");

    const ClassHistogram p{{0, 0.5}, {1, 0.5}};
    const ClassHistogram q{{2, 0.25}, {3, 0.75}};
    o.check(total_variation(p, p) == 0.0 && total_variation(p, q) == 1.0, "TV distance 0 on identical, 1 on disjoint");
  });
}

// ---------------------------------------------------------------------------

Outcome1 criterion6() {
  return guarded([](Outcome1& o) {
    testing::MiniWorld world;
    const fs::path cfg = world.dir / "audit.json";
    const fs::path r1 = world.dir / "r1.json", r2 = world.dir / "r2.json";
    const int c1 = cli_run({"audit", "--config", cfg.string(), "--out", r1.string()});
    const int c2 = cli_run({"audit", "--config", cfg.string(), "--out", r2.string()});
    AuditReport a = parse_audit_report(read_file(r1));
    AuditReport b = parse_audit_report(read_file(r2));
    o.check(c1 == c2 && c1 == static_cast<int>(exit_status(a)), fmt::format("exit codes {} and {} match the report", c1, c2));
    a.timestamp.clear();
    b.timestamp.clear();
    o.check(serialize(a) == serialize(b), "reports identical except timestamp");

    auto with = [](std::vector<aiaudit::Outcome> outs) {
      AuditReport r;
      int id = 1;
      for (auto oc : outs) {
        Verdict v;
        v.requirement_id = id;
        v.outcome = oc;
        r.requirements.push_back({id, "t", {{AuditParameters{id, "default", Json::object(), "r"}, v}}});
        ++id;
      }
      return static_cast<int>(exit_status(r));
    };
    using aiaudit::Outcome;
    const bool mapping = with({}) == 0 && with({Outcome::Pass, Outcome::NotExecutable}) == 0 &&
                         with({Outcome::Pass, Outcome::Fail}) == 1 && with({Outcome::Error, Outcome::Fail}) == 1 &&
                         with({Outcome::Error, Outcome::Pass}) == 3;
    o.check(mapping, "exit status mapping 0/1/3");

    Json bad = world.config;
    bad["requirements"][0].erase("rationale");
    const fs::path bad_path = world.write_config("bad.json", bad);
    o.check(cli_run({"audit", "--config", bad_path.string(), "--out", (world.dir / "r3.json").string()}) == 2,
            "configuration error exits 2");
  });
}

// ---------------------------------------------------------------------------

Outcome1 criterion7() {
  return guarded([](Outcome1& o) {
    std::vector<int> ids;
    for (const auto& r : select_requirements(exemplar_catalogue(), AsilLevel::A, RecommendationGrade::HighlyRecommended))
      ids.push_back(r.id);
    o.check(ids == std::vector<int>{7, 30, 33}, "exemplar selection at (A, ++) is {7, 30, 33}");

    Rng rng(7);
    int cases = 0, violations = 0;
    const std::array grades{RecommendationGrade::NotRecommended, RecommendationGrade::Recommended,
                            RecommendationGrade::HighlyRecommended};
    for (int i = 0; i < 1000; ++i) {
      Catalogue c;
      c.version = "random";
      const auto n = uniform_index(rng, 40);
      for (std::size_t k = 0; k < n; ++k) {
        Requirement r = exemplar_catalogue().requirements[0];
        r.id = static_cast<int>(k) + 1;
        for (auto& g : r.grades) g = grades[uniform_index(rng, 3)];
        c.requirements.push_back(r);
      }
      for (AsilLevel risk : kAllAsilLevels) {
        std::vector<std::set<int>> sel;
        for (auto g : grades) {
          std::set<int> s;
          for (const auto& r : select_requirements(c, risk, g)) s.insert(r.id);
          for (const auto& r : c.requirements)
            if (s.contains(r.id) != (r.grade(risk) >= g)) ++violations;
          sel.push_back(s);
        }
        for (std::size_t k = 1; k < sel.size(); ++k)
          if (!std::includes(sel[k - 1].begin(), sel[k - 1].end(), sel[k].begin(), sel[k].end())) ++violations;
        ++cases;
      }
    }
    o.check(cases >= 1000 && violations == 0, fmt::format("monotonicity: {} cases, {} violations", cases, violations));
  });
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Outcome1 (*)()>> criteria{
      {"reference audit verdicts", criterion1}, {"attack correctness", criterion2},
      {"gradient fidelity", criterion3},          {"Grad-CAM correctness", criterion4},
      {"independence detection", criterion5},     {"determinism and exit codes", criterion6},
      {"catalogue semantics", criterion7}};
  bool all = true;
  // Fast criteria first so their lines appear before the long training run.
  std::vector<std::pair<int, Outcome1>> results;
  for (int i = 1; i < 7; ++i) {
    results.emplace_back(i + 1, criteria[static_cast<std::size_t>(i)].second());
    report(i + 1, criteria[static_cast<std::size_t>(i)].first, results.back().second);
  }
  const Outcome1 first = criterion1();
  report(1, criteria[0].first, first);
  all = first.pass;
  for (const auto& [n, r] : results) all = all && r.pass;
  std::cout << (all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << std::endl;
  return all ? 0 : 1;
}
