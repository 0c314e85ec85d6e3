// Acceptance runner: one PASS/FAIL line per criterion. Criteria 7-9 train models on a
// synthetic corpus and take a long time; --quick skips them and reports them as SKIP.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "checks.hpp"
#include "iconann/baseline.hpp"
#include "iconann/detector.hpp"
#include "iconann/eval.hpp"
#include "iconann/synthgen.hpp"
#include "iconann/textproc.hpp"

using namespace iconann;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void progress(const std::string& msg) {
  std::fprintf(stderr, "  .. %s\n", msg.c_str());
  std::fflush(stderr);
}

// ---------------------------------------------------------------------------
// Criteria 1-6: oracles and fixtures.

Outcome overlay() {
  const auto t0 = std::chrono::steady_clock::now();
  const long bad = checks::overlay_mismatches(1000, 1);
  const double t = seconds_since(t0);
  return {bad == 0 && t < 10.0, fmt("%ld mismatched cells over 1000 random boxes, %.2f s", bad, t)};
}

Outcome aggregate() {
  const auto r = checks::aggregate_oracle(200, 20, 2);
  return {r.max_error <= 1e-9 && r.halves_fixture && r.empty_is_zero,
          fmt("max error %.2e over 200 node sets, halves fixture %s, uncovered cells %s", r.max_error,
              r.halves_fixture ? "2t per side" : "WRONG", r.empty_is_zero ? "0" : "WRONG")};
}

Outcome tokenization() {
  const bool a = tokenize("AppImageButton") == TokenSequence{"app", "image", "button"};
  const bool b = tokenize("vote_down") == TokenSequence{"vote", "down"};
  return {a && b, fmt("AppImageButton %s, vote_down %s", a ? "ok" : "WRONG", b ? "ok" : "WRONG")};
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const double fusion = checks::fusion_gradient_error(3);
  const double head = checks::detector_head_gradient_error(3);
  const double net = checks::detector_net_gradient_error(3);
  const double cls = checks::classifier_gradient_error(3);
  const double t = seconds_since(t0);
  const double worst = std::max({fusion, head, net, cls});
  return {worst <= 1e-4 && t < 120.0,
          fmt("relative error fusion %.1e, detector loss %.1e, detector net %.1e, classifier %.1e, %.1f s", fusion,
              head, net, cls, t)};
}

Outcome roundtrip() {
  const auto overlapping = checks::target_roundtrip(100, 5, false);
  const auto separated = checks::target_roundtrip(100, 5, true);
  const bool ok = overlapping.recovered == overlapping.annotations && separated.recovered == separated.annotations;
  return {ok, fmt("recovered %zu/%zu (overlapping, per class) and %zu/%zu (separated, default decode), min IOU %.3f",
                  overlapping.recovered, overlapping.annotations, separated.recovered, separated.annotations,
                  std::min(overlapping.min_iou, separated.min_iou))};
}

Outcome eval_fixtures() {
  const auto r = evaluate({checks::eval_fixture_detections()}, {checks::eval_fixture_truth()});
  const double map = mean_average_precision({checks::map_fixture_detections()}, {checks::map_fixture_truth()}, 0.5);
  EvalOptions starred;
  starred.mode = RecallMode::kStarred;
  const double rs = evaluate({checks::starred_fixture_detections()}, {checks::starred_fixture_truth()}).recall;
  const double rst = evaluate({checks::starred_fixture_detections()}, {checks::starred_fixture_truth()}, starred).recall;
  const bool ok = r.precision == 2.0 / 3.0 && r.recall == 1.0 && std::abs(r.f1 - 0.8) < 1e-12 &&
                  std::abs(map - checks::kMapFixtureArea) <= 1e-9 && rs == 0.5 && rst == 1.0;
  return {ok, fmt("P %.4f R %.4f F1 %.4f; mAP %.10f vs %.10f; recall %.2f standard, %.2f starred", r.precision,
                  r.recall, r.f1, map, checks::kMapFixtureArea, rs, rst)};
}

// ---------------------------------------------------------------------------
// Criteria 7-9: desk-scale training experiments.

struct Experiment {
  int train_size = 500;
  int test_size = 100;
  std::uint64_t corpus_seed = 11;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int detector_epochs = 30;
  int baseline_epochs = 12;
  double p_drop = 0.3;
  fs::path workdir;
};

GenConfig corpus_config(const Experiment& e, double p_drop) {
  GenConfig g;
  g.n_samples = e.train_size + e.test_size;
  g.seed = e.corpus_seed;
  g.p_rid = 0.7;
  g.p_drop_node = p_drop;
  g.classes = {IconClass::kMenu, IconClass::kSearch, IconClass::kClose, IconClass::kDelete, IconClass::kAdd,
               IconClass::kStar, IconClass::kHome,  IconClass::kSettings, IconClass::kShare, IconClass::kPlay};
  return g;
}

struct Split {
  std::vector<UISample> train, test;
};

Split split(const Experiment& e, double p_drop) {
  auto all = generate_samples(corpus_config(e, p_drop)).samples;
  Split s;
  s.train.assign(all.begin(), all.begin() + e.train_size);
  s.test.assign(all.begin() + e.train_size, all.end());
  return s;
}

struct RunScores {
  MetricsReport standard;
  MetricsReport starred;

  double ambiguous_f1() const {
    return 0.5 * (standard.per_class[index_of(IconClass::kClose)].f1 +
                  standard.per_class[index_of(IconClass::kDelete)].f1);
  }
};

RunScores score(const std::vector<UISample>& test, const std::function<std::vector<Detection>(const UISample&)>& f) {
  std::vector<std::vector<Detection>> preds;
  std::vector<std::vector<IconAnnotation>> gt;
  for (const auto& s : test) {
    preds.push_back(f(s));
    gt.push_back(s.annotations);
  }
  EvalOptions o;
  RunScores r;
  r.standard = evaluate(preds, gt, o);
  o.mode = RecallMode::kStarred;
  r.starred = evaluate(preds, gt, o);
  return r;
}

class Runs {
 public:
  explicit Runs(Experiment e) : e_(std::move(e)) { fs::create_directories(e_.workdir); }

  const Experiment& experiment() const { return e_; }

  RunScores detector(const Split& data, const std::string& corpus, bool use_vh, std::uint64_t seed) {
    const std::string name = fmt("%s-%s-seed%llu", use_vh ? "detector-vh" : "detector-image", corpus.c_str(),
                                 static_cast<unsigned long long>(seed));
    auto cfg = DetectorConfig::desk_scale();
    cfg.use_vh = use_vh;
    DetectorTrainSettings st;
    st.epochs = e_.detector_epochs;
    const auto t0 = std::chrono::steady_clock::now();
    std::ofstream log(e_.workdir / (name + ".jsonl"));
    const auto res = train_detector(data.train, cfg, st, seed, [&](const EpochLog& l) { log << l.to_json().dump() << "\n"; });
    auto r = score(data.test, [&](const UISample& s) { return res.model.predict(s); });
    record(name, r, seconds_since(t0));
    return r;
  }

  RunScores baseline(const Split& data, const std::string& corpus, bool sampling, std::uint64_t seed) {
    const std::string name = fmt("%s-%s-seed%llu", sampling ? "baseline-vh-sampling" : "baseline-vh", corpus.c_str(),
                                 static_cast<unsigned long long>(seed));
    auto cfg = BaselineConfig::desk_scale();
    cfg.use_text = true;
    cfg.rid_sampling = sampling;
    BaselineTrainSettings st;
    st.epochs = e_.baseline_epochs;
    const auto t0 = std::chrono::steady_clock::now();
    std::ofstream log(e_.workdir / (name + ".jsonl"));
    const auto res =
        train_baseline(data.train, cfg, st, seed, [&](const BaselineEpochLog& l) { log << l.to_json().dump() << "\n"; });
    auto r = score(data.test, [&](const UISample& s) { return res.model.predict_sample(s); });
    record(name, r, seconds_since(t0));
    return r;
  }

  void save() const { std::ofstream(e_.workdir / "runs.json") << runs_.dump(2) << "\n"; }

 private:
  void record(const std::string& name, const RunScores& r, double secs) {
    runs_[name] = {{"standard", r.standard.to_json()}, {"starred", r.starred.to_json()}, {"seconds", secs}};
    save();
    progress(fmt("%s: P %.3f R %.3f R* %.3f F1 %.3f mAP@0.1 %.3f (%.0f s)", name.c_str(), r.standard.precision,
                 r.standard.recall, r.starred.recall, r.standard.f1, r.standard.map_01.value_or(0.0), secs));
  }

  Experiment e_;
  json runs_ = json::object();
};

struct DeskResults {
  Outcome main_claim, baseline_limits, sampling;
};

DeskResults desk_experiments(Runs& runs) {
  const auto& e = runs.experiment();
  const auto clean = split(e, 0.0);
  const auto dropped = split(e, e.p_drop);

  std::vector<double> d_amb, d_f1, d_map, vh_f1, vh_recall_shift, base_gap, base_gap_rel, d_sampling;
  for (auto seed : e.seeds) {
    const auto vh = runs.detector(clean, "clean", true, seed);
    const auto img = runs.detector(clean, "clean", false, seed);
    d_amb.push_back(vh.ambiguous_f1() - img.ambiguous_f1());
    d_f1.push_back(vh.standard.f1 - img.standard.f1);
    d_map.push_back(vh.standard.map_01.value_or(0.0) - img.standard.map_01.value_or(0.0));
    vh_f1.push_back(vh.standard.f1);

    const auto vh_dropped = runs.detector(dropped, "drop", true, seed);
    vh_recall_shift.push_back(std::abs(vh_dropped.standard.recall - vh.standard.recall));

    const auto base = runs.baseline(dropped, "drop", false, seed);
    base_gap.push_back(base.starred.recall - base.standard.recall);
    base_gap_rel.push_back(base.starred.recall > 0 ? 1.0 - base.standard.recall / base.starred.recall : 0.0);
    const auto sampled = runs.baseline(dropped, "drop", true, seed);
    d_sampling.push_back(sampled.standard.f1 - base.standard.f1);
  }

  DeskResults r;
  const double amb = median(d_amb), f1 = median(d_f1), map = median(d_map), vf1 = median(vh_f1);
  r.main_claim = {amb >= 0.10 && f1 >= 0.02 && map >= 0.01 && vf1 >= 0.80,
                  fmt("median over %zu seeds: ambiguous-class F1 gain %+.3f (>= 0.10), overall F1 gain %+.3f (>= 0.02), "
                      "mAP@0.1 gain %+.3f (>= 0.01), detector-vh F1 %.3f (>= 0.80)",
                      e.seeds.size(), amb, f1, map, vf1)};

  const double max_shift = *std::max_element(vh_recall_shift.begin(), vh_recall_shift.end());
  const bool gaps_ok = std::all_of(base_gap.begin(), base_gap.end(),
                                   [&](double g) { return std::abs(g - e.p_drop) <= 0.05; });
  std::string gaps;
  for (std::size_t i = 0; i < base_gap.size(); ++i) gaps += fmt("%s%.3f (rel %.3f)", i ? ", " : "", base_gap[i], base_gap_rel[i]);
  r.baseline_limits = {gaps_ok && max_shift <= 0.03,
                       fmt("baseline starred minus standard recall %s, target %.2f +- 0.05; detector-vh recall shift "
                           "from p_drop 0 to %.1f at most %.3f (<= 0.03)",
                           gaps.c_str(), e.p_drop, e.p_drop, max_shift)};

  const double ds = median(d_sampling);
  r.sampling = {ds >= 0.0, fmt("median F1 baseline-vh-sampling minus baseline-vh %+.4f (>= 0)", ds)};
  runs.save();
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool quick = false;
  Experiment e;
  std::string workdir = "acceptance_runs";
  app.add_flag("--quick", quick, "Skip the training experiments (criteria 7-9)");
  app.add_option("--workdir", workdir, "Where training logs and runs.json go");
  app.add_option("--seeds", e.seeds, "Training seeds for criteria 7-9");
  app.add_option("--detector-epochs", e.detector_epochs);
  app.add_option("--baseline-epochs", e.baseline_epochs);
  CLI11_PARSE(app, argc, argv);
  e.workdir = workdir;

  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  report(1, "overlay oracle", overlay());
  report(2, "VH aggregate oracle", aggregate());
  report(3, "tokenization", tokenization());
  report(4, "gradient checks", gradients());
  report(5, "target/decode round trip", roundtrip());
  report(6, "evaluation fixtures", eval_fixtures());

  if (quick) {
    for (const char* name : {"7 desk-scale VH gain", "8 baseline VH dependence", "9 resource-id sampling"}) {
      std::printf("[SKIP] %s: run without --quick\n", name);
    }
  } else {
    const auto t0 = std::chrono::steady_clock::now();
    Runs runs(e);
    const auto d = desk_experiments(runs);
    report(7, "desk-scale VH gain", d.main_claim);
    report(8, "baseline VH dependence", d.baseline_limits);
    report(9, "resource-id sampling", d.sampling);
    std::printf("training experiments took %.1f min; per-run metrics in %s\n", seconds_since(t0) / 60.0,
                (e.workdir / "runs.json").c_str());
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
