// Command-line front end: generate, stats, train, predict, evaluate, report.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iconann/baseline.hpp"
#include "iconann/checkpoint.hpp"
#include "iconann/corpus.hpp"
#include "iconann/detector.hpp"
#include "iconann/error.hpp"
#include "iconann/eval.hpp"
#include "iconann/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace iconann;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMissingFile = 3,
  kBadData = 4,
  kBadCheckpoint = 5,
  kDiverged = 6,
};

/// Bad flag values found after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kModelTypes = {"detector-vh", "detector-image", "baseline-image", "baseline-vh",
                                              "baseline-vh-sampling"};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(p.string(), e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed: " + p.string());
}

/// Every subcommand leaves run_config.json behind so the run can be repeated.
void echo_run_config(const fs::path& out, const std::string& command, const json& params) {
  write_text(out / "run_config.json", json{{"command", command}, {"params", params}}.dump(2) + "\n");
}

void print_warnings(const Warnings& w) {
  for (const auto& m : w) std::cerr << "warning: " << m << "\n";
}

std::map<std::string, std::vector<Detection>> read_predictions(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::map<std::string, std::vector<Detection>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = p.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where, e.what());
    }
    auto rec = predictions_from_json(j, where);
    out[rec.id] = std::move(rec.detections);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> n;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  GenConfig cfg = a.config.empty() ? GenConfig{} : GenConfig::from_json(read_json(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.n) cfg.n_samples = *a.n;
  cfg.validate();
  const auto m = generate(cfg, a.out);
  echo_run_config(a.out, "generate", {{"generator", cfg.to_json()}, {"out", a.out}});
  std::printf("wrote %zu samples to %s\n", m.samples.size(), a.out.c_str());
  return kOk;
}

struct StatsArgs {
  std::string data;
  std::string out;
};

int run_stats(const StatsArgs& a) {
  Warnings w;
  const auto samples = load_corpus(a.data, &w);
  print_warnings(w);
  const auto st = corpus_stats(samples);
  std::string table = "class            count\n";
  for (std::size_t i = 0; i < kNumIconClasses; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-15s  %5zu\n", std::string(name_of(icon_class_at(i))).c_str(), st.class_counts[i]);
    table += buf;
  }
  char total[64];
  std::snprintf(total, sizeof(total), "%-15s  %5zu\n", "total", st.num_annotations);
  table += total;
  std::cout << table;
  if (!a.out.empty()) {
    write_text(fs::path(a.out) / "stats.json", st.to_json().dump(2) + "\n");
    write_text(fs::path(a.out) / "class_counts.txt", table);
    echo_run_config(a.out, "stats", {{"data", a.data}, {"out", a.out}});
  }
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::optional<int> epochs;
  bool checkpoints = false;
};

int run_train(const TrainArgs& a) {
  if (!a.seed) throw UsageError("train requires --seed");
  const json cfg = a.config.empty() ? json::object() : read_json(a.config);
  Warnings w;
  const auto samples = load_corpus(a.data, &w);
  print_warnings(w);
  const fs::path out(a.out);
  fs::create_directories(out);
  const json train_j = cfg.value("train", json::object());
  std::ofstream log(out / "train_log.jsonl");
  if (!log) throw IoError("cannot write " + (out / "train_log.jsonl").string());

  json params = {{"data", a.data}, {"model", a.model}, {"seed", *a.seed}, {"out", a.out}};
  if (a.model.rfind("detector-", 0) == 0) {
    DetectorConfig dc = DetectorConfig::desk_scale();
    if (cfg.contains("detector")) {
      json merged = dc.to_json();
      merged.merge_patch(cfg.at("detector"));
      dc = DetectorConfig::from_json(merged);
    }
    dc.use_vh = a.model == "detector-vh";
    DetectorTrainSettings st;
    st.epochs = a.epochs.value_or(train_j.value("epochs", st.epochs));
    st.batch_size = train_j.value("batch_size", st.batch_size);
    st.adam.learning_rate = train_j.value("learning_rate", st.adam.learning_rate);
    st.final_lr_fraction = train_j.value("final_lr_fraction", st.final_lr_fraction);
    st.rid_sampling = train_j.value("rid_sampling", st.rid_sampling);
    if (a.checkpoints) st.checkpoint_dir = out / "checkpoints";
    params["detector"] = dc.to_json();
    params["train"] = {{"epochs", st.epochs}, {"batch_size", st.batch_size}, {"learning_rate", st.adam.learning_rate},
                       {"final_lr_fraction", st.final_lr_fraction}, {"rid_sampling", st.rid_sampling}};
    echo_run_config(out, "train", params);
    auto res = train_detector(samples, dc, st, *a.seed, [&](const EpochLog& e) {
      log << e.to_json().dump() << "\n" << std::flush;
      std::printf("epoch %d  loss %.5f\n", e.epoch, e.mean_loss.total);
      std::fflush(stdout);
    });
    res.model.save(out / "model.ckpt");
  } else {
    BaselineConfig bc = BaselineConfig::desk_scale();
    if (cfg.contains("baseline")) {
      json merged = bc.to_json();
      merged.merge_patch(cfg.at("baseline"));
      bc = BaselineConfig::from_json(merged);
    }
    bc.use_text = a.model != "baseline-image";
    bc.rid_sampling = a.model == "baseline-vh-sampling";
    BaselineTrainSettings st;
    st.epochs = a.epochs.value_or(train_j.value("epochs", st.epochs));
    st.batch_size = train_j.value("batch_size", st.batch_size);
    st.adam.learning_rate = train_j.value("learning_rate", st.adam.learning_rate);
    st.final_lr_fraction = train_j.value("final_lr_fraction", st.final_lr_fraction);
    if (a.checkpoints) st.checkpoint_dir = out / "checkpoints";
    params["baseline"] = bc.to_json();
    params["train"] = {{"epochs", st.epochs}, {"batch_size", st.batch_size}, {"learning_rate", st.adam.learning_rate},
                       {"final_lr_fraction", st.final_lr_fraction}};
    echo_run_config(out, "train", params);
    auto res = train_baseline(samples, bc, st, *a.seed, [&](const BaselineEpochLog& e) {
      log << e.to_json().dump() << "\n" << std::flush;
      std::printf("epoch %d  loss %.5f  acc %.4f\n", e.epoch, e.mean_loss, e.accuracy);
      std::fflush(stdout);
    });
    res.model.save(out / "model.ckpt");
  }
  std::printf("saved %s\n", (out / "model.ckpt").c_str());
  return kOk;
}

struct PredictArgs {
  std::string data;
  std::string checkpoint;
  double threshold = 0.2;
  std::string out;
  bool overlays = false;
};

int run_predict(const PredictArgs& a) {
  const auto kind = load_checkpoint(a.checkpoint).model_type;
  std::optional<DetectorModel> det;
  std::optional<BaselineModel> base;
  if (kind.rfind("detector-", 0) == 0) {
    det.emplace(DetectorModel::load(a.checkpoint));
  } else if (kind.rfind("baseline-", 0) == 0) {
    base.emplace(BaselineModel::load(a.checkpoint));
  } else {
    throw CheckpointError(a.checkpoint + ": unknown model type '" + kind + "'");
  }
  Warnings w;
  const auto samples = load_corpus(a.data, &w);
  print_warnings(w);
  const fs::path out(a.out);
  fs::create_directories(out);
  echo_run_config(out, "predict",
                  {{"data", a.data}, {"checkpoint", a.checkpoint}, {"model", kind}, {"threshold", a.threshold},
                   {"overlays", a.overlays}, {"out", a.out}});
  std::ofstream pred(out / "predictions.jsonl");
  if (!pred) throw IoError("cannot write " + (out / "predictions.jsonl").string());
  std::size_t total = 0;
  for (const auto& s : samples) {
    SamplePredictions p{s.id, {}};
    if (det) {
      p.detections = det->predict(s, a.threshold);
    } else {
      for (const auto& d : base->predict_sample(s)) {
        if (d.score >= a.threshold) p.detections.push_back(d);
      }
    }
    total += p.detections.size();
    pred << to_json(p).dump() << "\n";
    if (a.overlays) {
      Image img = s.pixels;
      for (const auto& d : p.detections) draw_box(img, d.bbox, 230, 30, 30);
      for (const auto& g : s.annotations) draw_box(img, g.bbox, 30, 160, 30);
      fs::create_directories(out / "overlays");
      write_png(out / "overlays" / (s.id + ".png"), img);
    }
  }
  if (!pred) throw IoError("write failed: " + (out / "predictions.jsonl").string());
  std::printf("%zu detections over %zu samples\n", total, samples.size());
  return kOk;
}

struct EvaluateArgs {
  std::string data;
  std::vector<std::string> predictions;
  double threshold = 0.2;
  bool starred = false;
  bool class_agnostic = false;
  bool threshold_map = false;
  bool rematch = false;
  std::string out;
};

std::vector<std::vector<IconAnnotation>> ground_truth(const std::string& data, bool rematch,
                                                      std::vector<std::string>& ids) {
  const CorpusPaths paths{data};
  const auto anns = read_annotations(paths.annotations());
  std::vector<std::vector<IconAnnotation>> gt;
  for (const auto& [id, a] : anns) {
    ids.push_back(id);
    gt.push_back(a);
    if (rematch) {
      Warnings w;
      const auto vh = parse_view_hierarchy(read_json(paths.vh(id)), paths.vh(id).string(), &w);
      default_vh_matcher(gt.back(), vh.leaves);
    }
  }
  return gt;
}

/// "name=path" or a bare path (named after its parent directory).
std::pair<std::string, std::string> named_file(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  const fs::path p(arg);
  const auto parent = p.parent_path().filename().string();
  return {parent.empty() ? p.stem().string() : parent, arg};
}

int run_evaluate(const EvaluateArgs& a, bool report) {
  std::vector<std::string> ids;
  const auto gt = ground_truth(a.data, a.rematch, ids);
  EvalOptions opt;
  opt.threshold = a.threshold;
  opt.mode = a.starred ? RecallMode::kStarred : RecallMode::kStandard;
  opt.class_aware = !a.class_agnostic;
  opt.threshold_map = a.threshold_map;

  std::vector<std::pair<std::string, MetricsReport>> rows;
  json all = json::object();
  for (const auto& arg : a.predictions) {
    const auto [name, path] = named_file(arg);
    auto preds = read_predictions(path);
    std::vector<std::vector<Detection>> aligned;
    for (const auto& id : ids) {
      auto it = preds.find(id);
      aligned.push_back(it == preds.end() ? std::vector<Detection>{} : it->second);
    }
    auto rep = evaluate(aligned, gt, opt);
    all[name] = rep.to_json();
    rows.emplace_back(name, std::move(rep));
  }
  const std::string table = render_table(rows);
  std::cout << table;
  const fs::path out(a.out);
  fs::create_directories(out);
  echo_run_config(out, report ? "report" : "evaluate",
                  {{"data", a.data},
                   {"predictions", a.predictions},
                   {"threshold", a.threshold},
                   {"starred", a.starred},
                   {"class_agnostic", a.class_agnostic},
                   {"threshold_map", a.threshold_map},
                   {"rematch", a.rematch},
                   {"out", a.out}});
  write_text(out / "table.txt", table);
  if (report) {
    write_text(out / "report.json", all.dump(2) + "\n");
  } else {
    write_text(out / "metrics.json", rows.front().second.to_json().dump(2) + "\n");
  }
  // Per-class CSV alongside the evaluated corpus's own icon counts.
  std::array<std::size_t, kNumIconClasses> train_counts{};
  for (std::size_t s = 0; s < gt.size(); ++s) {
    for (const auto& g : gt[s]) ++train_counts[index_of(g.label)];
  }
  for (const auto& [name, rep] : rows) {
    write_text(out / (rows.size() == 1 ? std::string("per_class.csv") : "per_class_" + name + ".csv"),
               per_class_csv(rep, train_counts));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Icon annotation: VH-fused detector, crop baseline, evaluation and synthetic data"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic screenshot / VH / annotation corpus");
  g->add_option("--config", gen.config, "Generator config (JSON)")->check(CLI::ExistingFile);
  g->add_option("--seed", gen.seed, "Root seed (overrides the config)");
  g->add_option("--n", gen.n, "Number of samples (overrides the config)");
  g->add_option("--out", gen.out, "Output corpus directory")->required();

  StatsArgs sta;
  auto* s = app.add_subcommand("stats", "Per-class icon counts of a corpus");
  s->add_option("--data", sta.data, "Corpus directory")->required();
  s->add_option("--out", sta.out, "Directory for stats.json and class_counts.txt");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a detector or crop-classifier baseline");
  t->add_option("--data", tr.data, "Training corpus directory")->required();
  t->add_option("--model", tr.model, "Model type")->required()->check(CLI::IsMember(kModelTypes));
  t->add_option("--seed", tr.seed, "Root seed (required)");
  t->add_option("--config", tr.config, "JSON with optional \"detector\", \"baseline\" and \"train\" sections")
      ->check(CLI::ExistingFile);
  t->add_option("--epochs", tr.epochs, "Override the epoch count");
  t->add_flag("--checkpoints", tr.checkpoints, "Keep a checkpoint per epoch");
  t->add_option("--out", tr.out, "Output directory")->required();

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Write per-sample detections as JSON lines");
  p->add_option("--data", pr.data, "Corpus directory")->required();
  p->add_option("--model", pr.checkpoint, "Checkpoint file")->required();
  p->add_option("--threshold", pr.threshold, "Minimum confidence")->check(CLI::Range(0.0, 1.0));
  p->add_flag("--overlays", pr.overlays, "Also write box-overlay PNGs");
  p->add_option("--out", pr.out, "Output directory")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score one predictions file against a corpus");
  e->add_option("--data", ev.data, "Corpus directory")->required();
  e->add_option("--predictions", ev.predictions, "Predictions JSONL")->required()->expected(1);
  e->add_option("--threshold", ev.threshold, "Confidence cutoff before matching")->check(CLI::Range(0.0, 1.0));
  e->add_flag("--starred", ev.starred, "Recall over VH-matched icons only");
  e->add_flag("--class-agnostic", ev.class_agnostic, "Ignore labels when matching");
  e->add_flag("--threshold-map", ev.threshold_map, "Apply the cutoff before mAP too");
  e->add_flag("--rematch", ev.rematch, "Recompute vh_matched from the VH files");
  e->add_option("--out", ev.out, "Output directory")->required();

  EvaluateArgs rep;
  auto* r = app.add_subcommand("report", "Side-by-side table for several prediction files");
  r->add_option("--data", rep.data, "Corpus directory")->required();
  r->add_option("--predictions", rep.predictions, "name=predictions.jsonl, repeated")->required();
  r->add_option("--threshold", rep.threshold, "Confidence cutoff before matching")->check(CLI::Range(0.0, 1.0));
  r->add_flag("--starred", rep.starred, "Recall over VH-matched icons only");
  r->add_flag("--class-agnostic", rep.class_agnostic, "Ignore labels when matching");
  r->add_flag("--threshold-map", rep.threshold_map, "Apply the cutoff before mAP too");
  r->add_flag("--rematch", rep.rematch, "Recompute vh_matched from the VH files");
  r->add_option("--out", rep.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return run_generate(gen);
    if (*s) return run_stats(sta);
    if (*t) return run_train(tr);
    if (*p) return run_predict(pr);
    if (*e) return run_evaluate(ev, false);
    if (*r) return run_evaluate(rep, true);
  } catch (const UsageError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const IoError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kMissingFile;
  } catch (const CheckpointError& ex) {
    std::cerr << "error: corrupt checkpoint: " << ex.what() << "\n";
    return kBadCheckpoint;
  } catch (const ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kBadData;
  } catch (const DivergenceError& ex) {
    std::cerr << "error: training diverged: " << ex.what() << "\n";
    return kDiverged;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
