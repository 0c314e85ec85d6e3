#include "iconann/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace iconann {

std::size_t MatchResult::true_positives() const {
  return static_cast<std::size_t>(std::count_if(detection_match.begin(), detection_match.end(),
                                                [](const auto& m) { return m.has_value(); }));
}

namespace {

std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = dets[a];
    const auto& y = dets[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.bbox != y.bbox) return x.bbox < y.bbox;
    if (x.label != y.label) return x.label < y.label;
    return a < b;
  });
  return order;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MatchResult match(const std::vector<Detection>& detections, const std::vector<IconAnnotation>& annotations,
                  bool class_aware) {
  MatchResult r;
  r.detection_match.assign(detections.size(), std::nullopt);
  r.annotation_matched.assign(annotations.size(), false);
  for (std::size_t d : score_order(detections)) {
    const auto& det = detections[d];
    const double cx = det.bbox.center_x();
    const double cy = det.bbox.center_y();
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t a = 0; a < annotations.size(); ++a) {
      if (r.annotation_matched[a]) continue;
      const auto& ann = annotations[a];
      if (class_aware && ann.label != det.label) continue;
      if (!ann.bbox.contains(cx, cy)) continue;
      const double dx = ann.bbox.center_x() - cx;
      const double dy = ann.bbox.center_y() - cy;
      const double dist = dx * dx + dy * dy;
      if (!best || dist < best_dist) {
        best = a;
        best_dist = dist;
      }
    }
    if (best) {
      r.detection_match[d] = best;
      r.annotation_matched[*best] = true;
    }
  }
  return r;
}

double PrfCounts::precision() const { return ratio(tp, tp + fp); }
double PrfCounts::recall() const { return ratio(tp, positives); }
double PrfCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

MetricsReport micro_metrics(const std::vector<MatchResult>& matches,
                            const std::vector<std::vector<IconAnnotation>>& annotations, RecallMode mode) {
  if (matches.size() != annotations.size()) throw std::invalid_argument("micro_metrics: sample count mismatch");
  MetricsReport rep;
  rep.mode = mode;
  auto counted = [mode](const IconAnnotation& a) { return mode == RecallMode::kStandard || a.vh_matched; };
  // Detection labels are needed for per-class FP counts, but a MatchResult only knows
  // which annotation each TP hit; per-class FPs are filled by `evaluate`.
  for (std::size_t s = 0; s < matches.size(); ++s) {
    const auto& m = matches[s];
    const auto& anns = annotations[s];
    if (m.annotation_matched.size() != anns.size()) throw std::invalid_argument("micro_metrics: annotation mismatch");
    rep.counts.tp += m.true_positives();
    rep.counts.fp += m.false_positives();
    for (std::size_t a = 0; a < anns.size(); ++a) {
      auto& pc = rep.per_class[index_of(anns[a].label)].counts;
      if (m.annotation_matched[a]) ++pc.tp;
      if (!counted(anns[a])) continue;
      ++rep.counts.positives;
      ++pc.positives;
      if (m.annotation_matched[a]) {
        ++rep.counts.tp_in_denominator;
        ++pc.tp_in_denominator;
      }
    }
  }
  rep.precision = rep.counts.precision();
  rep.recall = rep.counts.recall();
  rep.f1 = rep.counts.f1();
  rep.undefined_ratio = rep.counts.tp + rep.counts.fp == 0 || rep.counts.positives == 0;
  for (auto& c : rep.per_class) {
    c.precision = c.counts.precision();
    c.recall = c.counts.recall();
    c.f1 = c.counts.f1();
  }
  return rep;
}

double average_precision(const std::vector<bool>& ranked_tp, std::size_t num_ground_truth) {
  if (num_ground_truth == 0) return 0.0;
  const std::size_t n = ranked_tp.size();
  std::vector<double> prec(n), rec(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_tp[i];
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(tp) / static_cast<double>(num_ground_truth);
  }
  for (std::size_t i = n; i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  double prev_rec = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (rec[i] - prev_rec) * prec[i];
    prev_rec = rec[i];
  }
  return ap;
}

double mean_average_precision(const std::vector<std::vector<Detection>>& detections,
                              const std::vector<std::vector<IconAnnotation>>& annotations, double iou_threshold) {
  if (detections.size() != annotations.size()) throw std::invalid_argument("mAP: sample count mismatch");
  struct Ranked {
    const Detection* det;
    std::size_t sample;
  };
  std::array<std::vector<Ranked>, kNumIconClasses> by_class;
  std::array<std::size_t, kNumIconClasses> gt_count{};
  for (std::size_t s = 0; s < detections.size(); ++s) {
    for (const auto& d : detections[s]) by_class[index_of(d.label)].push_back({&d, s});
    for (const auto& a : annotations[s]) ++gt_count[index_of(a.label)];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < kNumIconClasses; ++c) {
    if (gt_count[c] == 0) continue;
    ++present;
    auto& ranked = by_class[c];
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.det->score != b.det->score) return a.det->score > b.det->score;
      if (a.sample != b.sample) return a.sample < b.sample;
      return a.det->bbox < b.det->bbox;
    });
    std::vector<std::vector<bool>> used(annotations.size());
    for (std::size_t s = 0; s < annotations.size(); ++s) used[s].assign(annotations[s].size(), false);
    std::vector<bool> tp;
    tp.reserve(ranked.size());
    for (const auto& r : ranked) {
      const auto& anns = annotations[r.sample];
      std::optional<std::size_t> best;
      double best_iou = iou_threshold;
      for (std::size_t a = 0; a < anns.size(); ++a) {
        if (used[r.sample][a] || static_cast<std::size_t>(index_of(anns[a].label)) != c) continue;
        const double v = iou(r.det->bbox, anns[a].bbox);
        if (v >= best_iou && (!best || v > best_iou)) {
          best = a;
          best_iou = v;
        }
      }
      if (best) used[r.sample][*best] = true;
      tp.push_back(best.has_value());
    }
    sum += average_precision(tp, gt_count[c]);
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

void default_vh_matcher(std::vector<IconAnnotation>& annotations, const std::vector<VHNode>& vh_leaves) {
  for (auto& a : annotations) {
    a.vh_matched = std::any_of(vh_leaves.begin(), vh_leaves.end(),
                               [&](const VHNode& n) { return iou(n.bounds, a.bbox) >= 0.5; });
  }
}

MetricsReport evaluate(const std::vector<std::vector<Detection>>& predictions,
                       const std::vector<std::vector<IconAnnotation>>& annotations, const EvalOptions& options) {
  if (predictions.size() != annotations.size()) throw std::invalid_argument("evaluate: sample count mismatch");
  std::vector<std::vector<Detection>> kept(predictions.size());
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    for (const auto& d : predictions[s]) {
      if (!options.threshold || d.score >= *options.threshold) kept[s].push_back(d);
    }
  }
  std::vector<MatchResult> matches;
  matches.reserve(kept.size());
  for (std::size_t s = 0; s < kept.size(); ++s) matches.push_back(match(kept[s], annotations[s], options.class_aware));
  auto rep = micro_metrics(matches, annotations, options.mode);

  // Per-class precision needs the detection labels.
  for (auto& c : rep.per_class) c.counts.fp = 0;
  for (std::size_t s = 0; s < kept.size(); ++s) {
    for (std::size_t d = 0; d < kept[s].size(); ++d) {
      if (matches[s].detection_match[d]) continue;
      ++rep.per_class[index_of(kept[s][d].label)].counts.fp;
    }
  }
  for (auto& c : rep.per_class) {
    c.precision = c.counts.precision();
    c.recall = c.counts.recall();
    c.f1 = c.counts.f1();
  }
  if (options.compute_map) {
    const auto& src = options.threshold_map ? kept : predictions;
    rep.map_01 = mean_average_precision(src, annotations, 0.1);
    rep.map_05 = mean_average_precision(src, annotations, 0.5);
  }
  return rep;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumIconClasses; ++c) {
    const auto& m = per_class[c];
    classes[std::string(name_of(icon_class_at(c)))] = {{"precision", m.precision}, {"recall", m.recall},
                                                       {"f1", m.f1},           {"tp", m.counts.tp},
                                                       {"fp", m.counts.fp},    {"positives", m.counts.positives}};
  }
  nlohmann::json j = {{"mode", mode == RecallMode::kStandard ? "standard" : "starred"},
                      {"precision", precision},
                      {"recall", recall},
                      {"f1", f1},
                      {"tp", counts.tp},
                      {"fp", counts.fp},
                      {"fn", counts.positives - counts.tp_in_denominator},
                      {"positives", counts.positives},
                      {"undefined_ratio", undefined_ratio},
                      {"per_class", std::move(classes)}};
  j["map_0.1"] = map_01 ? nlohmann::json(*map_01) : nlohmann::json(nullptr);
  j["map_0.5"] = map_05 ? nlohmann::json(*map_05) : nlohmann::json(nullptr);
  return j;
}

std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t width = 5;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9s  %9s  %9s\n", static_cast<int>(width + 1), "model", "precision",
                "recall", "f1", "mAP@0.1", "mAP@0.5");
  out << buf;
  auto cell = [](const std::optional<double>& v) {
    char b[16];
    if (v) {
      std::snprintf(b, sizeof(b), "%.3f", *v);
    } else {
      std::snprintf(b, sizeof(b), "-");
    }
    return std::string(b);
  };
  for (const auto& [name, r] : rows) {
    const std::string label = r.mode == RecallMode::kStarred ? name + "*" : name;
    std::snprintf(buf, sizeof(buf), "%-*s  %9.3f  %9.3f  %9.3f  %9s  %9s\n", static_cast<int>(width + 1),
                  label.c_str(), r.precision, r.recall, r.f1, cell(r.map_01).c_str(), cell(r.map_05).c_str());
    out << buf;
  }
  return out.str();
}

std::string per_class_csv(const MetricsReport& report, const std::array<std::size_t, kNumIconClasses>& train_counts) {
  std::ostringstream out;
  out << "class,train_count,precision,recall,f1\n";
  for (std::size_t c = 0; c < kNumIconClasses; ++c) {
    const auto& m = report.per_class[c];
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f\n", std::string(name_of(icon_class_at(c))).c_str(),
                  train_counts[c], m.precision, m.recall, m.f1);
    out << buf;
  }
  return out.str();
}

}  // namespace iconann
