#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iconann/corpus.hpp"
#include "iconann/detection.hpp"
#include "json.hpp"

namespace iconann {

enum class RecallMode {
  kStandard,
  /// Only icons that map back to a VH leaf count towards recall.
  kStarred,
};

struct MatchResult {
  /// Per detection, in input order: index of the matched annotation, or nullopt (FP).
  std::vector<std::optional<std::size_t>> detection_match;
  /// Per annotation: whether some detection matched it.
  std::vector<bool> annotation_matched;

  std::size_t true_positives() const;
  std::size_t false_positives() const { return detection_match.size() - true_positives(); }
};

/// Greedy center matching. Detections are visited by descending score (ties by box
/// coordinates, then label); each takes the still-unmatched annotation that contains its
/// center, agrees on the label when `class_aware`, and is nearest by center distance.
MatchResult match(const std::vector<Detection>& detections, const std::vector<IconAnnotation>& annotations,
                  bool class_aware = true);

struct PrfCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  /// Annotations counted in the recall denominator.
  std::size_t positives = 0;
  /// True positives whose annotation is in the recall denominator (for FN counts).
  std::size_t tp_in_denominator = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

struct ClassMetrics {
  PrfCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  RecallMode mode = RecallMode::kStandard;
  PrfCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::array<ClassMetrics, kNumIconClasses> per_class{};
  std::optional<double> map_01;
  std::optional<double> map_05;
  /// Set when P or R had a zero denominator and was reported as 0.
  bool undefined_ratio = false;

  nlohmann::json to_json() const;
};

/// Micro precision, recall and F1 over a corpus. Precision counts every detection;
/// recall divides all TPs by all annotations (standard) or by the vh_matched ones only
/// (starred). Only the denominator changes, so starred recall is never below standard
/// recall, and it can exceed 1 for a model that finds icons the VH does not contain.
MetricsReport micro_metrics(const std::vector<MatchResult>& matches,
                            const std::vector<std::vector<IconAnnotation>>& annotations, RecallMode mode);

/// Mean over classes present in the ground truth of all-point interpolated AP. A detection
/// is a TP when its IOU with a still-unmatched same-class annotation in the same sample
/// reaches `iou_threshold`; detections are taken by descending score.
double mean_average_precision(const std::vector<std::vector<Detection>>& detections,
                              const std::vector<std::vector<IconAnnotation>>& annotations, double iou_threshold);

/// Area under the monotone precision envelope of a ranked TP/FP list.
double average_precision(const std::vector<bool>& ranked_tp, std::size_t num_ground_truth);

/// vh_matched := some leaf has IOU >= 0.5 with the annotation.
void default_vh_matcher(std::vector<IconAnnotation>& annotations, const std::vector<VHNode>& vh_leaves);

struct EvalOptions {
  /// Detections below this score are dropped before matching; nullopt keeps all.
  std::optional<double> threshold = 0.2;
  RecallMode mode = RecallMode::kStandard;
  bool class_aware = true;
  /// Also drop sub-threshold detections before mAP (off: mAP is thresholdless).
  bool threshold_map = false;
  bool compute_map = true;
};

/// Full evaluation of per-sample predictions against ground truth. `predictions` must be
/// parallel to `annotations`.
MetricsReport evaluate(const std::vector<std::vector<Detection>>& predictions,
                       const std::vector<std::vector<IconAnnotation>>& annotations, const EvalOptions& options = {});

/// Fixed-width table with one row per named report: P, R, F1, mAP@0.1, mAP@0.5.
std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

/// "class,train_count,precision,recall,f1" rows. train_counts may be empty.
std::string per_class_csv(const MetricsReport& report, const std::array<std::size_t, kNumIconClasses>& train_counts);

}  // namespace iconann
