#pragma once

#include <string>
#include <vector>

#include "iconann/geometry.hpp"
#include "iconann/taxonomy.hpp"
#include "json.hpp"

namespace iconann {

/// A predicted icon: box, class, confidence.
struct Detection {
  BoundingBox bbox;
  IconClass label = IconClass::kStar;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Per-sample prediction record as written by `predict`:
/// {"id": ..., "detections": [{"bbox": [...], "label": ..., "score": ...}]}
struct SamplePredictions {
  std::string id;
  std::vector<Detection> detections;
};

nlohmann::json to_json(const SamplePredictions& p);
SamplePredictions predictions_from_json(const nlohmann::json& j, const std::string& source);

}  // namespace iconann
