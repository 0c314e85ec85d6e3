#include "iconann/detection.hpp"

#include "iconann/error.hpp"

namespace iconann {

nlohmann::json to_json(const SamplePredictions& p) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : p.detections) {
    dets.push_back({{"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
                    {"label", std::string(name_of(d.label))},
                    {"score", d.score}});
  }
  return {{"id", p.id}, {"detections", std::move(dets)}};
}

SamplePredictions predictions_from_json(const nlohmann::json& j, const std::string& source) {
  SamplePredictions p;
  try {
    p.id = j.at("id").get<std::string>();
    for (const auto& d : j.at("detections")) {
      const auto& bb = d.at("bbox");
      if (!bb.is_array() || bb.size() != 4) throw ParseError(source, "bbox must have 4 entries");
      Detection det;
      det.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
      if (!det.bbox.valid()) throw ParseError(source, "invalid detection bbox " + to_string(det.bbox));
      const auto label = d.at("label").get<std::string>();
      auto cls = parse_icon_class(label);
      if (!cls || !is_icon(*cls)) throw ParseError(source, "unknown label '" + label + "'");
      det.label = *cls;
      det.score = d.at("score").get<double>();
      p.detections.push_back(det);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, e.what());
  }
  return p;
}

}  // namespace iconann
