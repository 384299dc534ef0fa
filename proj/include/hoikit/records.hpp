#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoikit/errors.hpp"
#include "hoikit/evaluation.hpp"
#include "hoikit/geometry.hpp"

namespace hoikit {

namespace detail {

inline nlohmann::json parse_jsonl_line(const std::string& line, const char* what, int lineno) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
  }
}

inline Box box_from_json(const nlohmann::json& j, const char* what, int lineno,
                         const char* field) {
  if (!j.is_array() || j.size() != 4)
    throw EvalError(std::string(what) + " line " + std::to_string(lineno) + ": " + field +
                    " must be an array of 4 numbers");
  for (const auto& v : j)
    if (!v.is_number())
      throw EvalError(std::string(what) + " line " + std::to_string(lineno) + ": " + field +
                      " must be numeric");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

template <class JsonT>
inline const nlohmann::json& field(const JsonT& j, const char* name, const char* what,
                                   int lineno) {
  auto it = j.find(name);
  if (it == j.end())
    throw EvalError(std::string(what) + " line " + std::to_string(lineno) + ": missing field \"" +
                    name + "\"");
  return *it;
}

inline nlohmann::json box_to_json(const Box& b) {
  return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2});
}

}  // namespace detail

inline std::vector<DetRecord> read_detections(std::istream& in) {
  std::vector<DetRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = detail::parse_jsonl_line(line, "detections", lineno);
    DetRecord d;
    d.image_id = detail::field(j, "image_id", "detections", lineno).get<int>();
    d.human_box = detail::box_from_json(detail::field(j, "human_box", "detections", lineno),
                                        "detections", lineno, "human_box");
    d.object_box = detail::box_from_json(detail::field(j, "object_box", "detections", lineno),
                                         "detections", lineno, "object_box");
    d.object_class = detail::field(j, "object_class", "detections", lineno).get<int>();
    d.verb = detail::field(j, "verb", "detections", lineno).get<int>();
    d.score = detail::field(j, "score", "detections", lineno).get<double>();
    try {
      validate_det_record(d, std::size_t(out.size()));
    } catch (const EvalError& e) {
      throw EvalError("detections line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(d);
  }
  return out;
}

inline std::vector<DetRecord> read_detections_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EvalError("cannot open detections file: " + path);
  return read_detections(in);
}

inline std::vector<GtRecord> read_ground_truth(std::istream& in) {
  std::vector<GtRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = detail::parse_jsonl_line(line, "ground truth", lineno);
    GtRecord g;
    g.image_id = detail::field(j, "image_id", "ground truth", lineno).get<int>();
    g.human_box = detail::box_from_json(detail::field(j, "human_box", "ground truth", lineno),
                                        "ground truth", lineno, "human_box");
    g.object_box = detail::box_from_json(detail::field(j, "object_box", "ground truth", lineno),
                                         "ground truth", lineno, "object_box");
    g.object_class = detail::field(j, "object_class", "ground truth", lineno).get<int>();
    const auto& verbs = detail::field(j, "verbs", "ground truth", lineno);
    if (!verbs.is_array())
      throw EvalError("ground truth line " + std::to_string(lineno) + ": verbs must be an array");
    for (const auto& v : verbs) g.verbs.push_back(v.get<int>());
    g.occluded_object = detail::field(j, "occluded_object", "ground truth", lineno).get<bool>();
    try {
      validate_gt_record(g, std::size_t(out.size()));
    } catch (const EvalError& e) {
      throw EvalError("ground truth line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<GtRecord> read_ground_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EvalError("cannot open ground truth file: " + path);
  return read_ground_truth(in);
}

inline void write_detections(std::ostream& out, const std::vector<DetRecord>& dets) {
  for (const auto& d : dets) {
    nlohmann::json j;
    j["image_id"] = d.image_id;
    j["human_box"] = detail::box_to_json(d.human_box);
    j["object_box"] = detail::box_to_json(d.object_box);
    j["object_class"] = d.object_class;
    j["verb"] = d.verb;
    j["score"] = d.score;
    out << j.dump() << "\n";
  }
}

inline void write_detections_file(const std::string& path, const std::vector<DetRecord>& dets) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot open for writing: " + path);
  write_detections(out, dets);
}

inline void write_ground_truth(std::ostream& out, const std::vector<GtRecord>& gts) {
  for (const auto& g : gts) {
    nlohmann::json j;
    j["image_id"] = g.image_id;
    j["human_box"] = detail::box_to_json(g.human_box);
    j["object_box"] = detail::box_to_json(g.object_box);
    j["object_class"] = g.object_class;
    j["verbs"] = g.verbs;
    j["occluded_object"] = g.occluded_object;
    out << j.dump() << "\n";
  }
}

inline void write_ground_truth_file(const std::string& path, const std::vector<GtRecord>& gts) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot open for writing: " + path);
  write_ground_truth(out, gts);
}

}  // namespace hoikit
