#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hoikit/errors.hpp"
#include "hoikit/geometry.hpp"

namespace hoikit {

// One scored interaction detection. A null object box claims the object is
// not visible.
struct DetRecord {
  int image_id = 0;
  Box human_box, object_box;
  int object_class = 0;
  int verb = 0;
  double score = 0.0;
};

// One ground-truth interaction (possibly several verbs for the same pair).
struct GtRecord {
  int image_id = 0;
  Box human_box, object_box;
  int object_class = 0;
  std::vector<int> verbs;
  bool occluded_object = false;
};

// s1: a detection only matches an occluded ground truth if it committed to
//     the null object box (and overlaps the human).
// s2: the object box of an occluded ground truth is ignored entirely.
enum class Scenario { s1, s2 };

// default_images scores every detection; known_object_images only scores a
// class's detections on images where that object category appears in the
// ground truth.
enum class Setting { default_images, known_object_images };

struct EvalConfig {
  double iou_threshold = 0.5;
  Scenario scenario = Scenario::s2;
  Setting setting = Setting::default_images;
  int rare_cutoff = 10;  // classes with fewer training samples than this are "rare"
  bool include_no_gt_classes = true;  // detections for a class with zero GT pull its AP=0 into the mean
  bool keep_pr_curves = false;
  // training-set sample counts per (object_class, verb); when empty they are
  // derived from the ground truth passed to evaluate()
  std::map<std::pair<int, int>, int> train_counts;
};

struct ClassResult {
  int object_class = 0;
  int verb = 0;
  double ap = 0.0;
  int num_gt = 0;
  int num_dets = 0;
  bool rare = false;
  std::vector<std::pair<double, double>> pr;  // (recall, precision) per rank
};

struct EvalResult {
  double map_full = 0.0, map_rare = 0.0, map_nonrare = 0.0;
  int classes_evaluated = 0, classes_rare = 0, classes_nonrare = 0;
  std::vector<ClassResult> per_class;  // ascending (object_class, verb)
};

inline void validate_det_record(const DetRecord& d, std::size_t index) {
  const std::string tag = "detection record " + std::to_string(index);
  if (!d.human_box.valid()) throw EvalError(tag + ": human box invalid");
  if (!d.object_box.is_null() && !d.object_box.valid())
    throw EvalError(tag + ": object box must be valid or null");
  if (d.object_class < 0) throw EvalError(tag + ": object class negative");
  if (d.verb < 0) throw EvalError(tag + ": verb negative");
  if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0)
    throw EvalError(tag + ": score must lie in [0, 1]");
}

inline void validate_gt_record(const GtRecord& g, std::size_t index) {
  const std::string tag = "ground-truth record " + std::to_string(index);
  if (!g.human_box.valid()) throw EvalError(tag + ": human box invalid");
  if (!g.occluded_object && !g.object_box.valid())
    throw EvalError(tag + ": object box invalid");
  if (g.occluded_object && !g.object_box.is_null() && !g.object_box.valid())
    throw EvalError(tag + ": occluded object box must be null or valid");
  if (g.object_class < 0) throw EvalError(tag + ": object class negative");
  if (g.verbs.empty()) throw EvalError(tag + ": verb list empty");
  for (int v : g.verbs)
    if (v < 0) throw EvalError(tag + ": verb negative");
}

// Greedy matching plus all-points interpolated AP per (object, verb) class,
// averaged into full/rare/non-rare means. A ground-truth record with k verbs
// contributes k independent targets, one per class.
inline EvalResult evaluate(const std::vector<DetRecord>& dets, const std::vector<GtRecord>& gts,
                           const EvalConfig& cfg) {
  if (!(cfg.iou_threshold > 0.0) || cfg.iou_threshold > 1.0)
    throw EvalError("iou threshold must lie in (0, 1]");
  for (std::size_t i = 0; i < dets.size(); ++i) validate_det_record(dets[i], i);
  for (std::size_t i = 0; i < gts.size(); ++i) validate_gt_record(gts[i], i);

  using Key = std::pair<int, int>;

  // ground-truth units per class, in input order
  struct GtUnit {
    int image_id;
    std::size_t gt_index;
  };
  std::map<Key, std::vector<GtUnit>> gt_units;
  std::map<int, std::set<int>> images_with_object;  // object class -> image pool
  for (std::size_t i = 0; i < gts.size(); ++i) {
    images_with_object[gts[i].object_class].insert(gts[i].image_id);
    for (int v : gts[i].verbs) gt_units[{gts[i].object_class, v}].push_back({gts[i].image_id, i});
  }

  std::map<Key, std::vector<std::size_t>> det_indices;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& d = dets[i];
    if (cfg.setting == Setting::known_object_images) {
      auto pool = images_with_object.find(d.object_class);
      if (pool == images_with_object.end() || !pool->second.count(d.image_id)) continue;
    }
    det_indices[{d.object_class, d.verb}].push_back(i);
  }

  // class universe: every class with GT, plus (optionally) classes that only
  // have detections
  std::set<Key> classes;
  for (const auto& [key, units] : gt_units) classes.insert(key);
  if (cfg.include_no_gt_classes)
    for (const auto& [key, idxs] : det_indices)
      if (!idxs.empty()) classes.insert(key);

  // training counts for the rare split
  std::map<Key, int> counts = cfg.train_counts;
  if (counts.empty())
    for (const auto& [key, units] : gt_units) counts[key] = int(units.size());

  EvalResult res;
  double sum_full = 0.0, sum_rare = 0.0, sum_nonrare = 0.0;
  for (const auto& key : classes) {
    ClassResult cr;
    cr.object_class = key.first;
    cr.verb = key.second;
    const auto unit_it = gt_units.find(key);
    const std::vector<GtUnit> no_units;
    const auto& units = unit_it == gt_units.end() ? no_units : unit_it->second;
    cr.num_gt = int(units.size());

    std::vector<std::size_t> idxs;
    if (auto it = det_indices.find(key); it != det_indices.end()) idxs = it->second;
    cr.num_dets = int(idxs.size());
    if (cr.num_gt == 0 && cr.num_dets == 0) continue;

    // rank by descending score, ties by input order
    std::stable_sort(idxs.begin(), idxs.end(), [&dets](std::size_t a, std::size_t b) {
      return dets[a].score > dets[b].score;
    });

    std::vector<char> taken(units.size(), 0);
    std::vector<char> tp(idxs.size(), 0);
    for (std::size_t r = 0; r < idxs.size(); ++r) {
      const DetRecord& d = dets[idxs[r]];
      int best = -1;
      double best_score = 0.0;
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (taken[u] || units[u].image_id != d.image_id) continue;
        const GtRecord& g = gts[units[u].gt_index];
        double ms;
        if (g.occluded_object) {
          if (cfg.scenario == Scenario::s1 && !d.object_box.is_null()) continue;
          ms = iou(d.human_box, g.human_box);
        } else {
          if (d.object_box.is_null()) continue;
          ms = std::min(iou(d.human_box, g.human_box), iou(d.object_box, g.object_box));
        }
        if (ms < cfg.iou_threshold) continue;
        if (best < 0 || ms > best_score) {  // strict > keeps the lowest unit on ties
          best = int(u);
          best_score = ms;
        }
      }
      if (best >= 0) {
        taken[std::size_t(best)] = 1;
        tp[r] = 1;
      }
    }

    // all-points interpolated AP: every true positive contributes the best
    // precision achieved at its rank or later
    if (cr.num_gt > 0 && !idxs.empty()) {
      const std::size_t n = idxs.size();
      std::vector<double> prec(n);
      int cum = 0;
      for (std::size_t r = 0; r < n; ++r) {
        cum += tp[r];
        prec[r] = double(cum) / double(r + 1);
        if (cfg.keep_pr_curves) cr.pr.emplace_back(double(cum) / double(cr.num_gt), prec[r]);
      }
      std::vector<double> env(n);
      double run = 0.0;
      for (std::size_t r = n; r-- > 0;) {
        run = std::max(run, prec[r]);
        env[r] = run;
      }
      double ap = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        if (tp[r]) ap += env[r] / double(cr.num_gt);
      cr.ap = ap;
    } else {
      cr.ap = 0.0;
      if (cfg.keep_pr_curves && !idxs.empty())
        for (std::size_t r = 0; r < idxs.size(); ++r) cr.pr.emplace_back(0.0, 0.0);
    }

    auto cit = counts.find(key);
    cr.rare = (cit == counts.end() ? 0 : cit->second) < cfg.rare_cutoff;
    sum_full += cr.ap;
    if (cr.rare) {
      sum_rare += cr.ap;
      ++res.classes_rare;
    } else {
      sum_nonrare += cr.ap;
      ++res.classes_nonrare;
    }
    ++res.classes_evaluated;
    res.per_class.push_back(std::move(cr));
  }

  res.map_full = res.classes_evaluated ? sum_full / double(res.classes_evaluated) : 0.0;
  res.map_rare = res.classes_rare ? sum_rare / double(res.classes_rare) : 0.0;
  res.map_nonrare = res.classes_nonrare ? sum_nonrare / double(res.classes_nonrare) : 0.0;
  return res;
}

}  // namespace hoikit
