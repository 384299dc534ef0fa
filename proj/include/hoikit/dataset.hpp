#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hoikit/annotations.hpp"
#include "hoikit/core/rng.hpp"
#include "hoikit/detection.hpp"
#include "hoikit/errors.hpp"
#include "hoikit/evaluation.hpp"
#include "hoikit/records.hpp"
#include "hoikit/text_knowledge.hpp"

namespace hoikit {

struct DatasetConfig {
  int num_images = 16;
  int num_verbs = 3;
  int num_objects = 2;  // non-human categories; their class ids are 1..num_objects
  int grid_h = 10, grid_w = 10, grid_c = 8;
  int image_px = 96;
  int min_humans = 1, max_humans = 1;
  int min_objects = 1, max_objects = 3;
  double interaction_prob = 1.0;
  double extra_verb_prob = 0.05;  // chance of each verb beyond the first, up to 3
  double amplitude = 12.0;         // strength of the planted per-verb patterns
  double noise_sigma = 0.05;
  double min_box = 0.25, max_box = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_images < 1) throw ConfigError("dataset needs at least one image");
    if (num_verbs < 1 || num_objects < 1) throw ConfigError("dataset needs verbs and objects");
    if (grid_h < 2 || grid_w < 2 || grid_c < 1) throw ConfigError("dataset grid too small");
    if (min_humans < 1 || max_humans < min_humans || min_objects < 1 ||
        max_objects < min_objects)
      throw ConfigError("dataset instance ranges invalid");
    if (!(interaction_prob >= 0.0) || interaction_prob > 1.0)
      throw ConfigError("interaction probability out of [0, 1]");
    if (!(min_box > 0.0) || max_box <= min_box || max_box >= 1.0)
      throw ConfigError("dataset box size range invalid");
  }
};

template <class T>
struct SyntheticScene {
  FeatureMap<T> features;
  std::vector<Instance> instances;
  std::vector<TripletAnnotation> annotations;
};

template <class T>
struct SyntheticDataset {
  DatasetConfig cfg;
  Vocabulary vocab;
  std::vector<SyntheticScene<T>> scenes;
  std::map<std::pair<int, int>, int> train_counts;  // (object_class, verb) -> samples
};

namespace detail {

inline std::vector<std::string> default_verb_names() {
  return {"hold", "ride",  "kick",  "carry", "push",  "pull",  "throw",
          "open", "wear",  "wash",  "chase", "feed",  "catch", "lift",
          "drag", "point", "swing", "drink", "eat",   "clean"};
}

inline std::vector<std::string> default_object_names() {
  return {"ball",   "bicycle",    "cup",    "chair",    "dog",    "book",   "phone",
          "bag",    "horse",      "laptop", "umbrella", "bottle", "cake",   "kite",
          "guitar", "skateboard", "broom",  "pan",      "drum",   "basket"};
}

inline std::vector<std::string> take_names(const std::vector<std::string>& base, int n,
                                           const std::string& overflow_prefix) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i)
    out.push_back(i < int(base.size()) ? base[std::size_t(i)]
                                       : overflow_prefix + std::to_string(i));
  return out;
}

// A box of the configured size range, placed to keep overlap with the
// already-placed boxes low when possible.
inline Box place_box(Rng& rng, const std::vector<Box>& existing, double min_box, double max_box) {
  Box best;
  double best_overlap = 2.0;
  for (int attempt = 0; attempt < 24; ++attempt) {
    const double bw = rng.uniform(min_box, max_box);
    const double bh = rng.uniform(min_box, max_box);
    const double x1 = rng.uniform(0.0, 1.0 - bw);
    const double y1 = rng.uniform(0.0, 1.0 - bh);
    const Box b{x1, y1, x1 + bw, y1 + bh};
    double overlap = 0.0;
    for (const auto& e : existing) overlap = std::max(overlap, iou(b, e));
    if (overlap < best_overlap) {
      best_overlap = overlap;
      best = b;
    }
    if (overlap <= 0.12) break;
  }
  return best;
}

}  // namespace detail

inline Vocabulary dataset_vocabulary(const DatasetConfig& cfg) {
  std::vector<std::string> objects{"human"};
  for (const auto& n :
       detail::take_names(detail::default_object_names(), cfg.num_objects, "object"))
    objects.push_back(n);
  return Vocabulary::build(objects,
                           detail::take_names(detail::default_verb_names(), cfg.num_verbs, "verb"));
}

// Fixed per-verb channel pattern, unit norm. All generation math runs in
// double so the produced dataset is identical regardless of the tensor
// scalar type.
inline std::vector<double> verb_pattern(std::uint64_t seed, int verb, int channels) {
  Rng rng(seed_stream(seed, mix64(0xbeef0000ull + std::uint64_t(verb))));
  std::vector<double> p(static_cast<std::size_t>(channels));
  double norm = 0.0;
  for (auto& v : p) {
    v = rng.gaussian();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) norm = 1.0;
  for (auto& v : p) v /= norm;
  return p;
}

// Generates one scene. Scenes are a pure function of (seed, index): no state
// leaks between scenes, so any scene can be regenerated alone.
template <class T>
inline SyntheticScene<T> generate_scene(const DatasetConfig& cfg, int index) {
  Rng rng(seed_stream(cfg.seed, mix64(0x5ce9e0000ull + std::uint64_t(index))));
  SyntheticScene<T> scene;
  scene.features.image_id = index;
  scene.features.image_h = cfg.image_px;
  scene.features.image_w = cfg.image_px;

  const int n_h = rng.uniform_int(cfg.min_humans, cfg.max_humans);
  const int n_o = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  std::vector<Box> placed;
  for (int i = 0; i < n_h; ++i) {
    const Box b = detail::place_box(rng, placed, cfg.min_box, cfg.max_box);
    placed.push_back(b);
    scene.instances.push_back({b, kHumanClass});
  }
  for (int i = 0; i < n_o; ++i) {
    const Box b = detail::place_box(rng, placed, cfg.min_box, cfg.max_box);
    placed.push_back(b);
    scene.instances.push_back({b, rng.uniform_int(1, cfg.num_objects)});
  }

  // verb pool: shuffled complete blocks, so draws stay near-balanced
  std::vector<int> pool;
  auto refill = [&]() {
    std::vector<int> block(std::size_t(cfg.num_verbs));
    std::iota(block.begin(), block.end(), 0);
    for (int i = cfg.num_verbs - 1; i > 0; --i)
      std::swap(block[std::size_t(i)], block[std::size_t(rng.uniform_int(0, i))]);
    pool.insert(pool.end(), block.begin(), block.end());
  };
  std::size_t pool_pos = 0;
  auto draw_verbs = [&](int k) {
    std::vector<int> out;
    while (int(out.size()) < k) {
      if (pool_pos >= pool.size()) refill();
      const int v = pool[pool_pos++];
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  // decide which (human, object) pairs interact
  for (int h = 0; h < n_h; ++h) {
    for (int o = 0; o < n_o; ++o) {
      if (rng.uniform() >= cfg.interaction_prob) continue;
      int k = 1;
      while (k < 3 && k < cfg.num_verbs && rng.uniform() < cfg.extra_verb_prob) ++k;
      TripletAnnotation ann;
      ann.human_box = scene.instances[std::size_t(h)].box;
      ann.object_box = scene.instances[std::size_t(n_h + o)].box;
      ann.object_class = scene.instances[std::size_t(n_h + o)].class_label;
      ann.verbs = draw_verbs(k);
      scene.annotations.push_back(std::move(ann));
    }
  }
  if (scene.annotations.empty()) {  // keep every scene trainable
    TripletAnnotation ann;
    ann.human_box = scene.instances[0].box;
    ann.object_box = scene.instances[std::size_t(n_h)].box;
    ann.object_class = scene.instances[std::size_t(n_h)].class_label;
    ann.verbs = draw_verbs(1);
    scene.annotations.push_back(std::move(ann));
  }

  // background noise plus the planted per-verb patterns under each
  // interacting pair's boxes; cells outside every pair stay pure noise
  const int H = cfg.grid_h, W = cfg.grid_w, C = cfg.grid_c;
  std::vector<double> grid(std::size_t(H) * W * C);
  for (auto& v : grid) v = rng.gaussian(0.0, cfg.noise_sigma);
  for (const auto& ann : scene.annotations) {
    const auto mask = cells_in_union(ann.human_box, ann.object_box, H, W);
    for (int verb : ann.verbs) {
      const auto pattern = verb_pattern(cfg.seed, verb, C);
      for (int cell = 0; cell < H * W; ++cell) {
        if (!mask[std::size_t(cell)]) continue;
        for (int ch = 0; ch < C; ++ch)
          grid[std::size_t(cell) * C + ch] += cfg.amplitude * pattern[std::size_t(ch)];
      }
    }
  }
  scene.features.grid = Tensor<T>::zeros({H, W, C});
  for (std::size_t i = 0; i < grid.size(); ++i) (*scene.features.grid.data)[i] = T(grid[i]);
  return scene;
}

template <class T>
inline SyntheticDataset<T> generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  SyntheticDataset<T> ds;
  ds.cfg = cfg;
  ds.vocab = dataset_vocabulary(cfg);
  for (int i = 0; i < cfg.num_images; ++i) {
    ds.scenes.push_back(generate_scene<T>(cfg, i));
    for (const auto& ann : ds.scenes.back().annotations)
      for (int v : ann.verbs) ++ds.train_counts[{ann.object_class, v}];
  }
  return ds;
}

template <class T>
inline std::vector<GtRecord> ground_truth_records(const SyntheticDataset<T>& ds) {
  std::vector<GtRecord> out;
  for (const auto& scene : ds.scenes) {
    for (const auto& ann : scene.annotations) {
      GtRecord g;
      g.image_id = scene.features.image_id;
      g.human_box = ann.human_box;
      g.object_box = ann.object_box;
      g.object_class = ann.object_class;
      g.verbs = ann.verbs;
      g.occluded_object = ann.occluded_object;
      out.push_back(std::move(g));
    }
  }
  return out;
}

// --- on-disk form: scenes.jsonl + gt.jsonl + manifest.json ---

template <class T>
inline void save_dataset(const SyntheticDataset<T>& ds, const std::string& dir) {
  {
    std::ofstream out(dir + "/scenes.jsonl");
    if (!out) throw EvalError("cannot write scenes file in " + dir);
    for (const auto& scene : ds.scenes) {
      nlohmann::json j;
      j["image_id"] = scene.features.image_id;
      j["image_px"] = ds.cfg.image_px;
      j["grid_h"] = scene.features.grid.shape[0];
      j["grid_w"] = scene.features.grid.shape[1];
      j["grid_c"] = scene.features.grid.shape[2];
      std::vector<double> flat(scene.features.grid.data->size());
      for (std::size_t i = 0; i < flat.size(); ++i)
        flat[i] = double((*scene.features.grid.data)[i]);
      j["grid"] = flat;
      nlohmann::json insts = nlohmann::json::array();
      for (const auto& inst : scene.instances) {
        nlohmann::json ji;
        ji["box"] = detail::box_to_json(inst.box);
        ji["class"] = inst.class_label;
        insts.push_back(ji);
      }
      j["instances"] = insts;
      out << j.dump() << "\n";
    }
  }
  write_ground_truth_file(dir + "/gt.jsonl", ground_truth_records(ds));
  {
    nlohmann::json m;
    m["object_names"] = ds.vocab.object_names();
    m["verb_names"] = ds.vocab.verb_names();
    m["num_images"] = ds.cfg.num_images;
    m["grid_h"] = ds.cfg.grid_h;
    m["grid_w"] = ds.cfg.grid_w;
    m["grid_c"] = ds.cfg.grid_c;
    m["image_px"] = ds.cfg.image_px;
    m["seed"] = ds.cfg.seed;
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& [key, n] : ds.train_counts) {
      nlohmann::json jc;
      jc["object_class"] = key.first;
      jc["verb"] = key.second;
      jc["count"] = n;
      counts.push_back(jc);
    }
    m["train_counts"] = counts;
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw EvalError("cannot write manifest in " + dir);
    out << m.dump(2) << "\n";
  }
}

template <class T>
inline SyntheticDataset<T> load_dataset(const std::string& dir) {
  SyntheticDataset<T> ds;
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw EvalError("cannot open manifest in " + dir);
  nlohmann::json m;
  try {
    mf >> m;
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string("manifest: ") + e.what());
  }
  std::vector<std::string> object_names = m.at("object_names").get<std::vector<std::string>>();
  std::vector<std::string> verb_names = m.at("verb_names").get<std::vector<std::string>>();
  ds.vocab = Vocabulary::build(object_names, verb_names);
  ds.cfg.num_objects = int(object_names.size()) - 1;
  ds.cfg.num_verbs = int(verb_names.size());
  ds.cfg.num_images = m.at("num_images").get<int>();
  ds.cfg.grid_h = m.at("grid_h").get<int>();
  ds.cfg.grid_w = m.at("grid_w").get<int>();
  ds.cfg.grid_c = m.at("grid_c").get<int>();
  ds.cfg.image_px = m.at("image_px").get<int>();
  ds.cfg.seed = m.at("seed").get<std::uint64_t>();
  for (const auto& jc : m.at("train_counts"))
    ds.train_counts[{jc.at("object_class").get<int>(), jc.at("verb").get<int>()}] =
        jc.at("count").get<int>();

  std::ifstream sf(dir + "/scenes.jsonl");
  if (!sf) throw EvalError("cannot open scenes file in " + dir);
  std::string line;
  int lineno = 0;
  while (std::getline(sf, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = detail::parse_jsonl_line(line, "scenes", lineno);
    SyntheticScene<T> scene;
    scene.features.image_id = j.at("image_id").get<int>();
    scene.features.image_h = j.at("image_px").get<int>();
    scene.features.image_w = scene.features.image_h;
    const int h = j.at("grid_h").get<int>(), w = j.at("grid_w").get<int>(),
              c = j.at("grid_c").get<int>();
    const auto flat = j.at("grid").get<std::vector<double>>();
    if (int(flat.size()) != h * w * c)
      throw EvalError("scenes line " + std::to_string(lineno) + ": grid size mismatch");
    scene.features.grid = Tensor<T>::zeros({h, w, c});
    for (std::size_t i = 0; i < flat.size(); ++i) (*scene.features.grid.data)[i] = T(flat[i]);
    for (const auto& ji : j.at("instances")) {
      Instance inst;
      inst.box = detail::box_from_json(ji.at("box"), "scenes", lineno, "box");
      inst.class_label = ji.at("class").get<int>();
      scene.instances.push_back(inst);
    }
    ds.scenes.push_back(std::move(scene));
  }

  // annotations come from the ground-truth file, keyed by image id
  const auto gts = read_ground_truth_file(dir + "/gt.jsonl");
  std::map<int, std::vector<TripletAnnotation>> by_image;
  for (const auto& g : gts) {
    TripletAnnotation ann;
    ann.human_box = g.human_box;
    ann.object_box = g.object_box;
    ann.object_class = g.object_class;
    ann.verbs = g.verbs;
    ann.occluded_object = g.occluded_object;
    ann.normalize();
    by_image[g.image_id].push_back(std::move(ann));
  }
  for (auto& scene : ds.scenes) {
    auto it = by_image.find(scene.features.image_id);
    if (it != by_image.end()) scene.annotations = it->second;
  }
  return ds;
}

}  // namespace hoikit
