#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "hoikit/core/rng.hpp"
#include "hoikit/core/tensor.hpp"
#include "hoikit/errors.hpp"
#include "hoikit/geometry.hpp"

namespace hoikit {

// Class id 0 is always the human category.
constexpr int kHumanClass = 0;

// Backbone output for one image: a [h x w x c] activation grid plus pixel
// metadata used only for rendering.
template <class T>
struct FeatureMap {
  int image_id = 0;
  int image_h = 0, image_w = 0;
  Tensor<T> grid;

  void validate() const {
    if (grid.ndim() != 3) throw ShapeError("feature map grid must be [h, w, c]");
    if (grid.shape[0] < 1 || grid.shape[1] < 1 || grid.shape[2] < 1)
      throw ShapeError("feature map grid has an empty dimension");
  }
};

// Output of the (frozen) entity detector on one image. Tokens are constants:
// no gradient ever reaches the detector.
template <class T>
struct EntityDetectionSet {
  std::vector<Box> boxes;
  std::vector<int> class_labels;
  std::vector<double> confidences;
  std::vector<std::vector<double>> class_scores;  // rows sum to 1, argmax == label
  Tensor<T> tokens;                               // [N x Dv]

  int size() const { return int(boxes.size()); }

  void validate(int num_classes) const {
    const int n = size();
    if (int(class_labels.size()) != n || int(confidences.size()) != n ||
        int(class_scores.size()) != n)
      throw ShapeError("detection set fields disagree on count");
    if (n > 0 && (tokens.ndim() != 2 || tokens.shape[0] != n))
      throw ShapeError("detection token matrix row count differs from boxes");
    for (int i = 0; i < n; ++i) {
      if (!boxes[i].valid()) throw DomainError("detected box invalid");
      if (class_labels[i] < 0 || class_labels[i] >= num_classes)
        throw DomainError("detected class out of range");
      if (!(confidences[i] > 0.0) || confidences[i] > 1.0)
        throw DomainError("detection confidence out of (0, 1]");
      if (int(class_scores[i].size()) != num_classes)
        throw ShapeError("class score row width differs from class count");
      double s = 0.0;
      int arg = 0;
      for (int c = 0; c < num_classes; ++c) {
        s += class_scores[i][c];
        if (class_scores[i][c] > class_scores[i][arg]) arg = c;
      }
      if (std::abs(s - 1.0) > 1e-6) throw DomainError("class score row does not sum to 1");
      if (arg != class_labels[i]) throw DomainError("class score argmax differs from label");
    }
  }
};

struct HOPair {
  int human_idx = 0;
  int object_idx = 0;
  bool operator==(const HOPair& o) const {
    return human_idx == o.human_idx && object_idx == o.object_idx;
  }
};

// Candidate pairs: every (human, other-instance) ordered pair. The subject
// must be a human; the object slot may hold anything, humans included.
// Order: human index ascending, then object index ascending.
inline std::vector<HOPair> generate_pairs(const std::vector<int>& class_labels) {
  const int n = int(class_labels.size());
  std::vector<HOPair> pairs;
  for (int h = 0; h < n; ++h) {
    if (class_labels[h] != kHumanClass) continue;
    for (int o = 0; o < n; ++o) {
      if (o == h) continue;
      pairs.push_back({h, o});
    }
  }
  return pairs;
}

// Detector plug-in contract: turn one feature map into an entity set.
template <class T>
class Detector {
 public:
  virtual ~Detector() = default;
  virtual EntityDetectionSet<T> detect(const FeatureMap<T>& fm) = 0;
};

// One entity placed in a scene; ground truth the mock detector reads back.
struct Instance {
  Box box;
  int class_label = 0;
};

enum class TokenMode { full, position_only };

struct MockDetectorConfig {
  int num_queries = 16;
  int token_dim = 32;
  int num_classes = 5;
  double jitter_sigma = 0.0;       // truncated gaussian per coordinate, clipped at 3 sigma
  double confidence_floor = 0.2;   // confidences drawn uniform in [floor, 1)
  TokenMode token_mode = TokenMode::full;
  std::uint64_t seed = 0;
};

// Stand-in for a frozen entity detector. It looks up the scene's ground-truth
// instances by image id, perturbs the boxes, and emits deterministic tokens
// computed from fixed seeded projections of box geometry, class embedding,
// and (in full mode) the average feature patch under the box. Nothing here
// is trainable.
template <class T>
class MockDetector : public Detector<T> {
 public:
  explicit MockDetector(const MockDetectorConfig& cfg) : cfg_(cfg) {
    if (cfg.confidence_floor < 0.0 || cfg.confidence_floor >= 1.0)
      throw ConfigError("detector confidence floor must lie in [0, 1)");
    if (cfg.num_queries < 1) throw ConfigError("detector num_queries must be positive");
    if (cfg.token_dim < 1) throw ConfigError("detector token dim must be positive");
    Rng rng(seed_stream(cfg.seed, fnv1a("mock-detector-projections")));
    auto fill = [&rng](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (auto& x : v) x = rng.gaussian(0.0, 0.5);
    };
    fill(box_proj_, std::size_t(cfg.token_dim) * 8);
    fill(class_embed_, std::size_t(cfg.token_dim) * cfg.num_classes);
  }

  void register_scene(int image_id, std::vector<Instance> instances) {
    scenes_[image_id] = std::move(instances);
  }

  EntityDetectionSet<T> detect(const FeatureMap<T>& fm) override {
    fm.validate();
    auto it = scenes_.find(fm.image_id);
    if (it == scenes_.end()) throw EvalError("mock detector has no scene for this image id");
    const auto& all = it->second;
    const int n = std::min(int(all.size()), cfg_.num_queries);  // keep lowest indices

    // patch projection depends on the grid channel count, so it is derived
    // lazily but from a fixed seed
    const int c = fm.grid.shape[2];
    if (int(patch_proj_.size()) != cfg_.token_dim * c) {
      Rng rng(seed_stream(cfg_.seed, fnv1a("mock-detector-patch-projection")));
      patch_proj_.resize(std::size_t(cfg_.token_dim) * c);
      for (auto& x : patch_proj_) x = rng.gaussian(0.0, 0.5);
    }

    EntityDetectionSet<T> out;
    out.tokens = Tensor<T>::zeros({n, cfg_.token_dim});
    Rng rng(seed_stream(cfg_.seed, mix64(0x5eed0000ull + std::uint64_t(fm.image_id))));
    for (int i = 0; i < n; ++i) {
      const Instance& inst = all[std::size_t(i)];
      if (inst.class_label < 0 || inst.class_label >= cfg_.num_classes)
        throw DomainError("scene instance class out of range");
      Box b = jitter_box(inst.box, rng);
      out.boxes.push_back(b);
      out.class_labels.push_back(inst.class_label);
      out.confidences.push_back(rng.uniform(cfg_.confidence_floor, 1.0));
      out.class_scores.push_back(smoothed_one_hot(inst.class_label));
      write_token(out.tokens, i, b, inst.class_label, fm);
    }
    return out;
  }

 private:
  Box jitter_box(const Box& b, Rng& rng) const {
    if (cfg_.jitter_sigma == 0.0) return b;
    Box j;
    j.x1 = std::clamp(b.x1 + rng.truncated_gaussian(0.0, cfg_.jitter_sigma), 0.0, 1.0);
    j.y1 = std::clamp(b.y1 + rng.truncated_gaussian(0.0, cfg_.jitter_sigma), 0.0, 1.0);
    j.x2 = std::clamp(b.x2 + rng.truncated_gaussian(0.0, cfg_.jitter_sigma), 0.0, 1.0);
    j.y2 = std::clamp(b.y2 + rng.truncated_gaussian(0.0, cfg_.jitter_sigma), 0.0, 1.0);
    // keep the box non-degenerate; fall back to the clean coordinate pair
    if (j.x2 - j.x1 < 1e-3) { j.x1 = b.x1; j.x2 = b.x2; }
    if (j.y2 - j.y1 < 1e-3) { j.y1 = b.y1; j.y2 = b.y2; }
    return j;
  }

  std::vector<double> smoothed_one_hot(int label) const {
    const int nc = cfg_.num_classes;
    std::vector<double> row(nc, nc > 1 ? 0.1 / double(nc - 1) : 0.0);
    row[label] = nc > 1 ? 0.9 : 1.0;
    return row;
  }

  void write_token(Tensor<T>& tokens, int row, const Box& b, int label,
                   const FeatureMap<T>& fm) const {
    const int d = cfg_.token_dim;
    const double geom[8] = {(b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0, b.x2 - b.x1,
                            b.y2 - b.y1,         b.x1,               b.y1,
                            b.x2,                b.y2};
    std::vector<double> tok(d, 0.0);
    for (int k = 0; k < d; ++k)
      for (int g = 0; g < 8; ++g) tok[k] += box_proj_[std::size_t(k) * 8 + g] * geom[g];
    if (cfg_.token_mode == TokenMode::full) {
      for (int k = 0; k < d; ++k)
        tok[k] += class_embed_[std::size_t(k) * cfg_.num_classes + label];
      const int h = fm.grid.shape[0], w = fm.grid.shape[1], c = fm.grid.shape[2];
      const auto mask = cells_in_box(b, h, w);
      std::vector<double> patch(c, 0.0);
      int count = 0;
      for (int cell = 0; cell < h * w; ++cell) {
        if (!mask[std::size_t(cell)]) continue;
        ++count;
        for (int ch = 0; ch < c; ++ch) patch[ch] += double(fm.grid.at(cell / w, cell % w, ch));
      }
      if (count > 0)
        for (int k = 0; k < d; ++k) {
          double acc = 0.0;
          for (int ch = 0; ch < c; ++ch) acc += patch_proj_[std::size_t(k) * c + ch] * patch[ch];
          tok[k] += acc / double(count);
        }
    }
    for (int k = 0; k < d; ++k) tokens.at(row, k) = T(tok[k]);
  }

  MockDetectorConfig cfg_;
  std::map<int, std::vector<Instance>> scenes_;
  std::vector<double> box_proj_, class_embed_;
  mutable std::vector<double> patch_proj_;
};

}  // namespace hoikit
