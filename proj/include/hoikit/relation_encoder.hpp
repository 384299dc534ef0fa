#pragma once

#include <string>
#include <vector>

#include "hoikit/core/nn.hpp"
#include "hoikit/core/ops.hpp"
#include "hoikit/detection.hpp"
#include "hoikit/errors.hpp"
#include "hoikit/geometry.hpp"

namespace hoikit {

struct RelationEncoderConfig {
  int layers = 2;
  int token_dim = 32;       // output width of the pooled heads (Dv)
  int pair_dim = 64;        // fused pair representation width (Dl)
  int pos_max_h = 32;       // learned positional tables cover grids up to this
  int pos_max_w = 32;
  bool learned_pos = true;  // off: no positional term is added
};

// Scene summary head: average pool over the raw (pre-encoder) grid followed
// by a projection to the token width. Lives outside RelationEncoder because
// it survives the re-mining ablation.
template <class T>
class GlobalContextHead {
 public:
  GlobalContextHead(ParamStore<T>& store, int grid_channels, int token_dim)
      : fc_(store, "global_ctx.fc", grid_channels, token_dim) {}

  Tensor<T> summarize(const Tensor<T>& raw_grid) const {
    if (raw_grid.ndim() != 3) throw ShapeError("global context: grid must be [h, w, c]");
    return fc_(gap(raw_grid));
  }

 private:
  LinearMap<T> fc_;
};

// Re-mines interaction evidence from the backbone grid: a small transformer
// encoder contextualizes the cells, then a masked pool reads out the
// channels under a candidate pair's boxes and projects them to a cue.
//
// Width notes: encoder layers run at the grid channel width; the pooled
// head projects to token_dim so cues line up with detector tokens.
template <class T>
class RelationEncoder {
 public:
  RelationEncoder(ParamStore<T>& store, const RelationEncoderConfig& cfg, int grid_channels)
      : cfg_(cfg), channels_(grid_channels) {
    if (cfg.layers < 0) throw ConfigError("relation encoder layer count must be >= 0");
    if (grid_channels < 1) throw ConfigError("relation encoder needs at least one channel");
    if (cfg.learned_pos && cfg.layers > 0) {
      pos_row_ = store.create("rel_enc.pos_row", {cfg.pos_max_h, grid_channels}, grid_channels);
      pos_col_ = store.create("rel_enc.pos_col", {cfg.pos_max_w, grid_channels}, grid_channels);
    }
    for (int l = 0; l < cfg.layers; ++l)
      layers_.emplace_back(store, "rel_enc.layer" + std::to_string(l), grid_channels,
                           grid_channels, 2 * grid_channels);
    fc_mask_ = LinearMap<T>(store, "rel_enc.fc_mask", grid_channels, cfg.token_dim);
  }

  // Contextualizes the grid; shape-preserving. With zero layers the input is
  // returned untouched (ablation bypass), positional term included.
  Tensor<T> encode(const Tensor<T>& grid) const {
    if (grid.ndim() != 3) throw ShapeError("encode: grid must be [h, w, c]");
    if (grid.shape[2] != channels_) throw ShapeError("encode: channel count differs from config");
    if (layers_.empty()) return grid;
    const int h = grid.shape[0], w = grid.shape[1], c = grid.shape[2];
    Tensor<T> x = reshape(grid, {h * w, c});
    if (cfg_.learned_pos) {
      if (h > cfg_.pos_max_h || w > cfg_.pos_max_w)
        throw ConfigError("grid exceeds positional table size; raise pos_max");
      std::vector<int> ri(std::size_t(h) * w), ci(std::size_t(h) * w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          ri[std::size_t(i) * w + j] = i;
          ci[std::size_t(i) * w + j] = j;
        }
      x = add(x, add(select_rows(pos_row_, ri), select_rows(pos_col_, ci)));
    }
    for (const auto& layer : layers_) x = layer.forward(x);
    return reshape(x, {h, w, c});
  }

  // Pools the encoded grid under the union of the pair's boxes (cells whose
  // centers fall inside either box) and projects to a cue vector. Cells
  // outside both boxes contribute nothing, in value or in gradient.
  Tensor<T> masked_pool(const Tensor<T>& encoded, const Box& human, const Box& object) const {
    if (encoded.ndim() != 3) throw ShapeError("masked_pool: grid must be [h, w, c]");
    if (!human.valid() || !object.valid())
      throw DomainError("masked_pool: boxes must be valid");
    const int h = encoded.shape[0], w = encoded.shape[1];
    const auto mask = cells_in_union(human, object, h, w);
    bool any = false;
    for (auto m : mask) any = any || m != 0;
    if (!any) throw DegenerateRegionError("pair union covers no cell center");
    return fc_mask_(masked_mean_cells(encoded, mask));
  }

  int token_dim() const { return cfg_.token_dim; }

 private:
  RelationEncoderConfig cfg_;
  int channels_;
  Tensor<T> pos_row_, pos_col_;
  std::vector<EncoderLayer<T>> layers_;
  LinearMap<T> fc_mask_;
};

// Joins global context, the two detector tokens, and (when present) the
// re-mined cue into one pair representation of width pair_dim.
template <class T>
class PairFuser {
 public:
  PairFuser(ParamStore<T>& store, int token_dim, int pair_dim, bool with_cue)
      : with_cue_(with_cue),
        fc_(store, "fuse.fc", with_cue ? 4 * token_dim : 3 * token_dim, pair_dim) {}

  Tensor<T> fuse(const Tensor<T>& global_ctx, const Tensor<T>& token_h, const Tensor<T>& token_o,
                 const Tensor<T>& cue) const {
    std::vector<Tensor<T>> parts{global_ctx, token_h, token_o};
    if (with_cue_) {
      if (!cue.defined()) throw ShapeError("fuse: cue vector missing");
      parts.push_back(cue);
    }
    return fc_(concat_vec(parts));
  }

  bool with_cue() const { return with_cue_; }

 private:
  bool with_cue_;
  LinearMap<T> fc_;
};

}  // namespace hoikit
