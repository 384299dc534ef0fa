#pragma once

#include <memory>
#include <vector>

#include "hoikit/alignment.hpp"
#include "hoikit/annotations.hpp"
#include "hoikit/config.hpp"
#include "hoikit/core/nn.hpp"
#include "hoikit/detection.hpp"
#include "hoikit/reasoning.hpp"
#include "hoikit/relation_encoder.hpp"
#include "hoikit/text_knowledge.hpp"

namespace hoikit {

// The full interaction model over one image:
//   stage 1  re-mine pair evidence from the feature grid and fuse it with
//            the detector tokens into pair representations
//   stage 2  align both visual streams with the frozen text encoding
//   stage 3  reason over the pair set and score verbs
// Ablation switches control which pieces exist (re-mining) or which loss
// subgraphs get built (alignment families).
template <class T>
class HoiModel {
 public:
  HoiModel(const RunConfig& cfg, int grid_channels, int num_verbs)
      : cfg_(cfg), num_verbs_(num_verbs), store_(cfg.seed) {
    cfg.validate();
    global_ctx_ = std::make_unique<GlobalContextHead<T>>(store_, grid_channels, cfg.token_dim);
    if (!cfg.no_remine) {
      RelationEncoderConfig rc;
      rc.layers = cfg.encoder_layers;
      rc.token_dim = cfg.token_dim;
      rc.pair_dim = cfg.pair_dim;
      rc.pos_max_h = cfg.pos_max;
      rc.pos_max_w = cfg.pos_max;
      rc.learned_pos = cfg.learned_pos;
      remine_ = std::make_unique<RelationEncoder<T>>(store_, rc, grid_channels);
    }
    fuser_ = std::make_unique<PairFuser<T>>(store_, cfg.token_dim, cfg.pair_dim, !cfg.no_remine);
    reasoner_ = std::make_unique<InteractionReasoner<T>>(store_, cfg.pair_dim, cfg.hidden_dim,
                                                         num_verbs, cfg.reasoner_layers);
    AlignerConfig ac;
    ac.cue_dim = cfg.token_dim;
    ac.pair_dim = cfg.pair_dim;
    ac.attn_dim = cfg.hidden_dim;
    ac.self_layers = cfg.align_self_layers;
    ac.cross_layers = cfg.align_cross_layers;
    ac.attended_input = cfg.align_input == "attended";
    ac.cue_branch = !cfg.no_remine;
    aligner_ = std::make_unique<CrossModalAligner<T>>(store_, ac);
  }

  struct VisualForward {
    std::vector<HOPair> pairs;
    Tensor<T> pair_rows;  // [Np x pair_dim]
    Tensor<T> cues;       // [Np x token_dim]; undefined without re-mining
  };

  VisualForward forward_visual(const FeatureMap<T>& fm, const EntityDetectionSet<T>& det) const {
    fm.validate();
    VisualForward out;
    out.pairs = generate_pairs(det.class_labels);
    if (out.pairs.empty()) return out;

    Tensor<T> g = global_ctx_->summarize(fm.grid);
    Tensor<T> encoded;
    if (remine_) encoded = remine_->encode(fm.grid);

    std::vector<Tensor<T>> rows, cue_rows;
    rows.reserve(out.pairs.size());
    for (const auto& pr : out.pairs) {
      Tensor<T> tok_h = token_row(det.tokens, pr.human_idx);
      Tensor<T> tok_o = token_row(det.tokens, pr.object_idx);
      Tensor<T> cue;
      if (remine_) {
        cue = remine_->masked_pool(encoded, det.boxes[std::size_t(pr.human_idx)],
                                   det.boxes[std::size_t(pr.object_idx)]);
        cue_rows.push_back(cue);
      }
      rows.push_back(fuser_->fuse(g, tok_h, tok_o, cue));
    }
    out.pair_rows = stack_rows(rows);
    if (remine_) out.cues = stack_rows(cue_rows);
    return out;
  }

  struct ImageLosses {
    LossComponents<T> parts;
    int num_pairs = 0;
    int matched = 0;
  };

  // Losses for one image. The text encoding is computed upstream (once,
  // frozen); annotations drive both the verb targets and the alignment rows.
  ImageLosses image_losses(const FeatureMap<T>& fm, const EntityDetectionSet<T>& det,
                           const std::vector<TripletAnnotation>& annotations,
                           const TextEncoding<T>& text) const {
    ImageLosses out;
    out.parts.hoi = Tensor<T>::scalar(T(0));
    out.parts.sentence_out = Tensor<T>::scalar(T(0));
    out.parts.word_out = Tensor<T>::scalar(T(0));
    out.parts.sentence_cue = Tensor<T>::scalar(T(0));
    out.parts.word_cue = Tensor<T>::scalar(T(0));

    VisualForward vis = forward_visual(fm, det);
    out.num_pairs = int(vis.pairs.size());
    if (vis.pairs.empty()) return out;

    Tensor<T> reasoned = reasoner_->reason(vis.pair_rows);
    const auto matches = match_for_pairs(vis.pairs, det, annotations);
    out.matched = int(matches.size());

    Tensor<T> targets = build_verb_targets<T>(out.num_pairs, num_verbs_, matches, annotations);
    out.parts.hoi = interaction_loss(reasoner_->classify(reasoned), targets, T(cfg_.focal_gamma));

    const bool word_on = !cfg_.no_alignment && !cfg_.no_word;
    const bool sent_on = !cfg_.no_alignment && !cfg_.no_sentence;
    const bool cue_on = !cfg_.no_alignment && !cfg_.no_cue_transfer && !cfg_.no_remine;
    const bool out_on = !cfg_.no_alignment && !cfg_.no_out_transfer;
    if ((word_on || sent_on) && (cue_on || out_on)) {
      AlignmentLosses<T> al =
          aligner_->losses(vis.cues, reasoned, matches, text, word_on, sent_on, cue_on, out_on);
      out.parts.sentence_out = al.sentence_out;
      out.parts.word_out = al.word_out;
      out.parts.sentence_cue = al.sentence_cue;
      out.parts.word_cue = al.word_cue;
    }
    return out;
  }

  // Inference: verb logits for every candidate pair.
  struct Prediction {
    std::vector<HOPair> pairs;
    Tensor<T> logits;  // [Np x num_verbs]
  };

  Prediction predict(const FeatureMap<T>& fm, const EntityDetectionSet<T>& det) const {
    Prediction out;
    VisualForward vis = forward_visual(fm, det);
    out.pairs = std::move(vis.pairs);
    if (out.pairs.empty()) return out;
    out.logits = reasoner_->classify(reasoner_->reason(vis.pair_rows));
    return out;
  }

  std::vector<CandidateMatch> match_for_pairs(const std::vector<HOPair>& pairs,
                                              const EntityDetectionSet<T>& det,
                                              const std::vector<TripletAnnotation>& anns) const {
    std::vector<Box> ch, co;
    ch.reserve(pairs.size());
    co.reserve(pairs.size());
    for (const auto& p : pairs) {
      ch.push_back(det.boxes[std::size_t(p.human_idx)]);
      co.push_back(det.boxes[std::size_t(p.object_idx)]);
    }
    return match_candidates(ch, co, anns, cfg_.iou_threshold);
  }

  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const RunConfig& config() const { return cfg_; }
  int num_verbs() const { return num_verbs_; }
  const CrossModalAligner<T>& aligner() const { return *aligner_; }
  const InteractionReasoner<T>& reasoner() const { return *reasoner_; }
  bool has_remine() const { return remine_ != nullptr; }
  const RelationEncoder<T>& remine() const {
    if (!remine_) throw ConfigError("re-mining stage is disabled");
    return *remine_;
  }
  const GlobalContextHead<T>& global_ctx() const { return *global_ctx_; }

 private:
  static Tensor<T> token_row(const Tensor<T>& tokens, int row) {
    const int d = tokens.shape[1];
    Tensor<T> out = Tensor<T>::zeros({d});
    for (int i = 0; i < d; ++i) out.at(i) = tokens.at(row, i);
    return out;
  }

  RunConfig cfg_;
  int num_verbs_;
  ParamStore<T> store_;
  std::unique_ptr<GlobalContextHead<T>> global_ctx_;
  std::unique_ptr<RelationEncoder<T>> remine_;
  std::unique_ptr<PairFuser<T>> fuser_;
  std::unique_ptr<InteractionReasoner<T>> reasoner_;
  std::unique_ptr<CrossModalAligner<T>> aligner_;
};

}  // namespace hoikit
