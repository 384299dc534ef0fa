#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "hoikit/annotations.hpp"
#include "hoikit/core/nn.hpp"
#include "hoikit/core/ops.hpp"
#include "hoikit/errors.hpp"
#include "hoikit/geometry.hpp"
#include "hoikit/text_knowledge.hpp"

namespace hoikit {

struct CandidateMatch {
  int candidate = 0;   // index into the pair list
  int annotation = 0;  // index into the image's annotations
};

// One-to-one greedy assignment of candidate pairs to annotations. A proposal
// requires both boxes to clear the IoU threshold; proposals are taken in
// descending min-IoU order, ties by lower candidate index then lower
// annotation index. Occluded annotations cannot be localized and are skipped.
// The result is sorted by candidate index so downstream row order is stable.
inline std::vector<CandidateMatch> match_candidates(const std::vector<Box>& cand_human,
                                                    const std::vector<Box>& cand_object,
                                                    const std::vector<TripletAnnotation>& anns,
                                                    double iou_threshold) {
  if (cand_human.size() != cand_object.size())
    throw ShapeError("match_candidates: candidate box lists differ in length");
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
    throw DomainError("match_candidates: threshold must lie in (0, 1]");
  struct Proposal {
    double score;
    int cand, ann;
  };
  std::vector<Proposal> props;
  for (int c = 0; c < int(cand_human.size()); ++c) {
    for (int a = 0; a < int(anns.size()); ++a) {
      if (anns[std::size_t(a)].occluded_object) continue;
      const double s = std::min(iou(cand_human[std::size_t(c)], anns[std::size_t(a)].human_box),
                                iou(cand_object[std::size_t(c)], anns[std::size_t(a)].object_box));
      if (s >= iou_threshold) props.push_back({s, c, a});
    }
  }
  std::sort(props.begin(), props.end(), [](const Proposal& x, const Proposal& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.cand != y.cand) return x.cand < y.cand;
    return x.ann < y.ann;
  });
  std::vector<char> used_c(cand_human.size(), 0), used_a(anns.size(), 0);
  std::vector<CandidateMatch> out;
  for (const auto& p : props) {
    if (used_c[std::size_t(p.cand)] || used_a[std::size_t(p.ann)]) continue;
    used_c[std::size_t(p.cand)] = 1;
    used_a[std::size_t(p.ann)] = 1;
    out.push_back({p.cand, p.ann});
  }
  std::sort(out.begin(), out.end(),
            [](const CandidateMatch& x, const CandidateMatch& y) { return x.candidate < y.candidate; });
  return out;
}

// Multi-hot verb targets for every candidate row; unmatched rows stay all
// negative. Constant tensor (no gradient).
template <class T>
inline Tensor<T> build_verb_targets(int num_candidates, int num_verbs,
                                    const std::vector<CandidateMatch>& matches,
                                    const std::vector<TripletAnnotation>& anns) {
  Tensor<T> t = Tensor<T>::zeros({num_candidates, num_verbs});
  for (const auto& m : matches) {
    for (int v : anns[std::size_t(m.annotation)].verbs) {
      if (v < 0 || v >= num_verbs) throw DomainError("verb target out of range");
      t.at(m.candidate, v) = T(1);
    }
  }
  return t;
}

// Sentence targets for the matched rows: the summary row of the matched
// annotation's clause, averaged when the annotation has several verbs.
template <class T>
inline Tensor<T> build_sentence_targets(const TextEncoding<T>& text,
                                        const std::vector<CandidateMatch>& matches) {
  const int dim = text.cls.defined() ? text.cls.shape[1] : 0;
  Tensor<T> out = Tensor<T>::zeros({int(matches.size()), dim});
  for (int k = 0; k < int(matches.size()); ++k) {
    const int ann = matches[std::size_t(k)].annotation;
    int count = 0;
    for (int s = 0; s < text.num_subs(); ++s) {
      if (text.sub_annotation_index[std::size_t(s)] != ann) continue;
      ++count;
      for (int d = 0; d < dim; ++d) out.at(k, d) += text.cls.at(s, d);
    }
    if (count == 0) throw EvalError("matched annotation has no serialized clause");
    for (int d = 0; d < dim; ++d) out.at(k, d) /= T(count);
  }
  return out;
}

struct AlignerConfig {
  int cue_dim = 32;    // width of re-mined cues entering the cue branch
  int pair_dim = 64;   // width everything is aligned at
  int attn_dim = 64;   // q/k projection width in both attention kinds
  int self_layers = 2;
  int cross_layers = 1;
  bool attended_input = true;  // feed self-attended rows (not raw) to cross-attention
  bool cue_branch = true;      // off when the re-mining stage is ablated away
};

template <class T>
struct AlignmentLosses {
  Tensor<T> sentence_out, word_out;  // knowledge transfer into the reasoning stream
  Tensor<T> sentence_cue, word_cue;  // knowledge transfer into the re-mined cues
  int matched = 0;
};

// Aligns the two visual streams with the frozen text encoding. The cue
// stream enters through a projection so both branches run at pair_dim; each
// branch gets its own self-attention stack, cross-attention onto the word
// rows, and sentence head.
template <class T>
class CrossModalAligner {
 public:
  CrossModalAligner(ParamStore<T>& store, const AlignerConfig& cfg) : cfg_(cfg) {
    if (cfg.self_layers < 0 || cfg.cross_layers < 1)
      throw ConfigError("aligner needs self_layers >= 0 and cross_layers >= 1");
    if (cfg.cue_branch) {
      cue_proj_ = LinearMap<T>(store, "align.cue_proj", cfg.cue_dim, cfg.pair_dim);
      for (int l = 0; l < cfg.self_layers; ++l)
        cue_self_.emplace_back(store, "align.cue_self" + std::to_string(l), cfg.pair_dim,
                               cfg.attn_dim, 2 * cfg.pair_dim);
      for (int l = 0; l < cfg.cross_layers; ++l)
        cue_cross_.emplace_back(store, "align.cue_cross" + std::to_string(l), cfg.pair_dim,
                                cfg.attn_dim);
      cue_sent_head_ = Ffn<T>(store, "align.cue_sent_head", cfg.pair_dim, cfg.pair_dim,
                              cfg.pair_dim);
    }
    for (int l = 0; l < cfg.self_layers; ++l)
      out_self_.emplace_back(store, "align.out_self" + std::to_string(l), cfg.pair_dim,
                             cfg.attn_dim, 2 * cfg.pair_dim);
    for (int l = 0; l < cfg.cross_layers; ++l)
      out_cross_.emplace_back(store, "align.out_cross" + std::to_string(l), cfg.pair_dim,
                              cfg.attn_dim);
    out_sent_head_ = Ffn<T>(store, "align.out_sent_head", cfg.pair_dim, cfg.pair_dim,
                            cfg.pair_dim);
  }

  Tensor<T> project_cues(const Tensor<T>& cues) const {
    if (!cfg_.cue_branch) throw ConfigError("cue branch is disabled");
    return cue_proj_(cues);
  }

  Tensor<T> self_attend_cue(const Tensor<T>& rows) const { return run_stack(cue_self_, rows); }
  Tensor<T> self_attend_out(const Tensor<T>& rows) const { return run_stack(out_self_, rows); }

  Tensor<T> cross_attend_cue(const Tensor<T>& queries, const Tensor<T>& words) const {
    return run_cross(cue_cross_, queries, words);
  }
  Tensor<T> cross_attend_out(const Tensor<T>& queries, const Tensor<T>& words) const {
    return run_cross(out_cross_, queries, words);
  }

  Tensor<T> cue_sentence_head(const Tensor<T>& rows) const { return cue_sent_head_(rows); }
  Tensor<T> out_sentence_head(const Tensor<T>& rows) const { return out_sent_head_(rows); }

  // Full alignment objective for one image. cues may be undefined when the
  // cue branch is off. Flags selectively disable loss families; a disabled
  // family's subgraph is never built, so its loss is exactly zero and no
  // gradient can reach parameters only it uses.
  AlignmentLosses<T> losses(const Tensor<T>& cues, const Tensor<T>& reasoned,
                            const std::vector<CandidateMatch>& matches,
                            const TextEncoding<T>& text, bool word_on, bool sentence_on,
                            bool cue_kt_on, bool out_kt_on) const {
    AlignmentLosses<T> out;
    out.matched = int(matches.size());
    out.sentence_out = Tensor<T>::scalar(T(0));
    out.word_out = Tensor<T>::scalar(T(0));
    out.sentence_cue = Tensor<T>::scalar(T(0));
    out.word_cue = Tensor<T>::scalar(T(0));
    if (matches.empty() || text.num_subs() == 0) return out;
    if (!word_on && !sentence_on) return out;
    if (!cue_kt_on && !out_kt_on) return out;

    std::vector<int> rows;
    rows.reserve(matches.size());
    for (const auto& m : matches) rows.push_back(m.candidate);
    const Tensor<T> cls_targets = build_sentence_targets(text, matches);

    if (out_kt_on) {
      Tensor<T> branch = cfg_.attended_input ? self_attend_out(reasoned) : reasoned;
      Tensor<T> matched = select_rows(branch, rows);
      if (word_on) out.word_out = l1_mean(matched, cross_attend_out(matched, text.words));
      if (sentence_on) out.sentence_out = l1_mean(cls_targets, out_sentence_head(matched));
    }
    if (cue_kt_on && cfg_.cue_branch) {
      if (!cues.defined()) throw ShapeError("aligner: cue matrix missing");
      Tensor<T> proj = project_cues(cues);
      Tensor<T> branch = cfg_.attended_input ? self_attend_cue(proj) : proj;
      Tensor<T> matched = select_rows(branch, rows);
      if (word_on) out.word_cue = l1_mean(matched, cross_attend_cue(matched, text.words));
      if (sentence_on) out.sentence_cue = l1_mean(cls_targets, cue_sentence_head(matched));
    }
    return out;
  }

  const AlignerConfig& config() const { return cfg_; }

 private:
  Tensor<T> run_stack(const std::vector<EncoderLayer<T>>& stack, const Tensor<T>& rows) const {
    Tensor<T> x = rows;
    for (const auto& layer : stack) x = layer.forward(x);
    return x;
  }

  Tensor<T> run_cross(const std::vector<CrossAttentionLayer<T>>& stack, const Tensor<T>& queries,
                      const Tensor<T>& words) const {
    if (words.ndim() != 2 || words.shape[0] < 1)
      throw ShapeError("cross attention needs at least one word row");
    Tensor<T> q = queries;
    for (const auto& layer : stack) q = layer.forward(q, words);
    return q;
  }

  AlignerConfig cfg_;
  LinearMap<T> cue_proj_;
  std::vector<EncoderLayer<T>> cue_self_, out_self_;
  std::vector<CrossAttentionLayer<T>> cue_cross_, out_cross_;
  Ffn<T> cue_sent_head_, out_sent_head_;
};

}  // namespace hoikit
