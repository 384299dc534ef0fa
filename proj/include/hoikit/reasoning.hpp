#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hoikit/core/nn.hpp"
#include "hoikit/core/ops.hpp"
#include "hoikit/errors.hpp"

namespace hoikit {

// Self-attention over the pair set followed by the verb classifier: every
// pair representation is refined against the other pairs in the image, then
// scored per verb with independent logits.
template <class T>
class InteractionReasoner {
 public:
  InteractionReasoner(ParamStore<T>& store, int pair_dim, int attn_dim, int num_verbs,
                      int layers) {
    if (layers < 0) throw ConfigError("reasoner layer count must be >= 0");
    if (num_verbs < 1) throw ConfigError("reasoner needs at least one verb");
    for (int l = 0; l < layers; ++l)
      layers_.emplace_back(store, "reason.layer" + std::to_string(l), pair_dim, attn_dim,
                           2 * pair_dim);
    classifier_ = Ffn<T>(store, "reason.classifier", pair_dim, pair_dim, num_verbs);
  }

  // [Np x pair_dim] -> [Np x pair_dim]
  Tensor<T> reason(const Tensor<T>& pair_rows) const {
    Tensor<T> x = pair_rows;
    for (const auto& layer : layers_) x = layer.forward(x);
    return x;
  }

  // [Np x pair_dim] -> [Np x num_verbs] raw logits
  Tensor<T> classify(const Tensor<T>& reasoned) const { return classifier_(reasoned); }

 private:
  std::vector<EncoderLayer<T>> layers_;
  Ffn<T> classifier_;
};

// Focal objective over every (pair, verb) cell. p is the predicted
// probability of the cell's true state: sigmoid(logit) where the target is
// positive, its complement otherwise. Mean over cells; gamma = 0 reduces to
// plain binary cross-entropy.
template <class T>
inline Tensor<T> interaction_loss(const Tensor<T>& logits, const Tensor<T>& targets, T gamma) {
  check_same_shape(logits, targets, "interaction_loss");
  if (logits.ndim() != 2) throw ShapeError("interaction_loss: logits must be [pairs x verbs]");
  for (T t : *targets.data)
    if (t != T(0) && t != T(1)) throw DomainError("interaction targets must be 0/1");
  Tensor<T> p = sigmoid_op(logits);
  Tensor<T> ones = Tensor<T>::from(logits.shape, std::vector<T>(std::size_t(logits.numel()), T(1)));
  // p_true = t*p + (1-t)*(1-p); strictly inside (0,1) because sigmoid is
  Tensor<T> p_true = add(mul(targets, p), mul(sub(ones, targets), sub(ones, p)));
  return mean_all(focal_elem(p_true, gamma));
}

struct LossWeights {
  double hoi = 2.0;
  double sentence_out = 1.0;  // transfer into the reasoning stream
  double word_out = 1.0;
  double sentence_cue = 0.1;  // transfer into the re-mined cues
  double word_cue = 0.1;

  void validate() const {
    for (double w : {hoi, sentence_out, word_out, sentence_cue, word_cue})
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
  }
};

template <class T>
struct LossComponents {
  Tensor<T> hoi, sentence_out, word_out, sentence_cue, word_cue;
};

// Weighted sum of the five objective terms.
template <class T>
inline Tensor<T> total_loss(const LossComponents<T>& c, const LossWeights& w) {
  Tensor<T> total = scale(c.hoi, T(w.hoi));
  total = add(total, scale(c.sentence_out, T(w.sentence_out)));
  total = add(total, scale(c.word_out, T(w.word_out)));
  total = add(total, scale(c.sentence_cue, T(w.sentence_cue)));
  total = add(total, scale(c.word_cue, T(w.word_cue)));
  return total;
}

// Final detection score for one (pair, verb): verb probability modulated by
// the detector's confidence in both entities. exponent tempers how hard the
// confidence prior gates the verb score; scores never exceed the verb
// probability while confidences stay in (0, 1].
inline double compose_score(double verb_prob, double conf_human, double conf_object,
                            double exponent = 1.0) {
  if (!(verb_prob >= 0.0) || verb_prob > 1.0) throw DomainError("verb probability out of [0, 1]");
  if (!(conf_human > 0.0) || conf_human > 1.0 || !(conf_object > 0.0) || conf_object > 1.0)
    throw DomainError("confidences must lie in (0, 1]");
  if (exponent < 0.0) throw DomainError("score exponent must be >= 0");
  return std::pow(conf_human * conf_object, exponent) * verb_prob;
}

}  // namespace hoikit
