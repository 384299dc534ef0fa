#pragma once

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "hoikit/config.hpp"
#include "hoikit/dataset.hpp"
#include "hoikit/detection.hpp"
#include "hoikit/errors.hpp"
#include "hoikit/model.hpp"
#include "hoikit/text_knowledge.hpp"

namespace hoikit {

struct StepMetrics {
  int step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_hoi = 0.0;
  double loss_sentence_out = 0.0;
  double loss_word_out = 0.0;
  double loss_sentence_cue = 0.0;
  double loss_word_cue = 0.0;
};

// One JSONL line per step, fields in a fixed order, doubles printed with
// %.17g so a re-run can be compared byte for byte.
inline std::string format_metrics_line(const StepMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\"step\":%d,\"lr\":%.17g,\"loss_total\":%.17g,\"loss_hoi\":%.17g,"
                "\"loss_sentence_out\":%.17g,\"loss_word_out\":%.17g,"
                "\"loss_sentence_cue\":%.17g,\"loss_word_cue\":%.17g}",
                m.step, m.lr, m.loss_total, m.loss_hoi, m.loss_sentence_out, m.loss_word_out,
                m.loss_sentence_cue, m.loss_word_cue);
  return std::string(buf);
}

struct TrainOptions {
  int steps_override = 0;             // > 0 caps the run regardless of epochs
  std::ostream* metrics_out = nullptr;  // optional JSONL sink
};

struct TrainResult {
  std::vector<StepMetrics> log;
  int steps_run = 0;
};

// Frozen per-image inputs, computed once: the detector and the text encoder
// never receive gradient, so their outputs are constants across the run.
template <class T>
struct PreparedImage {
  const FeatureMap<T>* features = nullptr;
  const std::vector<TripletAnnotation>* annotations = nullptr;
  EntityDetectionSet<T> detections;
  TextEncoding<T> text;
};

template <class T>
inline std::vector<PreparedImage<T>> prepare_images(const SyntheticDataset<T>& ds,
                                                    Detector<T>& detector,
                                                    TextEncoder<T>& encoder) {
  std::vector<PreparedImage<T>> out;
  for (const auto& scene : ds.scenes) {
    PreparedImage<T> p;
    p.features = &scene.features;
    p.annotations = &scene.annotations;
    p.detections = detector.detect(scene.features);
    p.text = encode_text(serialize_annotations(scene.annotations, ds.vocab), ds.vocab, encoder);
    out.push_back(std::move(p));
  }
  return out;
}

// Runs the optimization loop. Each step works a mini-batch through the three
// phases in order: the visual pathway, then the language-side losses against
// the frozen text features, then the interaction classifier and the weighted
// objective, followed by one optimizer update under a cosine-decayed rate.
template <class T>
inline TrainResult train_model(HoiModel<T>& model, const std::vector<PreparedImage<T>>& images,
                               const TrainOptions& opts = {}) {
  const RunConfig& cfg = model.config();
  if (images.empty()) throw ConfigError("training needs at least one image");
  const int n = int(images.size());
  const int batch = std::min(cfg.batch_size, n);
  const int steps_per_epoch = (n + batch - 1) / batch;
  const int total_steps = opts.steps_override > 0 ? opts.steps_override
                                                  : cfg.epochs * steps_per_epoch;
  if (total_steps < 1) throw ConfigError("training schedule has zero steps");

  Adam<T> adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  TrainResult result;
  int step = 0;
  for (int epoch = 0;; ++epoch) {
    // per-epoch order is a pure function of (seed, epoch)
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(seed_stream(cfg.seed, mix64(0xba7c40000ull + std::uint64_t(epoch))));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[std::size_t(i)], order[std::size_t(shuffle_rng.uniform_int(0, i))]);

    for (int start = 0; start < n; start += batch) {
      if (step >= total_steps) return result;
      const int count = std::min(batch, n - start);

      model.params().zero_grads();
      LossComponents<T> sum;
      for (int k = 0; k < count; ++k) {
        const PreparedImage<T>& img = images[std::size_t(order[std::size_t(start + k)])];
        auto il = model.image_losses(*img.features, img.detections, *img.annotations, img.text);
        if (k == 0) {
          sum = il.parts;
        } else {
          sum.hoi = add(sum.hoi, il.parts.hoi);
          sum.sentence_out = add(sum.sentence_out, il.parts.sentence_out);
          sum.word_out = add(sum.word_out, il.parts.word_out);
          sum.sentence_cue = add(sum.sentence_cue, il.parts.sentence_cue);
          sum.word_cue = add(sum.word_cue, il.parts.word_cue);
        }
      }
      const T inv = T(1) / T(count);
      LossComponents<T> mean;
      mean.hoi = scale(sum.hoi, inv);
      mean.sentence_out = scale(sum.sentence_out, inv);
      mean.word_out = scale(sum.word_out, inv);
      mean.sentence_cue = scale(sum.sentence_cue, inv);
      mean.word_cue = scale(sum.word_cue, inv);
      Tensor<T> total = total_loss(mean, cfg.weights);

      StepMetrics m;
      m.step = step + 1;
      m.lr = adam.rate_at(step, total_steps, cfg.cosine_decay);
      m.loss_total = double(total.value());
      m.loss_hoi = double(mean.hoi.value());
      m.loss_sentence_out = double(mean.sentence_out.value());
      m.loss_word_out = double(mean.word_out.value());
      m.loss_sentence_cue = double(mean.sentence_cue.value());
      m.loss_word_cue = double(mean.word_cue.value());
      if (!std::isfinite(m.loss_total))
        throw EvalError("training diverged: non-finite loss at step " + std::to_string(m.step));

      backward(total);
      adam.step(model.params(), m.lr);

      result.log.push_back(m);
      result.steps_run = m.step;
      if (opts.metrics_out) (*opts.metrics_out) << format_metrics_line(m) << "\n";
      ++step;
    }
  }
}

// Inference over a prepared dataset: every candidate pair becomes one
// detection record per verb, scored by composing the verb probability with
// both entity confidences.
template <class T>
inline std::vector<DetRecord> run_inference(const HoiModel<T>& model,
                                            const std::vector<PreparedImage<T>>& images) {
  NoGradGuard guard;
  std::vector<DetRecord> out;
  for (const auto& img : images) {
    const auto pred = model.predict(*img.features, img.detections);
    for (std::size_t p = 0; p < pred.pairs.size(); ++p) {
      const HOPair& pair = pred.pairs[p];
      for (int v = 0; v < model.num_verbs(); ++v) {
        DetRecord d;
        d.image_id = img.features->image_id;
        d.human_box = img.detections.boxes[std::size_t(pair.human_idx)];
        d.object_box = img.detections.boxes[std::size_t(pair.object_idx)];
        d.object_class = img.detections.class_labels[std::size_t(pair.object_idx)];
        d.verb = v;
        const double prob = double(stable_sigmoid(double(pred.logits.at(int(p), v))));
        d.score = compose_score(prob, img.detections.confidences[std::size_t(pair.human_idx)],
                                img.detections.confidences[std::size_t(pair.object_idx)],
                                model.config().score_exponent);
        out.push_back(std::move(d));
      }
    }
  }
  return out;
}

}  // namespace hoikit
