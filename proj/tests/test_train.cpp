#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hoikit/hoikit.hpp"

using namespace hoikit;

namespace {

struct TrainSetup {
  DatasetConfig dc;
  SyntheticDataset<double> ds;
  RunConfig cfg;
  std::unique_ptr<MockDetector<double>> det;
  std::unique_ptr<StubTextEncoder<double>> enc;
  std::vector<PreparedImage<double>> prepared;
};

TrainSetup make_setup(int num_images = 4) {
  TrainSetup s;
  s.dc.num_images = num_images;
  s.dc.num_verbs = 2;
  s.dc.num_objects = 2;
  s.dc.grid_h = 6;
  s.dc.grid_w = 6;
  s.dc.grid_c = 4;
  s.ds = generate_dataset<double>(s.dc);

  s.cfg = default_config();
  s.cfg.precision = "float64";
  s.cfg.token_dim = 8;
  s.cfg.pair_dim = 12;
  s.cfg.hidden_dim = 12;
  s.cfg.encoder_layers = 1;
  s.cfg.align_self_layers = 1;
  s.cfg.batch_size = 2;
  s.cfg.validate();

  MockDetectorConfig mdc;
  mdc.num_queries = s.cfg.num_queries;
  mdc.token_dim = s.cfg.token_dim;
  mdc.num_classes = s.dc.num_objects + 1;
  mdc.seed = s.cfg.seed;
  s.det = std::make_unique<MockDetector<double>>(mdc);
  for (const auto& sc : s.ds.scenes) s.det->register_scene(sc.features.image_id, sc.instances);
  s.enc = std::make_unique<StubTextEncoder<double>>(s.ds.vocab.size(), s.cfg.pair_dim,
                                                    s.cfg.max_text_length, s.cfg.seed);
  s.prepared = prepare_images(s.ds, *s.det, *s.enc);
  return s;
}

}  // namespace

TEST_CASE("two training runs with one seed log identical bytes") {
  auto s = make_setup();

  std::ostringstream log_a, log_b;
  TrainOptions opts;
  opts.steps_override = 6;

  HoiModel<double> first(s.cfg, s.dc.grid_c, s.dc.num_verbs);
  opts.metrics_out = &log_a;
  auto ra = train_model(first, s.prepared, opts);

  HoiModel<double> second(s.cfg, s.dc.grid_c, s.dc.num_verbs);
  opts.metrics_out = &log_b;
  auto rb = train_model(second, s.prepared, opts);

  REQUIRE(ra.steps_run == 6);
  REQUIRE(rb.steps_run == 6);
  REQUIRE_FALSE(log_a.str().empty());
  REQUIRE(log_a.str() == log_b.str());

  // one line per step, each a standalone json object with the fixed key set
  std::istringstream lines(log_a.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
    auto j = nlohmann::json::parse(line);
    REQUIRE(j.at("step") == count);
    REQUIRE(j.size() == 8);
  }
  REQUIRE(count == 6);

  // and the trained weights themselves agree
  for (const auto& name : first.params().names())
    REQUIRE((*first.params().get(name).data == *second.params().get(name).data));
}

TEST_CASE("logged totals equal the weighted component sum") {
  auto s = make_setup();
  HoiModel<double> model(s.cfg, s.dc.grid_c, s.dc.num_verbs);
  TrainOptions opts;
  opts.steps_override = 5;
  auto result = train_model(model, s.prepared, opts);
  REQUIRE(result.log.size() == 5);

  const LossWeights& w = s.cfg.weights;
  for (std::size_t i = 0; i < result.log.size(); ++i) {
    const StepMetrics& m = result.log[i];
    REQUIRE(m.step == int(i) + 1);
    const double recombined = w.hoi * m.loss_hoi + w.sentence_out * m.loss_sentence_out +
                              w.word_out * m.loss_word_out + w.sentence_cue * m.loss_sentence_cue +
                              w.word_cue * m.loss_word_cue;
    REQUIRE(m.loss_total == Catch::Approx(recombined).margin(1e-9));
    REQUIRE(m.loss_hoi > 0.0);
  }

  // cosine schedule: starts at the configured rate and never increases
  REQUIRE(result.log.front().lr == s.cfg.lr);
  for (std::size_t i = 1; i < result.log.size(); ++i)
    REQUIRE(result.log[i].lr <= result.log[i - 1].lr);
}

TEST_CASE("ablated loss branches leave their parameters untouched by training") {
  auto s = make_setup();
  RunConfig cfg = s.cfg;
  cfg.no_alignment = true;
  HoiModel<double> model(cfg, s.dc.grid_c, s.dc.num_verbs);

  std::vector<std::string> align_names;
  std::vector<std::vector<double>> align_before;
  for (const auto& name : model.params().names()) {
    if (name.find("align.") != 0) continue;
    align_names.push_back(name);
    align_before.push_back(*model.params().get(name).data);
  }
  REQUIRE_FALSE(align_names.empty());
  auto reason_before = *model.params().get("reason.classifier.l2.w").data;

  TrainOptions opts;
  opts.steps_override = 2;
  train_model(model, s.prepared, opts);

  for (std::size_t i = 0; i < align_names.size(); ++i)
    REQUIRE((*model.params().get(align_names[i]).data == align_before[i]));
  REQUIRE_FALSE((*model.params().get("reason.classifier.l2.w").data == reason_before));
}

TEST_CASE("the training schedule rejects degenerate setups") {
  auto s = make_setup();
  HoiModel<double> model(s.cfg, s.dc.grid_c, s.dc.num_verbs);

  std::vector<PreparedImage<double>> none;
  REQUIRE_THROWS_WITH(train_model(model, none), "config error: training needs at least one image");

  RunConfig zero = s.cfg;
  zero.epochs = 0;
  HoiModel<double> stalled(zero, s.dc.grid_c, s.dc.num_verbs);
  REQUIRE_THROWS_WITH(train_model(stalled, s.prepared),
                      "config error: training schedule has zero steps");
}

TEST_CASE("the epoch schedule derives its step count from the batch size") {
  auto s = make_setup(4);
  RunConfig cfg = s.cfg;
  cfg.epochs = 3;  // 4 images, batches of 2: 2 steps per epoch
  HoiModel<double> model(cfg, s.dc.grid_c, s.dc.num_verbs);
  auto result = train_model(model, s.prepared);
  REQUIRE(result.steps_run == 6);
  REQUIRE(result.log.size() == 6);
}

TEST_CASE("a divergent loss stops training with a step report") {
  auto s = make_setup();
  HoiModel<double> model(s.cfg, s.dc.grid_c, s.dc.num_verbs);
  auto& bias = model.params().get("align.out_sent_head.l2.b");
  for (auto& v : *bias.data) v = std::numeric_limits<double>::quiet_NaN();

  TrainOptions opts;
  opts.steps_override = 3;
  REQUIRE_THROWS_WITH(train_model(model, s.prepared, opts),
                      "evaluation error: training diverged: non-finite loss at step 1");
}

TEST_CASE("prepared images are frozen constants") {
  auto s = make_setup();
  auto t = make_setup();

  REQUIRE(s.prepared.size() == 4);
  for (std::size_t i = 0; i < s.prepared.size(); ++i) {
    const auto& a = s.prepared[i];
    const auto& b = t.prepared[i];
    REQUIRE(a.features == &s.ds.scenes[i].features);
    REQUIRE(a.annotations == &s.ds.scenes[i].annotations);
    REQUIRE((*a.detections.tokens.data == *b.detections.tokens.data));
    REQUIRE((a.detections.confidences == b.detections.confidences));
    REQUIRE_FALSE(a.detections.tokens.requires_grad);
    if (a.text.cls.defined()) {
      REQUIRE((*a.text.cls.data == *b.text.cls.data));
      REQUIRE_FALSE(a.text.cls.requires_grad);
      REQUIRE(a.text.cls.node == nullptr);
    }
  }
}

TEST_CASE("inference emits one scored record per pair and verb") {
  auto s = make_setup();
  HoiModel<double> model(s.cfg, s.dc.grid_c, s.dc.num_verbs);

  std::size_t expected = 0;
  for (const auto& img : s.prepared)
    expected += generate_pairs(img.detections.class_labels).size() * std::size_t(s.dc.num_verbs);

  auto dets = run_inference(model, s.prepared);
  REQUIRE(dets.size() == expected);
  REQUIRE_FALSE(dets.empty());

  for (const auto& d : dets) {
    REQUIRE(d.score > 0.0);
    REQUIRE(d.score < 1.0);
    REQUIRE(d.verb >= 0);
    REQUIRE(d.verb < s.dc.num_verbs);
    REQUIRE(d.object_class >= 0);
    REQUIRE(d.object_class <= s.dc.num_objects);
  }

  auto again = run_inference(model, s.prepared);
  REQUIRE(again.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    REQUIRE(again[i].score == dets[i].score);
    REQUIRE(again[i].image_id == dets[i].image_id);
    REQUIRE(again[i].verb == dets[i].verb);
  }
}
